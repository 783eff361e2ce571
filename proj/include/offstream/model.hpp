#pragma once

// Reference timing model: an independent discrete-event simulation of the
// framework's documented timing contract, plus closed-form steady-state
// predictions. Deliberately shares no scheduling code with the runtime —
// the contract below is the only coupling — so the two implementations can
// check each other.
//
// Contract (mirrors device.hpp):
//   * Integer-nanosecond time; requests carry global issue sequence numbers.
//   * Stage chain per job: host-prep (dispatch overhead, plus allocation when
//     buffer reuse is off; skipped when zero) -> copy-in -> kernel ->
//     copy-out (present iff the profile's copy-out is nonzero) -> post
//     (skipped when zero).
//   * Resources: one serial host lane; the bus (channel count) shared by all
//     devices; per device one compute engine and its copy engine(s), where a
//     transfer holds a bus channel and the copy engine together; a pool of
//     post workers. Waiters are served in (request time, sequence) order,
//     skipping requests whose resources are busy.
//   * Completions are processed in (end time, sequence) order. Handling a
//     completion releases its units, grants waiters, then issues the job's
//     next stage; a finished job returns its shell to the idle queue, after
//     which queued jobs are dispatched and the application submits further
//     jobs greedily (zero host time).
//   * Dispatch: with buffer reuse the shell pin (round-robin at init, FIFO
//     recycling) fixes the device and the queue drains FIFO per device;
//     without reuse the queue head goes to the next device in rotation with
//     a free pipeline slot. Overlap off limits each device to one in-flight
//     job.
//   * Pool pre-allocation charges one serial host-lane interval per shell
//     before the stream starts (buffer reuse on only).

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "offstream/core.hpp"

namespace offstream::model {

struct StageSpan {
  Stage stage{};
  Duration start{};
  Duration end{};
  bool operator==(const StageSpan&) const = default;
};

struct JobTimeline {
  std::uint64_t id = 0;
  int device = -1;
  Duration submit{};
  Duration done{};
  std::vector<StageSpan> spans;
  bool operator==(const JobTimeline&) const = default;
};

struct InitSpan {
  int shell = 0;
  int device = -1;
  Duration start{};
  Duration end{};
};

struct Timeline {
  std::vector<JobTimeline> jobs;
  std::vector<InitSpan> init_spans;
  Duration init_end{};
  Duration first_submit{};
  Duration makespan{};
  double throughput_jobs_s = 0.0;
};

namespace detail {

inline Duration effective_copy(Duration base, const Features& f) {
  if (f.pinned_host) return base;
  return base + Duration{std::llround(double(base.count()) * f.unpinned_copy_penalty)};
}

}  // namespace detail

inline Timeline des_simulate(const StageProfile& profile, int n_jobs,
                             const ValidatedConfig& vc) {
  if (n_jobs < 1) throw Error(Errc::ConfigError, "n_jobs must be >= 1");
  const auto& cfg = vc.cfg;
  const int devices = vc.active_devices;
  const int depth = vc.effective_depth();
  const int shells = int(vc.pool_size);
  const bool reuse = cfg.features.buffer_reuse;

  const std::int64_t hp =
      (cfg.framework_overhead_per_job + (reuse ? Duration::zero() : profile.alloc)).count();
  const std::int64_t ci = detail::effective_copy(profile.copy_in, cfg.features).count();
  const std::int64_t co = detail::effective_copy(profile.copy_out, cfg.features).count();
  const std::int64_t kr = profile.kernel.count();
  const std::int64_t po = profile.post.count();

  // Resource units: 0 host serial, 1 bus, 2 post workers, then per device
  // compute (3+2d) and copy engines (4+2d).
  std::vector<int> cap{1, cfg.bus.channels, vc.post_workers};
  for (int d = 0; d < devices; ++d) {
    cap.push_back(1);
    cap.push_back(cfg.devices[std::size_t(d)].copy_engines);
  }
  std::vector<int> used(cap.size(), 0);
  const auto bus_of = [](int) { return 1; };
  const auto comp_of = [](int d) { return 3 + 2 * d; };
  const auto ceng_of = [](int d) { return 4 + 2 * d; };

  struct Step {
    Stage stage;
    std::int64_t dur;
    int ua, ub;  // required units, -1 = none
  };
  const auto path_for = [&](int device) {
    std::vector<Step> path;
    if (hp > 0) path.push_back({Stage::HostPrep, hp, 0, -1});
    path.push_back({Stage::CopyIn, ci, bus_of(device), ceng_of(device)});
    path.push_back({Stage::Kernel, kr, comp_of(device), -1});
    if (profile.copy_out.count() > 0) path.push_back({Stage::CopyOut, co, bus_of(device), ceng_of(device)});
    if (po > 0) path.push_back({Stage::Post, po, 2, -1});
    return path;
  };

  struct Req {
    std::uint64_t seq;
    std::int64_t issue;
    std::int64_t start = 0;
    std::int64_t end = 0;
    int job;
    int step;
  };

  struct JobSt {
    int device = -1;
    int shell = -1;
    int next_step = 0;
    std::vector<Step> path;
    JobTimeline tl;
  };

  Timeline out;
  std::int64_t now = 0;
  std::uint64_t seq = 0;

  // Pool pre-allocation charge (serial host lane, one interval per shell).
  std::vector<int> pin(std::size_t(shells), -1);
  std::vector<int> idle;
  for (int s = 0; s < shells; ++s) {
    if (reuse) pin[std::size_t(s)] = s % devices;
    idle.push_back(s);
  }
  if (reuse && profile.alloc.count() > 0) {
    for (int s = 0; s < shells; ++s) {
      out.init_spans.push_back({s, pin[std::size_t(s)], Duration{now}, Duration{now + profile.alloc.count()}});
      now += profile.alloc.count();
    }
  }
  out.init_end = Duration{now};

  std::vector<JobSt> jobs;
  jobs.resize(std::size_t(n_jobs));
  std::vector<int> outstanding;
  std::vector<int> running(std::size_t(devices), 0);
  std::vector<Req> waiting;  // append order == (issue, seq) order
  std::vector<Req> active;
  int rotation = 0;
  int next_submit = 0;
  int completed = 0;
  std::size_t idle_head = 0;  // idle is consumed from the front, FIFO

  const auto grant_scan = [&]() {
    for (std::size_t i = 0; i < waiting.size();) {
      Req& r = waiting[i];
      const Step& st = jobs[std::size_t(r.job)].path[std::size_t(r.step)];
      const bool free_a = st.ua < 0 || used[std::size_t(st.ua)] < cap[std::size_t(st.ua)];
      const bool free_b = st.ub < 0 || used[std::size_t(st.ub)] < cap[std::size_t(st.ub)];
      if (free_a && free_b) {
        if (st.ua >= 0) ++used[std::size_t(st.ua)];
        if (st.ub >= 0) ++used[std::size_t(st.ub)];
        r.start = now;
        r.end = now + st.dur;
        active.push_back(r);
        waiting.erase(waiting.begin() + std::ptrdiff_t(i));
      } else {
        ++i;
      }
    }
  };

  const auto issue = [&](int job_idx) {
    JobSt& j = jobs[std::size_t(job_idx)];
    waiting.push_back(Req{seq++, now, 0, 0, job_idx, j.next_step});
    grant_scan();
  };

  const auto admit = [&](int job_idx, int device) {
    JobSt& j = jobs[std::size_t(job_idx)];
    j.device = device;
    j.tl.device = device;
    j.path = path_for(device);
    ++running[std::size_t(device)];
    issue(job_idx);
  };

  const auto try_admit = [&]() {
    if (reuse) {
      for (std::size_t i = 0; i < outstanding.size();) {
        const int job_idx = outstanding[i];
        const int d = pin[std::size_t(jobs[std::size_t(job_idx)].shell)];
        if (running[std::size_t(d)] < depth) {
          outstanding.erase(outstanding.begin() + std::ptrdiff_t(i));
          admit(job_idx, d);
        } else {
          ++i;
        }
      }
    } else {
      while (!outstanding.empty()) {
        int chosen = -1;
        for (int k = 0; k < devices; ++k) {
          const int d = (rotation + k) % devices;
          if (running[std::size_t(d)] < depth) {
            chosen = d;
            break;
          }
        }
        if (chosen < 0) break;
        rotation = (chosen + 1) % devices;
        const int job_idx = outstanding.front();
        outstanding.erase(outstanding.begin());
        admit(job_idx, chosen);
      }
    }
  };

  const auto submit_ready = [&]() {
    while (next_submit < n_jobs && idle_head < idle.size()) {
      const int shell = idle[idle_head++];
      const int job_idx = next_submit++;
      JobSt& j = jobs[std::size_t(job_idx)];
      j.shell = shell;
      j.tl.id = std::uint64_t(job_idx + 1);
      j.tl.submit = Duration{now};
      outstanding.push_back(job_idx);
      try_admit();
    }
  };

  submit_ready();

  std::vector<Duration> done_times;
  while (!active.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < active.size(); ++i) {
      if (active[i].end < active[best].end ||
          (active[i].end == active[best].end && active[i].seq < active[best].seq))
        best = i;
    }
    const Req r = active[best];
    active.erase(active.begin() + std::ptrdiff_t(best));
    now = r.end;
    JobSt& j = jobs[std::size_t(r.job)];
    const Step& st = j.path[std::size_t(r.step)];
    if (st.ua >= 0) --used[std::size_t(st.ua)];
    if (st.ub >= 0) --used[std::size_t(st.ub)];
    grant_scan();

    j.tl.spans.push_back({st.stage, Duration{r.start}, Duration{r.end}});
    ++j.next_step;
    if (j.next_step < int(j.path.size())) {
      issue(r.job);
      continue;
    }
    // Job finished: free the slot, return the shell (the application's
    // callback releases it immediately), dispatch queued jobs, then let the
    // application submit as long as shells are free.
    j.tl.done = Duration{now};
    done_times.push_back(j.tl.done);
    ++completed;
    --running[std::size_t(j.device)];
    idle.push_back(j.shell);
    try_admit();
    submit_ready();
  }

  out.jobs.reserve(jobs.size());
  for (auto& j : jobs) out.jobs.push_back(std::move(j.tl));
  out.first_submit = out.jobs.front().submit;
  Duration last{};
  for (const auto& j : out.jobs)
    if (j.done > last) last = j.done;
  out.makespan = last - out.first_submit;
  std::sort(done_times.begin(), done_times.end());
  out.throughput_jobs_s = steady_throughput_jobs_per_s(done_times, out.first_submit, devices);
  return out;
}

// Closed-form asymptotic per-job period in a saturated pipeline: the
// bottleneck among bus, per-device copy engines, compute, post workers and
// the serial host lane.
inline Duration steady_state_period(const StageProfile& profile, const ValidatedConfig& vc) {
  const auto& cfg = vc.cfg;
  const bool reuse = cfg.features.buffer_reuse;
  const double ci = double(detail::effective_copy(profile.copy_in, cfg.features).count());
  const double co = double(detail::effective_copy(profile.copy_out, cfg.features).count());
  const double hp = double(cfg.framework_overhead_per_job.count()) +
                    (reuse ? 0.0 : double(profile.alloc.count()));
  const int devices = vc.active_devices;

  double period = hp;
  period = std::max(period, (ci + co) / double(cfg.bus.channels));
  double engine = 0.0;
  for (int d = 0; d < devices; ++d) {
    const double w =
        cfg.devices[std::size_t(d)].copy_engines == 1 ? ci + co : std::max(ci, co);
    engine = std::max(engine, w);
  }
  period = std::max(period, engine / double(devices));
  period = std::max(period, double(profile.kernel.count()) / double(devices));
  period = std::max(period, double(profile.post.count()) / double(vc.post_workers));
  return Duration{std::llround(period)};
}

inline double predicted_speedup(const StageProfile& profile, const ValidatedConfig& enabled,
                                const ValidatedConfig& baseline, int n_jobs) {
  const auto base = des_simulate(profile, n_jobs, baseline);
  const auto on = des_simulate(profile, n_jobs, enabled);
  return double(base.makespan.count()) / double(on.makespan.count());
}

inline void write_timeline_csv(const Timeline& tl, std::ostream& os) {
  os << "job_id,device_id,stage,start_us,end_us\n";
  char buf[160];
  const auto us = [](Duration d) { return double(d.count()) / 1000.0; };
  for (const auto& s : tl.init_spans) {
    std::snprintf(buf, sizeof buf, "0,%d,pool_alloc,%.3f,%.3f\n", s.device, us(s.start),
                  us(s.end));
    os << buf;
  }
  for (const auto& j : tl.jobs) {
    for (const auto& s : j.spans) {
      std::snprintf(buf, sizeof buf, "%llu,%d,%s,%.3f,%.3f\n",
                    static_cast<unsigned long long>(j.id), j.device, to_string(s.stage),
                    us(s.start), us(s.end));
      os << buf;
    }
  }
}

inline void write_timeline_csv(const Timeline& tl, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::IoError, "cannot write '" + path + "'");
  write_timeline_csv(tl, os);
}

}  // namespace offstream::model
