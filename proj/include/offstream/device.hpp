#pragma once

// Simulated accelerator backend: per-device compute and copy engines, the
// shared transfer bus, host-side serial and post-processing lanes, pollable
// completion events, and the virtual/wall clock engine behind them.
//
// Timing contract (the reference model in model.hpp implements the same
// rules independently):
//   * Every stage request receives a global issue sequence number.
//   * A request occupies one unit of each resource it names for its modeled
//     duration. Waiting requests are served in (request time, sequence)
//     order; a request whose resources are not all free is skipped so a
//     later request may run (resources are never idle while work is ready).
//   * Completions are delivered in (end time, sequence) order. Virtual time
//     only advances inside step().
//   * Ties at equal virtual instants are therefore broken by issue order.
//
// Resource layout: host serial lane (1 unit), bus (channel count), post
// workers, then per device one compute engine and its copy engine(s). A
// transfer holds a bus channel and the device's copy engine simultaneously.

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>
#include <vector>

#include "offstream/core.hpp"
#include "offstream/workloads.hpp"

namespace offstream {

struct DeviceHandle {
  int index = 0;
  DeviceSpec spec;
};

inline std::vector<DeviceHandle> enumerate_devices(const ValidatedConfig& vc) {
  std::vector<DeviceHandle> out;
  out.reserve(std::size_t(vc.active_devices));
  for (int i = 0; i < vc.active_devices; ++i)
    out.push_back({i, vc.cfg.devices[std::size_t(i)]});
  return out;
}

enum class EventStatus { Pending, Complete, Error };

struct Event {
  std::uint64_t seq = 0;
  Stage kind{};
  int device = -1;
  Job* job = nullptr;
  Duration issue_time{};
  Duration start{};
  Duration end{};
  FailureInfo error;

  // Engine internals, guarded by the platform mutex.
  Duration duration{};
  std::array<int, 2> units{-1, -1};
  std::function<bool(Job&)> body;  // empty body = timing only
  bool queued_body = false;        // run on a worker (wall mode) instead of at grant
  bool work_done = true;
  bool failed = false;
  std::atomic<int> phase{0};  // 0 waiting, 1 running, 2 complete, 3 error
};

class SimPlatform {
 public:
  explicit SimPlatform(const ValidatedConfig& vc) : vc_(vc) {
    const int d = vc_.active_devices;
    res_.push_back({1, 0});                    // kHostSerial
    res_.push_back({vc_.cfg.bus.channels, 0}); // kBus
    res_.push_back({vc_.post_workers, 0});     // kPost
    for (int i = 0; i < d; ++i) {
      res_.push_back({1, 0});                                        // compute i
      res_.push_back({vc_.cfg.devices[std::size_t(i)].copy_engines, 0});  // copy engines i
    }
    mem_used_.assign(std::size_t(d), 0);
    if (vc_.cfg.clock_mode == ClockMode::Wall) {
      anchor_ = std::chrono::steady_clock::now();
      const int workers = std::max(1, d);
      for (int i = 0; i < workers; ++i)
        workers_.emplace_back([this] { worker_loop(); });
    }
  }

  SimPlatform(const SimPlatform&) = delete;
  SimPlatform& operator=(const SimPlatform&) = delete;

  ~SimPlatform() {
    {
      std::lock_guard lk(mu_);
      stopping_ = true;
    }
    tasks_cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  const ValidatedConfig& config() const { return vc_; }
  ClockMode mode() const { return vc_.cfg.clock_mode; }

  Duration now() {
    if (mode() == ClockMode::Virtual) {
      std::lock_guard lk(mu_);
      return now_;
    }
    return wall_now();
  }

  // --- asynchronous stage operations (the backend contract) ---------------

  Event* copy_in_async(int device, Job& job) {
    const auto costs = stage_costs(vc_, job.kernel, job.input_size, job.output_size, device);
    return request(Stage::CopyIn, device, &job, costs.copy_in,
                   {kBus, copy_engine_unit(device)}, [](Job& j) {
                     std::copy_n(j.h_input.begin(), j.input_size, j.d_input.bytes.begin());
                     return true;
                   });
  }

  Event* launch_kernel_async(int device, Job& job) {
    const auto costs = stage_costs(vc_, job.kernel, job.input_size, job.output_size, device);
    return request(Stage::Kernel, device, &job, costs.kernel, {compute_unit(device), -1},
                   kernel_body(job.kernel), /*queued=*/true);
  }

  Event* copy_out_async(int device, Job& job) {
    const auto costs = stage_costs(vc_, job.kernel, job.input_size, job.output_size, device);
    return request(Stage::CopyOut, device, &job, costs.copy_out,
                   {kBus, copy_engine_unit(device)}, [](Job& j) {
                     std::copy_n(j.d_output.bytes.begin(), j.output_size, j.h_output.begin());
                     return true;
                   });
  }

  // Host-side lanes used by the scheduler: serial dispatch work in front of
  // copy-in (plus transient device allocation when reuse is off) and the
  // post-processing stage.
  Event* host_prep_async(int device, Job& job) {
    const auto costs = stage_costs(vc_, job.kernel, job.input_size, job.output_size, device);
    std::function<bool(Job&)> body;
    if (!vc_.cfg.features.buffer_reuse) {
      body = [this, device](Job& j) { return allocate_transient_locked(j, device); };
    }
    return request(Stage::HostPrep, device, &job, costs.host_prep, {kHostSerial, -1},
                   std::move(body));
  }

  Event* post_async(int device, Job& job) {
    const auto costs = stage_costs(vc_, job.kernel, job.input_size, job.output_size, device);
    return request(Stage::Post, device, &job, costs.post, {kPost, -1}, {});
  }

  // Serial host charge with no job attached (pool pre-allocation).
  Event* charge_host_serial_async(Duration d) {
    return request(Stage::HostPrep, -1, nullptr, d, {kHostSerial, -1}, {});
  }

  // Non-blocking completion check. Never advances virtual time.
  EventStatus event_poll(Event* ev) {
    if (mode() == ClockMode::Wall) reap();
    switch (ev->phase.load(std::memory_order_acquire)) {
      case 2: return EventStatus::Complete;
      case 3: return EventStatus::Error;
      default: return EventStatus::Pending;
    }
  }

  // Busy-wait for one event. Only valid while no other event's completion
  // needs handling (pool init, direct backend use).
  void wait(Event* ev) {
    while (event_poll(ev) == EventStatus::Pending) {
      if (mode() == ClockMode::Virtual) {
        if (!step()) break;
      } else {
        wait_next_completion();
      }
    }
  }

  // --- virtual engine ------------------------------------------------------

  // Advances the virtual clock to the earliest pending completion, releases
  // its resources and returns it. Returns nullptr when nothing is in flight.
  Event* step() {
    std::lock_guard lk(mu_);
    if (active_.empty()) return nullptr;
    auto best = active_.begin();
    for (auto it = std::next(active_.begin()); it != active_.end(); ++it) {
      if ((*it)->end < (*best)->end ||
          ((*it)->end == (*best)->end && (*it)->seq < (*best)->seq))
        best = it;
    }
    Event* ev = *best;
    active_.erase(best);
    now_ = ev->end;
    release_units_locked(ev);
    ev->phase.store(ev->failed ? 3 : 2, std::memory_order_release);
    grant_scan_locked(now_);
    return ev;
  }

  bool idle() {
    std::lock_guard lk(mu_);
    return active_.empty() && waiting_.empty();
  }

  // --- wall engine ---------------------------------------------------------

  // Releases every due completion and hands freed resources to waiters.
  void reap() {
    std::lock_guard lk(mu_);
    const Duration n = wall_now();
    bool released = false;
    for (auto it = active_.begin(); it != active_.end();) {
      Event* ev = *it;
      if (ev->work_done && ev->end <= n) {
        release_units_locked(ev);
        ev->phase.store(ev->failed ? 3 : 2, std::memory_order_release);
        it = active_.erase(it);
        released = true;
      } else {
        ++it;
      }
    }
    if (released) grant_scan_locked(n);
  }

  // Blocks until the next in-flight completion is imminent (or engine state
  // changes). Sleeps through most of the modeled interval on a timed wait,
  // then spins the final stretch so completion timestamps land close to
  // their deadlines even on a loaded host.
  void wait_next_completion() {
    constexpr Duration spin_margin = std::chrono::microseconds(500);
    Duration deadline = Duration::max();
    {
      std::unique_lock lk(mu_);
      for (Event* ev : active_)
        if (ev->end < deadline) deadline = ev->end;
      if (deadline == Duration::max()) {
        poll_cv_.wait_for(lk, std::chrono::milliseconds(1));
        return;
      }
      const auto tp = anchor_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                    deadline - spin_margin);
      if (std::chrono::steady_clock::now() < tp) {
        // A notify means new work was granted or finished; recompute upstream.
        if (poll_cv_.wait_until(lk, tp) == std::cv_status::no_timeout) return;
      }
    }
    if (wall_now() >= deadline) {
      std::this_thread::yield();
      return;
    }
    while (wall_now() < deadline) {
      // tight spin across the last stretch
    }
  }

  // --- modeled device memory ----------------------------------------------

  bool bind_pooled_buffers(Job& job, int device, std::size_t in_cap, std::size_t out_cap) {
    std::lock_guard lk(mu_);
    if (!reserve_locked(device, in_cap + out_cap)) return false;
    job.d_input = {device, std::vector<std::byte>(in_cap)};
    job.d_output = {device, std::vector<std::byte>(out_cap)};
    alloc_calls_ += 2;
    live_allocs_ += 2;
    return true;
  }

  void free_pooled_buffers(Job& job) {
    std::lock_guard lk(mu_);
    free_bound_locked(job);
  }

  // Immediate transient allocation for the zero-cost host-prep edge case
  // (reuse off, no modeled host work before copy-in).
  bool allocate_transient_now(Job& job, int device) {
    if (vc_.cfg.features.buffer_reuse) return true;
    std::lock_guard lk(mu_);
    if (job.d_input.bound()) return true;
    return allocate_transient_locked(job, device);
  }

  // Frees per-job transient buffers (reuse-off mode). Safe to call when none
  // are bound.
  void free_transient(Job& job) {
    if (vc_.cfg.features.buffer_reuse) return;
    std::lock_guard lk(mu_);
    free_bound_locked(job);
  }

  std::uint64_t device_alloc_calls() {
    std::lock_guard lk(mu_);
    return alloc_calls_;
  }

  std::int64_t live_device_allocations() {
    std::lock_guard lk(mu_);
    return live_allocs_;
  }

 private:
  static constexpr int kHostSerial = 0;
  static constexpr int kBus = 1;
  static constexpr int kPost = 2;
  int compute_unit(int device) const { return 3 + 2 * device; }
  int copy_engine_unit(int device) const { return 4 + 2 * device; }

  struct Res {
    int capacity;
    int used;
  };

  Duration wall_now() const {
    return std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - anchor_);
  }

  Event* request(Stage kind, int device, Job* job, Duration dur, std::array<int, 2> units,
                 std::function<bool(Job&)> body, bool queued = false) {
    std::unique_lock lk(mu_);
    const Duration n = mode() == ClockMode::Virtual ? now_ : wall_now();
    events_.emplace_back();
    Event* ev = &events_.back();
    ev->seq = seq_++;
    ev->kind = kind;
    ev->device = device;
    ev->job = job;
    ev->issue_time = n;
    ev->duration = dur;
    ev->units = units;
    ev->body = std::move(body);
    ev->queued_body = queued && mode() == ClockMode::Wall;
    waiting_.push_back(ev);
    grant_scan_locked(n);
    return ev;
  }

  bool units_free_locked(const Event* ev) const {
    for (int u : ev->units)
      if (u >= 0 && res_[std::size_t(u)].used >= res_[std::size_t(u)].capacity) return false;
    return true;
  }

  void take_units_locked(Event* ev) {
    for (int u : ev->units)
      if (u >= 0) ++res_[std::size_t(u)].used;
  }

  void release_units_locked(Event* ev) {
    for (int u : ev->units)
      if (u >= 0) --res_[std::size_t(u)].used;
  }

  void grant_scan_locked(Duration n) {
    bool granted = false;
    for (auto it = waiting_.begin(); it != waiting_.end();) {
      Event* ev = *it;
      if (!units_free_locked(ev)) {
        ++it;
        continue;
      }
      take_units_locked(ev);
      ev->start = n;
      ev->end = n + ev->duration;
      ev->phase.store(1, std::memory_order_release);
      if (ev->body) {
        if (ev->queued_body) {
          ev->work_done = false;
          tasks_.push_back(ev);
          tasks_cv_.notify_one();
        } else {
          // Inline bodies run under the engine lock and may touch the memory
          // accounting; queued bodies must not.
          if (!ev->body(*ev->job)) {
            ev->failed = true;
            ev->error = ev->job->failure;
          }
        }
      }
      active_.push_back(ev);
      it = waiting_.erase(it);
      granted = true;
    }
    if (granted && !workers_.empty()) poll_cv_.notify_all();
  }

  bool reserve_locked(int device, std::size_t bytes) {
    auto& used = mem_used_[std::size_t(device)];
    if (used + bytes > vc_.cfg.devices[std::size_t(device)].memory_capacity) return false;
    used += bytes;
    return true;
  }

  bool allocate_transient_locked(Job& j, int device) {
    const std::size_t bytes = j.input_size + j.output_size;
    if (!reserve_locked(device, bytes)) {
      j.failure = {FailureCode::AllocationFailure,
                   "device " + std::to_string(device) + " out of modeled memory"};
      return false;
    }
    j.d_input = {device, std::vector<std::byte>(j.input_size)};
    j.d_output = {device, std::vector<std::byte>(j.output_size)};
    alloc_calls_ += 2;
    live_allocs_ += 2;
    return true;
  }

  void free_bound_locked(Job& job) {
    if (!job.d_input.bound() && !job.d_output.bound()) return;
    const int device = job.d_input.bound() ? job.d_input.device : job.d_output.device;
    mem_used_[std::size_t(device)] -= job.d_input.bytes.size() + job.d_output.bytes.size();
    live_allocs_ -= 2;
    job.d_input.reset();
    job.d_output.reset();
  }

  void worker_loop() {
    for (;;) {
      Event* ev = nullptr;
      {
        std::unique_lock lk(mu_);
        tasks_cv_.wait(lk, [this] { return stopping_ || !tasks_.empty(); });
        if (stopping_ && tasks_.empty()) return;
        ev = tasks_.front();
        tasks_.pop_front();
      }
      const bool ok = ev->body(*ev->job);
      std::lock_guard lk(mu_);
      ev->work_done = true;
      if (!ok) {
        ev->failed = true;
        ev->error = ev->job->failure;
      }
      // Real execution longer than the modeled duration stands as-is; the
      // model pads, never truncates.
      const Duration n = wall_now();
      if (n > ev->end) ev->end = n;
      poll_cv_.notify_all();
    }
  }

  const ValidatedConfig vc_;
  std::mutex mu_;
  Duration now_{};
  std::chrono::steady_clock::time_point anchor_{};
  std::uint64_t seq_ = 0;
  std::deque<Event> events_;
  std::vector<Event*> waiting_;  // append order == (issue time, seq) order
  std::vector<Event*> active_;
  std::vector<Res> res_;
  std::vector<std::size_t> mem_used_;
  std::uint64_t alloc_calls_ = 0;
  std::int64_t live_allocs_ = 0;

  std::vector<std::thread> workers_;
  std::deque<Event*> tasks_;
  std::condition_variable tasks_cv_;
  std::condition_variable poll_cv_;
  bool stopping_ = false;
};

}  // namespace offstream
