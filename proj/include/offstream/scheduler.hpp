#pragma once

// The framework proper: public job API, the outstanding/running queues,
// per-device masters, round-robin dispatch with capacity skip, pipeline
// interleaving, and callback delivery.
//
// Concurrency: public operations are safe from any thread. In Wall mode one
// master thread drives each device. In Virtual mode there are no threads;
// masters are stepped cooperatively by the event loop that runs inside
// blocking calls (job_get, job_synch, finalize), which keeps virtual
// schedules deterministic and bit-exact against the reference model.
//
// Callbacks run on the master control flow (or inside the virtual event
// loop); they must be brief, must not block, and may call job_put,
// job_get(Try) and job_submit but not job_synch.

#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <vector>

#include "offstream/buffer_pool.hpp"
#include "offstream/core.hpp"
#include "offstream/device.hpp"

namespace offstream {

struct FinalStatus {
  JobState state = JobState::Done;
  FailureInfo failure;
  bool ok() const { return state == JobState::Done; }
};

struct JobRecord {
  std::uint64_t id = 0;
  int device = -1;
  Duration submit{};
  Duration done{};
  std::array<StageSpanTimes, kStageCount> spans{};
  JobState final_state = JobState::Done;
};

class Framework {
 public:
  explicit Framework(const FrameworkConfig& cfg)
      : vc_(validate_config(cfg)),
        devices_(enumerate_devices(vc_)),
        platform_(vc_),
        pool_(vc_, devices_, platform_),
        running_(devices_.size()) {
    pool_.stamp_owner(this);
    if (vc_.cfg.clock_mode == ClockMode::Wall) {
      masters_.reserve(devices_.size());
      for (std::size_t d = 0; d < devices_.size(); ++d)
        masters_.emplace_back([this, d] { master_loop(int(d)); });
    }
  }

  Framework(const Framework&) = delete;
  Framework& operator=(const Framework&) = delete;

  ~Framework() { finalize(); }

  const ValidatedConfig& config() const { return vc_; }
  SimPlatform& platform() { return platform_; }
  BufferPool& pool() { return pool_; }
  Duration now() { return platform_.now(); }

  Job* job_get(AcquireMode mode = AcquireMode::Blocking) {
    if (vc_.cfg.clock_mode == ClockMode::Wall) {
      if (mode == AcquireMode::Try) return pool_.try_acquire();
      return pool_.acquire(AcquireMode::Blocking);
    }
    std::unique_lock lk(mu_);
    for (;;) {
      if (Job* j = pool_.try_acquire()) return j;
      if (mode == AcquireMode::Try) return nullptr;
      if (!step_locked()) cv_.wait(lk);
    }
  }

  void job_put(Job* job) {
    check_owned(job);
    pool_.release(job);
    std::lock_guard lk(mu_);
    cv_.notify_all();
  }

  void job_submit(Job* job) {
    check_owned(job);
    std::unique_lock lk(mu_);
    if (finalized_) throw Error(Errc::FrameworkFinalized, "framework finalized");
    if (job->state != JobState::Idle)
      throw Error(Errc::InvalidState,
                  std::string("job_submit requires an Idle job, got ") + to_string(job->state));
    if (job->input_size == 0 || job->input_size > vc_.cfg.max_input_size)
      throw Error(Errc::SizeExceeded,
                  "input_size " + std::to_string(job->input_size) + " outside (0, " +
                      std::to_string(vc_.cfg.max_input_size) + "]");
    if (job->output_size > vc_.cfg.max_output_size)
      throw Error(Errc::SizeExceeded,
                  "output_size " + std::to_string(job->output_size) + " > max " +
                      std::to_string(vc_.cfg.max_output_size));
    if (!known_kernel(job->kernel.name))
      throw Error(Errc::UnknownKernel, "unknown kernel '" + job->kernel.name + "'");

    transition(*job, JobState::Outstanding);
    job->submitted = true;
    job->times.submit = platform_.now();
    if (!any_submit_) {
      first_submit_ = job->times.submit;
      any_submit_ = true;
    }
    ++submitted_count_;
    pool_.note_submitted(job);
    job->device = vc_.cfg.features.buffer_reuse ? job->pinned_device : -1;
    outstanding_.push_back(job);
    try_admit_locked();
    cv_.notify_all();
  }

  bool job_query(Job* job) {
    check_owned(job);
    std::lock_guard lk(mu_);
    if (completed_.count(job->id)) return true;
    if (job->submitted) return false;
    throw Error(Errc::UnknownJob, "job was never submitted");
  }

  FinalStatus job_synch(Job* job) {
    check_owned(job);
    std::unique_lock lk(mu_);
    const std::uint64_t id = job->id;
    if (!completed_.count(id) && !job->submitted)
      throw Error(Errc::UnknownJob, "job was never submitted");
    for (;;) {
      if (auto it = completed_.find(id); it != completed_.end()) return it->second;
      if (vc_.cfg.clock_mode == ClockMode::Virtual) {
        if (!step_locked()) cv_.wait(lk);
      } else {
        cv_.wait(lk);
      }
    }
  }

  // Drains every submitted job (callbacks included), rejects new work, stops
  // the masters and frees the pool's device buffers. Idempotent.
  void finalize() {
    std::unique_lock lk(mu_);
    if (finalize_done_) return;
    finalized_ = true;
    pool_.finalize_acquires();
    cv_.notify_all();
    while (completed_count_ < submitted_count_) {
      if (vc_.cfg.clock_mode == ClockMode::Virtual) {
        if (!step_locked()) cv_.wait(lk);
      } else {
        cv_.wait(lk);
      }
    }
    finalize_done_ = true;
    stop_.store(true, std::memory_order_release);
    lk.unlock();
    for (auto& t : masters_) t.join();
    masters_.clear();
    pool_.destroy_buffers();
  }

  // --- metrics -------------------------------------------------------------

  Duration makespan() {
    std::lock_guard lk(mu_);
    if (!any_submit_) return Duration::zero();
    return last_done_ - first_submit_;
  }

  Duration first_submit() {
    std::lock_guard lk(mu_);
    return first_submit_;
  }

  double throughput_jobs_per_s() {
    std::lock_guard lk(mu_);
    auto done = done_times_;
    std::sort(done.begin(), done.end());
    return steady_throughput_jobs_per_s(done, first_submit_, int(devices_.size()));
  }

  std::vector<JobRecord> job_records() {
    std::lock_guard lk(mu_);
    return records_;
  }

 private:
  void check_owned(Job* job) const {
    if (!job || job->owner != this)
      throw Error(Errc::UnknownJob, "job does not belong to this framework");
  }

  bool step_locked() {
    Event* ev = platform_.step();
    if (!ev) return false;
    if (ev->job) handle_event_locked(*ev->job, *ev);
    return true;
  }

  void handle_event_locked(Job& j, Event& ev) {
    j.times.spans[int(ev.kind)] = {ev.start, ev.end, true};
    j.current_event = nullptr;
    if (ev.phase.load(std::memory_order_acquire) == 3) {
      fail_job_locked(j, ev.error);
      return;
    }
    switch (ev.kind) {
      case Stage::HostPrep:
        j.current_event = platform_.copy_in_async(j.device, j);
        break;
      case Stage::CopyIn:
        transition(j, JobState::RunningKernel);
        j.current_event = platform_.launch_kernel_async(j.device, j);
        break;
      case Stage::Kernel:
        transition(j, JobState::CopyingOut);
        if (j.output_size > 0) {
          j.current_event = platform_.copy_out_async(j.device, j);
        } else {
          platform_.free_transient(j);
          issue_post_or_done_locked(j);
        }
        break;
      case Stage::CopyOut:
        platform_.free_transient(j);
        issue_post_or_done_locked(j);
        break;
      case Stage::Post:
        complete_job_locked(j);
        break;
    }
  }

  void issue_post_or_done_locked(Job& j) {
    const auto costs = stage_costs(vc_, j.kernel, j.input_size, j.output_size, j.device);
    if (costs.post > Duration::zero())
      j.current_event = platform_.post_async(j.device, j);
    else
      complete_job_locked(j);
  }

  void complete_job_locked(Job& j) {
    transition(j, JobState::Done);
    j.times.done = platform_.now();
    finish_locked(j, FinalStatus{JobState::Done, {}});
  }

  void fail_job_locked(Job& j, const FailureInfo& why) {
    j.failure = why;
    transition(j, JobState::Failed);
    j.times.done = platform_.now();
    platform_.free_transient(j);
    finish_locked(j, FinalStatus{JobState::Failed, why});
  }

  void finish_locked(Job& j, FinalStatus status) {
    auto& rs = running_[std::size_t(j.device)];
    rs.erase(std::find(rs.begin(), rs.end(), &j));
    ++completed_count_;
    completed_[j.id] = status;
    done_times_.push_back(j.times.done);
    if (j.times.done > last_done_) last_done_ = j.times.done;
    records_.push_back(JobRecord{j.id, j.device, j.times.submit, j.times.done, j.times.spans,
                                 j.state});
    pool_.note_delivered(&j);
    if (j.callback) j.callback(j);
    cv_.notify_all();
    try_admit_locked();
  }

  // Dispatch. With buffer reuse the shell pin decides the device (round-robin
  // handed out at job_get), so the queue drains FIFO per device. Without
  // reuse the head job goes to the next device in rotation that has a free
  // pipeline slot.
  void try_admit_locked() {
    if (outstanding_.empty()) return;
    const std::size_t depth = std::size_t(vc_.effective_depth());
    if (vc_.cfg.features.buffer_reuse) {
      for (auto it = outstanding_.begin(); it != outstanding_.end();) {
        Job* j = *it;
        if (running_[std::size_t(j->pinned_device)].size() < depth) {
          it = outstanding_.erase(it);
          admit_locked(*j, j->pinned_device);
        } else {
          ++it;
        }
      }
    } else {
      while (!outstanding_.empty()) {
        const int d = next_free_device_locked(depth);
        if (d < 0) break;
        Job* j = outstanding_.front();
        outstanding_.pop_front();
        admit_locked(*j, d);
      }
    }
  }

  int next_free_device_locked(std::size_t depth) {
    const int n = int(devices_.size());
    for (int k = 0; k < n; ++k) {
      const int d = (rotation_ + k) % n;
      if (running_[std::size_t(d)].size() < depth) {
        rotation_ = (d + 1) % n;
        return d;
      }
    }
    return -1;
  }

  void admit_locked(Job& j, int device) {
    j.device = device;
    running_[std::size_t(device)].push_back(&j);
    transition(j, JobState::CopyingIn);
    const auto costs = stage_costs(vc_, j.kernel, j.input_size, j.output_size, device);
    if (costs.host_prep > Duration::zero()) {
      j.current_event = platform_.host_prep_async(device, j);
    } else {
      if (!platform_.allocate_transient_now(j, device)) {
        fail_job_locked(j, j.failure);
        return;
      }
      j.current_event = platform_.copy_in_async(device, j);
    }
  }

  void master_loop(int device) {
    std::vector<std::pair<Job*, Event*>> due;
    for (;;) {
      platform_.reap();
      due.clear();
      {
        std::lock_guard lk(mu_);
        for (Job* j : running_[std::size_t(device)]) {
          Event* ev = j->current_event;
          if (ev && ev->phase.load(std::memory_order_acquire) >= 2) due.emplace_back(j, ev);
        }
        for (auto& [j, ev] : due) handle_event_locked(*j, *ev);
        try_admit_locked();
        if (stop_.load(std::memory_order_acquire) && completed_count_ >= submitted_count_)
          return;
      }
      if (vc_.cfg.poll_interval > Duration::zero())
        std::this_thread::sleep_for(vc_.cfg.poll_interval);
      else
        platform_.wait_next_completion();
    }
  }

  const ValidatedConfig vc_;
  std::vector<DeviceHandle> devices_;
  SimPlatform platform_;
  BufferPool pool_;

  mutable std::recursive_mutex mu_;
  std::condition_variable_any cv_;
  std::deque<Job*> outstanding_;
  std::vector<std::vector<Job*>> running_;
  int rotation_ = 0;
  bool finalized_ = false;
  bool finalize_done_ = false;
  std::uint64_t submitted_count_ = 0;
  std::uint64_t completed_count_ = 0;
  std::unordered_map<std::uint64_t, FinalStatus> completed_;
  std::vector<JobRecord> records_;
  std::vector<Duration> done_times_;
  Duration first_submit_{};
  Duration last_done_{};
  bool any_submit_ = false;
  std::vector<std::thread> masters_;
  std::atomic<bool> stop_{false};
};

}  // namespace offstream
