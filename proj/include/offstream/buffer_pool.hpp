#pragma once

// Pre-allocated pool of job shells. Host buffers are allocated once at init
// (modeling pinned memory); with buffer reuse enabled, device buffers are
// pre-allocated too, round-robin across devices, and each shell stays pinned
// to its device. Shells recycle FIFO through the idle queue.

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <vector>

#include "offstream/core.hpp"
#include "offstream/device.hpp"

namespace offstream {

class BufferPool {
 public:
  struct Stats {
    std::uint64_t gets = 0;
    std::uint64_t puts = 0;
    std::uint64_t blocking_waits = 0;
    std::int64_t live_allocations = 0;
  };

  // Conservation counters: idle + held by app + held by framework == capacity.
  struct Accounting {
    std::size_t idle = 0;
    std::size_t app = 0;
    std::size_t framework = 0;
    std::size_t capacity = 0;
  };

  BufferPool(const ValidatedConfig& vc, const std::vector<DeviceHandle>& devices,
             SimPlatform& platform)
      : vc_(vc), platform_(platform) {
    const std::size_t cap = vc.pool_size;
    const bool reuse = vc.cfg.features.buffer_reuse;
    jobs_.reserve(cap);
    std::vector<Event*> charges;
    for (std::size_t i = 0; i < cap; ++i) {
      auto job = std::make_unique<Job>();
      job->h_input.resize(vc.cfg.max_input_size);
      job->h_output.resize(vc.cfg.max_output_size);
      job->in_pool = true;
      if (reuse) {
        const int dev = int(i % std::size_t(devices.size()));
        job->pinned_device = dev;
        if (!platform_.bind_pooled_buffers(*job, dev, vc.cfg.max_input_size,
                                           vc.cfg.max_output_size))
          throw Error(Errc::AllocationFailure,
                      "device " + std::to_string(dev) + " out of modeled memory at init");
        const auto cost = stage_costs(vc_, KernelSpec{}, vc.cfg.max_input_size,
                                      vc.cfg.max_output_size, dev)
                              .alloc;
        if (cost > Duration::zero())
          charges.push_back(platform_.charge_host_serial_async(cost));
      }
      idle_.push_back(job.get());
      jobs_.push_back(std::move(job));
    }
    for (Event* ev : charges) platform_.wait(ev);
  }

  std::size_t capacity() const { return jobs_.size(); }

  void stamp_owner(Framework* fw) {
    for (auto& j : jobs_) j->owner = fw;
  }

  Job* try_acquire() {
    std::lock_guard lk(mu_);
    if (finalized_) throw Error(Errc::PoolFinalized, "pool finalized");
    if (idle_.empty()) return nullptr;
    return take_front_locked();
  }

  Job* acquire(AcquireMode mode) {
    if (mode == AcquireMode::Try) return try_acquire();
    std::unique_lock lk(mu_);
    if (idle_.empty()) {
      ++stats_.blocking_waits;
      cv_.wait(lk, [this] { return finalized_ || !idle_.empty(); });
    }
    if (finalized_) throw Error(Errc::PoolFinalized, "pool finalized");
    return take_front_locked();
  }

  void release(Job* job) {
    if (!job) throw Error(Errc::InvalidState, "null job");
    std::lock_guard lk(mu_);
    if (job->in_pool) throw Error(Errc::InvalidState, "job already in the pool");
    if (job->state != JobState::Idle && job->state != JobState::Done &&
        job->state != JobState::Failed)
      throw Error(Errc::InvalidState,
                  std::string("cannot release a job in state ") + to_string(job->state));
    transition(*job, JobState::Idle);
    job->in_pool = true;
    idle_.push_back(job);
    ++stats_.puts;
    --held_app_;
    cv_.notify_one();
  }

  // Ownership notes from the scheduler, kept here so the conservation
  // equation can be audited in one place.
  void note_submitted(Job*) {
    std::lock_guard lk(mu_);
    --held_app_;
    ++held_framework_;
  }

  void note_delivered(Job*) {
    std::lock_guard lk(mu_);
    --held_framework_;
    ++held_app_;
  }

  Stats stats() {
    std::lock_guard lk(mu_);
    Stats s = stats_;
    s.live_allocations = platform_.live_device_allocations();
    return s;
  }

  Accounting accounting() {
    std::lock_guard lk(mu_);
    return {idle_.size(), held_app_, held_framework_, jobs_.size()};
  }

  // Stops handing out shells; releases still succeed so in-flight jobs can
  // come home during drain.
  void finalize_acquires() {
    std::lock_guard lk(mu_);
    finalized_ = true;
    cv_.notify_all();
  }

  void destroy_buffers() {
    std::lock_guard lk(mu_);
    for (auto& j : jobs_) platform_.free_pooled_buffers(*j);
  }

 private:
  Job* take_front_locked() {
    Job* job = idle_.front();
    idle_.pop_front();
    job->in_pool = false;
    job->id = next_id_++;
    job->input_size = 0;
    job->output_size = 0;
    job->kernel = KernelSpec{};
    job->callback = nullptr;
    job->user_data = nullptr;
    job->failure = FailureInfo{};
    job->times.clear();
    job->submitted = false;
    job->device = job->pinned_device;
    job->current_event = nullptr;
    ++stats_.gets;
    ++held_app_;
    return job;
  }

  const ValidatedConfig& vc_;
  SimPlatform& platform_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<Job>> jobs_;
  std::deque<Job*> idle_;
  std::uint64_t next_id_ = 1;
  std::size_t held_app_ = 0;
  std::size_t held_framework_ = 0;
  Stats stats_;
  bool finalized_ = false;
};

}  // namespace offstream
