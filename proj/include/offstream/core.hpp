#pragma once

// Core domain types shared by every module: jobs and their lifecycle, device
// and bus parameters, stage profiles, framework configuration and validation.

#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace offstream {

// All timestamps are integer nanoseconds. The virtual clock starts at zero;
// the wall clock is reported relative to framework construction. Integer
// arithmetic keeps virtual schedules bit-exact across independent
// implementations of the same timing contract.
using Duration = std::chrono::nanoseconds;

inline constexpr Duration usec(std::int64_t v) { return Duration{v * 1000}; }
inline constexpr Duration msec(std::int64_t v) { return Duration{v * 1000000}; }

enum class ClockMode { Virtual, Wall };
enum class AcquireMode { Blocking, Try };

// The five per-job stages. HostPrep covers the serial host work in front of
// the transfer (dispatch overhead, plus device buffer allocation when buffer
// reuse is disabled); Post is the host-side post-processing stage.
enum class Stage : int { HostPrep = 0, CopyIn = 1, Kernel = 2, CopyOut = 3, Post = 4 };
inline constexpr int kStageCount = 5;

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::HostPrep: return "host_prep";
    case Stage::CopyIn: return "copy_in";
    case Stage::Kernel: return "kernel";
    case Stage::CopyOut: return "copy_out";
    case Stage::Post: return "post";
  }
  return "?";
}

enum class JobState { Idle, Outstanding, CopyingIn, RunningKernel, CopyingOut, Done, Failed };

inline const char* to_string(JobState s) {
  switch (s) {
    case JobState::Idle: return "idle";
    case JobState::Outstanding: return "outstanding";
    case JobState::CopyingIn: return "running(copy_in)";
    case JobState::RunningKernel: return "running(kernel)";
    case JobState::CopyingOut: return "running(copy_out)";
    case JobState::Done: return "done";
    case JobState::Failed: return "failed";
  }
  return "?";
}

// Legal lifecycle edges. Running states may fail; terminal states return to
// Idle through the pool; a never-submitted job may be returned as-is.
inline constexpr bool transition_allowed(JobState from, JobState to) {
  switch (from) {
    case JobState::Idle:
      return to == JobState::Outstanding || to == JobState::Idle;
    case JobState::Outstanding:
      return to == JobState::CopyingIn;
    case JobState::CopyingIn:
      return to == JobState::RunningKernel || to == JobState::Failed;
    case JobState::RunningKernel:
      return to == JobState::CopyingOut || to == JobState::Failed;
    case JobState::CopyingOut:
      return to == JobState::Done || to == JobState::Failed;
    case JobState::Done:
    case JobState::Failed:
      return to == JobState::Idle;
  }
  return false;
}

enum class Errc {
  ZeroDevices,
  NonPositiveSize,
  PoolTooSmall,  // warning, not fatal
  AllocationFailure,
  PoolFinalized,
  FrameworkFinalized,
  InvalidState,
  SizeExceeded,
  UnknownJob,
  UnknownKernel,
  UnknownProfile,
  KernelFault,
  ConfigError,
  IoError,
};

inline const char* to_string(Errc c) {
  switch (c) {
    case Errc::ZeroDevices: return "ZeroDevices";
    case Errc::NonPositiveSize: return "NonPositiveSize";
    case Errc::PoolTooSmall: return "PoolTooSmall";
    case Errc::AllocationFailure: return "AllocationFailure";
    case Errc::PoolFinalized: return "PoolFinalized";
    case Errc::FrameworkFinalized: return "FrameworkFinalized";
    case Errc::InvalidState: return "InvalidState";
    case Errc::SizeExceeded: return "SizeExceeded";
    case Errc::UnknownJob: return "UnknownJob";
    case Errc::UnknownKernel: return "UnknownKernel";
    case Errc::UnknownProfile: return "UnknownProfile";
    case Errc::KernelFault: return "KernelFault";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
  }
  return "?";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

enum class FailureCode { None, KernelFault, AllocationFailure };

struct FailureInfo {
  FailureCode code = FailureCode::None;
  std::string message;
};

// ---------------------------------------------------------------------------
// Simulated hardware parameters.

struct DeviceSpec {
  int id = -1;                  // assigned by validation when < 0
  int copy_engines = 1;         // 1: a device's copy-in and copy-out serialize
  Duration alloc_cost = msec(4);  // per-buffer-pair allocation cost
  double alloc_cost_per_byte_ns = 0.0;
  std::size_t memory_capacity = std::size_t{512} << 20;

  Duration alloc_time(std::size_t bytes) const {
    return alloc_cost + Duration{std::llround(double(bytes) * alloc_cost_per_byte_ns)};
  }
};

struct BusSpec {
  int channels = 1;  // shared by all devices
  double bandwidth_bytes_per_s = 3.0 * double(std::size_t{1} << 30);
  Duration latency = usec(10);
};

// ---------------------------------------------------------------------------
// Stage profile: per-job stage durations at a given block size.

struct StageProfile {
  Duration alloc{};
  Duration copy_in{};
  Duration kernel{};
  Duration copy_out{};
  Duration post{};

  Duration total() const { return alloc + copy_in + kernel + copy_out + post; }

  std::array<double, kStageCount> fractions() const {
    const double t = double(total().count());
    if (t <= 0.0) return {0, 0, 0, 0, 0};
    return {double(alloc.count()) / t, double(copy_in.count()) / t,
            double(kernel.count()) / t, double(copy_out.count()) / t,
            double(post.count()) / t};
  }

  // Builds a profile from stage fractions anchored on an absolute kernel
  // duration. Fractions are ordered alloc, copy_in, kernel, copy_out, post
  // and must sum to 1 within 1e-9.
  static StageProfile from_fractions(const std::array<double, kStageCount>& f,
                                     Duration kernel_duration) {
    double sum = 0.0;
    for (double v : f) {
      if (v < 0.0) throw Error(Errc::ConfigError, "stage fraction must be non-negative");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw Error(Errc::ConfigError, "stage fractions must sum to 1");
    if (f[int(Stage::Kernel)] <= 0.0)
      throw Error(Errc::ConfigError, "kernel fraction must be positive");
    const double total = double(kernel_duration.count()) / f[int(Stage::Kernel)];
    auto part = [&](Stage s) { return Duration{std::llround(total * f[int(s)])}; };
    StageProfile p;
    p.alloc = part(Stage::HostPrep);
    p.copy_in = part(Stage::CopyIn);
    p.kernel = kernel_duration;
    p.copy_out = part(Stage::CopyOut);
    p.post = part(Stage::Post);
    return p;
  }
};

// ---------------------------------------------------------------------------
// Job: the unit of offload.

struct KernelSpec {
  std::string name = "dummy";
};

// Simulated device memory. Backed by host storage so kernels operate on real
// bytes; `device` records which device owns the buffer.
struct DeviceBuffer {
  int device = -1;
  std::vector<std::byte> bytes;

  bool bound() const { return device >= 0; }
  void reset() {
    device = -1;
    bytes.clear();
    bytes.shrink_to_fit();
  }
};

struct StageSpanTimes {
  Duration start{};
  Duration end{};
  bool valid = false;
};

struct StageTimes {
  std::array<StageSpanTimes, kStageCount> spans{};
  Duration submit{};
  Duration done{};

  void clear() { *this = StageTimes{}; }
};

class Framework;
struct Event;

struct Job {
  std::uint64_t id = 0;

  // Host transfer buffers; capacity fixed at pool init to the configured
  // maxima (they model pinned memory).
  std::vector<std::byte> h_input;
  std::vector<std::byte> h_output;
  DeviceBuffer d_input;
  DeviceBuffer d_output;
  std::size_t input_size = 0;
  std::size_t output_size = 0;

  KernelSpec kernel;
  std::function<void(Job&)> callback;
  void* user_data = nullptr;  // passed through untouched to the callback

  JobState state = JobState::Idle;
  FailureInfo failure;
  StageTimes times;

  // Managed by the framework.
  int device = -1;        // pinned device (reuse on) or dispatch assignment
  int pinned_device = -1; // fixed at pool init when buffer reuse is on
  bool in_pool = false;
  bool submitted = false;
  Framework* owner = nullptr;
  Event* current_event = nullptr;

  std::span<std::byte> input_span() { return {h_input.data(), input_size}; }
  std::span<std::byte> output_span() { return {h_output.data(), output_size}; }
};

// Observer invoked on every job state transition; test hook.
using TransitionHook = void (*)(const Job&, JobState, JobState);

inline std::atomic<TransitionHook>& transition_hook() {
  static std::atomic<TransitionHook> hook{nullptr};
  return hook;
}

inline void transition(Job& job, JobState to) {
  if (auto* h = transition_hook().load(std::memory_order_relaxed)) h(job, job.state, to);
  if (!transition_allowed(job.state, to))
    throw Error(Errc::InvalidState, std::string("illegal job transition ") +
                                        to_string(job.state) + " -> " + to_string(to));
  job.state = to;
}

// ---------------------------------------------------------------------------
// Framework configuration.

struct Features {
  bool buffer_reuse = true;
  bool overlap = true;
  int device_count_limit = 0;  // 0 = use all configured devices
  // Models DMA from non-pinned host memory: transfers pay an extra staging
  // copy of `unpinned_copy_penalty` x transfer time. Used by the baseline
  // ablation only.
  bool pinned_host = true;
  double unpinned_copy_penalty = 0.4;
};

struct FrameworkConfig {
  std::size_t max_input_size = std::size_t{1} << 20;
  std::size_t max_output_size = 64;
  std::size_t pool_size = 0;  // 0 = 4 x active devices
  std::vector<DeviceSpec> devices = {DeviceSpec{}};
  BusSpec bus;
  Features features;
  int pipeline_depth = 3;  // max in-flight jobs per device
  ClockMode clock_mode = ClockMode::Virtual;
  Duration framework_overhead_per_job = usec(70);
  int post_workers = 0;  // 0 = max(1, hardware threads - devices)

  // When set, stage durations come straight from the profile instead of the
  // parametric bus/kernel models. Used to reproduce measured stage mixes.
  std::optional<StageProfile> profile;
  Duration post_cost{};       // parametric-mode post duration
  Duration poll_interval{};   // wall masters; 0 = busy poll with yield
};

struct ConfigWarning {
  Errc code;
  std::string message;
};

struct ValidatedConfig {
  FrameworkConfig cfg;
  std::vector<ConfigWarning> warnings;
  int active_devices = 0;
  int post_workers = 1;
  std::size_t pool_size = 0;

  int effective_depth() const { return cfg.features.overlap ? cfg.pipeline_depth : 1; }
};

inline ValidatedConfig validate_config(const FrameworkConfig& in) {
  ValidatedConfig out;
  out.cfg = in;
  auto& cfg = out.cfg;

  if (cfg.devices.empty()) throw Error(Errc::ZeroDevices, "no devices configured");
  if (cfg.max_input_size == 0)
    throw Error(Errc::NonPositiveSize, "max_input_size must be positive");
  if (cfg.max_output_size == 0)
    throw Error(Errc::NonPositiveSize, "max_output_size must be positive");
  if (cfg.bus.bandwidth_bytes_per_s <= 0.0)
    throw Error(Errc::NonPositiveSize, "bus bandwidth must be positive");
  if (cfg.bus.channels < 1) throw Error(Errc::ConfigError, "bus channels must be >= 1");
  if (cfg.bus.latency < Duration::zero())
    throw Error(Errc::ConfigError, "bus latency must be non-negative");
  if (cfg.pipeline_depth < 1)
    throw Error(Errc::ConfigError, "pipeline_depth must be >= 1");
  if (cfg.framework_overhead_per_job < Duration::zero())
    throw Error(Errc::ConfigError, "framework overhead must be non-negative");
  if (cfg.features.unpinned_copy_penalty < 0.0)
    throw Error(Errc::ConfigError, "copy penalty must be non-negative");

  int limit = cfg.features.device_count_limit;
  out.active_devices = int(cfg.devices.size());
  if (limit > 0) out.active_devices = std::min(out.active_devices, limit);
  if (out.active_devices == 0) throw Error(Errc::ZeroDevices, "device count limit is zero");

  for (int i = 0; i < int(cfg.devices.size()); ++i) {
    auto& d = cfg.devices[i];
    if (d.id < 0) d.id = i;
    if (d.copy_engines != 1 && d.copy_engines != 2)
      throw Error(Errc::ConfigError, "copy_engines must be 1 or 2");
    if (d.alloc_cost < Duration::zero())
      throw Error(Errc::ConfigError, "alloc_cost must be non-negative");
  }

  out.pool_size = cfg.pool_size != 0 ? cfg.pool_size : std::size_t(4) * out.active_devices;

  out.post_workers = cfg.post_workers;
  if (out.post_workers <= 0) {
    int hw = int(std::thread::hardware_concurrency());
    out.post_workers = std::max(1, hw - out.active_devices);
  }

  if (cfg.profile) {
    const auto& p = *cfg.profile;
    if (p.alloc < Duration::zero() || p.copy_in < Duration::zero() ||
        p.kernel < Duration::zero() || p.copy_out < Duration::zero() ||
        p.post < Duration::zero())
      throw Error(Errc::ConfigError, "profile durations must be non-negative");
  }

  const std::size_t needed = std::size_t(cfg.pipeline_depth) * out.active_devices;
  if (out.pool_size < needed) {
    out.warnings.push_back({Errc::PoolTooSmall,
                            "pool_size " + std::to_string(out.pool_size) +
                                " < pipeline_depth x devices = " + std::to_string(needed) +
                                "; overlap cannot be sustained"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared reporting helpers.

// Steady-state throughput estimator: rate over the second half of the
// completion sequence, aligned down to a whole number of device rounds so the
// window spans full pipeline periods. Falls back to jobs/makespan for streams
// too short to exclude the fill phase.
inline double steady_throughput_jobs_per_s(const std::vector<Duration>& done_sorted,
                                           Duration first_submit, int devices) {
  const int n = int(done_sorted.size());
  if (n == 0) return 0.0;
  const Duration last = done_sorted.back();
  const int d = std::max(1, devices);
  const int m = (n / (2 * d)) * d;  // jobs measured in the steady window
  Duration window{};
  int jobs = 0;
  if (m <= 0) {
    window = last - first_submit;
    jobs = n;
  } else {
    const int w = n - m;  // completions skipped as pipeline fill
    window = last - done_sorted[w - 1];
    jobs = m;
  }
  if (window <= Duration::zero()) return 0.0;
  return double(jobs) * 1e9 / double(window.count());
}

}  // namespace offstream
