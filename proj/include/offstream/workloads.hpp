#pragma once

// Benchmark workloads: kernel implementations, modeled kernel durations, and
// the built-in stage profiles used by the experiments. Also resolves a job's
// effective per-stage costs from a validated config.

#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "offstream/core.hpp"
#include "offstream/sha1.hpp"

namespace offstream {

inline Sha1::Digest sha1_digest(std::span<const std::byte> data) {
  return Sha1::digest(data);
}

// Kernel bodies run on host workers against the (simulated) device buffers so
// outputs are real data regardless of clock mode. Returns false on fault.
// Known kernels: "dummy" (no-op), "sha1" (20-byte digest into d_output),
// "fault" (always fails; diagnostics/testing).
using KernelBody = std::function<bool(Job&)>;

inline bool known_kernel(const std::string& name) {
  return name == "dummy" || name == "sha1" || name == "fault";
}

inline KernelBody kernel_body(const KernelSpec& spec) {
  if (spec.name == "dummy") {
    return [](Job&) { return true; };
  }
  if (spec.name == "sha1") {
    return [](Job& j) {
      if (j.output_size < 20) {
        j.failure = {FailureCode::KernelFault, "sha1 needs output_size >= 20"};
        return false;
      }
      const auto d = Sha1::digest({j.d_input.bytes.data(), j.input_size});
      std::copy(d.begin(), d.end(), j.d_output.bytes.begin());
      return true;
    };
  }
  if (spec.name == "fault") {
    return [](Job& j) {
      j.failure = {FailureCode::KernelFault, "injected kernel fault"};
      return false;
    };
  }
  throw Error(Errc::UnknownKernel, "unknown kernel '" + spec.name + "'");
}

// Modeled kernel time. The sha1 model interpolates linearly from 0.5 ms at a
// 1 KiB block to 10 ms at 1 MiB, clamped below, extrapolated above.
inline Duration kernel_duration(const KernelSpec& spec, std::size_t size) {
  if (spec.name != "sha1") return Duration::zero();
  constexpr double lo_size = 1024.0, hi_size = double(std::size_t{1} << 20);
  constexpr double lo_ns = 500000.0, hi_ns = 10000000.0;
  if (double(size) <= lo_size) return Duration{std::int64_t(lo_ns)};
  const double t = lo_ns + (double(size) - lo_size) * (hi_ns - lo_ns) / (hi_size - lo_size);
  return Duration{std::llround(t)};
}

// Built-in stage mixes. The alloc share (85% small / 38% large) and the
// kernel times (0.5 ms / 10 ms) are measurement-derived anchors; the split of
// the remaining time across copy and post stages is a documented default and
// can be overridden with a profile file.
inline StageProfile builtin_profile(const std::string& name) {
  if (name == "small")
    return StageProfile::from_fractions({0.85, 0.02, 0.10, 0.01, 0.02}, usec(500));
  if (name == "large")
    return StageProfile::from_fractions({0.38, 0.22, 0.30, 0.04, 0.06}, msec(10));
  throw Error(Errc::UnknownProfile, "unknown profile '" + name + "'");
}

inline std::size_t profile_block_size(const std::string& name) {
  if (name == "small") return 1024;
  if (name == "large") return std::size_t{1} << 20;
  return 0;
}

namespace detail {

inline std::optional<Duration> parse_duration(const std::string& text) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  std::string unit = text.substr(pos);
  while (!unit.empty() && std::isspace(static_cast<unsigned char>(unit.front())))
    unit.erase(unit.begin());
  double scale = 0.0;
  if (unit == "ns") scale = 1.0;
  else if (unit == "us") scale = 1e3;
  else if (unit == "ms") scale = 1e6;
  else if (unit == "s") scale = 1e9;
  else return std::nullopt;
  return Duration{std::llround(v * scale)};
}

}  // namespace detail

// Profile override file. One `stage = value` pair per line; '#' comments.
// Stages: alloc, copy_in, kernel, copy_out, post. Two forms:
//   durations: every stage given with a unit suffix (ns|us|ms|s)
//   fractions: kernel given as a duration, the other four as bare fractions
//              of total time (kernel's fraction is the remainder)
inline StageProfile parse_profile(std::istream& in, const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::string key, value;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = true;
      for (char c : line)
        if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
      if (blank) continue;
      throw Error(Errc::ConfigError,
                  origin + ":" + std::to_string(lineno) + ": expected 'stage = value'");
    }
    auto trim = [](std::string s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
      return s;
    };
    key = trim(line.substr(0, eq));
    value = trim(line.substr(eq + 1));
    if (!kv.emplace(key, value).second)
      throw Error(Errc::ConfigError, origin + ": duplicate stage '" + key + "'");
  }

  static const char* stages[] = {"alloc", "copy_in", "kernel", "copy_out", "post"};
  for (const auto& [k, v] : kv) {
    bool ok = false;
    for (auto* s : stages) ok = ok || k == s;
    if (!ok) throw Error(Errc::ConfigError, origin + ": unknown stage '" + k + "'");
  }
  auto get = [&](const char* s) -> const std::string& {
    auto it = kv.find(s);
    if (it == kv.end())
      throw Error(Errc::ConfigError, origin + ": missing stage '" + std::string(s) + "'");
    return it->second;
  };

  const auto kernel_dur = detail::parse_duration(get("kernel"));
  if (!kernel_dur)
    throw Error(Errc::ConfigError, origin + ": kernel must be a duration with unit");

  bool any_fraction = false, any_duration = false;
  for (auto* s : {"alloc", "copy_in", "copy_out", "post"}) {
    if (detail::parse_duration(get(s)))
      any_duration = true;
    else
      any_fraction = true;
  }
  if (any_fraction && any_duration)
    throw Error(Errc::ConfigError, origin + ": mixing fractions and durations");

  StageProfile p;
  p.kernel = *kernel_dur;
  if (any_duration || kv.size() < 5) {
    p.alloc = *detail::parse_duration(get("alloc"));
    p.copy_in = *detail::parse_duration(get("copy_in"));
    p.copy_out = *detail::parse_duration(get("copy_out"));
    p.post = *detail::parse_duration(get("post"));
    return p;
  }

  std::array<double, kStageCount> f{};
  double rest = 0.0;
  auto frac = [&](const char* s) {
    try {
      const double v = std::stod(get(s));
      if (v < 0.0 || v >= 1.0)
        throw Error(Errc::ConfigError, origin + ": fraction out of range for '" + s + "'");
      rest += v;
      return v;
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(Errc::ConfigError, origin + ": bad fraction for '" + std::string(s) + "'");
    }
  };
  f[int(Stage::HostPrep)] = frac("alloc");
  f[int(Stage::CopyIn)] = frac("copy_in");
  f[int(Stage::CopyOut)] = frac("copy_out");
  f[int(Stage::Post)] = frac("post");
  if (rest >= 1.0)
    throw Error(Errc::ConfigError, origin + ": fractions leave no room for the kernel");
  f[int(Stage::Kernel)] = 1.0 - rest;
  return StageProfile::from_fractions(f, *kernel_dur);
}

inline StageProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open profile file '" + path + "'");
  return parse_profile(in, path);
}

// ---------------------------------------------------------------------------
// Effective per-job stage costs under a validated config.

struct StageCosts {
  Duration host_prep{};  // dispatch overhead (+ alloc when reuse is off)
  Duration copy_in{};
  Duration kernel{};
  Duration copy_out{};
  Duration post{};
  Duration alloc{};  // the alloc component alone
};

inline Duration transfer_time(const BusSpec& bus, std::size_t bytes) {
  if (bytes == 0) return Duration::zero();
  return bus.latency +
         Duration{std::llround(double(bytes) * 1e9 / bus.bandwidth_bytes_per_s)};
}

inline Duration apply_unpinned_penalty(Duration base, const Features& feats) {
  if (feats.pinned_host) return base;
  return base + Duration{std::llround(double(base.count()) * feats.unpinned_copy_penalty)};
}

inline StageCosts stage_costs(const ValidatedConfig& vc, const KernelSpec& kernel,
                              std::size_t input_size, std::size_t output_size,
                              int device_index) {
  const auto& cfg = vc.cfg;
  StageCosts c;
  if (cfg.profile) {
    const auto& p = *cfg.profile;
    c.alloc = p.alloc;
    c.copy_in = p.copy_in;
    c.kernel = p.kernel;
    c.copy_out = output_size > 0 ? p.copy_out : Duration::zero();
    c.post = p.post;
  } else {
    const auto& dev = cfg.devices[std::size_t(device_index)];
    c.alloc = dev.alloc_time(input_size + output_size);
    c.copy_in = transfer_time(cfg.bus, input_size);
    c.kernel = kernel_duration(kernel, input_size);
    c.copy_out = transfer_time(cfg.bus, output_size);
    c.post = cfg.post_cost;
  }
  c.copy_in = apply_unpinned_penalty(c.copy_in, cfg.features);
  c.copy_out = apply_unpinned_penalty(c.copy_out, cfg.features);
  c.host_prep = cfg.framework_overhead_per_job +
                (cfg.features.buffer_reuse ? Duration::zero() : c.alloc);
  return c;
}

}  // namespace offstream
