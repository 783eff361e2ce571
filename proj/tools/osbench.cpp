// Benchmark CLI: reproduces the overhead and speedup experiments against the
// simulated accelerator backend, emits CSV, and prints reference-model
// timelines. See README for the column schema and examples.

#include <CLI11.hpp>
#include <iostream>

#include "offstream/offstream.hpp"

namespace {

using namespace offstream;

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  return out;
}

struct GlobalOpts {
  int devices = 2;
  int channels = 1;
  std::string reuse = "on";
  std::string overlap = "on";
  std::string profile = "small";
  int stream = 10;
  int reps = 1;
  std::string clock = "virtual";
  std::string out;
  std::uint64_t seed = 42;
};

bench::BenchOptions to_bench_options(const GlobalOpts& g) {
  bench::BenchOptions o;
  o.devices = g.devices;
  o.channels = g.channels;
  o.clock = g.clock == "wall" ? ClockMode::Wall : ClockMode::Virtual;
  o.reps = g.reps;
  o.seed = g.seed;
  o.stream = g.stream;
  o.profile_name = g.profile;
  return o;
}

StageProfile profile_from_name(const std::string& name) {
  if (name == "small" || name == "large") return builtin_profile(name);
  return load_profile(name);
}

void write_rows(const std::vector<bench::ExperimentResult>& rows, const std::string& out) {
  if (out.empty())
    bench::emit_csv(rows, std::cout);
  else
    bench::emit_csv(rows, out);
}

}  // namespace

int main(int argc, char** argv) {
  GlobalOpts g;
  CLI::App app{"stream-offload framework benchmark harness"};
  app.fallthrough();  // global flags may follow the subcommand
  app.set_config("--config", "", "config file (ini); command-line flags win");
  app.add_option("--devices", g.devices, "simulated devices available")->capture_default_str();
  app.add_option("--channels", g.channels, "shared bus channels")->capture_default_str();
  app.add_option("--reuse", g.reuse, "buffer reuse on|off")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  app.add_option("--overlap", g.overlap, "transfer/compute overlap on|off")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  app.add_option("--profile", g.profile, "small|large|FILE stage profile")
      ->capture_default_str();
  app.add_option("--stream", g.stream, "jobs per stream")->capture_default_str();
  app.add_option("--reps", g.reps, "repetitions (wall mode enforces >= 30)")
      ->capture_default_str();
  app.add_option("--clock", g.clock, "virtual|wall")
      ->check(CLI::IsMember({"virtual", "wall"}))
      ->capture_default_str();
  app.add_option("--out", g.out, "output CSV path (default: stdout)");
  app.add_option("--seed", g.seed, "input data seed")->capture_default_str();
  app.require_subcommand(0, 1);

  auto* c_overhead = app.add_subcommand("overhead", "per-job framework overhead vs data size");
  std::vector<std::size_t> sizes{1024, 4096, 16384, 65536, 163840, 262144, 1u << 20};
  c_overhead->add_option("--sizes", sizes, "data sizes in bytes");

  auto* c_sweep_size = app.add_subcommand(
      "sweep-size", "feature-ladder speedups for the small and large profiles");

  auto* c_sweep_stream =
      app.add_subcommand("sweep-stream", "feature-ladder speedups vs stream length");
  std::vector<int> streams{1, 2, 3, 5, 10, 18, 30, 100};
  c_sweep_stream->add_option("--streams", streams, "stream lengths");

  auto* c_oracle = app.add_subcommand("oracle", "print the predicted timeline as CSV");
  auto* c_demo = app.add_subcommand("demo", "end-to-end hashing stream with verification");
  std::size_t demo_block = 65536;
  c_demo->add_option("--block", demo_block, "bytes per job")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto opts = to_bench_options(g);

    if (*c_overhead) {
      auto rep = bench::run_overhead(opts, sizes);
      for (const auto& p : rep.points) {
        std::fprintf(stderr, "size=%zu framework_us=%.3f direct_us=%.3f overhead_us=%.3f (%.1f%%)\n",
                     p.size, p.framework_us, p.direct_us, p.overhead_us,
                     p.overhead_fraction * 100.0);
      }
      write_rows(rep.rows, g.out);
      return 0;
    }

    if (*c_sweep_size) {
      std::vector<std::string> profiles;
      if (g.profile == "small" || g.profile == "large")
        profiles = {"small", "large"};
      else
        profiles = {g.profile};
      write_rows(bench::run_speedup_sweep(opts, profiles), g.out);
      return 0;
    }

    if (*c_sweep_stream) {
      write_rows(bench::run_stream_sweep(opts, g.profile, streams), g.out);
      return 0;
    }

    if (*c_oracle) {
      FrameworkConfig cfg;
      cfg.devices.assign(std::size_t(std::max(1, g.devices)), DeviceSpec{});
      cfg.bus.channels = g.channels;
      cfg.features.buffer_reuse = g.reuse == "on";
      cfg.features.overlap = g.overlap == "on";
      cfg.profile = profile_from_name(g.profile);
      cfg.post_workers = opts.post_workers;
      const auto tl = model::des_simulate(*cfg.profile, g.stream, validate_config(cfg));
      if (g.out.empty())
        model::write_timeline_csv(tl, std::cout);
      else
        model::write_timeline_csv(tl, g.out);
      std::fprintf(stderr, "makespan_us=%.3f throughput_jobs_s=%.1f\n",
                   double(tl.makespan.count()) / 1000.0, tl.throughput_jobs_s);
      return 0;
    }

    if (*c_demo) {
      FrameworkConfig cfg;
      cfg.devices.assign(std::size_t(std::max(1, g.devices)), DeviceSpec{});
      cfg.bus.channels = g.channels;
      cfg.features.buffer_reuse = g.reuse == "on";
      cfg.features.overlap = g.overlap == "on";
      cfg.clock_mode = g.clock == "wall" ? ClockMode::Wall : ClockMode::Virtual;
      cfg.max_input_size = demo_block;
      cfg.max_output_size = 64;
      cfg.post_workers = opts.post_workers;

      bench::StreamOptions so;
      so.cfg = cfg;
      so.kernel = KernelSpec{"sha1"};
      so.data_bytes = demo_block;
      so.output_size = 20;
      so.stream_len = g.stream;
      so.seed = g.seed;
      const auto res = bench::run_stream_once(so);

      int bad = 0;
      for (int i = 0; i < g.stream; ++i) {
        std::vector<std::byte> input(demo_block);
        bench::fill_pattern(input, g.seed + std::uint64_t(i) * 0x10001);
        if (sha1_digest(input) != res.digests[std::size_t(i)]) ++bad;
      }
      std::printf("jobs=%d block=%zu makespan_us=%.3f throughput_jobs_s=%.1f digests=%s\n",
                  g.stream, demo_block, double(res.makespan.count()) / 1000.0,
                  res.throughput_jobs_s, bad == 0 ? "ok" : "MISMATCH");
      if (bad != 0) {
        std::fprintf(stderr, "error: {\"code\":\"KernelFault\",\"message\":\"%d digest mismatches\"}\n",
                     bad);
        return 3;
      }
      return 0;
    }

    std::cout << app.help();
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: {\"code\":\"%s\",\"message\":\"%s\"}\n", to_string(e.code()),
                 json_escape(e.what()).c_str());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: {\"code\":\"Internal\",\"message\":\"%s\"}\n",
                 json_escape(e.what()).c_str());
    return 1;
  }
}
