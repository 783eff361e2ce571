#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "offstream/bench.hpp"

using namespace offstream;

TEST_CASE("csv header and row counts") {
  std::ostringstream os;
  bench::emit_csv({}, os);
  CHECK(os.str() == std::string(bench::kCsvHeader) + "\n");

  std::vector<bench::ExperimentResult> rows(3);
  rows[0].experiment = "a";
  rows[1].experiment = "b";
  rows[2].experiment = "c";
  std::ostringstream os3;
  bench::emit_csv(rows, os3);
  std::size_t lines = 0;
  for (char c : os3.str())
    if (c == '\n') ++lines;
  CHECK(lines == 4);
}

TEST_CASE("csv round-trips exactly") {
  bench::ExperimentResult r;
  r.experiment = "sweep-size:+reuse";
  r.clock = ClockMode::Wall;
  r.devices = 2;
  r.channels = 1;
  r.reuse = true;
  r.overlap = false;
  r.profile = "large";
  r.block_size_bytes = 1048576;
  r.stream_len = 10;
  r.reps = 31;
  r.makespan_us_mean = 207366.66000000001;
  r.makespan_us_ci95 = 12.345678901234567;
  r.throughput_jobs_s = 48.223;
  r.speedup_vs_baseline = 1.7780555;
  r.oracle_makespan_us = 207366.66;
  r.deviation_pct = 0.0001;
  std::ostringstream os;
  bench::emit_csv({r}, os);
  std::istringstream is(os.str());
  const auto parsed = bench::parse_csv(is);
  REQUIRE(parsed.size() == 1);
  const auto& p = parsed[0];
  CHECK(p.experiment == r.experiment);
  CHECK(p.clock == r.clock);
  CHECK(p.devices == r.devices);
  CHECK(p.reuse == r.reuse);
  CHECK(p.overlap == r.overlap);
  CHECK(p.profile == r.profile);
  CHECK(p.block_size_bytes == r.block_size_bytes);
  CHECK(p.stream_len == r.stream_len);
  CHECK(p.reps == r.reps);
  CHECK(p.makespan_us_mean == r.makespan_us_mean);
  CHECK(p.makespan_us_ci95 == r.makespan_us_ci95);
  CHECK(p.throughput_jobs_s == r.throughput_jobs_s);
  CHECK(p.speedup_vs_baseline == r.speedup_vs_baseline);
  CHECK(p.oracle_makespan_us == r.oracle_makespan_us);
  CHECK(p.deviation_pct == r.deviation_pct);
}

TEST_CASE("confidence interval uses the student t quantile") {
  CHECK(bench::t_quantile_975(4) == Catch::Approx(2.776));
  CHECK(bench::t_quantile_975(29) == Catch::Approx(2.045));
  CHECK(bench::t_quantile_975(60) == Catch::Approx(2.0).margin(0.002));
  const std::vector<double> v{1, 2, 3, 4, 5};
  // sd = sqrt(2.5), t(4) = 2.776 -> 2.776 * sqrt(2.5) / sqrt(5)
  CHECK(bench::ci95_halfwidth(v) == Catch::Approx(2.776 * std::sqrt(2.5) / std::sqrt(5.0)));
  CHECK(bench::ci95_halfwidth({1.0}) == 0.0);
}

TEST_CASE("virtual overhead is exactly the configured constant at every size") {
  bench::BenchOptions opt;
  opt.clock = ClockMode::Virtual;
  const std::vector<std::size_t> sizes{1024, 65536, 163840, std::size_t{1} << 20};
  const auto rep = bench::run_overhead(opt, sizes);
  REQUIRE(rep.points.size() == sizes.size());
  for (const auto& p : rep.points) {
    CAPTURE(p.size);
    CHECK(p.overhead_us == 70.0);
  }
  // At ~160 KiB the per-job total is around 200 us, so the layer accounts
  // for roughly a third of it.
  const auto& mid = rep.points[2];
  CHECK(mid.overhead_fraction * 100.0 > 30.0);
  CHECK(mid.overhead_fraction * 100.0 < 40.0);
  // Virtual rows deviate from the model by exactly zero.
  for (const auto& row : rep.rows) CHECK(row.deviation_pct == 0.0);
}

TEST_CASE("speedup sweep: virtual rows match the model and clear the reuse bar") {
  bench::BenchOptions opt;
  opt.stream = 10;
  const auto rows = bench::run_speedup_sweep(opt, {"small"});
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.deviation_pct == 0.0);
    CHECK(r.reps == 1);
  }
  CHECK(rows[0].speedup_vs_baseline == 1.0);
  CHECK(rows[1].speedup_vs_baseline > 6.0);   // +reuse
  CHECK(rows[2].speedup_vs_baseline > 8.0);   // +reuse+overlap
  CHECK(rows[3].speedup_vs_baseline > 14.0);  // +reuse+overlap+dual
}

TEST_CASE("stream sweep is deterministic") {
  bench::BenchOptions opt;
  auto run = [&] {
    std::ostringstream os;
    bench::emit_csv(bench::run_stream_sweep(opt, "large", {1, 2, 3, 10}), os);
    return os.str();
  };
  CHECK(run() == run());
}

TEST_CASE("emit_csv surfaces write failures with the path") {
  try {
    bench::emit_csv({}, "/nonexistent-dir/x.csv");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::IoError);
    CHECK(std::string(e.what()).find("/nonexistent-dir/x.csv") != std::string::npos);
  }
}
