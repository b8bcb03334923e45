#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace fcndepth {

inline constexpr int kMinBenchIterations = 10;

/// Wall-clock timings of one benchmark target, in seconds.
struct BenchReport {
  std::string target;
  int warmup = 0;
  int iterations = 0;
  double mean_s = 0.0;
  double min_s = 0.0;
  double p50_s = 0.0;
  double p95_s = 0.0;
  std::uint64_t macs = 0;
};

/// Nearest-rank percentile of an ascending sample, p in (0, 1].
double percentile(const std::vector<double>& sorted, double p);

/// Summarises raw per-iteration timings.
BenchReport summarize(std::string target, int warmup, std::vector<double> samples,
                      std::uint64_t macs);

/// Runs `body` warmup + iterations times and times the last `iterations` runs.
/// Throws fcndepth::Error when iterations < kMinBenchIterations.
BenchReport run_benchmark(std::string target, const std::function<void()>& body, int warmup,
                          int iterations, std::uint64_t macs);

}  // namespace fcndepth
