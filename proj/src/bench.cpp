#include "fcndepth/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "fcndepth/error.hpp"

namespace fcndepth {

double percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw Error("percentile of an empty sample");
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

BenchReport summarize(std::string target, int warmup, std::vector<double> samples,
                      std::uint64_t macs) {
  if (samples.empty()) throw Error("benchmark produced no samples");
  std::sort(samples.begin(), samples.end());
  BenchReport r;
  r.target = std::move(target);
  r.warmup = warmup;
  r.iterations = static_cast<int>(samples.size());
  r.mean_s = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  r.min_s = samples.front();
  r.p50_s = percentile(samples, 0.50);
  r.p95_s = percentile(samples, 0.95);
  r.macs = macs;
  return r;
}

BenchReport run_benchmark(std::string target, const std::function<void()>& body, int warmup,
                          int iterations, std::uint64_t macs) {
  if (iterations < kMinBenchIterations)
    throw Error("benchmarks need at least " + std::to_string(kMinBenchIterations) +
                " iterations, got " + std::to_string(iterations));
  if (warmup < 0) throw Error("warmup count must be nonnegative");
  for (int i = 0; i < warmup; ++i) body();
  std::vector<double> samples;
  samples.reserve(static_cast<std::size_t>(iterations));
  for (int i = 0; i < iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    const auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  return summarize(std::move(target), warmup, std::move(samples), macs);
}

}  // namespace fcndepth
