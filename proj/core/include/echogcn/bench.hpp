#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "echogcn/gcn.hpp"

namespace echogcn {

/// Timing protocol: untimed warm-up passes, then several timed runs of
/// single-image forward passes on random inputs.
struct BenchProtocol {
  int warmup_inputs = 1000;
  int test_runs = 10;
  int inputs_per_run = 100;

  /// Throws Errc::ConfigError unless all counts are >= 1.
  void validate() const;
};

struct BenchResult {
  std::vector<double> run_ms;  // per-inference mean of each run
  double mean_ms = 0;
  double sd_ms = 0;  // sample SD over runs
  std::size_t parameter_count = 0;
};

/// Times only the forward call; inputs are drawn from `seed` beforehand.
BenchResult bench_model(GCNModel<float>& model, const BenchProtocol& protocol, std::uint64_t seed = 0);

/// One table row: name, "mean ± sd" in ms, parameters in millions.
std::string format_bench_row(const std::string& name, const BenchResult& r);

}  // namespace echogcn
