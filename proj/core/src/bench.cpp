#include "echogcn/bench.hpp"

#include <chrono>
#include <cstdio>

#include "echogcn/error.hpp"
#include "echogcn/metrics.hpp"
#include "echogcn/phantom.hpp"

namespace echogcn {

void BenchProtocol::validate() const {
  if (warmup_inputs < 1 || test_runs < 1 || inputs_per_run < 1) {
    throw Error(Errc::ConfigError, "bench", "protocol counts must be >= 1");
  }
}

BenchResult bench_model(GCNModel<float>& model, const BenchProtocol& protocol, std::uint64_t seed) {
  protocol.validate();
  const int s = model.config().encoder.input_size;
  // A small pool of random inputs reused cyclically keeps memory flat.
  constexpr int kPool = 16;
  Rng rng(seed);
  std::vector<Tensor<float>> inputs;
  for (int i = 0; i < kPool; ++i) {
    Tensor<float> x({1, 1, s, s});
    for (float& v : x.data) v = static_cast<float>(rng.uniform());
    inputs.push_back(std::move(x));
  }
  // Written after every pass so the forward calls cannot be optimized away.
  [[maybe_unused]] volatile float sink = 0.0f;
  for (int i = 0; i < protocol.warmup_inputs; ++i) sink = model.forward(inputs[i % kPool], false).inner.data[0];

  BenchResult r;
  int k = 0;
  for (int run = 0; run < protocol.test_runs; ++run) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < protocol.inputs_per_run; ++i) sink = model.forward(inputs[k++ % kPool], false).inner.data[0];
    const auto t1 = std::chrono::steady_clock::now();
    r.run_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count() / protocol.inputs_per_run);
  }
  const MeanSd m = mean_sd(r.run_ms);
  r.mean_ms = m.mean;
  r.sd_ms = m.sd;
  r.parameter_count = model.parameter_count();
  return r;
}

std::string format_bench_row(const std::string& name, const BenchResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %8.3f ± %.3f ms  %.3f M params", name.c_str(), r.mean_ms, r.sd_ms,
                static_cast<double>(r.parameter_count) / 1e6);
  return buf;
}

}  // namespace echogcn
