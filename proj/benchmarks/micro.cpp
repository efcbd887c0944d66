#include <benchmark/benchmark.h>

#include "echogcn/anatomy.hpp"
#include "echogcn/gcn.hpp"
#include "echogcn/metrics.hpp"
#include "echogcn/phantom.hpp"
#include "echogcn/raster.hpp"

using namespace echogcn;

namespace {

const Phantom& phantom() {
  static const Phantom ph = generate_phantom(42);
  return ph;
}

void BM_GeneratePhantom(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_phantom(seed++));
}
BENCHMARK(BM_GeneratePhantom);

void BM_ExtractKeypoints(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(extract_keypoints(phantom().mask));
}
BENCHMARK(BM_ExtractKeypoints);

void BM_Rasterize(benchmark::State& state) {
  const KeypointSet k = extract_keypoints(phantom().mask);
  for (auto _ : state) benchmark::DoNotOptimize(rasterize_keypoints(k, 256, 256));
}
BENCHMARK(BM_Rasterize);

void BM_CheckMask(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(check_mask(phantom().mask));
}
BENCHMARK(BM_CheckMask);

void BM_EvaluateMasks(benchmark::State& state) {
  const LabelMask other = generate_phantom(43).mask;
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_masks(phantom().mask, other, {0.3, 0.3}));
}
BENCHMARK(BM_EvaluateMasks);

// Arg: decoder variant index.
void BM_Forward(benchmark::State& state) {
  ModelConfig cfg;
  cfg.decoder = DecoderConfig::variant(DecoderConfig::variant_names()[static_cast<std::size_t>(state.range(0))]);
  GCNModel<float> model(cfg);
  model.init(1);
  const Image& img = phantom().image;
  const Tensor<float> x = images_to_tensor<float>({&img}, cfg.encoder.input_size);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, false));
  state.SetLabel(DecoderConfig::variant_names()[static_cast<std::size_t>(state.range(0))]);
}
BENCHMARK(BM_Forward)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

// Arg: batch size.
void BM_TrainStep(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  GCNModel<float> model{ModelConfig{}};
  model.init(1);
  std::vector<const Image*> imgs(static_cast<std::size_t>(batch), &phantom().image);
  std::vector<Target> targets(static_cast<std::size_t>(batch), Target::from(extract_keypoints(phantom().mask)));
  const Tensor<float> x = images_to_tensor<float>(imgs, 256);
  for (auto _ : state) {
    const RingPair<float> out = model.forward(x, true);
    RingPair<float> grad;
    benchmark::DoNotOptimize(model.loss(out, targets, &grad));
    model.backward(grad);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
