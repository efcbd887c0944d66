#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace echogcn::cli {

// Empty strings and unset optionals fall back to the run config.

struct SynthOptions {
  std::string config, out;
  std::optional<int> n;
  std::optional<std::uint64_t> seed;
  int exams = 0;
  int cycles = 2;
};

struct ExtractOptions {
  std::string config, masks, out;
};

struct RasterizeOptions {
  std::string keypoints, out;
  int width = 256, height = 256;
};

struct TrainOptions {
  std::string config, data, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  bool quiet = false;
};

struct InferOptions {
  std::string model, data, out;
  std::string split = "test";
};

struct EvaluateOptions {
  std::string config, pred, ref, out;
};

struct EfOptions {
  std::string config, exams, model, second, out;
  bool filter = false;
  std::optional<double> threshold;
};

struct AgreementOptions {
  std::string config, a, b, out;
  std::size_t k_low = 0, k_high = 0;
  std::optional<std::uint64_t> seed;
};

struct BenchOptions {
  std::string config, model, variant = "default";
  std::optional<std::uint64_t> seed;
  std::optional<int> warmup, runs, per_run;
};

struct GradcheckOptions {
  std::uint64_t seed = 0;
};

int run_synth(const SynthOptions& o);
int run_extract(const ExtractOptions& o);
int run_rasterize(const RasterizeOptions& o);
int run_train(const TrainOptions& o);
int run_infer(const InferOptions& o);
int run_evaluate(const EvaluateOptions& o);
int run_ef(const EfOptions& o);
int run_agreement(const AgreementOptions& o);
int run_bench(const BenchOptions& o);
int run_gradcheck(const GradcheckOptions& o);

}  // namespace echogcn::cli
