#pragma once

#include <cstdint>
#include <string>

#include "echogcn/agreement.hpp"
#include "echogcn/bench.hpp"
#include "echogcn/gcn.hpp"

namespace echogcn {

/// Phantom corpus layout: the first `train` seeds train, the next `val`
/// validate, the rest test.
struct DataConfig {
  int count = 500;
  int train = 400;
  int val = 50;
  double spacing_mm = 0.3;  // isotropic pixel spacing written to manifests
};

struct SeedConfig {
  std::uint64_t data = 1000;  // first phantom seed
  std::uint64_t init = 7;     // weight initialization
  std::uint64_t train = 3;    // shuffling and augmentation
  std::uint64_t bench = 0;    // random timing inputs
};

struct PathConfig {
  std::string data_dir = "data";
  std::string out_dir = "out";
};

inline constexpr int kRunConfigVersion = 1;

/// Everything a pipeline run needs. Missing sections keep their defaults;
/// unknown keys and a missing "version" raise Errc::ConfigError.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  AgreementConfig agreement;
  BenchProtocol bench;
  DataConfig data;
  SeedConfig seeds;
  PathConfig paths;

  /// Throws Errc::ConfigError.
  void validate() const;
};

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);
/// Throws Errc::IoError or Errc::ConfigError.
RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& cfg);

}  // namespace echogcn
