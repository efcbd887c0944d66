#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "echogcn/error.hpp"
#include "echogcn/phantom.hpp"
#include "echogcn/run_config.hpp"

namespace echogcn::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kModule = "cli";
inline constexpr int kDatasetVersion = 1;

[[noreturn]] void usage_error(const std::string& msg);

/// Config from --config (defaults when empty), then ECHOGCN_DATA_DIR and
/// ECHOGCN_OUT_DIR on top of the paths section.
RunConfig load_config(const std::string& path);

/// Flag value if given, else the configured path.
std::string pick(const std::string& flag, const std::string& configured);

void ensure_dir(const fs::path& dir);
/// Regular files with `ext` below `root`, as sorted generic relative paths.
std::vector<std::string> list_files(const fs::path& root, const std::string& ext, bool recursive);
/// Relative path without extension, used as a sample or frame id.
std::string stem_id(const std::string& rel);

void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

/// Fixed notation so files are stable across platforms.
std::string fmt(double v, int digits = 6);
std::string fmt(const std::optional<double>& v, int digits = 6);

json phantom_params_json(const PhantomParams& p);
json geometry_json(const PhantomGeometry& g);

struct DatasetSample {
  std::string id;
  std::uint64_t seed = 0;
  std::string split;  // train, val or test
  std::string image;  // relative to the dataset root
  std::string mask;
  std::string keypoints;
};

/// manifest.json written by `synth`.
struct Dataset {
  fs::path root;
  PixelSpacing spacing;
  int width = 256;
  int height = 256;
  std::vector<DatasetSample> samples;

  std::vector<const DatasetSample*> split(const std::string& name) const;
};

Dataset read_dataset(const fs::path& root);

}  // namespace echogcn::cli
