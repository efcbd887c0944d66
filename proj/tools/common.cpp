#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "echogcn/io.hpp"

namespace echogcn::cli {

void usage_error(const std::string& msg) { throw Error(Errc::UsageError, kModule, msg); }

RunConfig load_config(const std::string& path) {
  RunConfig cfg = path.empty() ? RunConfig{} : load_run_config(path);
  if (const char* d = std::getenv("ECHOGCN_DATA_DIR"); d && *d) cfg.paths.data_dir = d;
  if (const char* o = std::getenv("ECHOGCN_OUT_DIR"); o && *o) cfg.paths.out_dir = o;
  return cfg;
}

std::string pick(const std::string& flag, const std::string& configured) { return flag.empty() ? configured : flag; }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, kModule, "cannot create " + dir.string() + ": " + ec.message());
}

std::vector<std::string> list_files(const fs::path& root, const std::string& ext, bool recursive) {
  if (!fs::is_directory(root)) throw Error(Errc::IoError, kModule, root.string() + " is not a directory");
  std::vector<std::string> out;
  auto take = [&](const fs::directory_entry& e) {
    if (e.is_regular_file() && e.path().extension() == ext)
      out.push_back(fs::relative(e.path(), root).generic_string());
  };
  if (recursive) {
    for (const auto& e : fs::recursive_directory_iterator(root)) take(e);
  } else {
    for (const auto& e : fs::directory_iterator(root)) take(e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string stem_id(const std::string& rel) {
  const fs::path p(rel);
  return (p.parent_path() / p.stem()).generic_string();
}

void write_json(const fs::path& path, const json& j) { write_text(path.string(), j.dump(1) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path.string()));
  } catch (const json::exception& e) {
    throw Error(Errc::FormatError, kModule, path.string() + " is not valid JSON: " + e.what());
  }
}

std::string fmt(double v, int digits) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  // "-0.000000" and "0.000000" must not differ between runs.
  if (std::string(buf).find_first_not_of("-0.") == std::string::npos) std::snprintf(buf, sizeof buf, "%.*f", digits, 0.0);
  return buf;
}

std::string fmt(const std::optional<double>& v, int digits) { return v ? fmt(*v, digits) : ""; }

namespace {

json range_json(Range r) { return {r.lo, r.hi}; }

}  // namespace

json phantom_params_json(const PhantomParams& p) {
  return {{"width", p.width},
          {"height", p.height},
          {"base_x", range_json(p.base_x)},
          {"base_y", range_json(p.base_y)},
          {"rotation_deg", range_json(p.rotation_deg)},
          {"lv_half_width", range_json(p.lv_half_width)},
          {"lv_half_length", range_json(p.lv_half_length)},
          {"lv_center_offset", range_json(p.lv_center_offset)},
          {"myo_lateral", range_json(p.myo_lateral)},
          {"myo_apical", range_json(p.myo_apical)},
          {"myo_asymmetry", range_json(p.myo_asymmetry)},
          {"la_depth", range_json(p.la_depth)},
          {"la_extra_width", range_json(p.la_extra_width)},
          {"sector_half_angle_deg", p.sector_half_angle_deg},
          {"sector_radius", p.sector_radius},
          {"speckle", p.speckle},
          {"background", p.background},
          {"lv_intensity", p.lv_intensity},
          {"myo_intensity", p.myo_intensity},
          {"la_intensity", p.la_intensity},
          {"margin", p.margin}};
}

json geometry_json(const PhantomGeometry& g) {
  return {{"base", {g.base.x, g.base.y}},
          {"rotation_deg", g.rotation_deg},
          {"lv_half_width", g.lv_half_width},
          {"lv_half_length", g.lv_half_length},
          {"lv_center_offset", g.lv_center_offset},
          {"myo_left", g.myo_left},
          {"myo_right", g.myo_right},
          {"myo_apical", g.myo_apical},
          {"la_depth", g.la_depth},
          {"la_half_width", g.la_half_width}};
}

std::vector<const DatasetSample*> Dataset::split(const std::string& name) const {
  std::vector<const DatasetSample*> out;
  for (const DatasetSample& s : samples)
    if (name == "all" || s.split == name) out.push_back(&s);
  return out;
}

Dataset read_dataset(const fs::path& root) {
  const fs::path path = root / "manifest.json";
  const json j = read_json(path);
  auto bad = [&](const std::string& why) -> Error { return Error(Errc::FormatError, kModule, path.string() + ": " + why); };
  try {
    if (j.at("version").get<int>() != kDatasetVersion) throw bad("unsupported version");
    Dataset d;
    d.root = root;
    const auto sp = j.at("spacing").get<std::vector<double>>();
    if (sp.size() != 2) throw bad("spacing must be [sx, sy]");
    d.spacing = {sp[0], sp[1]};
    d.width = j.at("width").get<int>();
    d.height = j.at("height").get<int>();
    for (const json& s : j.at("samples")) {
      d.samples.push_back({s.at("id").get<std::string>(), s.at("seed").get<std::uint64_t>(),
                           s.at("split").get<std::string>(), s.at("image").get<std::string>(),
                           s.at("mask").get<std::string>(), s.at("keypoints").get<std::string>()});
    }
    return d;
  } catch (const json::exception& e) {
    throw bad(e.what());
  }
}

}  // namespace echogcn::cli
