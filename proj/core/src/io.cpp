#include "echogcn/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <initializer_list>
#include <nlohmann/json.hpp>
#include <sstream>

#include "echogcn/error.hpp"

namespace echogcn {

namespace {

constexpr const char* kModule = "io";
using json = nlohmann::json;

[[noreturn]] void fail_format(const std::string& msg) { throw Error(Errc::FormatError, kModule, msg); }

std::vector<std::uint8_t> read_gray8(const std::string& path, int& w, int& h) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    const std::string why = img.message;
    png_image_free(&img);
    // libpng reports missing files and bad signatures alike; tell them apart.
    if (!std::ifstream(path)) throw Error(Errc::IoError, kModule, "cannot open " + path);
    fail_format(path + ": " + why);
  }
  img.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string why = img.message;
    png_image_free(&img);
    fail_format(path + ": " + why);
  }
  w = static_cast<int>(img.width);
  h = static_cast<int>(img.height);
  return buf;
}

void write_gray8(const std::string& path, int w, int h, const std::vector<std::uint8_t>& buf) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    const std::string why = img.message;
    png_image_free(&img);
    throw Error(Errc::IoError, kModule, "cannot write " + path + ": " + why);
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) fail_format(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) fail_format("unknown key " + where + "." + k);
  }
}

template <class V>
V get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) fail_format(where + "." + key + " is missing");
  try {
    return j.at(key).get<V>();
  } catch (const json::exception&) {
    fail_format(where + "." + key + " has the wrong type");
  }
}

json points_json(const std::vector<Point>& pts) {
  json a = json::array();
  for (const Point& p : pts) a.push_back({p.x, p.y});
  return a;
}

std::vector<Point> points_from(const json& j, const char* key) {
  const auto raw = get<std::vector<std::vector<double>>>(j, key, "keypoints");
  std::vector<Point> out;
  out.reserve(raw.size());
  for (const auto& p : raw) {
    if (p.size() != 2) fail_format(std::string("keypoints.") + key + " entries must be [x, y]");
    out.push_back({p[0], p[1]});
  }
  return out;
}

json spacing_json(PixelSpacing s) { return {s.sx, s.sy}; }

PixelSpacing spacing_from(const json& j, const std::string& where) {
  const auto v = get<std::vector<double>>(j, "spacing", where);
  if (v.size() != 2 || !(v[0] > 0) || !(v[1] > 0)) fail_format(where + ".spacing must be two positive numbers");
  return {v[0], v[1]};
}

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail_format(std::string(what) + " is not valid JSON: " + e.what());
  }
}

void check_version(const json& j, int expected, const char* what) {
  if (!j.is_object() || !j.contains("version")) fail_format(std::string(what) + ": version is missing");
  if (get<int>(j, "version", what) != expected) {
    fail_format(std::string(what) + ": unsupported version " + j.at("version").dump());
  }
}

json recording_json(const Recording& r) {
  json cycles = json::array();
  for (const Cycle& c : r.cycles) cycles.push_back({{"ed", c.ed}, {"es", c.es}});
  return {{"frames", r.frames}, {"cycles", cycles}, {"spacing", spacing_json(r.spacing)}};
}

Recording recording_from(const json& j, const std::string& where) {
  check_keys(j, {"frames", "cycles", "spacing"}, where);
  Recording r;
  r.frames = get<std::vector<std::string>>(j, "frames", where);
  r.spacing = spacing_from(j, where);
  const json& cycles = j.contains("cycles") ? j.at("cycles") : json();
  if (!cycles.is_array()) fail_format(where + ".cycles must be an array");
  for (const json& c : cycles) {
    check_keys(c, {"ed", "es"}, where + ".cycles[]");
    Cycle cy{get<int>(c, "ed", where + ".cycles[]"), get<int>(c, "es", where + ".cycles[]")};
    const int n = static_cast<int>(r.frames.size());
    if (cy.ed < 0 || cy.es < 0 || cy.ed >= n || cy.es >= n) fail_format(where + ": cycle frame index out of range");
    if (cy.ed >= cy.es) fail_format(where + ": ED index must precede ES");
    r.cycles.push_back(cy);
  }
  return r;
}

}  // namespace

// ---- rasters ----

void write_image_png(const std::string& path, const Image& img) {
  std::vector<std::uint8_t> buf(img.data.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const double v = std::clamp(static_cast<double>(img.data[i]), 0.0, 1.0);
    buf[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
  }
  write_gray8(path, img.width, img.height, buf);
}

Image read_image_png(const std::string& path) {
  int w = 0, h = 0;
  const auto buf = read_gray8(path, w, h);
  Image img(w, h);
  for (std::size_t i = 0; i < buf.size(); ++i) img.data[i] = static_cast<float>(buf[i] / 255.0);
  return img;
}

void write_mask_png(const std::string& path, const LabelMask& mask) {
  write_gray8(path, mask.width, mask.height, mask.labels);
}

LabelMask read_mask_png(const std::string& path) {
  int w = 0, h = 0;
  auto buf = read_gray8(path, w, h);
  for (std::uint8_t v : buf) {
    if (v >= kNumLabels) fail_format(path + ": label code " + std::to_string(v) + " is not in 0-3");
  }
  LabelMask m(w, h);
  m.labels = std::move(buf);
  return m;
}

// ---- keypoints ----

std::string keypoints_to_json(const KeypointSet& kps, PixelSpacing spacing) {
  validate_layout(kps);
  const LandmarkIndices& l = kps.landmarks;
  json j{{"version", kKeypointFileVersion},
         {"n_side", kps.n_side},
         {"m_side", kps.m_side},
         {"endo", points_json(kps.endo)},
         {"epi", points_json(kps.epi)},
         {"la", points_json(kps.la)},
         {"landmarks", {{"A", l.A}, {"B", l.B}, {"C", l.C}, {"D", l.D}, {"E", l.E}, {"F", l.F}, {"G", l.G}}},
         {"spacing", spacing_json(spacing)}};
  return j.dump(1) + "\n";
}

KeypointSet keypoints_from_json(const std::string& text, PixelSpacing* spacing) {
  const json j = parse(text, "keypoint file");
  check_version(j, kKeypointFileVersion, "keypoints");
  check_keys(j, {"version", "n_side", "m_side", "endo", "epi", "la", "landmarks", "spacing"}, "keypoints");
  KeypointSet k;
  k.n_side = get<int>(j, "n_side", "keypoints");
  k.m_side = get<int>(j, "m_side", "keypoints");
  k.endo = points_from(j, "endo");
  k.epi = points_from(j, "epi");
  k.la = points_from(j, "la");
  const json& lm = j.contains("landmarks") ? j.at("landmarks") : json();
  check_keys(lm, {"A", "B", "C", "D", "E", "F", "G"}, "keypoints.landmarks");
  k.landmarks = {get<int>(lm, "A", "landmarks"), get<int>(lm, "B", "landmarks"), get<int>(lm, "C", "landmarks"),
                 get<int>(lm, "D", "landmarks"), get<int>(lm, "E", "landmarks"), get<int>(lm, "F", "landmarks"),
                 get<int>(lm, "G", "landmarks")};
  const PixelSpacing s = j.contains("spacing") ? spacing_from(j, "keypoints") : PixelSpacing{};
  if (spacing) *spacing = s;
  validate_layout(k);
  return k;
}

void write_keypoints(const std::string& path, const KeypointSet& kps, PixelSpacing spacing) {
  write_text(path, keypoints_to_json(kps, spacing));
}

KeypointSet read_keypoints(const std::string& path, PixelSpacing* spacing) {
  return keypoints_from_json(read_text(path), spacing);
}

// ---- exams ----

std::string exams_to_json(const std::vector<ExamManifest>& exams) {
  json list = json::array();
  for (const ExamManifest& e : exams) {
    json ref = json::object();
    if (e.reference.ef) ref["ef"] = *e.reference.ef;
    if (e.reference.edv) ref["edv"] = *e.reference.edv;
    if (e.reference.esv) ref["esv"] = *e.reference.esv;
    list.push_back({{"patient_id", e.patient_id},
                    {"a2c", recording_json(e.a2c)},
                    {"a4c", recording_json(e.a4c)},
                    {"reference", ref}});
  }
  return json{{"version", kExamFileVersion}, {"exams", list}}.dump(1) + "\n";
}

std::vector<ExamManifest> exams_from_json(const std::string& text) {
  const json j = parse(text, "exam file");
  check_version(j, kExamFileVersion, "exams");
  check_keys(j, {"version", "exams"}, "exams");
  if (!j.contains("exams") || !j.at("exams").is_array()) fail_format("exams.exams must be an array");
  std::vector<ExamManifest> out;
  for (const json& e : j.at("exams")) {
    check_keys(e, {"patient_id", "a2c", "a4c", "reference"}, "exam");
    ExamManifest m;
    m.patient_id = get<std::string>(e, "patient_id", "exam");
    const std::string where = "exam " + m.patient_id;
    if (!e.contains("a2c") || !e.contains("a4c")) fail_format(where + ": both a2c and a4c are required");
    m.a2c = recording_from(e.at("a2c"), where + ".a2c");
    m.a4c = recording_from(e.at("a4c"), where + ".a4c");
    if (e.contains("reference")) {
      const json& r = e.at("reference");
      check_keys(r, {"ef", "edv", "esv"}, where + ".reference");
      if (r.contains("ef")) m.reference.ef = get<double>(r, "ef", where);
      if (r.contains("edv")) m.reference.edv = get<double>(r, "edv", where);
      if (r.contains("esv")) m.reference.esv = get<double>(r, "esv", where);
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<ExamManifest> read_exams(const std::string& path) { return exams_from_json(read_text(path)); }

void write_exams(const std::string& path, const std::vector<ExamManifest>& exams) {
  write_text(path, exams_to_json(exams));
}

// ---- text ----

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, kModule, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, kModule, "cannot write " + path);
  out << text;
  if (!out) throw Error(Errc::IoError, kModule, "short write to " + path);
}

}  // namespace echogcn
