#include "echogcn/anatomy.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>

#include "echogcn/error.hpp"
#include "echogcn/raster.hpp"

namespace echogcn {

namespace {

constexpr std::array<std::array<int, 2>, 4> kNeighbors4{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};

LabelSet complement(LabelSet s) {
  LabelSet out;
  for (int l = 0; l < kNumLabels; ++l) {
    const Label lab = static_cast<Label>(l);
    if (!s.contains(lab)) out = out | lab;
  }
  return out;
}

// Enclosed complement components of `s` (8-connected), optionally only those
// bordering at least `min_structures` distinct labels of `s`.
bool has_hole(const LabelMask& m, LabelSet s, const AnatomyConfig& cfg, int min_structures) {
  const ComponentMap comps = label_components(m, complement(s), 8);
  const std::size_t n = comps.sizes.size();
  if (n == 0) return false;
  std::vector<char> on_border(n, 0);
  std::vector<char> in_sector(n, cfg.sector.empty() ? 1 : 0);
  std::vector<std::uint8_t> touched(n, 0);
  const int w = m.width;
  const int h = m.height;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      const int id = comps.ids[i];
      if (id < 0) continue;
      if (r == 0 || c == 0 || r == h - 1 || c == w - 1) on_border[id] = 1;
      if (!cfg.sector.empty() && cfg.sector[i]) in_sector[id] = 1;
      for (const auto& d : kNeighbors4) {
        const int cc = c + d[0];
        const int rr = r + d[1];
        if (!m.contains(cc, rr)) continue;
        const Label l = m.at(cc, rr);
        if (s.contains(l)) touched[id] |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(l));
      }
    }
  }
  for (std::size_t id = 0; id < n; ++id) {
    if (on_border[id] || !in_sector[id]) continue;
    if (std::popcount(static_cast<unsigned>(touched[id])) >= min_structures) return true;
  }
  return false;
}

bool single_component(const LabelMask& m, Label l) { return connected_components(m, l).count == 1; }

bool la_adjacent(const LabelMask& m) {
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (m.at(c, r) != Label::LA) continue;
      for (const auto& d : kNeighbors4) {
        if (m.contains(c + d[0], r + d[1]) && m.at(c + d[0], r + d[1]) == Label::LV) return true;
      }
    }
  }
  return false;
}

bool myo_band(const LabelMask& m, double tolerance) {
  const ComponentMap lv = label_components(m, {Label::LV}, 4);
  if (lv.sizes.empty()) return false;
  const ComponentMap bg = label_components(m, {Label::Background}, 4);
  const int w = m.width;
  const int h = m.height;
  std::vector<char> exterior(bg.sizes.size(), 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (r != 0 && c != 0 && r != h - 1 && c != w - 1) continue;
      const int id = bg.ids[static_cast<std::size_t>(r) * w + c];
      if (id >= 0) exterior[id] = 1;
    }
  }

  std::vector<Point> uncovered;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (lv.ids[static_cast<std::size_t>(r) * w + c] != 0) continue;
      bool open = false;
      for (const auto& d : kNeighbors4) {
        const int cc = c + d[0];
        const int rr = r + d[1];
        if (!m.contains(cc, rr)) {
          open = true;
          break;
        }
        const Label l = m.at(cc, rr);
        const int bid = bg.ids[static_cast<std::size_t>(rr) * w + cc];
        if (l == Label::LA || (bid >= 0 && exterior[bid])) {
          open = true;
          break;
        }
      }
      if (open) uncovered.push_back(pixel_center(c, r));
    }
  }
  if (uncovered.size() < 2) return true;

  Point a = uncovered[0];
  Point b = uncovered[1];
  double best = -1.0;
  for (std::size_t i = 0; i < uncovered.size(); ++i) {
    for (std::size_t j = i + 1; j < uncovered.size(); ++j) {
      const double d = distance(uncovered[i], uncovered[j]);
      if (d > best) {
        best = d;
        a = uncovered[i];
        b = uncovered[j];
      }
    }
  }
  const double len = distance(a, b);
  for (const Point& p : uncovered) {
    if (std::abs(cross(b - a, p - a)) / len > tolerance) return false;
  }
  return true;
}

int orientation(Point a, Point b, Point c) {
  const double v = cross(b - a, c - a);
  return (v > 0) - (v < 0);
}

bool on_segment(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_touch(Point p1, Point p2, Point q1, Point q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

}  // namespace

std::vector<std::pair<std::string, bool>> AnatomyReport::criteria() const {
  std::vector<std::pair<std::string, bool>> out{
      {"single_component_lv", single_component_lv},
      {"single_component_myo", single_component_myo},
      {"single_component_la", single_component_la},
      {"no_holes_lv", no_holes_lv},
      {"no_holes_myo", no_holes_myo},
      {"no_holes_la", no_holes_la},
      {"no_holes_lv_myo", no_holes_lv_myo},
      {"no_holes_lv_myo_la", no_holes_lv_myo_la},
      {"myo_band_encloses_lv", myo_band_encloses_lv},
      {"la_adjacent_to_lv", la_adjacent_to_lv},
  };
  if (ring_crossing_free) out.emplace_back("ring_crossing_free", *ring_crossing_free);
  if (rings_disjoint) out.emplace_back("rings_disjoint", *rings_disjoint);
  return out;
}

bool AnatomyReport::overall() const {
  for (const auto& [name, ok] : criteria())
    if (!ok) return false;
  return true;
}

std::vector<std::string> AnatomyReport::failures() const {
  std::vector<std::string> out;
  for (const auto& [name, ok] : criteria())
    if (!ok) out.push_back(name);
  return out;
}

AnatomyReport check_mask(const LabelMask& mask, const AnatomyConfig& cfg) {
  if (!cfg.sector.empty() && cfg.sector.size() != mask.labels.size()) {
    throw Error(Errc::DimensionMismatch, "anatomy", "sector mask size differs from the label mask");
  }
  AnatomyReport r;
  r.single_component_lv = single_component(mask, Label::LV);
  r.single_component_myo = single_component(mask, Label::MYO);
  r.single_component_la = single_component(mask, Label::LA);
  r.no_holes_lv = !has_hole(mask, {Label::LV}, cfg, 1);
  r.no_holes_myo = !has_hole(mask, {Label::MYO}, cfg, 1);
  r.no_holes_la = !has_hole(mask, {Label::LA}, cfg, 1);
  r.no_holes_lv_myo = !has_hole(mask, {Label::LV, Label::MYO}, cfg, 2);
  r.no_holes_lv_myo_la = !has_hole(mask, {Label::LV, Label::MYO, Label::LA}, cfg, 2);
  r.myo_band_encloses_lv = myo_band(mask, cfg.basal_tolerance_px);
  r.la_adjacent_to_lv = la_adjacent(mask);
  return r;
}

double min_ring_clearance(const KeypointSet& kps) {
  validate_layout(kps);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kps.endo.size(); ++i) {
    best = std::min(best, dot(kps.epi[i] - kps.endo[i], outward_normal(kps.endo, i)));
  }
  return best;
}

bool polylines_disjoint(const std::vector<Point>& a, const std::vector<Point>& b) {
  for (std::size_t i = 0; i + 1 < a.size(); ++i) {
    for (std::size_t j = 0; j + 1 < b.size(); ++j) {
      if (segments_touch(a[i], a[i + 1], b[j], b[j + 1])) return false;
    }
  }
  return true;
}

AnatomyReport check_keypoints(const KeypointSet& kps, int width, int height, const AnatomyConfig& cfg) {
  AnatomyReport r = check_mask(rasterize_keypoints(kps, width, height), cfg);
  try {
    r.ring_crossing_free = min_ring_clearance(kps) > 0.0;
  } catch (const Error& e) {
    if (e.code() != Errc::ZeroTangent) throw;
    r.ring_crossing_free = false;
  }
  r.rings_disjoint = polylines_disjoint(kps.endo, kps.epi);
  return r;
}

}  // namespace echogcn
