#include "echogcn/keypoints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "echogcn/error.hpp"

namespace echogcn {

namespace {

constexpr const char* kModule = "keypoints";

const char* label_name(Label l) {
  switch (l) {
    case Label::LV: return "LV";
    case Label::MYO: return "MYO";
    case Label::LA: return "LA";
    default: return "BG";
  }
}

// Pixels of the largest 4-connected component of one label.
struct Region {
  std::vector<std::size_t> pixels;  // row-major order
  std::vector<char> member;
};

Region largest_region(const LabelMask& mask, Label label) {
  const ComponentMap map = label_components(mask, LabelSet{label}, 4);
  if (map.sizes.empty()) {
    throw Error(Errc::MissingStructure, kModule, std::string("missing structure ") + label_name(label));
  }
  Region r;
  r.member.assign(map.ids.size(), 0);
  for (std::size_t i = 0; i < map.ids.size(); ++i) {
    if (map.ids[i] == 0) {
      r.pixels.push_back(i);
      r.member[i] = 1;
    }
  }
  return r;
}

Point center_of(std::size_t idx, int width) {
  return pixel_center(static_cast<int>(idx % width), static_cast<int>(idx / width));
}

Point centroid(const Region& r, int width) {
  Point sum;
  for (std::size_t idx : r.pixels) sum = sum + center_of(idx, width);
  return (1.0 / static_cast<double>(r.pixels.size())) * sum;
}

// Signed perpendicular distance from the line a->b (positive on the left as
// seen with y down, i.e. cross(b - a, p - a) > 0).
double signed_offset(Point a, Point b, Point p) { return cross(b - a, p - a) / distance(a, b); }

// Pixel of the region farthest from the line on the side with sign `side`.
// Pixels within kApexBand of the maximum count as tied; the tied pixel
// nearest their centroid wins (earlier row-major on equal distance). A single
// extreme pixel jumps around under rotation when the boundary is flat.
constexpr double kApexBand = 1.0;

Point farthest_from_line(const Region& r, int width, Point a, Point b, double side) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t idx : r.pixels) best = std::max(best, side * signed_offset(a, b, center_of(idx, width)));
  std::vector<Point> band;
  Point sum;
  for (std::size_t idx : r.pixels) {
    const Point p = center_of(idx, width);
    if (side * signed_offset(a, b, p) >= best - kApexBand) {
      band.push_back(p);
      sum = sum + p;
    }
  }
  const Point mid = (1.0 / static_cast<double>(band.size())) * sum;
  Point pick = band.front();
  double pick_d = std::numeric_limits<double>::infinity();
  for (const Point& p : band) {
    const double d = distance(p, mid);
    if (d < pick_d) {
      pick_d = d;
      pick = p;
    }
  }
  return pick;
}

// Farthest MYO pixel reached by walking from `from` along `dir` (unit).
Point base_corner(const LabelMask& mask, const Region& myo, Point from, Point dir) {
  constexpr double kStep = 0.25;
  constexpr double kGap = 3.0;
  double last_hit = -1.0;
  Point hit;
  for (double t = kStep;; t += kStep) {
    const Point p = from + t * dir;
    const int c = static_cast<int>(std::floor(p.x));
    const int r = static_cast<int>(std::floor(p.y));
    if (!mask.contains(c, r)) break;
    if (myo.member[static_cast<std::size_t>(r) * mask.width + c]) {
      last_hit = t;
      hit = pixel_center(c, r);
    } else if (last_hit >= 0.0 && t - last_hit > kGap) {
      break;
    }
  }
  if (last_hit >= 0.0) return hit;

  // The line misses the MYO; take the nearest MYO pixel ahead of `from`,
  // preferring those close to the line.
  double best = std::numeric_limits<double>::infinity();
  double best_any = std::numeric_limits<double>::infinity();
  Point near_line;
  Point any;
  for (std::size_t idx : myo.pixels) {
    const Point p = center_of(idx, mask.width);
    const double along = dot(p - from, dir);
    const double off = std::abs(cross(dir, p - from));
    const double d = distance(p, from);
    if (along > 0.0 && off <= 2.0 && d < best) {
      best = d;
      near_line = p;
    }
    if (d < best_any) {
      best_any = d;
      any = p;
    }
  }
  return std::isfinite(best) ? near_line : any;
}

std::size_t nearest_index(const std::vector<Point>& pts, Point q) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double d = distance(pts[i], q);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

// Contour points from index `from` to `to` along the cyclic contour, taking
// the direction whose path does not pass through `avoid`.
std::vector<Point> arc_between(const std::vector<Point>& loop, std::size_t from, std::size_t to, std::size_t avoid) {
  const std::size_t n = loop.size();
  auto walk = [&](int step) {
    std::vector<Point> out;
    bool hits_avoid = false;
    std::size_t i = from;
    out.push_back(loop[i]);
    while (i != to) {
      i = (i + n + step) % n;
      if (i == avoid && i != to) hits_avoid = true;
      out.push_back(loop[i]);
    }
    return std::pair{out, hits_avoid};
  };
  auto [fwd, fwd_hits] = walk(1);
  if (!fwd_hits) return fwd;
  auto [bwd, bwd_hits] = walk(-1);
  if (!bwd_hits) return bwd;
  return fwd.size() <= bwd.size() ? fwd : bwd;
}

// Points at arc-length fractions k/(count+1), k = 1..count, of the polyline
// start -> path... -> end.
std::vector<Point> sample_arc(Point start, const std::vector<Point>& path, Point end, int count) {
  if (static_cast<int>(path.size()) < count) {
    throw Error(Errc::ContourTooShort, kModule,
                "arc has " + std::to_string(path.size()) + " pixels, " + std::to_string(count) + " samples requested");
  }
  std::vector<Point> poly;
  poly.push_back(start);
  for (const Point& p : path) {
    if (!(p == poly.back())) poly.push_back(p);
  }
  if (!(end == poly.back())) poly.push_back(end);

  std::vector<double> cum(poly.size(), 0.0);
  for (std::size_t i = 1; i < poly.size(); ++i) cum[i] = cum[i - 1] + distance(poly[i - 1], poly[i]);
  const double total = cum.back();

  std::vector<Point> out;
  out.reserve(count);
  std::size_t seg = 1;
  for (int k = 1; k <= count; ++k) {
    const double s = total * k / (count + 1);
    while (seg + 1 < poly.size() && cum[seg] < s) ++seg;
    const double len = cum[seg] - cum[seg - 1];
    const double f = len > 0.0 ? (s - cum[seg - 1]) / len : 0.0;
    out.push_back(poly[seg - 1] + f * (poly[seg] - poly[seg - 1]));
  }
  return out;
}

// Samples on the closed contour between two landmarks (arc avoiding `third`).
std::vector<Point> sample_between(const std::vector<Point>& loop, Point from, Point to, Point third, int count) {
  const std::size_t i_from = nearest_index(loop, from);
  const std::size_t i_to = nearest_index(loop, to);
  const std::size_t i_third = nearest_index(loop, third);
  const std::vector<Point> arc = arc_between(loop, i_from, i_to, i_third);
  return sample_arc(from, arc, to, count);
}

// Moves a boundary pixel center half a pixel across each edge it shares with
// a pixel outside `set`, so polygons through these points enclose whole pixels.
Point to_edge(Point center, const LabelMask& m, LabelSet set) {
  const int c = static_cast<int>(std::floor(center.x));
  const int r = static_cast<int>(std::floor(center.y));
  auto in = [&](int cc, int rr) { return m.contains(cc, rr) && set.contains(m.at(cc, rr)); };
  if (!in(c, r)) return center;
  Point off;
  if (!in(c - 1, r)) off.x -= 0.5;
  if (!in(c + 1, r)) off.x += 0.5;
  if (!in(c, r - 1)) off.y -= 0.5;
  if (!in(c, r + 1)) off.y += 0.5;
  return center + off;
}

std::vector<Point> to_edge(std::vector<Point> pts, const LabelMask& m, LabelSet set) {
  for (Point& p : pts) p = to_edge(p, m, set);
  return pts;
}

Point normalize(Point p, const LabelMask& m) { return to_normalized(p, m.width, m.height); }

}  // namespace

LandmarkIndices canonical_landmarks(const SamplingConfig& cfg) {
  const int apex = cfg.n_side + 1;
  const int last = 2 * cfg.n_side + 2;
  return {0, last, 0, last, apex, apex, cfg.m_side};
}

void validate_layout(const KeypointSet& kps) {
  const SamplingConfig cfg = kps.sampling();
  if (cfg.n_side < 1 || cfg.m_side < 1) throw Error(Errc::LayoutMismatch, kModule, "n_side and m_side must be >= 1");
  if (static_cast<int>(kps.endo.size()) != cfg.ring_count() || static_cast<int>(kps.epi.size()) != cfg.ring_count() ||
      static_cast<int>(kps.la.size()) != cfg.la_count()) {
    throw Error(Errc::LayoutMismatch, kModule,
                "array sizes (" + std::to_string(kps.endo.size()) + ", " + std::to_string(kps.epi.size()) + ", " +
                    std::to_string(kps.la.size()) + ") do not match n_side/m_side");
  }
  if (!(kps.landmarks == canonical_landmarks(cfg))) {
    throw Error(Errc::LayoutMismatch, kModule, "landmark indices are not canonical");
  }
}

Landmarks extract_landmarks(const LabelMask& mask, AnnulusMode annulus) {
  const Region lv = largest_region(mask, Label::LV);
  const Region myo = largest_region(mask, Label::MYO);
  const Region la = largest_region(mask, Label::LA);
  const int w = mask.width;
  const int h = mask.height;

  const Region& side = annulus == AnnulusMode::LvLaInterface ? lv : myo;
  std::vector<Point> iface;
  for (std::size_t idx : side.pixels) {
    const int c = static_cast<int>(idx % w);
    const int r = static_cast<int>(idx / w);
    const bool adj = (c > 0 && la.member[idx - 1]) || (c + 1 < w && la.member[idx + 1]) ||
                     (r > 0 && la.member[idx - w]) || (r + 1 < h && la.member[idx + w]);
    if (adj) iface.push_back(pixel_center(c, r));
  }
  if (iface.empty()) {
    throw Error(Errc::NoInterface, kModule,
                annulus == AnnulusMode::LvLaInterface ? "no LV pixel is adjacent to LA" : "no MYO pixel is adjacent to LA");
  }

  Landmarks lm;
  double best = -1.0;
  for (std::size_t i = 0; i < iface.size(); ++i) {
    for (std::size_t j = i + 1; j < iface.size(); ++j) {
      const double d = distance(iface[i], iface[j]);
      if (d > best) {
        best = d;
        lm.A = iface[i];
        lm.B = iface[j];
      }
    }
  }
  if (best <= 0.0) {
    // A single interface pixel: widen along the row so a base line exists.
    lm.B = lm.A + Point{1.0, 0.0};
  }

  const double la_side = signed_offset(lm.A, lm.B, centroid(la, w)) >= 0.0 ? 1.0 : -1.0;
  lm.E = farthest_from_line(lv, w, lm.A, lm.B, -la_side);
  lm.F = farthest_from_line(myo, w, lm.A, lm.B, -la_side);
  lm.G = farthest_from_line(la, w, lm.A, lm.B, la_side);

  if (cross(lm.B - lm.A, lm.E - lm.A) > 0.0) std::swap(lm.A, lm.B);

  const Point u = (1.0 / distance(lm.A, lm.B)) * (lm.B - lm.A);
  lm.C = base_corner(mask, myo, lm.A, -1.0 * u);
  lm.D = base_corner(mask, myo, lm.B, u);
  return lm;
}

KeypointSet extract_keypoints(const LabelMask& mask, const ExtractionConfig& cfg) {
  const SamplingConfig& s = cfg.sampling;
  if (s.n_side < 1 || s.m_side < 1) throw Error(Errc::LayoutMismatch, kModule, "n_side and m_side must be >= 1");
  const Landmarks lm = extract_landmarks(mask, cfg.annulus);

  const LabelSet lv_set{Label::LV};
  const LabelSet outer_set{Label::LV, Label::MYO};
  const LabelSet la_set{Label::LA};
  const std::vector<Point> lv_loop = to_edge(extract_contour(mask, lv_set).points, mask, lv_set);
  const std::vector<Point> outer_loop = to_edge(extract_contour(mask, outer_set).points, mask, outer_set);
  const std::vector<Point> la_loop = to_edge(extract_contour(mask, la_set).points, mask, la_set);

  KeypointSet k;
  k.n_side = s.n_side;
  k.m_side = s.m_side;
  k.landmarks = canonical_landmarks(s);

  auto ring = [&](const std::vector<Point>& loop, Point first, Point apex, Point last) {
    std::vector<Point> out;
    out.push_back(first);
    for (const Point& p : sample_between(loop, first, apex, last, s.n_side)) out.push_back(p);
    out.push_back(apex);
    for (const Point& p : sample_between(loop, apex, last, first, s.n_side)) out.push_back(p);
    out.push_back(last);
    return out;
  };
  const Point a = to_edge(lm.A, mask, lv_set);
  const Point b = to_edge(lm.B, mask, lv_set);
  k.endo = ring(lv_loop, a, to_edge(lm.E, mask, lv_set), b);
  k.epi = ring(outer_loop, to_edge(lm.C, mask, outer_set), to_edge(lm.F, mask, outer_set),
               to_edge(lm.D, mask, outer_set));

  // LA samples run from the contour points next to A and B.
  const Point la_a = la_loop[nearest_index(la_loop, a)];
  const Point la_b = la_loop[nearest_index(la_loop, b)];
  const Point g = to_edge(lm.G, mask, la_set);
  for (const Point& p : sample_between(la_loop, la_a, g, la_b, s.m_side)) k.la.push_back(p);
  k.la.push_back(g);
  for (const Point& p : sample_between(la_loop, g, la_b, la_a, s.m_side)) k.la.push_back(p);

  for (auto* arr : {&k.endo, &k.epi, &k.la}) {
    for (Point& p : *arr) p = normalize(p, mask);
  }
  return k;
}

KeypointSet extract_keypoints(const LabelMask& mask, const SamplingConfig& cfg) {
  return extract_keypoints(mask, ExtractionConfig{cfg, AnnulusMode::LvLaInterface});
}

Point outward_normal(std::span<const Point> ring, std::size_t i) {
  const std::size_t n = ring.size();
  if (n < 3) throw Error(Errc::ContourTooShort, kModule, "ring needs at least 3 points");
  const Point prev = ring[i == 0 ? 0 : i - 1];
  const Point next = ring[i + 1 == n ? n - 1 : i + 1];
  const Point t = next - prev;
  const double len = norm(t);
  if (len == 0.0) throw Error(Errc::ZeroTangent, kModule, "neighbors of point " + std::to_string(i) + " coincide");
  Point nrm{t.y / len, -t.x / len};
  Point c;
  for (const Point& p : ring) c = c + p;
  c = (1.0 / static_cast<double>(n)) * c;
  if (dot(nrm, ring[i] - c) < 0.0) nrm = -1.0 * nrm;
  return nrm;
}

DisplacementSet to_displacement(const KeypointSet& kps) {
  validate_layout(kps);
  DisplacementSet ds;
  ds.n_side = kps.n_side;
  ds.m_side = kps.m_side;
  ds.endo = kps.endo;
  ds.la = kps.la;
  ds.landmarks = kps.landmarks;
  ds.disp.resize(kps.endo.size());
  for (std::size_t i = 0; i < kps.endo.size(); ++i) {
    const Point n = outward_normal(kps.endo, i);
    ds.disp[i] = std::max(kMinDisplacement, dot(kps.epi[i] - kps.endo[i], n));
  }
  return ds;
}

KeypointSet from_displacement(const DisplacementSet& ds) {
  if (ds.disp.size() != ds.endo.size()) throw Error(Errc::LayoutMismatch, kModule, "disp and endo differ in length");
  KeypointSet k;
  k.n_side = ds.n_side;
  k.m_side = ds.m_side;
  k.endo = ds.endo;
  k.la = ds.la;
  k.landmarks = ds.landmarks;
  k.epi.resize(ds.endo.size());
  for (std::size_t i = 0; i < ds.endo.size(); ++i) {
    const Point p = ds.endo[i] + ds.disp[i] * outward_normal(ds.endo, i);
    k.epi[i] = {std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)};
  }
  return k;
}

KeypointSet mirror_keypoints(const KeypointSet& kps) {
  KeypointSet m = kps;
  for (auto* arr : {&m.endo, &m.epi, &m.la}) {
    for (Point& p : *arr) p.x = 1.0 - p.x;
    std::reverse(arr->begin(), arr->end());
  }
  const int ring_last = static_cast<int>(kps.endo.size()) - 1;
  const int epi_last = static_cast<int>(kps.epi.size()) - 1;
  const int la_last = static_cast<int>(kps.la.size()) - 1;
  const LandmarkIndices& o = kps.landmarks;
  m.landmarks = {ring_last - o.B, ring_last - o.A, epi_last - o.D, epi_last - o.C, ring_last - o.E, epi_last - o.F,
                 la_last - o.G};
  return m;
}

Landmarks landmarks_of(const KeypointSet& kps) {
  const LandmarkIndices& i = kps.landmarks;
  auto at = [](const std::vector<Point>& v, int idx) {
    if (idx < 0 || idx >= static_cast<int>(v.size())) throw Error(Errc::MissingLandmark, kModule, "landmark index out of range");
    return v[idx];
  };
  return {at(kps.endo, i.A), at(kps.endo, i.B), at(kps.epi, i.C), at(kps.epi, i.D),
          at(kps.endo, i.E), at(kps.epi, i.F), at(kps.la, i.G)};
}

}  // namespace echogcn
