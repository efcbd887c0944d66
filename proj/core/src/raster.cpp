#include "echogcn/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <string>

#include "echogcn/error.hpp"

namespace echogcn {

namespace {

constexpr const char* kModule = "imaging_core";

std::vector<Point> to_pixel_polygon(const std::vector<Point>& pts, int w, int h, const char* name) {
  std::vector<Point> out;
  out.reserve(pts.size());
  for (const Point& p : pts) {
    if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)) {
      throw Error(Errc::OutOfRange, kModule, std::string(name) + " keypoint outside [0,1]");
    }
    out.push_back(to_pixels(p, w, h));
  }
  std::vector<Point> distinct;
  for (const Point& p : out) {
    bool seen = false;
    for (const Point& q : distinct) seen = seen || q == p;
    if (!seen) distinct.push_back(p);
    if (distinct.size() >= 3) break;
  }
  double extent = 0.0;
  for (const Point& p : out) extent = std::max({extent, std::abs(p.x - out[0].x), std::abs(p.y - out[0].y)});
  if (distinct.size() < 3 || std::abs(polygon_area(out)) <= 1e-9 * extent * extent) {
    throw Error(Errc::DegenerateGeometry, kModule, std::string(name) + " polygon is degenerate");
  }
  return out;
}

}  // namespace

LabelMask rasterize_keypoints(const KeypointSet& kps, int width, int height) {
  validate_layout(kps);
  const LandmarkIndices& lm = kps.landmarks;

  const std::vector<Point> lv = to_pixel_polygon(kps.endo, width, height, "endo");
  // The epi ring closes through the endo base (D -> B -> A -> C) so the band
  // never spills past the basal line into thin slivers below it.
  std::vector<Point> epi_pts = kps.epi;
  epi_pts.push_back(kps.endo[lm.B]);
  epi_pts.push_back(kps.endo[lm.A]);
  const std::vector<Point> myo = to_pixel_polygon(epi_pts, width, height, "epi");
  std::vector<Point> la_pts;
  la_pts.push_back(kps.endo[lm.A]);
  la_pts.insert(la_pts.end(), kps.la.begin(), kps.la.end());
  la_pts.push_back(kps.endo[lm.B]);
  const std::vector<Point> la = to_pixel_polygon(la_pts, width, height, "la");

  LabelMask out(width, height);
  // Lowest priority first so later fills overwrite.
  fill_polygon(std::span<const Point>(la), width, height, [&](int c, int r) { out.set(c, r, Label::LA); });
  fill_polygon(std::span<const Point>(myo), width, height, [&](int c, int r) { out.set(c, r, Label::MYO); });
  fill_polygon(std::span<const Point>(lv), width, height, [&](int c, int r) { out.set(c, r, Label::LV); });

  // The wedges between each epi base corner and the nearest atrial point can
  // pixelate into enclosed background pockets. Background pixels inside them
  // become MYO by growing from existing MYO, so no island is created.
  const std::array<std::array<Point, 3>, 2> wedges{{
      {to_pixels(kps.endo[lm.A], width, height), to_pixels(kps.epi[lm.C], width, height),
       to_pixels(kps.la.front(), width, height)},
      {to_pixels(kps.endo[lm.B], width, height), to_pixels(kps.epi[lm.D], width, height),
       to_pixels(kps.la.back(), width, height)},
  }};
  std::vector<char> candidate(static_cast<std::size_t>(width) * height, 0);
  for (const auto& tri : wedges) {
    fill_polygon(std::span<const Point>(tri), width, height, [&](int c, int r) {
      if (out.at(c, r) == Label::Background) candidate[static_cast<std::size_t>(r) * width + c] = 1;
    });
  }
  constexpr std::array<std::array<int, 2>, 4> kSteps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  std::deque<std::array<int, 2>> queue;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      if (out.at(c, r) == Label::MYO) queue.push_back({c, r});
    }
  }
  while (!queue.empty()) {
    const auto [c, r] = queue.front();
    queue.pop_front();
    for (const auto& d : kSteps) {
      const int cc = c + d[0];
      const int rr = r + d[1];
      if (!out.contains(cc, rr)) continue;
      char& cand = candidate[static_cast<std::size_t>(rr) * width + cc];
      if (!cand) continue;
      cand = 0;
      out.set(cc, rr, Label::MYO);
      queue.push_back({cc, rr});
    }
  }
  return out;
}

}  // namespace echogcn
