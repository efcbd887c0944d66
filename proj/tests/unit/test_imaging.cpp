#include <gtest/gtest.h>

#include <random>
#include <set>

#include "echogcn/error.hpp"
#include "echogcn/imaging.hpp"

using namespace echogcn;

namespace {

// Even-odd crossing count at pixel centers; independent of the scanline code.
bool inside_brute(const std::vector<Point>& poly, double px, double py) {
  int crossings = 0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point p = poly[i];
    const Point q = poly[(i + 1) % n];
    if ((p.y <= py && py < q.y) || (q.y <= py && py < p.y)) {
      const double x = p.x + (py - p.y) * (q.x - p.x) / (q.y - p.y);
      if (x > px) ++crossings;
    }
  }
  return crossings % 2 == 1;
}

std::size_t filled_count(const std::vector<Point>& poly, int w, int h) {
  std::size_t n = 0;
  fill_polygon(std::span<const Point>(poly), w, h, [&](int, int) { ++n; });
  return n;
}

LabelMask square_mask(int size, int c0, int r0, int side, Label l) {
  LabelMask m(size, size);
  for (int r = r0; r < r0 + side; ++r)
    for (int c = c0; c < c0 + side; ++c) m.set(c, r, l);
  return m;
}

}  // namespace

TEST(ExtractContour, SinglePixel) {
  LabelMask m(5, 5);
  m.set(2, 2, Label::LV);
  const Contour c = extract_contour(m, Label::LV);
  ASSERT_EQ(c.points.size(), 1u);
  EXPECT_EQ(c.points[0], pixel_center(2, 2));
}

TEST(ExtractContour, SquareBoundaryCounterClockwise) {
  const LabelMask m = square_mask(10, 3, 3, 4, Label::LV);
  const Contour c = extract_contour(m, Label::LV);

  std::set<std::pair<double, double>> expected;
  for (int r = 3; r < 7; ++r)
    for (int col = 3; col < 7; ++col)
      if (r == 3 || r == 6 || col == 3 || col == 6) expected.insert({col + 0.5, r + 0.5});
  ASSERT_EQ(c.points.size(), 12u);
  std::set<std::pair<double, double>> got;
  for (const Point& p : c.points) got.insert({p.x, p.y});
  EXPECT_EQ(got, expected);

  EXPECT_EQ(c.points.front(), pixel_center(3, 3));
  // Counter-clockwise as displayed means negative shoelace area with y down.
  EXPECT_LT(polygon_area(c.points), 0.0);
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const Point d = c.points[(i + 1) % c.points.size()] - c.points[i];
    EXPECT_LE(std::max(std::abs(d.x), std::abs(d.y)), 1.0);
  }
}

TEST(ExtractContour, TwoPixelComponentTerminates) {
  LabelMask m(6, 6);
  m.set(2, 2, Label::MYO);
  m.set(3, 2, Label::MYO);
  EXPECT_EQ(extract_contour(m, Label::MYO).points.size(), 2u);
}

TEST(ExtractContour, ClosedRepeatsStart) {
  const LabelMask m = square_mask(10, 3, 3, 4, Label::LV);
  const Contour c = extract_contour(m, Label::LV, true);
  ASSERT_EQ(c.points.size(), 13u);
  EXPECT_EQ(c.points.front(), c.points.back());
}

TEST(ExtractContour, AbsentLabelThrows) {
  const LabelMask m = square_mask(10, 3, 3, 4, Label::LV);
  try {
    extract_contour(m, Label::LA);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LabelAbsent);
  }
}

TEST(ExtractContour, LargestComponentOnly) {
  LabelMask m = square_mask(20, 1, 1, 3, Label::LV);
  for (int r = 10; r < 16; ++r)
    for (int c = 10; c < 16; ++c) m.set(c, r, Label::LV);
  const Contour c = extract_contour(m, Label::LV);
  EXPECT_EQ(c.points.size(), 20u);
  EXPECT_EQ(c.points.front(), pixel_center(10, 10));
}

TEST(ConnectedComponents, CountsAndOrdering) {
  LabelMask m = square_mask(20, 1, 1, 2, Label::LV);
  for (int r = 10; r < 13; ++r)
    for (int c = 10; c < 13; ++c) m.set(c, r, Label::LV);
  const ComponentStats s = connected_components(m, Label::LV);
  EXPECT_EQ(s.count, 2);
  EXPECT_EQ(s.sizes, (std::vector<std::size_t>{9, 4}));
  EXPECT_EQ(connected_components(m, Label::LA).count, 0);
}

TEST(ConnectedComponents, DiagonalPixelsAreSeparate) {
  LabelMask m(4, 4);
  m.set(0, 0, Label::LA);
  m.set(1, 1, Label::LA);
  EXPECT_EQ(connected_components(m, Label::LA).count, 2);
}

TEST(ConnectedComponents, MultipleAtriaDisconnectedFromLv) {
  LabelMask m(32, 32);
  for (int r = 4; r < 14; ++r)
    for (int c = 10; c < 20; ++c) m.set(c, r, Label::LV);
  for (int r = 16; r < 20; ++r)
    for (int c = 4; c < 9; ++c) m.set(c, r, Label::LA);
  for (int r = 22; r < 28; ++r)
    for (int c = 18; c < 26; ++c) m.set(c, r, Label::LA);
  EXPECT_GE(connected_components(m, Label::LA).count, 2);
}

TEST(ConnectedComponents, OrderingIndependentOfLayoutPermutation) {
  std::mt19937 rng(11);
  std::bernoulli_distribution coin(0.4);
  LabelMask m(24, 24);
  for (auto& v : m.labels) v = coin(rng) ? 1 : 0;
  const ComponentStats a = connected_components(m, Label::LV);
  // Transposing the mask permutes the flood-fill visiting order but keeps
  // components and their sizes.
  LabelMask t(24, 24);
  for (int r = 0; r < 24; ++r)
    for (int c = 0; c < 24; ++c) t.set(r, c, m.at(c, r));
  ComponentStats b = connected_components(t, Label::LV);
  EXPECT_EQ(a.count, b.count);
  EXPECT_EQ(a.sizes, b.sizes);
}

TEST(Resize, IdentityAtSameSize) {
  Image img(256, 256);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i % 7) / 7.0f;
  const Image out = resize(img, 256, 256);
  EXPECT_EQ(out.data, img.data);
}

TEST(Resize, MaskKeepsCodes) {
  LabelMask m(512, 512);
  for (int r = 0; r < 512; ++r)
    for (int c = 0; c < 512; ++c) m.set(c, r, static_cast<Label>((c / 37 + r / 53) % 4));
  const LabelMask out = resize(m, 256, 256);
  for (auto v : out.labels) EXPECT_LE(v, 3);
  EXPECT_EQ(out.width, 256);
}

TEST(Resize, MaskOmitsNoUnusedCodes) {
  LabelMask m(512, 512);
  for (int r = 0; r < 512; ++r)
    for (int c = 0; c < 512; ++c) m.set(c, r, c < 256 ? Label::LV : Label::LA);
  const LabelMask out = resize(m, 256, 256);
  EXPECT_EQ(out.count(Label::MYO), 0u);
  EXPECT_EQ(out.count(Label::Background), 0u);
}

TEST(Resize, CheckerboardMeanPreserved) {
  Image img(512, 512);
  double mean_in = 0.0;
  for (int r = 0; r < 512; ++r)
    for (int c = 0; c < 512; ++c) {
      img.at(c, r) = ((c / 3 + r / 3) % 2) ? 0.9f : 0.1f;
      mean_in += img.at(c, r);
    }
  mean_in /= 512.0 * 512.0;
  const Image out = resize(img, 256, 256);
  double mean_out = 0.0;
  for (float v : out.data) mean_out += v;
  mean_out /= 256.0 * 256.0;
  EXPECT_NEAR(mean_out, mean_in, 0.02);
}

TEST(FillPolygon, EquilateralTriangleMatchesBruteForce) {
  const double cx = 32.0, cy = 34.0, r = 22.0;
  std::vector<Point> tri;
  for (int k = 0; k < 3; ++k) {
    const double a = -M_PI / 2 + 2 * M_PI * k / 3;
    tri.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
  }
  std::size_t brute = 0;
  for (int row = 0; row < 64; ++row)
    for (int col = 0; col < 64; ++col) brute += inside_brute(tri, col + 0.5, row + 0.5);
  EXPECT_EQ(filled_count(tri, 64, 64), brute);
  EXPECT_GT(brute, 0u);
}

TEST(FillPolygon, RandomPolygonsMatchBruteForce) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-4.0, 44.0);
  std::uniform_int_distribution<int> nv(3, 12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Point> poly(nv(rng));
    for (Point& p : poly) p = {u(rng), u(rng)};
    if (trial % 4 == 0) {
      // Vertices on pixel centers exercise the half-open rule.
      for (Point& p : poly) p = {std::floor(p.x) + 0.5, std::floor(p.y) + 0.5};
    }
    std::vector<char> seen(40 * 40, 0);
    fill_polygon(std::span<const Point>(poly), 40, 40, [&](int c, int r) { seen[r * 40 + c] += 1; });
    for (int r = 0; r < 40; ++r)
      for (int c = 0; c < 40; ++c)
        ASSERT_EQ(seen[r * 40 + c], inside_brute(poly, c + 0.5, r + 0.5) ? 1 : 0) << trial << " " << c << "," << r;
  }
}

TEST(PolygonArea, UnitSquare) {
  const std::vector<Point> sq{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  EXPECT_DOUBLE_EQ(polygon_area(sq), 1.0);
}
