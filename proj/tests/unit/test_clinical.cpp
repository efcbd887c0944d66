#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "echogcn/clinical.hpp"
#include "echogcn/phantom.hpp"
#include "helpers.hpp"

using namespace echogcn;
using echogcn::testing::thrown;

namespace {

// Base at the origin, apex at (0, length).
LvAxis vertical_axis(double length) {
  LvAxis a;
  a.base_mid = {0, 0};
  a.apex = {0, length};
  a.length = length;
  a.direction = {0, 1};
  return a;
}

// Half disk of radius r resting on the base line, bulging toward +y.
std::vector<Point> half_disk(double r, int vertices) {
  std::vector<Point> p;
  for (int i = 0; i <= vertices; ++i) {
    const double t = std::numbers::pi * i / vertices;
    p.push_back({r * std::cos(t), r * std::sin(t)});
  }
  return p;
}

double biplane_ml(const std::vector<Point>& poly, double length, int n) {
  const DiskSet d = disk_diameters(poly, vertical_axis(length), n);
  return simpson_biplane(d, d).volume_ml;
}

std::vector<Point> scaled(const std::vector<Point>& p, double s) {
  std::vector<Point> out;
  for (const Point& q : p) out.push_back(s * q);
  return out;
}

}  // namespace

TEST(Simpson, RectangleGivesCylinder) {
  const std::vector<Point> rect{{-10, 0}, {10, 0}, {10, 50}, {-10, 50}};
  const DiskSet d = disk_diameters(rect, vertical_axis(50), 20);
  for (double x : d.diameters) EXPECT_NEAR(x, 20.0, 1e-12);
  // pi/4 * 20^2 * 50 mm^3
  EXPECT_NEAR(simpson_biplane(d, d).volume_ml, std::numbers::pi * 100.0 * 50.0 / 1000.0, 1e-9);
}

TEST(Simpson, EllipticCylinderUsesBothViews) {
  const std::vector<Point> a{{-10, 0}, {10, 0}, {10, 40}, {-10, 40}}, b{{-5, 0}, {5, 0}, {5, 40}, {-5, 40}};
  const LvAxis ax = vertical_axis(40);
  EXPECT_NEAR(simpson_biplane(disk_diameters(a, ax), disk_diameters(b, ax)).volume_ml,
              std::numbers::pi / 4.0 * 20.0 * 10.0 * 40.0 / 1000.0, 1e-9);
}

TEST(Simpson, HemisphereConvergesToClosedForm) {
  const double r = 30.0;
  const double exact = 2.0 / 3.0 * std::numbers::pi * r * r * r / 1000.0;
  const std::vector<Point> poly = half_disk(r, 20000);
  EXPECT_LT(std::abs(biplane_ml(poly, r, 20) - exact) / exact, 0.02);
  EXPECT_LT(std::abs(biplane_ml(poly, r, 200) - exact) / exact, 0.0005);
}

TEST(Simpson, HalfDiskDiametersAreChords) {
  const double r = 10.0;
  const DiskSet d = disk_diameters(half_disk(r, 40000), vertical_axis(r), 10);
  for (int i = 0; i < 10; ++i) {
    const double y = (i + 0.5) / 10 * r;
    EXPECT_NEAR(d.diameters[i], 2 * std::sqrt(r * r - y * y), 1e-3) << i;
  }
}

TEST(Simpson, UsesLongerViewLength) {
  const std::vector<Point> rect{{-10, 0}, {10, 0}, {10, 50}, {-10, 50}};
  const DiskSet a = disk_diameters(rect, vertical_axis(50), 10);
  DiskSet b = a;
  b.length = 60;
  EXPECT_NEAR(simpson_biplane(a, b).volume_ml, std::numbers::pi / 4 * 400 * 60 / 1000.0, 1e-9);
}

TEST(Simpson, Errors) {
  const std::vector<Point> rect{{-10, 0}, {10, 0}, {10, 50}, {-10, 50}};
  const DiskSet a = disk_diameters(rect, vertical_axis(50), 10);
  const DiskSet b = disk_diameters(rect, vertical_axis(50), 12);
  EXPECT_EQ(thrown([&] { simpson_biplane(a, b); }), Errc::DimensionMismatch);
  EXPECT_EQ(thrown([&] { simpson_biplane(a, DiskSet{}); }), Errc::ViewMissing);
  const std::vector<Point> away{{100, 100}, {110, 100}, {110, 110}};
  EXPECT_EQ(thrown([&] { disk_diameters(away, vertical_axis(50), 10); }), Errc::EmptyChord);
  EXPECT_EQ(thrown([&] { disk_diameters(rect, vertical_axis(50), 0); }), Errc::OutOfRange);
}

TEST(Simpson, MaskChordsMatchPixelWidth) {
  LabelMask m(40, 60);
  for (int r = 5; r < 45; ++r)
    for (int c = 10; c < 30; ++c) m.set(c, r, Label::LV);
  LvAxis ax;
  const PixelSpacing s{0.5, 0.5};
  ax.base_mid = {10.0, 2.5};
  ax.apex = {10.0, 22.5};
  ax.length = 20.0;
  ax.direction = {0, 1};
  const DiskSet d = disk_diameters(m, ax, s, 20);
  for (double x : d.diameters) EXPECT_NEAR(x, 10.0, 1e-9);
}

TEST(Ef, ScaledPairIsExact) {
  const std::vector<Point> ed = half_disk(30.0, 4000);
  for (double s : {0.5, 0.8, 0.9}) {
    const double edv = biplane_ml(ed, 30.0, 20);
    const double esv = biplane_ml(scaled(ed, s), 30.0 * s, 20);
    EXPECT_NEAR(ejection_fraction(edv, esv), 1.0 - s * s * s, 1e-12) << s;
  }
}

TEST(Ef, InvariantToCommonScale) {
  const std::vector<Point> ed{{-12, 0}, {12, 0}, {9, 40}, {0, 55}, {-9, 40}};
  const std::vector<Point> es{{-10, 0}, {10, 0}, {7, 35}, {0, 45}, {-7, 35}};
  const double ef = ejection_fraction(biplane_ml(ed, 55, 20), biplane_ml(es, 45, 20));
  for (double k : {0.3, 1.7, 2.5}) {
    const double efk = ejection_fraction(biplane_ml(scaled(ed, k), 55 * k, 20), biplane_ml(scaled(es, k), 45 * k, 20));
    EXPECT_NEAR(efk, ef, 1e-12) << k;
  }
}

TEST(Ef, NonPositiveEdv) {
  EXPECT_EQ(thrown([] { ejection_fraction(0.0, 1.0); }), Errc::NonPositiveEDV);
  EXPECT_DOUBLE_EQ(ejection_fraction(100, 40), 0.6);
  EXPECT_DOUBLE_EQ(ensemble_ef(0.5, 0.6), 0.55);
}

TEST(Axis, FromPhantomKeypoints) {
  const KeypointSet k = extract_keypoints(generate_phantom(5).mask);
  const LvAxis a = lv_axis(k, 256, 256, {0.3, 0.3});
  EXPECT_GT(a.length, 10.0);
  EXPECT_NEAR(norm(a.direction), 1.0, 1e-12);
  // Apex sits above the base in image rows.
  EXPECT_LT(a.direction.y, 0.0);
}

namespace {

FrameSegmentation frame(const Phantom& ph, double agreement) {
  FrameSegmentation f;
  f.keypoints = extract_keypoints(ph.mask);
  f.agreement = agreement;
  return f;
}

ExamManifest two_cycle_manifest() {
  ExamManifest m;
  m.patient_id = "p1";
  m.a2c.cycles = {{0, 1}, {2, 3}};
  m.a4c.cycles = {{0, 1}, {2, 3}};
  m.a2c.spacing = m.a4c.spacing = {0.3, 0.3};
  return m;
}

ExamSegmentations exam_segs(double ag3) {
  PhantomParams big;
  PhantomParams small;
  small.lv_half_width = {20, 22};
  small.lv_half_length = {60, 64};
  ExamSegmentations s;
  for (int f = 0; f < 4; ++f) {
    const Phantom ph = generate_phantom(50 + f, f % 2 == 0 ? big : small);
    s.a4c[f] = frame(ph, f == 3 ? ag3 : 0.95);
    s.a2c[f] = frame(ph, 0.95);
  }
  return s;
}

}  // namespace

TEST(Exam, AveragesUsableCycles) {
  const EFResult r = exam_ef(two_cycle_manifest(), exam_segs(0.95));
  EXPECT_EQ(r.usable_cycles, 2);
  EXPECT_FALSE(r.excluded);
  ASSERT_EQ(r.cycles.size(), 2u);
  for (const CycleEF& c : r.cycles) {
    EXPECT_TRUE(c.usable);
    EXPECT_GT(c.edv, c.esv);
    EXPECT_DOUBLE_EQ(c.ef, (c.edv - c.esv) / c.edv);
  }
  EXPECT_DOUBLE_EQ(r.mean_ef, 0.5 * (r.cycles[0].ef + r.cycles[1].ef));
}

TEST(Exam, FilterDropsCycleWithLowAgreementFrame) {
  const EFResult r = exam_ef(two_cycle_manifest(), exam_segs(0.5), 0.85);
  EXPECT_EQ(r.usable_cycles, 1);
  EXPECT_TRUE(r.cycles[0].usable);
  EXPECT_FALSE(r.cycles[1].usable);
  EXPECT_DOUBLE_EQ(r.mean_ef, r.cycles[0].ef);
  // Without the filter the frame still counts.
  EXPECT_EQ(exam_ef(two_cycle_manifest(), exam_segs(0.5)).usable_cycles, 2);
}

TEST(Exam, MissingAgreementCountsAsFiltered) {
  ExamSegmentations s = exam_segs(0.95);
  s.a2c[0].agreement.reset();
  s.a4c[2].agreement.reset();
  const EFResult r = exam_ef(two_cycle_manifest(), s, 0.85);
  EXPECT_TRUE(r.excluded);
  EXPECT_EQ(r.usable_cycles, 0);
}

TEST(Exam, NoUsableCycleWithoutFilterThrows) {
  ExamSegmentations s = exam_segs(0.95);
  s.a4c.erase(1);
  s.a4c.erase(3);
  EXPECT_EQ(thrown([&] { exam_ef(two_cycle_manifest(), s); }), Errc::NoUsableCycle);
}

TEST(Exam, UnusableMaskYieldsNoVolume) {
  FrameSegmentation bad;
  bad.mask = LabelMask(64, 64);
  const FrameSegmentation good = frame(generate_phantom(1), 1.0);
  EXPECT_FALSE(frame_volume(bad, {}, good, {}, 256, 256).has_value());
  EXPECT_TRUE(frame_volume(good, {}, good, {}, 256, 256).has_value());
  EXPECT_FALSE(usable(bad.mask.value()));
  EXPECT_TRUE(usable(generate_phantom(1).mask));
}

TEST(Exam, MaskAndKeypointVolumesAgree) {
  const Phantom ph = generate_phantom(8);
  FrameSegmentation km = frame(ph, 1.0), mm;
  mm.mask = ph.mask;
  const double vk = frame_volume(km, {0.3, 0.3}, km, {0.3, 0.3}, 256, 256)->volume_ml;
  const double vm = frame_volume(mm, {0.3, 0.3}, mm, {0.3, 0.3}, 256, 256)->volume_ml;
  EXPECT_NEAR(vk / vm, 1.0, 0.05);
}
