#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "echogcn/metrics.hpp"
#include "echogcn/phantom.hpp"
#include "helpers.hpp"

using namespace echogcn;
using echogcn::testing::thrown;

namespace {

LabelMask random_mask(int w, int h, Rng& rng) {
  LabelMask m(w, h);
  for (auto& v : m.labels) v = static_cast<std::uint8_t>(rng.below(4));
  return m;
}

double brute_dice(const LabelMask& a, const LabelMask& b, std::initializer_list<Label> set) {
  auto in = [&](std::uint8_t v) {
    return std::any_of(set.begin(), set.end(), [&](Label l) { return v == static_cast<std::uint8_t>(l); });
  };
  long both = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    both += in(a.labels[i]) && in(b.labels[i]);
    na += in(a.labels[i]);
    nb += in(b.labels[i]);
  }
  return na + nb == 0 ? 1.0 : 2.0 * both / static_cast<double>(na + nb);
}

double brute_hausdorff(const std::vector<Point>& a, const std::vector<Point>& b, PixelSpacing s) {
  auto d = [&](Point p, Point q) { return std::hypot((p.x - q.x) * s.sx, (p.y - q.y) * s.sy); };
  double h = 0;
  for (const Point& p : a) {
    double m = std::numeric_limits<double>::infinity();
    for (const Point& q : b) m = std::min(m, d(p, q));
    h = std::max(h, m);
  }
  for (const Point& q : b) {
    double m = std::numeric_limits<double>::infinity();
    for (const Point& p : a) m = std::min(m, d(p, q));
    h = std::max(h, m);
  }
  return h;
}

// Two-sided exact p by enumerating sign flips of the ranks.
double brute_wilcoxon_p(const std::vector<double>& diffs) {
  std::vector<double> nz;
  for (double d : diffs) {
    if (d != 0) nz.push_back(d);
  }
  const int n = static_cast<int>(nz.size());
  std::vector<double> ranks(n);
  for (int i = 0; i < n; ++i) {
    int less = 0, equal = 0;
    for (int j = 0; j < n; ++j) {
      less += std::abs(nz[j]) < std::abs(nz[i]);
      equal += std::abs(nz[j]) == std::abs(nz[i]);
    }
    ranks[i] = less + (equal + 1) / 2.0;
  }
  double w = 0, total = 0;
  for (int i = 0; i < n; ++i) {
    if (nz[i] > 0) w += ranks[i];
    total += ranks[i];
  }
  const double stat = std::min(w, total - w);
  long hits = 0;
  for (long mask = 0; mask < (1L << n); ++mask) {
    double s = 0;
    for (int i = 0; i < n; ++i) {
      if (mask >> i & 1) s += ranks[i];
    }
    hits += s <= stat + 1e-9;
  }
  return std::min(1.0, 2.0 * hits / static_cast<double>(1L << n));
}

}  // namespace

TEST(Dice, MatchesPixelCountOracleOnRandomMasks) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const LabelMask a = random_mask(16, 16, rng), b = random_mask(16, 16, rng);
    EXPECT_DOUBLE_EQ(dice(a, b, {Label::LV}), brute_dice(a, b, {Label::LV}));
    EXPECT_DOUBLE_EQ(dice(a, b, {Label::MYO}), brute_dice(a, b, {Label::MYO}));
    EXPECT_DOUBLE_EQ(dice(a, b, {Label::LA}), brute_dice(a, b, {Label::LA}));
    EXPECT_DOUBLE_EQ(dice(a, b, {Label::LV, Label::MYO}), brute_dice(a, b, {Label::LV, Label::MYO}));
  }
}

TEST(Dice, EdgeCases) {
  const LabelMask empty(8, 8);
  EXPECT_EQ(dice(empty, empty, {Label::LV}), 1.0);
  LabelMask a(8, 8);
  a.set(1, 1, Label::LV);
  EXPECT_EQ(dice(a, empty, {Label::LV}), 0.0);
  EXPECT_EQ(dice(a, a, {Label::LV}), 1.0);
  EXPECT_EQ(thrown([&] { dice(a, LabelMask(8, 9), {Label::LV}); }), Errc::DimensionMismatch);
}

TEST(Dice, CombinedIsMeanOfLvAndLvMyo) {
  Rng rng(2);
  const LabelMask a = random_mask(16, 16, rng), b = random_mask(16, 16, rng);
  EXPECT_DOUBLE_EQ(combined_dice(a, b),
                   0.5 * (brute_dice(a, b, {Label::LV}) + brute_dice(a, b, {Label::LV, Label::MYO})));
}

TEST(Dice, InterModelModes) {
  Rng rng(3);
  const LabelMask a = random_mask(16, 16, rng), b = random_mask(16, 16, rng);
  EXPECT_DOUBLE_EQ(inter_model_dice(a, b), (brute_dice(a, b, {Label::LV}) + brute_dice(a, b, {Label::MYO}) +
                                            brute_dice(a, b, {Label::LA})) /
                                               3.0);
  EXPECT_EQ(inter_model_dice(a, b, InterModelMode::ForegroundUnion),
            brute_dice(a, b, {Label::LV, Label::MYO, Label::LA}));
  EXPECT_EQ(inter_model_dice(a, b, InterModelMode::LvOnly), brute_dice(a, b, {Label::LV}));
}

TEST(Hausdorff, MatchesQuadraticOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    Contour a, b;
    const int na = 1 + static_cast<int>(rng.below(30)), nb = 1 + static_cast<int>(rng.below(30));
    for (int i = 0; i < na; ++i) a.points.push_back({rng.uniform(0, 16), rng.uniform(0, 16)});
    for (int i = 0; i < nb; ++i) b.points.push_back({rng.uniform(0, 16), rng.uniform(0, 16)});
    const PixelSpacing s{rng.uniform(0.2, 1.5), rng.uniform(0.2, 1.5)};
    EXPECT_DOUBLE_EQ(hausdorff(a, b, s), brute_hausdorff(a.points, b.points, s));
  }
}

TEST(Hausdorff, OnTracedContoursOfRandomMasks) {
  Rng rng(5);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const LabelMask a = random_mask(16, 16, rng), b = random_mask(16, 16, rng);
    const Contour ca = extract_contour(a, Label::LV), cb = extract_contour(b, Label::LV);
    EXPECT_DOUBLE_EQ(hausdorff(ca, cb), brute_hausdorff(ca.points, cb.points, {}));
    ++checked;
  }
  EXPECT_EQ(checked, 200);
}

TEST(Hausdorff, ScalesWithSpacingAndRejectsEmpty) {
  const Contour a{{{0, 0}, {3, 0}}}, b{{{0, 0}}};
  EXPECT_DOUBLE_EQ(hausdorff(a, b), 3.0);
  EXPECT_DOUBLE_EQ(hausdorff(a, b, {0.5, 2.0}), 1.5);
  EXPECT_EQ(thrown([&] { hausdorff(a, Contour{}); }), Errc::EmptyContour);
}

TEST(Evaluate, IdenticalPhantomMasks) {
  const LabelMask m = generate_phantom(9).mask;
  const MetricReport r = evaluate_masks(m, m, {0.3, 0.3});
  EXPECT_EQ(r.dice_lv, 1.0);
  EXPECT_EQ(r.dice_myo, 1.0);
  EXPECT_EQ(r.dice_la, 1.0);
  EXPECT_EQ(r.dice_combined, 1.0);
  ASSERT_TRUE(r.hausdorff_endo && r.hausdorff_epi && r.hausdorff_combined);
  EXPECT_EQ(*r.hausdorff_endo, 0.0);
  EXPECT_EQ(*r.hausdorff_combined, 0.0);
}

TEST(Evaluate, MissingStructureLeavesHausdorffEmpty) {
  const LabelMask m = generate_phantom(10).mask;
  const MetricReport r = evaluate_masks(LabelMask(m.width, m.height), m);
  EXPECT_EQ(r.dice_lv, 0.0);
  EXPECT_FALSE(r.hausdorff_endo.has_value());
  EXPECT_FALSE(r.hausdorff_combined.has_value());
}

TEST(Wilcoxon, ExactOneToFive) {
  const std::vector<double> d{1, 2, 3, 4, 5};
  const WilcoxonResult r = wilcoxon_signed_rank(d);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.n, 5);
  EXPECT_DOUBLE_EQ(r.w_plus, 15.0);
  EXPECT_DOUBLE_EQ(r.statistic, 0.0);
  EXPECT_DOUBLE_EQ(r.p_value, 0.0625);
}

TEST(Wilcoxon, SymmetricPairGivesOne) {
  const std::vector<double> d{-1, 1};
  EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(d).p_value, 1.0);
}

TEST(Wilcoxon, ZerosDroppedAndTiesAveraged) {
  const std::vector<double> d{0, 1, 1, 2, -3, 0};
  const WilcoxonResult r = wilcoxon_signed_rank(d);
  EXPECT_EQ(r.n, 4);
  EXPECT_DOUBLE_EQ(r.w_plus, 6.0);  // ranks 1.5 + 1.5 + 3
  EXPECT_DOUBLE_EQ(r.statistic, 4.0);
  EXPECT_DOUBLE_EQ(r.p_value, brute_wilcoxon_p(d));
}

TEST(Wilcoxon, ExactMatchesEnumerationOracle) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> d(1 + rng.below(12));
    // Coarse values so ties occur.
    for (double& x : d) x = std::round(rng.uniform(-4, 6));
    if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0; })) d[0] = 1;
    EXPECT_NEAR(wilcoxon_exact(d).p_value, brute_wilcoxon_p(d), 1e-12) << trial;
  }
}

TEST(Wilcoxon, NormalApproximationCloseToExactAtTwelve) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> d(12);
    for (double& x : d) x = rng.uniform(-1, 1.5);
    const double pe = wilcoxon_exact(d).p_value, pn = wilcoxon_normal(d).p_value;
    EXPECT_NEAR(pe, pn, 0.03) << trial;
  }
  std::vector<double> d(13, 1.0);
  for (int i = 0; i < 13; ++i) d[i] = (i % 3 == 0 ? -1 : 1) * (i + 1.0);
  EXPECT_FALSE(wilcoxon_signed_rank(d).exact);
}

TEST(Wilcoxon, AllZeroThrows) {
  const std::vector<double> d{0, 0, 0};
  EXPECT_EQ(thrown([&] { wilcoxon_signed_rank(d); }), Errc::AllZeroDifferences);
}

TEST(BlandAltman, SymmetricDifferences) {
  const std::vector<double> ref{10, 20, 30}, automatic{8, 20, 32};
  const BlandAltman ba = bland_altman(automatic, ref);
  EXPECT_NEAR(ba.bias, 0.0, 1e-12);
  EXPECT_NEAR(ba.sd, 2.0, 1e-12);
  EXPECT_NEAR(ba.loa_low, -3.92, 1e-12);
  EXPECT_NEAR(ba.loa_high, 3.92, 1e-12);
}

TEST(BlandAltman, LengthErrors) {
  const std::vector<double> a{1, 2}, b{1}, one{1};
  EXPECT_EQ(thrown([&] { bland_altman(a, b); }), Errc::LengthMismatch);
  EXPECT_EQ(thrown([&] { bland_altman(one, one); }), Errc::LengthMismatch);
}

TEST(Mae, MeanAndSampleSdOfAbsoluteErrors) {
  const std::vector<double> ref{10, 20, 30}, automatic{8, 20, 32};
  const MeanSd m = mae(automatic, ref);
  EXPECT_NEAR(m.mean, 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.sd, std::sqrt(4.0 / 3.0), 1e-12);
  const std::vector<double> b{1};
  EXPECT_EQ(thrown([&] { mae(automatic, b); }), Errc::LengthMismatch);
}

TEST(MeanSd, SingleValueHasZeroSd) {
  const std::vector<double> v{3.5};
  const MeanSd m = mean_sd(v);
  EXPECT_EQ(m.mean, 3.5);
  EXPECT_EQ(m.sd, 0.0);
}
