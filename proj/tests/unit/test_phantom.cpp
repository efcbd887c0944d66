#include <gtest/gtest.h>

#include "echogcn/phantom.hpp"
#include "helpers.hpp"

using namespace echogcn;
using echogcn::testing::thrown;

namespace {

Image random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Image img(w, h);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

bool in_unit_square(const KeypointSet& k) {
  for (const auto* arr : {&k.endo, &k.epi, &k.la})
    for (const Point& p : *arr)
      if (p.x < 0 || p.x > 1 || p.y < 0 || p.y > 1) return false;
  return true;
}

}  // namespace

TEST(Rng, DeterministicAndInRange) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(a.below(7), 7u);
    b.below(7);
  }
}

TEST(Rng, NormalMoments) {
  Rng r(3);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Phantom, DeterministicPerSeed) {
  const Phantom a = generate_phantom(17), b = generate_phantom(17), c = generate_phantom(18);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_EQ(a.image.data, b.image.data);
  EXPECT_NE(a.mask, c.mask);
}

TEST(Phantom, StructuresInsideSectorAndImageInRange) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Phantom ph = generate_phantom(seed);
    EXPECT_GT(ph.mask.count(Label::LV), 0u);
    EXPECT_GT(ph.mask.count(Label::MYO), 0u);
    EXPECT_GT(ph.mask.count(Label::LA), 0u);
    for (int r = 0; r < ph.mask.height; ++r)
      for (int c = 0; c < ph.mask.width; ++c) {
        if (ph.mask.at(c, r) != Label::Background) ASSERT_TRUE(in_sector(ph.geometry, c, r)) << seed;
        ASSERT_GE(ph.image.at(c, r), 0.0f);
        ASSERT_LE(ph.image.at(c, r), 1.0f);
      }
  }
}

TEST(Phantom, ScaledGeometryScalesArea) {
  Rng rng(1);
  const PhantomGeometry g = sample_geometry(rng, {});
  const double a1 = static_cast<double>(render_mask(g).count(Label::LV));
  const double a2 = static_cast<double>(render_mask(g.scaled(0.8)).count(Label::LV));
  EXPECT_NEAR(a2 / a1, 0.64, 0.03);
}

TEST(Phantom, InfeasibleGeometry) {
  PhantomParams p;
  p.width = p.height = 32;
  EXPECT_EQ(thrown([&] { generate_phantom(1, p); }), Errc::InfeasibleGeometry);
}

TEST(Augment, IdentityIsExact) {
  const Phantom ph = generate_phantom(2);
  const KeypointSet k = extract_keypoints(ph.mask);
  const auto [img, kk] = augment(ph.image, k, AugmentConfig::identity(), 9);
  EXPECT_EQ(img.data, ph.image.data);
  EXPECT_EQ(kk, k);
}

TEST(Augment, QuarterTurnPermutesPixelsAndPoints) {
  const Image img = random_image(16, 16, 5);
  KeypointSet k = extract_keypoints(generate_phantom(3).mask);
  AugmentParams p;
  p.rotation_deg = 90;
  const auto [out, kk] = apply_augmentation(img, k, p);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) EXPECT_NEAR(out.at(c, r), img.at(r, 15 - c), 1e-5) << c << "," << r;
  for (std::size_t i = 0; i < k.endo.size(); ++i) {
    EXPECT_NEAR(kk.endo[i].x, 1.0 - k.endo[i].y, 1e-12);
    EXPECT_NEAR(kk.endo[i].y, k.endo[i].x, 1e-12);
  }
}

TEST(Augment, MirrorFlipsColumnsAndKeypoints) {
  const Image img = random_image(12, 9, 6);
  const KeypointSet k = extract_keypoints(generate_phantom(4).mask);
  AugmentParams p;
  p.mirror = true;
  const auto [out, kk] = apply_augmentation(img, k, p);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 12; ++c) EXPECT_EQ(out.at(c, r), img.at(11 - c, r));
  EXPECT_EQ(kk, mirror_keypoints(k));
}

TEST(Augment, BrightnessClamps) {
  Image img(4, 4);
  img.data.assign(16, 0.95f);
  AugmentParams p;
  p.brightness = 0.1;
  const auto [out, kk] = apply_augmentation(img, extract_keypoints(generate_phantom(1).mask), p);
  for (float v : out.data) EXPECT_EQ(v, 1.0f);
}

TEST(Augment, DefaultConfigKeepsKeypointsInFrameAndIsSeeded) {
  const Phantom ph = generate_phantom(5);
  const KeypointSet k = extract_keypoints(ph.mask);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = augment(ph.image, k, AugmentConfig{}, s);
    const auto b = augment(ph.image, k, AugmentConfig{}, s);
    EXPECT_TRUE(in_unit_square(a.second));
    EXPECT_EQ(a.first.data, b.first.data);
    EXPECT_EQ(a.second, b.second);
  }
}

TEST(Augment, RetriesExhausted) {
  const Phantom ph = generate_phantom(6);
  AugmentConfig cfg = AugmentConfig::identity();
  cfg.scale = {3.0, 3.0};
  cfg.max_retries = 3;
  EXPECT_EQ(thrown([&] { augment(ph.image, extract_keypoints(ph.mask), cfg, 1); }), Errc::RetriesExhausted);
}

TEST(Recording, CyclesPairShrunkenEsFrames) {
  const SyntheticRecording a = generate_recording(12, {0.8, 0.85, 0.9}), b = generate_recording(12, {0.8, 0.85, 0.9});
  ASSERT_EQ(a.images.size(), 6u);
  ASSERT_EQ(a.cycles.size(), 3u);
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(a.cycles[c].ed, 2 * c);
    EXPECT_EQ(a.cycles[c].es, 2 * c + 1);
    const double ratio = static_cast<double>(a.masks[2 * c + 1].count(Label::LV)) / a.masks[2 * c].count(Label::LV);
    EXPECT_NEAR(ratio, a.es_scales[c] * a.es_scales[c], 0.03);
    EXPECT_TRUE(usable(a.masks[2 * c + 1]));
  }
  EXPECT_EQ(a.masks, b.masks);
  EXPECT_EQ(a.images[3].data, b.images[3].data);
  EXPECT_EQ(thrown([] { generate_recording(1, {}); }), Errc::OutOfRange);
  EXPECT_EQ(thrown([] { generate_recording(1, {1.2}); }), Errc::OutOfRange);
}
