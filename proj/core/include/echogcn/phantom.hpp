#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "echogcn/clinical.hpp"
#include "echogcn/imaging.hpp"
#include "echogcn/keypoints.hpp"

namespace echogcn {

/// Closed interval used for sampled parameters.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Seeded random source. The engine is std::mt19937_64; the distributions are
/// written out here because the standard ones differ between library vendors.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double uniform(Range r) { return uniform(r.lo, r.hi); }
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t below(std::uint64_t n);  // [0, n)

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

/// Sampling ranges for the synthetic apical-view phantom (pixel units at the
/// output resolution). Local frame: u lateral, v along the long axis pointing
/// from the base toward the apex.
struct PhantomParams {
  int width = 256;
  int height = 256;
  Range base_x{122.0, 134.0};
  Range base_y{172.0, 184.0};
  Range rotation_deg{-12.0, 12.0};
  Range lv_half_width{26.0, 34.0};
  Range lv_half_length{72.0, 90.0};
  Range lv_center_offset{0.10, 0.20};  // ellipse center above the base, as a fraction of the half length
  Range myo_lateral{10.0, 15.0};
  Range myo_apical{9.0, 13.0};
  Range myo_asymmetry{-2.0, 2.0};  // thickness difference between the two walls
  Range la_depth{24.0, 32.0};
  Range la_extra_width{2.0, 6.0};  // beyond the LV base half width
  double sector_half_angle_deg = 42.0;
  double sector_radius = 250.0;
  double speckle = 0.25;
  double background = 0.30;
  double lv_intensity = 0.05;
  double myo_intensity = 0.65;
  double la_intensity = 0.10;
  int margin = 2;
};

/// One concrete phantom shape (pixel units).
struct PhantomGeometry {
  int width = 256;
  int height = 256;
  Point base;               // base center on the long axis
  double rotation_deg = 0;  // positive turns the apex toward +x
  double lv_half_width = 30;
  double lv_half_length = 80;
  double lv_center_offset = 12;  // pixels
  double myo_left = 12;
  double myo_right = 12;
  double myo_apical = 11;
  double la_depth = 28;
  double la_half_width = 34;
  Point sector_apex{128, 0};
  double sector_half_angle_deg = 42.0;
  double sector_radius = 250.0;

  /// Scales all lengths (and the base position about the sector apex).
  PhantomGeometry scaled(double s) const;
  /// Half width of the LV where it meets the base.
  double base_half_width() const;
};

struct Phantom {
  Image image;
  LabelMask mask;
  PhantomGeometry geometry;
};

/// Draws a geometry; throws Errc::InfeasibleGeometry when it cannot fit.
PhantomGeometry sample_geometry(Rng& rng, const PhantomParams& params);

/// Labels from geometry alone.
LabelMask render_mask(const PhantomGeometry& g);
/// True inside the imaging sector at pixel (col, row).
bool in_sector(const PhantomGeometry& g, int col, int row);
/// Intensity image with speckle for a mask.
Image render_image(const LabelMask& mask, const PhantomGeometry& g, const PhantomParams& params, Rng& rng);

/// Deterministic per seed.
Phantom generate_phantom(std::uint64_t seed, const PhantomParams& params = {});

struct AugmentConfig {
  double rotation_deg = 10.0;  // uniform in [-r, r]
  Range scale{0.9, 1.1};
  double crop_fraction = 0.9;  // smallest crop window side as a fraction of the image
  double brightness = 0.1;     // additive, uniform in [-b, b]
  double mirror_probability = 0.5;
  int max_retries = 20;

  static AugmentConfig identity() { return {0.0, {1.0, 1.0}, 1.0, 0.0, 0.0, 20}; }
};

/// One drawn augmentation.
struct AugmentParams {
  double rotation_deg = 0.0;
  double scale = 1.0;
  Point shift;  // normalized units
  double brightness = 0.0;
  bool mirror = false;
};

/// Applies the transform to both image and keypoints. Geometry acts about the
/// image center: p' = center + scale * R(p - center) + shift.
std::pair<Image, KeypointSet> apply_augmentation(const Image& img, const KeypointSet& kps, const AugmentParams& p);

/// Draws parameters until every keypoint stays inside [0, 1].
/// Throws Errc::RetriesExhausted after cfg.max_retries draws.
std::pair<Image, KeypointSet> augment(const Image& img, const KeypointSet& kps, const AugmentConfig& cfg,
                                      std::uint64_t seed);

/// One view of a synthetic exam: per cycle an ED frame and an ES frame whose
/// geometry is the ED one shrunk about the sector apex.
struct SyntheticRecording {
  std::vector<Image> images;
  std::vector<LabelMask> masks;
  std::vector<Cycle> cycles;
  std::vector<double> es_scales;
};

/// One cycle per entry of `es_scales`. Deterministic per seed; two views of
/// one patient share their scales so the true EF of cycle c is 1 - s_c^3.
SyntheticRecording generate_recording(std::uint64_t seed, const std::vector<double>& es_scales,
                                      const PhantomParams& params = {});

}  // namespace echogcn
