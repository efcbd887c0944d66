#include "echogcn/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "echogcn/error.hpp"

namespace echogcn {

namespace {

constexpr const char* kModule = "phantom_data";

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

float bilinear(const Image& img, double x, double y) {
  // x, y in continuous pixel coordinates; pixel centers at +0.5.
  const double fx = x - 0.5;
  const double fy = y - 0.5;
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const double ax = fx - x0;
  const double ay = fy - y0;
  auto px = [&](int c, int r) -> double {
    if (c < 0 || r < 0 || c >= img.width || r >= img.height) return 0.0;
    return img.at(c, r);
  };
  const double top = (1 - ax) * px(x0, y0) + ax * px(x0 + 1, y0);
  const double bottom = (1 - ax) * px(x0, y0 + 1) + ax * px(x0 + 1, y0 + 1);
  return static_cast<float>((1 - ay) * top + ay * bottom);
}

}  // namespace

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  // Box-Muller, one draw per call.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

PhantomGeometry PhantomGeometry::scaled(double s) const {
  PhantomGeometry g = *this;
  g.base = sector_apex + s * (base - sector_apex);
  g.lv_half_width *= s;
  g.lv_half_length *= s;
  g.lv_center_offset *= s;
  g.myo_left *= s;
  g.myo_right *= s;
  g.myo_apical *= s;
  g.la_depth *= s;
  g.la_half_width *= s;
  return g;
}

double PhantomGeometry::base_half_width() const {
  const double t = lv_center_offset / lv_half_length;
  return lv_half_width * std::sqrt(std::max(0.0, 1.0 - t * t));
}

bool in_sector(const PhantomGeometry& g, int col, int row) {
  const Point p = pixel_center(col, row) - g.sector_apex;
  if (p.y <= 0.0) return false;
  if (norm(p) > g.sector_radius) return false;
  return std::abs(std::atan2(p.x, p.y)) <= deg2rad(g.sector_half_angle_deg);
}

LabelMask render_mask(const PhantomGeometry& g) {
  LabelMask m(g.width, g.height);
  const double th = deg2rad(g.rotation_deg);
  const Point du{std::cos(th), std::sin(th)};
  const Point dv{std::sin(th), -std::cos(th)};
  const double a = g.lv_half_width;
  const double b = g.lv_half_length;
  const double c0 = g.lv_center_offset;
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const Point q = pixel_center(c, r) - g.base;
      const double u = dot(q, du);
      const double v = dot(q, dv);
      Label l = Label::Background;
      if (v >= 0.0) {
        const double t = u < 0.0 ? g.myo_left : g.myo_right;
        const double lv = (u / a) * (u / a) + ((v - c0) / b) * ((v - c0) / b);
        const double ou = u / (a + t);
        const double ov = (v - c0) / (b + g.myo_apical);
        if (lv <= 1.0) {
          l = Label::LV;
        } else if (ou * ou + ov * ov <= 1.0) {
          l = Label::MYO;
        }
      } else {
        const double lu = u / g.la_half_width;
        const double lv = v / g.la_depth;
        if (lu * lu + lv * lv <= 1.0) l = Label::LA;
      }
      m.set(c, r, l);
    }
  }
  return m;
}

Image render_image(const LabelMask& mask, const PhantomGeometry& g, const PhantomParams& params, Rng& rng) {
  Image img(mask.width, mask.height);
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      const double n = rng.normal();
      if (!in_sector(g, c, r)) continue;
      double base = params.background;
      switch (mask.at(c, r)) {
        case Label::LV: base = params.lv_intensity; break;
        case Label::MYO: base = params.myo_intensity; break;
        case Label::LA: base = params.la_intensity; break;
        default: break;
      }
      img.at(c, r) = static_cast<float>(std::clamp(base * (1.0 + params.speckle * n), 0.0, 1.0));
    }
  }
  return img;
}

PhantomGeometry sample_geometry(Rng& rng, const PhantomParams& p) {
  PhantomGeometry g;
  g.width = p.width;
  g.height = p.height;
  g.base = {rng.uniform(p.base_x), rng.uniform(p.base_y)};
  g.rotation_deg = rng.uniform(p.rotation_deg);
  g.lv_half_width = rng.uniform(p.lv_half_width);
  g.lv_half_length = rng.uniform(p.lv_half_length);
  g.lv_center_offset = rng.uniform(p.lv_center_offset) * g.lv_half_length;
  const double t = rng.uniform(p.myo_lateral);
  const double skew = rng.uniform(p.myo_asymmetry);
  g.myo_left = t + 0.5 * skew;
  g.myo_right = t - 0.5 * skew;
  g.myo_apical = rng.uniform(p.myo_apical);
  g.la_depth = rng.uniform(p.la_depth);
  g.la_half_width = g.base_half_width() + rng.uniform(p.la_extra_width);
  g.sector_apex = {p.width / 2.0, 0.0};
  g.sector_half_angle_deg = p.sector_half_angle_deg;
  g.sector_radius = p.sector_radius;

  if (g.lv_half_width <= 0 || g.lv_half_length <= 0 || g.myo_left <= 0 || g.myo_right <= 0 || g.myo_apical <= 0 ||
      g.la_depth <= 0 || g.lv_center_offset >= g.lv_half_length) {
    throw Error(Errc::InfeasibleGeometry, kModule, "non-positive structure size");
  }
  const LabelMask m = render_mask(g);
  if (m.count(Label::LV) == 0 || m.count(Label::MYO) == 0 || m.count(Label::LA) == 0) {
    throw Error(Errc::InfeasibleGeometry, kModule, "sampled heart lies outside the image");
  }
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      if (m.at(c, r) == Label::Background) continue;
      const bool near_border = c < p.margin || r < p.margin || c >= m.width - p.margin || r >= m.height - p.margin;
      if (near_border || !in_sector(g, c, r)) {
        throw Error(Errc::InfeasibleGeometry, kModule, "sampled heart does not fit inside the sector");
      }
    }
  }
  return g;
}

Phantom generate_phantom(std::uint64_t seed, const PhantomParams& params) {
  Rng rng(seed);
  Phantom ph;
  ph.geometry = sample_geometry(rng, params);
  ph.mask = render_mask(ph.geometry);
  ph.image = render_image(ph.mask, ph.geometry, params, rng);
  return ph;
}

std::pair<Image, KeypointSet> apply_augmentation(const Image& img, const KeypointSet& kps, const AugmentParams& p) {
  const double w = img.width;
  const double h = img.height;
  const double th = deg2rad(p.rotation_deg);
  const double cs = std::cos(th);
  const double sn = std::sin(th);
  const Point center{w / 2.0, h / 2.0};
  const Point shift{p.shift.x * w, p.shift.y * h};

  auto forward = [&](Point q) {
    const Point d = q - center;
    return center + p.scale * Point{cs * d.x - sn * d.y, sn * d.x + cs * d.y} + shift;
  };
  auto inverse = [&](Point q) {
    const Point d = (1.0 / p.scale) * (q - center - shift);
    return center + Point{cs * d.x + sn * d.y, -sn * d.x + cs * d.y};
  };

  Image out(img.width, img.height);
  const bool identity = p.rotation_deg == 0.0 && p.scale == 1.0 && p.shift == Point{};
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const int sc = p.mirror ? img.width - 1 - c : c;
      double v;
      if (identity) {
        v = img.at(sc, r);
      } else {
        const Point src = inverse(pixel_center(sc, r));
        v = bilinear(img, src.x, src.y);
      }
      out.at(c, r) = static_cast<float>(std::clamp(v + p.brightness, 0.0, 1.0));
    }
  }

  KeypointSet k = kps;
  if (!identity) {
    for (auto* arr : {&k.endo, &k.epi, &k.la}) {
      for (Point& q : *arr) q = to_normalized(forward(to_pixels(q, img.width, img.height)), img.width, img.height);
    }
  }
  if (p.mirror) k = mirror_keypoints(k);
  return {std::move(out), std::move(k)};
}

std::pair<Image, KeypointSet> augment(const Image& img, const KeypointSet& kps, const AugmentConfig& cfg,
                                      std::uint64_t seed) {
  Rng rng(seed);
  for (int attempt = 0; attempt < std::max(1, cfg.max_retries); ++attempt) {
    AugmentParams p;
    p.rotation_deg = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg);
    const double f = rng.uniform(std::min(cfg.crop_fraction, 1.0), 1.0);
    const double wx = rng.uniform(f / 2.0, 1.0 - f / 2.0);
    const double wy = rng.uniform(f / 2.0, 1.0 - f / 2.0);
    p.scale = rng.uniform(cfg.scale) / f;
    p.shift = {(0.5 - wx) / f, (0.5 - wy) / f};
    p.brightness = rng.uniform(-cfg.brightness, cfg.brightness);
    p.mirror = rng.bernoulli(cfg.mirror_probability);

    auto result = apply_augmentation(img, kps, p);
    bool in_frame = true;
    for (const auto* arr : {&result.second.endo, &result.second.epi, &result.second.la}) {
      for (const Point& q : *arr) in_frame = in_frame && q.x >= 0.0 && q.x <= 1.0 && q.y >= 0.0 && q.y <= 1.0;
    }
    if (in_frame) return result;
  }
  throw Error(Errc::RetriesExhausted, kModule, "augmented keypoints left the frame on every draw");
}

SyntheticRecording generate_recording(std::uint64_t seed, const std::vector<double>& es_scales,
                                      const PhantomParams& params) {
  if (es_scales.empty()) throw Error(Errc::OutOfRange, kModule, "a recording needs at least one cycle");
  for (double s : es_scales)
    if (!(s > 0.0 && s <= 1.0)) throw Error(Errc::OutOfRange, kModule, "ES scales must lie in (0, 1]");
  Rng rng(seed);
  SyntheticRecording rec;
  for (std::size_t c = 0; c < es_scales.size(); ++c) {
    const PhantomGeometry ed = sample_geometry(rng, params);
    const double s = es_scales[c];
    for (const PhantomGeometry& g : {ed, ed.scaled(s)}) {
      LabelMask m = render_mask(g);
      rec.images.push_back(render_image(m, g, params, rng));
      rec.masks.push_back(std::move(m));
    }
    rec.cycles.push_back({2 * static_cast<int>(c), 2 * static_cast<int>(c) + 1});
    rec.es_scales.push_back(s);
  }
  return rec;
}

}  // namespace echogcn
