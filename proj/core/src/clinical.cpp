#include "echogcn/clinical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "echogcn/error.hpp"

namespace echogcn {

namespace {

constexpr const char* kModule = "clinical";

Point to_mm(Point normalized, int w, int h, PixelSpacing s) { return {normalized.x * w * s.sx, normalized.y * h * s.sy}; }

Point slab_center(const LvAxis& axis, int i, int n) {
  return axis.base_mid + ((i + 0.5) / n * axis.length) * axis.direction;
}

DiskSet finish(std::vector<double> d, const LvAxis& axis) {
  DiskSet out;
  out.length = axis.length;
  out.empty.resize(d.size());
  bool any = false;
  for (std::size_t i = 0; i < d.size(); ++i) {
    out.empty[i] = d[i] <= 0.0;
    any = any || !out.empty[i];
  }
  if (!any) throw Error(Errc::EmptyChord, kModule, "no slab intersects the LV");
  out.diameters = std::move(d);
  return out;
}

void check_disks(int n) {
  if (n < 1) throw Error(Errc::OutOfRange, kModule, "disk count must be >= 1");
}

const FrameSegmentation* find_frame(const std::map<int, FrameSegmentation>& frames, int index) {
  const auto it = frames.find(index);
  return it == frames.end() ? nullptr : &it->second;
}

bool retained(const FrameSegmentation* f, std::optional<double> threshold) {
  if (f == nullptr) return false;
  if (!threshold) return true;
  return f->agreement && *f->agreement >= *threshold;
}

std::optional<DiskSet> view_disks(const FrameSegmentation& f, PixelSpacing s, int w, int h, int disks) {
  try {
    if (f.keypoints) {
      const LvAxis axis = lv_axis(*f.keypoints, w, h, s);
      return disk_diameters(*f.keypoints, axis, w, h, s, disks);
    }
    if (f.mask) {
      const KeypointSet k = extract_keypoints(*f.mask);
      const LvAxis axis = lv_axis(k, f.mask->width, f.mask->height, s);
      return disk_diameters(*f.mask, axis, s, disks);
    }
  } catch (const Error&) {
    // An unusable segmentation simply yields no volume.
  }
  return std::nullopt;
}

}  // namespace

LvAxis lv_axis(const KeypointSet& kps, int width, int height, PixelSpacing spacing) {
  const Landmarks lm = landmarks_of(kps);
  LvAxis axis;
  axis.apex = to_mm(lm.E, width, height, spacing);
  axis.base_mid = 0.5 * (to_mm(lm.A, width, height, spacing) + to_mm(lm.B, width, height, spacing));
  axis.length = distance(axis.apex, axis.base_mid);
  if (!(axis.length > 1e-12)) throw Error(Errc::MissingLandmark, kModule, "apex coincides with the base midpoint");
  axis.direction = (1.0 / axis.length) * (axis.apex - axis.base_mid);
  return axis;
}

DiskSet disk_diameters(const std::vector<Point>& poly, const LvAxis& axis, int n) {
  check_disks(n);
  const Point perp{-axis.direction.y, axis.direction.x};
  std::vector<double> d(n, 0.0);
  std::vector<double> ts;
  for (int i = 0; i < n; ++i) {
    const Point c = slab_center(axis, i, n);
    ts.clear();
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Point p = poly[k];
      const Point q = poly[(k + 1) % poly.size()];
      const double fp = dot(p - c, axis.direction);
      const double fq = dot(q - c, axis.direction);
      if ((fp <= 0.0 && fq > 0.0) || (fq <= 0.0 && fp > 0.0)) {
        const Point x = p + (fp / (fp - fq)) * (q - p);
        ts.push_back(dot(x - c, perp));
      }
    }
    std::sort(ts.begin(), ts.end());
    for (std::size_t k = 0; k + 1 < ts.size(); k += 2) d[i] += ts[k + 1] - ts[k];
  }
  return finish(std::move(d), axis);
}

DiskSet disk_diameters(const KeypointSet& kps, const LvAxis& axis, int width, int height, PixelSpacing spacing, int n) {
  std::vector<Point> poly;
  poly.reserve(kps.endo.size());
  for (const Point& p : kps.endo) poly.push_back(to_mm(p, width, height, spacing));
  return disk_diameters(poly, axis, n);
}

DiskSet disk_diameters(const LabelMask& mask, const LvAxis& axis, PixelSpacing spacing, int n) {
  check_disks(n);
  if (mask.count(Label::LV) == 0) throw Error(Errc::EmptyChord, kModule, "mask has no LV pixels");
  const Point perp{-axis.direction.y, axis.direction.x};
  // Pixel-space line c + t * step, t in mm.
  const Point step{perp.x / spacing.sx, perp.y / spacing.sy};
  const double reach = std::hypot(mask.width * spacing.sx, mask.height * spacing.sy);
  std::vector<double> d(n, 0.0);
  std::vector<double> ts;
  for (int i = 0; i < n; ++i) {
    const Point cm = slab_center(axis, i, n);
    const Point c{cm.x / spacing.sx, cm.y / spacing.sy};
    ts.assign({-reach, reach});
    auto crossings = [&](double origin, double slope, int limit) {
      if (slope == 0.0) return;
      for (int g = 0; g <= limit; ++g) {
        const double t = (g - origin) / slope;
        if (t > -reach && t < reach) ts.push_back(t);
      }
    };
    crossings(c.x, step.x, mask.width);
    crossings(c.y, step.y, mask.height);
    std::sort(ts.begin(), ts.end());
    for (std::size_t k = 0; k + 1 < ts.size(); ++k) {
      const double mid = 0.5 * (ts[k] + ts[k + 1]);
      const int col = static_cast<int>(std::floor(c.x + mid * step.x));
      const int row = static_cast<int>(std::floor(c.y + mid * step.y));
      if (mask.contains(col, row) && mask.at(col, row) == Label::LV) d[i] += ts[k + 1] - ts[k];
    }
  }
  return finish(std::move(d), axis);
}

VolumeResult simpson_biplane(const DiskSet& a4c, const DiskSet& a2c) {
  if (a4c.diameters.empty() || a2c.diameters.empty()) throw Error(Errc::ViewMissing, kModule, "a view has no disks");
  if (a4c.diameters.size() != a2c.diameters.size()) {
    throw Error(Errc::DimensionMismatch, kModule, "views have different disk counts");
  }
  VolumeResult v;
  v.length_a4c = a4c.length;
  v.length_a2c = a2c.length;
  v.a = a4c.diameters;
  v.b = a2c.diameters;
  const double n = static_cast<double>(a4c.diameters.size());
  const double l = std::max(a4c.length, a2c.length);
  double sum = 0.0;
  for (std::size_t i = 0; i < a4c.diameters.size(); ++i) sum += a4c.diameters[i] * a2c.diameters[i];
  v.volume_ml = std::numbers::pi / 4.0 * (l / n) * sum / 1000.0;
  return v;
}

double ejection_fraction(double edv, double esv) {
  if (!(edv > 0.0)) throw Error(Errc::NonPositiveEDV, kModule, "end-diastolic volume must be positive");
  return (edv - esv) / edv;
}

double ensemble_ef(double ef_a, double ef_b) { return 0.5 * (ef_a + ef_b); }

bool usable(const KeypointSet&) { return true; }

bool usable(const LabelMask& mask) {
  try {
    extract_keypoints(mask);
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::optional<VolumeResult> frame_volume(const FrameSegmentation& a4c, PixelSpacing s4, const FrameSegmentation& a2c,
                                         PixelSpacing s2, int width, int height, int disks) {
  const auto d4 = view_disks(a4c, s4, width, height, disks);
  const auto d2 = view_disks(a2c, s2, width, height, disks);
  if (!d4 || !d2) return std::nullopt;
  return simpson_biplane(*d4, *d2);
}

EFResult exam_ef(const ExamManifest& manifest, const ExamSegmentations& segs, std::optional<double> filter_threshold,
                 int disks) {
  EFResult out;
  const std::size_t n = std::min(manifest.a2c.cycles.size(), manifest.a4c.cycles.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    CycleEF c;
    c.index = static_cast<int>(k);
    const Cycle& c2 = manifest.a2c.cycles[k];
    const Cycle& c4 = manifest.a4c.cycles[k];
    const FrameSegmentation* ed4 = find_frame(segs.a4c, c4.ed);
    const FrameSegmentation* es4 = find_frame(segs.a4c, c4.es);
    const FrameSegmentation* ed2 = find_frame(segs.a2c, c2.ed);
    const FrameSegmentation* es2 = find_frame(segs.a2c, c2.es);
    const bool kept = retained(ed4, filter_threshold) && retained(es4, filter_threshold) &&
                      retained(ed2, filter_threshold) && retained(es2, filter_threshold);
    if (kept) {
      const auto ed = frame_volume(*ed4, manifest.a4c.spacing, *ed2, manifest.a2c.spacing, segs.width, segs.height, disks);
      const auto es = frame_volume(*es4, manifest.a4c.spacing, *es2, manifest.a2c.spacing, segs.width, segs.height, disks);
      if (ed && es && ed->volume_ml > 0.0) {
        c.usable = true;
        c.edv = ed->volume_ml;
        c.esv = es->volume_ml;
        c.ef = ejection_fraction(c.edv, c.esv);
        sum += c.ef;
        ++out.usable_cycles;
      }
    }
    out.cycles.push_back(c);
  }
  if (out.usable_cycles == 0) {
    if (!filter_threshold) {
      throw Error(Errc::NoUsableCycle, kModule, "patient " + manifest.patient_id + " has no usable cycle");
    }
    out.excluded = true;
    return out;
  }
  out.mean_ef = sum / out.usable_cycles;
  return out;
}

}  // namespace echogcn
