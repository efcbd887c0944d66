#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "echogcn/imaging.hpp"
#include "echogcn/keypoints.hpp"

namespace echogcn {

/// LV long axis in millimeters: apex E and base midpoint M of A-B.
struct LvAxis {
  Point apex;       // mm
  Point base_mid;   // mm
  double length = 0;  // mm
  Point direction;  // unit, base -> apex
};

/// Axis of a keypoint set rendered at width x height with `spacing`.
/// Throws Errc::MissingLandmark when E coincides with M.
LvAxis lv_axis(const KeypointSet& kps, int width, int height, PixelSpacing spacing);

struct DiskSet {
  std::vector<double> diameters;  // mm, base to apex
  std::vector<bool> empty;        // slab without LV
  double length = 0;              // mm
};

/// Chords perpendicular to the axis at heights (i + 0.5) / n through the
/// closed endo polygon. Throws Errc::EmptyChord when every chord is empty.
DiskSet disk_diameters(const KeypointSet& kps, const LvAxis& axis, int width, int height, PixelSpacing spacing,
                       int n = 20);
/// Same chords measured on the LV pixels of a mask (exact pixel crossings).
DiskSet disk_diameters(const LabelMask& mask, const LvAxis& axis, PixelSpacing spacing, int n = 20);
/// Chords through a polygon given directly in mm.
DiskSet disk_diameters(const std::vector<Point>& polygon_mm, const LvAxis& axis, int n = 20);

struct VolumeResult {
  double volume_ml = 0;
  double length_a2c = 0;
  double length_a4c = 0;
  std::vector<double> a;  // A4C diameters, mm
  std::vector<double> b;  // A2C diameters, mm
};

/// V = pi/4 * L/N * sum a_i b_i with L the longer view length.
/// Throws Errc::ViewMissing for an empty view and Errc::DimensionMismatch for
/// unequal disk counts.
VolumeResult simpson_biplane(const DiskSet& a4c, const DiskSet& a2c);

/// (edv - esv) / edv. Throws Errc::NonPositiveEDV.
double ejection_fraction(double edv, double esv);

double ensemble_ef(double ef_a, double ef_b);

/// Keypoints are always usable; masks when keypoint extraction succeeds.
bool usable(const KeypointSet& kps);
bool usable(const LabelMask& mask);

struct Cycle {
  int ed = 0;
  int es = 0;
};

struct Recording {
  std::vector<std::string> frames;  // image paths, relative to the manifest
  std::vector<Cycle> cycles;
  PixelSpacing spacing;
};

struct ExamReference {
  std::optional<double> ef;
  std::optional<double> edv;
  std::optional<double> esv;
};

struct ExamManifest {
  std::string patient_id;
  Recording a2c;
  Recording a4c;
  ExamReference reference;
};

/// Segmentation of one frame: keypoints when the model produces them,
/// otherwise a mask. `agreement` is the inter-model Dice of the frame.
struct FrameSegmentation {
  std::optional<KeypointSet> keypoints;
  std::optional<LabelMask> mask;
  std::optional<double> agreement;
};

struct ExamSegmentations {
  int width = 256;
  int height = 256;
  std::map<int, FrameSegmentation> a2c;  // by frame index
  std::map<int, FrameSegmentation> a4c;
};

struct CycleEF {
  int index = 0;
  bool usable = false;
  double edv = 0;
  double esv = 0;
  double ef = 0;
};

struct EFResult {
  std::vector<CycleEF> cycles;
  double mean_ef = 0;
  int usable_cycles = 0;
  bool excluded = false;
};

/// Biplane volume of one A4C/A2C frame pair; nullopt when either is unusable.
std::optional<VolumeResult> frame_volume(const FrameSegmentation& a4c, PixelSpacing s4, const FrameSegmentation& a2c,
                                         PixelSpacing s2, int width, int height, int disks = 20);

/// Per-cycle EF averaged over usable cycles. Cycles pair by index across the
/// two views. With `filter_threshold`, frames whose agreement is missing or
/// below it are dropped first and a patient without a complete cycle is
/// marked excluded. Without it, no usable cycle throws Errc::NoUsableCycle.
EFResult exam_ef(const ExamManifest& manifest, const ExamSegmentations& segs,
                 std::optional<double> filter_threshold = std::nullopt, int disks = 20);

}  // namespace echogcn
