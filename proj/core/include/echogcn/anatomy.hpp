#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "echogcn/imaging.hpp"
#include "echogcn/keypoints.hpp"

namespace echogcn {

struct AnatomyConfig {
  /// LV pixels not covered by MYO must lie this close to the basal line.
  double basal_tolerance_px = 2.0;
  /// Optional imaging sector (nonzero = inside). Holes entirely outside the
  /// sector are ignored.
  std::vector<std::uint8_t> sector;
};

/// Mask-space criteria plus, for keypoint inputs, ring ordering criteria.
struct AnatomyReport {
  bool single_component_lv = false;
  bool single_component_myo = false;
  bool single_component_la = false;
  bool no_holes_lv = false;
  bool no_holes_myo = false;
  bool no_holes_la = false;
  bool no_holes_lv_myo = false;     // no pocket enclosed by LV∪MYO touching both
  bool no_holes_lv_myo_la = false;  // likewise for LV∪MYO∪LA
  bool myo_band_encloses_lv = false;
  bool la_adjacent_to_lv = false;
  /// Pointwise: every epi keypoint strictly outside its endo neighbor along
  /// the outward normal. Keypoint inputs only.
  std::optional<bool> ring_crossing_free;
  /// Segment test: open endo and epi polylines do not touch. Keypoint inputs only.
  std::optional<bool> rings_disjoint;

  /// Named criteria in a fixed order (unevaluated ones omitted).
  std::vector<std::pair<std::string, bool>> criteria() const;
  bool overall() const;
  /// Names of the failing criteria.
  std::vector<std::string> failures() const;
};

AnatomyReport check_mask(const LabelMask& mask, const AnatomyConfig& cfg = {});

/// Ring criteria on the keypoints, mask criteria on their rasterization at
/// width x height. Throws Errc::DegenerateGeometry from rasterization.
AnatomyReport check_keypoints(const KeypointSet& kps, int width = 256, int height = 256,
                              const AnatomyConfig& cfg = {});

/// Smallest value of (epi[i] - endo[i]) . n_i over the rings.
double min_ring_clearance(const KeypointSet& kps);
/// True when no segment of the open endo polyline touches one of the epi polyline.
bool polylines_disjoint(const std::vector<Point>& a, const std::vector<Point>& b);

}  // namespace echogcn
