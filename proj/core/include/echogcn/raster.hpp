#pragma once

#include "echogcn/imaging.hpp"
#include "echogcn/keypoints.hpp"

namespace echogcn {

/// Converts a keypoint set into a label mask.
///   LV  = fill of the endo polygon (closed by B -> A)
///   MYO = fill of [epi..., B, A] minus LV
///   LA  = fill of [A, la..., B]
///   background left inside the triangles (A, C, la[0]) and (B, D, la[last])
///   and 4-connected to MYO becomes MYO, so the base corners leave no pockets.
/// Overlaps resolve LV > MYO > LA.
/// Throws Errc::OutOfRange for coordinates outside [0, 1] and
/// Errc::DegenerateGeometry for polygons with < 3 distinct vertices or zero area.
LabelMask rasterize_keypoints(const KeypointSet& kps, int width, int height);

}  // namespace echogcn
