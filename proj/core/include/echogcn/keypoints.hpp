#pragma once

#include <span>
#include <vector>

#include "echogcn/imaging.hpp"

namespace echogcn {

/// Anatomical landmarks in pixel space.
///   A, B  annulus points (base of the LV); A is on the left when the apex
///         points up, i.e. cross(B - A, E - A) < 0 with y pointing down.
///   C, D  myocardial base points on the extended base line (C beyond A).
///   E, F, G  apexes of LV, MYO and LA.
struct Landmarks {
  Point A, B, C, D, E, F, G;
};

/// Positions of the landmarks within the keypoint arrays.
struct LandmarkIndices {
  int A = 0, B = 0, C = 0, D = 0, E = 0, F = 0, G = 0;
  friend bool operator==(const LandmarkIndices&, const LandmarkIndices&) = default;
};

/// Points per side between landmarks.
struct SamplingConfig {
  int n_side = 20;  // endo and epi
  int m_side = 10;  // LA

  int ring_count() const { return 2 * n_side + 3; }
  int la_count() const { return 2 * m_side + 1; }
  int total() const { return 2 * ring_count() + la_count(); }
};

/// Where the annulus points are taken from.
enum class AnnulusMode {
  LvLaInterface,   // LV pixels 4-adjacent to LA (default)
  MyoLaInterface,  // MYO pixels 4-adjacent to LA
};

struct ExtractionConfig {
  SamplingConfig sampling;
  AnnulusMode annulus = AnnulusMode::LvLaInterface;
};

/// Contour keypoints in normalized [0, 1] image coordinates.
/// endo runs A -> E -> B, epi runs C -> F -> D and la runs from the A side
/// over G to the B side; A and B are not repeated in la.
struct KeypointSet {
  int n_side = 20;
  int m_side = 10;
  std::vector<Point> endo;
  std::vector<Point> epi;
  std::vector<Point> la;
  LandmarkIndices landmarks;

  std::size_t total() const { return endo.size() + epi.size() + la.size(); }
  SamplingConfig sampling() const { return {n_side, m_side}; }
  friend bool operator==(const KeypointSet&, const KeypointSet&) = default;
};

/// Canonical landmark positions for a given sampling configuration.
LandmarkIndices canonical_landmarks(const SamplingConfig& cfg);

/// Throws Errc::LayoutMismatch unless counts and landmark indices are canonical.
void validate_layout(const KeypointSet& kps);

/// Epicardium encoded as outward normal offsets from the endocardium.
struct DisplacementSet {
  int n_side = 20;
  int m_side = 10;
  std::vector<Point> endo;
  std::vector<Point> la;
  std::vector<double> disp;  // normalized units, one per endo point
  LandmarkIndices landmarks;
};

/// Floor for displacements in normalized units.
inline constexpr double kMinDisplacement = 1e-4;

Landmarks extract_landmarks(const LabelMask& mask, AnnulusMode annulus = AnnulusMode::LvLaInterface);

KeypointSet extract_keypoints(const LabelMask& mask, const SamplingConfig& cfg = {});
KeypointSet extract_keypoints(const LabelMask& mask, const ExtractionConfig& cfg);

/// Unit normal at ring[i]: perpendicular to ring[i+1] - ring[i-1] (one-sided
/// at the array ends), oriented away from the ring centroid.
/// Throws Errc::ZeroTangent when the neighbors coincide.
Point outward_normal(std::span<const Point> ring, std::size_t i);

DisplacementSet to_displacement(const KeypointSet& kps);
KeypointSet from_displacement(const DisplacementSet& ds);

/// Horizontal flip x -> 1 - x that keeps the A -> E -> B ordering convention.
KeypointSet mirror_keypoints(const KeypointSet& kps);

/// Normalized <-> pixel coordinates.
inline Point to_pixels(Point p, int width, int height) { return {p.x * width, p.y * height}; }
inline Point to_normalized(Point p, int width, int height) { return {p.x / width, p.y / height}; }

/// Landmark points of a keypoint set (normalized coordinates).
Landmarks landmarks_of(const KeypointSet& kps);

}  // namespace echogcn
