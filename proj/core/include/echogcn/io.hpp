#pragma once

#include <string>
#include <vector>

#include "echogcn/clinical.hpp"
#include "echogcn/imaging.hpp"
#include "echogcn/keypoints.hpp"

namespace echogcn {

/// 8-bit grayscale PNG; intensities map [0, 1] <-> [0, 255] with rounding.
/// Other PNG color types are converted to gray on read.
/// Throws Errc::IoError or Errc::FormatError.
void write_image_png(const std::string& path, const Image& img);
Image read_image_png(const std::string& path);

/// 8-bit single-channel PNG holding the label codes 0-3.
/// Reading rejects codes above 3 with Errc::FormatError.
void write_mask_png(const std::string& path, const LabelMask& mask);
LabelMask read_mask_png(const std::string& path);

inline constexpr int kKeypointFileVersion = 1;

/// Keypoint file:
///   {"version": 1, "n_side": N, "m_side": M,
///    "endo": [[x, y], ...], "epi": [...], "la": [...],
///    "landmarks": {"A": i, ..., "G": i}, "spacing": [sx, sy]}
/// Coordinates are normalized; arrays run A -> E -> B.
std::string keypoints_to_json(const KeypointSet& kps, PixelSpacing spacing = {});
/// Validates the layout. Throws Errc::FormatError or Errc::LayoutMismatch.
KeypointSet keypoints_from_json(const std::string& text, PixelSpacing* spacing = nullptr);
void write_keypoints(const std::string& path, const KeypointSet& kps, PixelSpacing spacing = {});
KeypointSet read_keypoints(const std::string& path, PixelSpacing* spacing = nullptr);

inline constexpr int kExamFileVersion = 1;

/// Exam list, schema in docs/exam_manifest.md. Frame paths stay relative to
/// the file. Throws Errc::FormatError (including ED >= ES within a cycle).
std::vector<ExamManifest> exams_from_json(const std::string& text);
std::string exams_to_json(const std::vector<ExamManifest>& exams);
std::vector<ExamManifest> read_exams(const std::string& path);
void write_exams(const std::string& path, const std::vector<ExamManifest>& exams);

/// Whole-file helpers. Throw Errc::IoError.
std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);

}  // namespace echogcn
