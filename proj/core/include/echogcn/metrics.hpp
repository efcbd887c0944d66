#pragma once

#include <optional>
#include <span>

#include "echogcn/imaging.hpp"

namespace echogcn {

/// 2|A∩B| / (|A|+|B|) over pixels whose code is in `region`; 1 when both are
/// empty. Throws Errc::DimensionMismatch.
double dice(const LabelMask& a, const LabelMask& b, LabelSet region);

/// Mean of the LV Dice and the LV∪MYO Dice.
double combined_dice(const LabelMask& a, const LabelMask& b);

/// Symmetric Hausdorff distance in mm with points scaled by `spacing`.
/// Throws Errc::EmptyContour.
double hausdorff(const Contour& a, const Contour& b, PixelSpacing spacing = {});

enum class InterModelMode {
  MeanOfStructures,  // unweighted mean of LV, MYO and LA Dice
  ForegroundUnion,   // Dice of LV∪MYO∪LA
  LvOnly,
};

double inter_model_dice(const LabelMask& a, const LabelMask& b, InterModelMode mode = InterModelMode::MeanOfStructures);

struct MetricReport {
  double dice_lv = 0;
  double dice_myo = 0;
  double dice_la = 0;
  double dice_combined = 0;
  // Empty when a contour cannot be traced on either side.
  std::optional<double> hausdorff_endo;
  std::optional<double> hausdorff_epi;
  std::optional<double> hausdorff_combined;
  double inter_model_dice = 0;
};

/// All metrics of `pred` against `ref`.
MetricReport evaluate_masks(const LabelMask& pred, const LabelMask& ref, PixelSpacing spacing = {});

struct WilcoxonResult {
  double w_plus = 0;     // sum of ranks of positive differences
  double statistic = 0;  // min(W+, W-)
  double p_value = 1;    // two-sided
  int n = 0;             // nonzero differences
  bool exact = false;
};

/// Exact for n <= 12 nonzero differences, normal approximation above.
/// Zero differences are dropped; ties get average ranks.
/// Throws Errc::AllZeroDifferences.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> diffs);
/// Enumerates all 2^n sign patterns (n <= 24).
WilcoxonResult wilcoxon_exact(std::span<const double> diffs);
/// Normal approximation with tie and continuity correction.
WilcoxonResult wilcoxon_normal(std::span<const double> diffs);

struct BlandAltman {
  double bias = 0;
  double sd = 0;
  double loa_low = 0;
  double loa_high = 0;
};

/// Limits of agreement bias ± 1.96 SD (sample SD). Throws Errc::LengthMismatch
/// for unequal lengths or fewer than two pairs.
BlandAltman bland_altman(std::span<const double> automatic, std::span<const double> reference);

struct MeanSd {
  double mean = 0;
  double sd = 0;
};

/// Mean and sample SD of |auto - ref|. Throws Errc::LengthMismatch.
MeanSd mae(std::span<const double> automatic, std::span<const double> reference);

/// Mean and sample SD (0 for a single value).
MeanSd mean_sd(std::span<const double> values);

}  // namespace echogcn
