#include "echogcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "echogcn/error.hpp"

namespace echogcn {

namespace {

constexpr const char* kModule = "metrics_stats";

void same_dims(const LabelMask& a, const LabelMask& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(Errc::DimensionMismatch, kModule,
                std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                    std::to_string(b.height));
  }
}

double directed(const Contour& from, const Contour& to, PixelSpacing s) {
  double worst = 0.0;
  for (const Point& p : from.points) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point& q : to.points) {
      const double dx = (p.x - q.x) * s.sx;
      const double dy = (p.y - q.y) * s.sy;
      best = std::min(best, dx * dx + dy * dy);
    }
    worst = std::max(worst, best);
  }
  return std::sqrt(worst);
}

std::optional<Contour> try_contour(const LabelMask& m, LabelSet labels) {
  try {
    return extract_contour(m, labels);
  } catch (const Error&) {
    return std::nullopt;
  }
}

// Nonzero differences with their absolute-value average ranks.
struct Ranked {
  std::vector<double> ranks;
  std::vector<bool> positive;
  double tie_term = 0;  // sum of t^3 - t over tie groups
};

Ranked rank_nonzero(std::span<const double> diffs) {
  std::vector<double> nz;
  for (double d : diffs)
    if (d != 0.0) nz.push_back(d);
  if (nz.empty()) throw Error(Errc::AllZeroDifferences, kModule, "every difference is zero");
  std::vector<std::size_t> order(nz.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(nz[a]) < std::abs(nz[b]); });
  Ranked r;
  r.ranks.resize(nz.size());
  r.positive.resize(nz.size());
  for (std::size_t i = 0; i < nz.size();) {
    std::size_t j = i;
    while (j + 1 < nz.size() && std::abs(nz[order[j + 1]]) == std::abs(nz[order[i]])) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r.ranks[order[k]] = avg;
    const double t = static_cast<double>(j - i + 1);
    r.tie_term += t * t * t - t;
    i = j + 1;
  }
  for (std::size_t i = 0; i < nz.size(); ++i) r.positive[i] = nz[i] > 0.0;
  return r;
}

double w_plus_of(const Ranked& r) {
  double w = 0.0;
  for (std::size_t i = 0; i < r.ranks.size(); ++i)
    if (r.positive[i]) w += r.ranks[i];
  return w;
}

WilcoxonResult base_result(const Ranked& r) {
  WilcoxonResult out;
  out.n = static_cast<int>(r.ranks.size());
  out.w_plus = w_plus_of(r);
  const double total = 0.5 * out.n * (out.n + 1.0);
  out.statistic = std::min(out.w_plus, total - out.w_plus);
  return out;
}

}  // namespace

double dice(const LabelMask& a, const LabelMask& b, LabelSet region) {
  same_dims(a, b);
  std::size_t inter = 0;
  std::size_t na = 0;
  std::size_t nb = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const bool x = region.contains(static_cast<Label>(a.labels[i]));
    const bool y = region.contains(static_cast<Label>(b.labels[i]));
    inter += x && y;
    na += x;
    nb += y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

double combined_dice(const LabelMask& a, const LabelMask& b) {
  return 0.5 * (dice(a, b, {Label::LV}) + dice(a, b, {Label::LV, Label::MYO}));
}

double hausdorff(const Contour& a, const Contour& b, PixelSpacing spacing) {
  if (a.points.empty() || b.points.empty()) throw Error(Errc::EmptyContour, kModule, "contour has no points");
  return std::max(directed(a, b, spacing), directed(b, a, spacing));
}

double inter_model_dice(const LabelMask& a, const LabelMask& b, InterModelMode mode) {
  switch (mode) {
    case InterModelMode::ForegroundUnion: return dice(a, b, {Label::LV, Label::MYO, Label::LA});
    case InterModelMode::LvOnly: return dice(a, b, {Label::LV});
    case InterModelMode::MeanOfStructures: break;
  }
  return (dice(a, b, {Label::LV}) + dice(a, b, {Label::MYO}) + dice(a, b, {Label::LA})) / 3.0;
}

MetricReport evaluate_masks(const LabelMask& pred, const LabelMask& ref, PixelSpacing spacing) {
  MetricReport r;
  r.dice_lv = dice(pred, ref, {Label::LV});
  r.dice_myo = dice(pred, ref, {Label::MYO});
  r.dice_la = dice(pred, ref, {Label::LA});
  r.dice_combined = 0.5 * (r.dice_lv + dice(pred, ref, {Label::LV, Label::MYO}));
  r.inter_model_dice = (r.dice_lv + r.dice_myo + r.dice_la) / 3.0;

  const auto pe = try_contour(pred, {Label::LV});
  const auto re = try_contour(ref, {Label::LV});
  const auto po = try_contour(pred, {Label::LV, Label::MYO});
  const auto ro = try_contour(ref, {Label::LV, Label::MYO});
  if (pe && re) r.hausdorff_endo = hausdorff(*pe, *re, spacing);
  if (po && ro) r.hausdorff_epi = hausdorff(*po, *ro, spacing);
  if (r.hausdorff_endo && r.hausdorff_epi) r.hausdorff_combined = 0.5 * (*r.hausdorff_endo + *r.hausdorff_epi);
  return r;
}

WilcoxonResult wilcoxon_exact(std::span<const double> diffs) {
  const Ranked r = rank_nonzero(diffs);
  WilcoxonResult out = base_result(r);
  if (out.n > 24) throw Error(Errc::OutOfRange, kModule, "exact enumeration limited to 24 differences");
  out.exact = true;
  // Ranks are multiples of 0.5; count in half units.
  std::vector<int> half(r.ranks.size());
  for (std::size_t i = 0; i < half.size(); ++i) half[i] = static_cast<int>(std::lround(2.0 * r.ranks[i]));
  const int observed = static_cast<int>(std::lround(2.0 * out.w_plus));
  const std::uint64_t patterns = std::uint64_t{1} << out.n;
  std::uint64_t le = 0;
  std::uint64_t ge = 0;
  for (std::uint64_t mask = 0; mask < patterns; ++mask) {
    int s = 0;
    for (int i = 0; i < out.n; ++i)
      if (mask >> i & 1u) s += half[i];
    le += s <= observed;
    ge += s >= observed;
  }
  const double tail = static_cast<double>(std::min(le, ge)) / static_cast<double>(patterns);
  out.p_value = std::min(1.0, 2.0 * tail);
  return out;
}

WilcoxonResult wilcoxon_normal(std::span<const double> diffs) {
  const Ranked r = rank_nonzero(diffs);
  WilcoxonResult out = base_result(r);
  const double n = out.n;
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - r.tie_term / 48.0;
  if (var <= 0.0) {
    out.p_value = 1.0;
    return out;
  }
  const double dev = std::max(0.0, std::abs(out.w_plus - mean) - 0.5);
  const double z = dev / std::sqrt(var);
  out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return out;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> diffs) {
  std::size_t nonzero = 0;
  for (double d : diffs) nonzero += d != 0.0;
  return nonzero <= 12 ? wilcoxon_exact(diffs) : wilcoxon_normal(diffs);
}

BlandAltman bland_altman(std::span<const double> automatic, std::span<const double> reference) {
  if (automatic.size() != reference.size() || automatic.size() < 2) {
    throw Error(Errc::LengthMismatch, kModule, "need two equally long series with at least two pairs");
  }
  std::vector<double> d(automatic.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = automatic[i] - reference[i];
  const MeanSd ms = mean_sd(d);
  return {ms.mean, ms.sd, ms.mean - 1.96 * ms.sd, ms.mean + 1.96 * ms.sd};
}

MeanSd mae(std::span<const double> automatic, std::span<const double> reference) {
  if (automatic.size() != reference.size() || automatic.empty()) {
    throw Error(Errc::LengthMismatch, kModule, "need two equally long, nonempty series");
  }
  std::vector<double> d(automatic.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::abs(automatic[i] - reference[i]);
  return mean_sd(d);
}

MeanSd mean_sd(std::span<const double> values) {
  if (values.empty()) return {};
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace echogcn
