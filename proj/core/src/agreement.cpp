#include "echogcn/agreement.hpp"

#include <algorithm>
#include <cmath>

#include "echogcn/error.hpp"
#include "echogcn/phantom.hpp"

namespace echogcn {

namespace {
constexpr const char* kModule = "agreement";
}

void AgreementConfig::validate() const {
  if (!(0.0 <= low_threshold && low_threshold <= filter_threshold && filter_threshold <= high_threshold &&
        high_threshold <= 1.0)) {
    throw Error(Errc::ConfigError, kModule, "thresholds must satisfy 0 <= low <= filter <= high <= 1");
  }
  if (!(bin_width > 0.0)) throw Error(Errc::ConfigError, kModule, "bin_width must be positive");
}

const char* to_string(AgreementClass c) {
  switch (c) {
    case AgreementClass::Low: return "Low";
    case AgreementClass::High: return "High";
    case AgreementClass::Mid: break;
  }
  return "Mid";
}

AgreementClass classify(double dice, const AgreementConfig& cfg) {
  if (!(dice >= 0.0 && dice <= 1.0)) throw Error(Errc::OutOfRange, kModule, "dice outside [0, 1]");
  if (dice <= cfg.low_threshold) return AgreementClass::Low;
  if (dice >= cfg.high_threshold) return AgreementClass::High;
  return AgreementClass::Mid;
}

AgreementRecord make_record(std::string frame_id, double dice, const AgreementConfig& cfg) {
  return {std::move(frame_id), dice, classify(dice, cfg), dice >= cfg.filter_threshold};
}

Histogram histogram(const std::vector<double>& values, double bin_width) {
  if (!(bin_width > 0.0)) throw Error(Errc::OutOfRange, kModule, "bin width must be positive");
  Histogram h;
  h.bin_width = bin_width;
  // Guard against 1/0.01 landing a hair above an integer.
  const std::size_t bins = static_cast<std::size_t>(std::max(1.0, std::ceil(1.0 / bin_width - 1e-9)));
  h.counts.assign(bins, 0);
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::OutOfRange, kModule, "value outside [0, 1]");
    const auto k = static_cast<std::size_t>(std::floor(v / bin_width + 1e-9));
    ++h.counts[std::min(k, bins - 1)];
  }
  return h;
}

std::vector<AgreementRecord> partition_sample(const std::vector<AgreementRecord>& records, std::size_t k_low,
                                              std::size_t k_high, std::uint64_t seed) {
  std::vector<AgreementRecord> low;
  std::vector<AgreementRecord> high;
  for (const AgreementRecord& r : records) {
    if (r.cls == AgreementClass::Low) low.push_back(r);
    if (r.cls == AgreementClass::High) high.push_back(r);
  }
  if (low.size() < k_low || high.size() < k_high) {
    std::string msg;
    if (low.size() < k_low) msg += "Low records available " + std::to_string(low.size()) + " of " + std::to_string(k_low);
    if (high.size() < k_high) {
      if (!msg.empty()) msg += "; ";
      msg += "High records available " + std::to_string(high.size()) + " of " + std::to_string(k_high);
    }
    throw Error(Errc::InsufficientRecords, kModule, msg);
  }
  Rng rng(seed);
  rng.shuffle(low);
  rng.shuffle(high);
  std::vector<AgreementRecord> out(low.begin(), low.begin() + static_cast<std::ptrdiff_t>(k_low));
  out.insert(out.end(), high.begin(), high.begin() + static_cast<std::ptrdiff_t>(k_high));
  rng.shuffle(out);
  return out;
}

}  // namespace echogcn
