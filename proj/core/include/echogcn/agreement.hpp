#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace echogcn {

struct AgreementConfig {
  double low_threshold = 0.8;
  double high_threshold = 0.9;
  double filter_threshold = 0.85;
  double bin_width = 0.01;

  /// Throws Errc::ConfigError unless 0 <= low <= filter <= high <= 1 and bin_width > 0.
  void validate() const;
};

enum class AgreementClass { Low, Mid, High };

const char* to_string(AgreementClass c);

/// <= low is Low, >= high is High, Mid otherwise. Throws Errc::OutOfRange
/// outside [0, 1].
AgreementClass classify(double dice, const AgreementConfig& cfg = {});

struct AgreementRecord {
  std::string frame_id;
  double dice = 0;
  AgreementClass cls = AgreementClass::Mid;
  bool retained = false;  // dice >= filter_threshold
};

AgreementRecord make_record(std::string frame_id, double dice, const AgreementConfig& cfg = {});

struct Histogram {
  double bin_width = 0.01;
  std::vector<std::size_t> counts;  // bin k covers [k*w, (k+1)*w); 1.0 lands in the last bin
};

/// Throws Errc::OutOfRange for values outside [0, 1] or a non-positive width.
Histogram histogram(const std::vector<double>& values, double bin_width = 0.01);

/// Seeded sample of k_low Low and k_high High records, shuffled together.
/// Throws Errc::InsufficientRecords naming the deficit.
std::vector<AgreementRecord> partition_sample(const std::vector<AgreementRecord>& records, std::size_t k_low,
                                              std::size_t k_high, std::uint64_t seed);

}  // namespace echogcn
