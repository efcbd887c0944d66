#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "echogcn/gcn.hpp"

namespace echogcn {

/// Analytic vs central-difference gradient of one component, in double.
/// rel_error = |a - n| / max(|a|, |n|) over the checked coordinates (L2).
struct GradcheckResult {
  std::string name;
  double rel_error = 0;
  double tolerance = 0;
  std::size_t coords = 0;

  bool pass() const { return rel_error < tolerance; }
};

double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric);

GradcheckResult gradcheck_conv(int stride, bool relu, std::uint64_t seed);
GradcheckResult gradcheck_dense(Activation act, std::uint64_t seed);
GradcheckResult gradcheck_ring(int channels, int w, int v, std::uint64_t seed);
GradcheckResult gradcheck_head(bool displacement, std::uint64_t seed);
GradcheckResult gradcheck_loss(bool displacement, std::uint64_t seed);
/// Whole model at `cfg` (defaults to the reduced 32x32 configuration).
GradcheckResult gradcheck_end_to_end(const ModelConfig& cfg, std::uint64_t seed, std::size_t max_coords = 400);

/// Every layer check plus the end-to-end check for both heads.
std::vector<GradcheckResult> run_gradchecks(std::uint64_t seed = 0);

}  // namespace echogcn
