#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace catpose {

struct GradcheckRow {
  std::string term;
  int trials = 0;
  double max_rel_error = 0.0;
  bool pass = false;
};

struct GradcheckOptions {
  std::uint64_t seed = 0;
  int trials = 100;
  double tolerance = 1e-4;
  /// Test hook: scale the analytic gradient of this term by 1.01.
  std::string fault_term;
};

/// Term names in report order: pose, consistency, coordinate, shape,
/// deformation, matching, mask, reconstruction.
const std::vector<std::string>& gradcheck_terms();

/// Compares each term's analytic gradient (with respect to predicted and
/// supervising pose parameters, deformation, matching logits, mirrored
/// points and mask scores) against central finite differences on seeded
/// random configurations. The error of one configuration is
/// |g_analytic - g_fd|_inf / max(|g_analytic|_inf, |g_fd|_inf, 1e-8).
std::vector<GradcheckRow> run_gradcheck(const GradcheckOptions& opt);

}  // namespace catpose
