#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "catpose/objective.hpp"
#include "catpose/similarity.hpp"
#include "catpose/symmetry.hpp"
#include "catpose/synthgen.hpp"

namespace catpose {

struct FitToggles {
  bool direct = true;
  bool prior = true;
  bool sym_losses = true;
  bool sym_recon = true;
  bool outlier_removal = true;
};

/// Base step lengths per variable block; multiplied by FitConfig::step_size.
struct StepSizes {
  double rotation = 0.02;
  double translation = 0.003;
  double size = 0.002;
  double deformation = 0.003;
  double logits = 0.3;
  double mirrored = 0.003;
  double scores = 0.05;
  double axis_scale = 0.01;  // per-axis prior scaling of the coarse phase
};

struct FitConfig {
  int max_steps = 100;
  double step_size = 1.0;
  StepSizes steps;
  LossWeights weights;
  ShapePriorWeights shape_prior;
  FitToggles toggles;
  std::uint64_t seed = 0;
  std::string init_scheme = "multistart-8";
  /// Observed points used by the fit (seeded subsample); 0 keeps all.
  int fit_points = 256;
  double outlier_threshold = kDefaultOutlierThreshold;
  /// Fraction of max_steps before the inlier labels are re-estimated.
  double warmup_fraction = 0.3;
  int relabel_interval = 5;
  int min_inliers = 8;
  int max_backtracks = 6;
  /// Backtrack so that every step lowers the loss; otherwise take plain
  /// optimizer steps and keep the best state seen.
  bool monotone = true;
  /// Gain of the geometric matching affinity added to the free logits.
  double affinity = 300.0;
  /// Fraction of max_steps spent in the coarse phase, which moves only the
  /// pose and a per-axis scaling of the prior.
  double rigid_fraction = 0.4;
  /// Two-stage recovery of the final pose.
  RansacConfig ransac{200, 0.02, 4, 0};
};

/// Throws ValidationError for a config violating its invariants.
void validate_fit_config(const FitConfig& cfg);

/// Presets A1, A2, A3, B1, B2, C, D (ablation rows).
FitConfig preset_config(std::string_view name);
const std::vector<std::string>& preset_names();

/// Optimization variables of one start.
///
/// With the direct branch the matching logits seen by the loss are
/// `logits_ij - affinity |nocs_i - (P + D)_j|^2` and the mirrored points are
/// mirror_world(observed_i, pose) + mirrored_i, so both follow the pose and
/// the stored values are residuals. The two-stage branch uses the logits as
/// they are.
struct FitState {
  PoseParams params;
  DeformationField deformation;
  RowMatrix logits;
  PointCloud mirrored;  // world-frame offsets
  std::vector<double> scores;  // raw; the loss sees them clamped to [0, 1]
};

/// Schemes: "identity", "perturbed" (identity times a seeded rotation of at
/// most 20 degrees), "multistart-K" (K perturbed starts with yaw offsets
/// 2 pi k / K), "truth" (ground-truth pose, uninformed matching) and
/// "oracle" (ground-truth pose and matching). The last two are for tests.
/// Throws ValidationError for an unknown scheme.
std::vector<FitState> init_params(const Instance& instance, const CategoryProfile& profile,
                                  std::string_view scheme, std::uint64_t seed);

struct StartResult {
  Pose9 pose;
  double final_loss = 0.0;
  std::vector<double> trajectory;
  InlierMask mask;
  LossTerms terms;
};

struct FitResult {
  Pose9 pose;
  std::vector<double> trajectory;  // per-step totals of the kept start
  InlierMask mask;                 // labels on the fitted points
  std::vector<int> points;         // indices of the fitted points
  int steps = 0;
  double wall_time = 0.0;  // seconds
  double final_loss = 0.0;
  LossTerms terms;
  int best_start = 0;
  bool two_stage = false;
  std::vector<StartResult> starts;
};

/// The objective as the fitter sees it: residual parametrization, direct or
/// two-stage pose per cfg.toggles and supervision bound to the estimate.
/// `grad` has the layout of the state; it is zero for the pose parameters in
/// the two-stage branch. For tests.
struct FitObjective {
  double value = 0.0;
  Pose9 pose;
  FitState grad;
};
FitObjective fit_objective(const FitState& state, const PointCloud& observed,
                           const CategoryProfile& profile, const FitConfig& cfg,
                           const InlierMask& labels);

/// Throws ValidationError for fewer than 32 points, DivergenceError when the
/// loss exceeds 10x its initial value.
FitResult fit(const Instance& instance, const CategoryProfile& profile, const FitConfig& cfg);

}  // namespace catpose
