#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "catpose/geometry.hpp"
#include "catpose/kernels.hpp"
#include "catpose/prior.hpp"
#include "catpose/symmetry.hpp"

namespace catpose {

inline constexpr double kDefaultOutlierThreshold = 0.1;  // meters

/// Outer weights of the total objective.
struct LossWeights {
  double pose = 8.0;
  double shape_prior = 10.0;
  double mask = 1.0;
  double reconstruction = 1.0;
  double consistency = 1.0;
};

void validate_weights(const LossWeights& w);

/// Weights inside the shape-prior term.
struct ShapePriorWeights {
  double coordinate = 1.0;
  double shape = 1.0;
  double deformation = 0.01;
  double matching = 0.01;
};

/// Hard per-point labels (1 = inlier) plus soft scores in [0, 1].
struct InlierMask {
  std::vector<std::uint8_t> inlier;
  std::vector<double> score;

  std::size_t size() const { return inlier.size(); }
  std::vector<int> indices() const;
  int count() const;
  static InlierMask all(std::size_t n);
};

/// Label i is an outlier iff |observed_i - world_location(coords_gt_i)| > threshold.
InlierMask gt_inliers(std::span<const Vec3> observed, std::span<const Vec3> coords_gt,
                      const Pose9& pose_gt, double threshold = kDefaultOutlierThreshold);

// -- individual terms --------------------------------------------------------
// Terms restricted to inliers throw DegenerateInputError on an empty mask and
// ValidationError on cardinality mismatch.

/// L1 on translation and size plus L1 on unit rotation columns (y only for
/// RotationalY, x and y otherwise).
double pose_loss(const Pose9& pred, const Pose9& gt, const SymmetryClass& sym);

/// Mean over inliers of |nocs_coordinate(observed_i, pose_pred) - coords_i|_1.
double consistency_loss(std::span<const Vec3> coords_pred, std::span<const Vec3> observed,
                        const Pose9& pose_pred, const InlierMask& mask);

/// Minimum over candidate gt rotations of the mean inlier L1 distance
/// between the predicted and candidate coordinates.
double sym_coordinate_loss(std::span<const Vec3> coords_pred, std::span<const Vec3> observed,
                           const Pose9& pose_gt, const SymmetryClass& sym,
                           const InlierMask& mask);

/// Bidirectional Chamfer distance.
double sym_shape_loss(std::span<const Vec3> deformed, std::span<const Vec3> mirrored_canonical);

/// Mean over inliers of |mirror_world(observed_i, pose_gt) - mirrored_pred_i|_1.
double reconstruction_loss(std::span<const Vec3> mirrored_pred, std::span<const Vec3> observed,
                           const Pose9& pose_gt, const SymmetryClass& sym,
                           const InlierMask& mask);

/// Mean |score_i - label_i|.
double mask_loss(std::span<const double> scores, const InlierMask& mask_gt);

// -- total objective ---------------------------------------------------------

/// Switches mirroring the ablation toggles.
struct LossOptions {
  LossWeights weights;
  ShapePriorWeights shape_prior;
  bool pose_term = true;
  /// Off: the coordinate term is the plain L1 against the gt rotation and
  /// the shape target is the unmirrored canonical observation.
  bool sym_losses = true;
  /// Include the reconstruction term and use the predicted mirrored points
  /// as the shape target.
  bool sym_recon = true;
  bool mask_term = true;
};

/// Every optimized quantity. `pose` is the assembled predicted pose.
struct Prediction {
  Pose9 pose;
  DeformationField deformation;
  RowMatrix logits;
  PointCloud mirrored;  // world frame, one per observed point
  std::vector<double> scores;
};

struct Supervision {
  Pose9 pose;
  InlierMask mask;  // labels select the inliers of every restricted term
};

struct LossTerms {
  double pose = 0.0;
  double coordinate = 0.0;
  double shape = 0.0;
  double deformation = 0.0;
  double matching = 0.0;
  double shape_prior = 0.0;  // weighted sum of the four above
  double mask = 0.0;
  double reconstruction = 0.0;
  double consistency = 0.0;
  double total = 0.0;
};

struct LossGradients {
  PoseGrad pose;
  PoseGrad pose_gt;
  PointCloud deformation;
  RowMatrix logits;
  PointCloud mirrored;
  std::vector<double> scores;
};

struct LossReport {
  LossTerms terms;
  LossGradients grad;  // empty unless requested
  PointCloud coords;   // reconstructed coordinates C
};

LossReport total_loss(const Prediction& pred, const Supervision& gt,
                      std::span<const Vec3> observed, std::span<const Vec3> prior,
                      const SymmetryClass& sym, const LossOptions& opt, bool with_grad);

}  // namespace catpose
