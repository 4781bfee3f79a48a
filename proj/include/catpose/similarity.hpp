#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "catpose/geometry.hpp"

namespace catpose {

/// target ~ scale * rotation * source + translation
struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
};

struct RansacConfig {
  int max_iterations = 200;
  double inlier_threshold = 0.01;  // meters
  int min_sample_size = 4;
  std::uint64_t seed = 0;
};

void validate_ransac_config(const RansacConfig& cfg);

/// Closed-form least-squares similarity between paired clouds (variance
/// ratio scale, determinant-corrected rotation).
/// Throws ValidationError on size mismatch or fewer than 3 pairs and
/// DegenerateInputError when the source is collinear or coincident.
SimilarityTransform umeyama(std::span<const Vec3> source, std::span<const Vec3> target);

struct RansacResult {
  SimilarityTransform transform;
  std::vector<bool> inliers;
  int inlier_count = 0;
};

/// Hypothesize-and-verify over random minimal samples, then refit on the
/// consensus set of the best hypothesis (most inliers, ties to the lower
/// residual sum, then the lower iteration index). Deterministic for a seed.
/// Throws NoConsensusError when fewer than min_sample_size pairs agree.
RansacResult umeyama_ransac(std::span<const Vec3> source, std::span<const Vec3> target,
                            const RansacConfig& cfg);

struct NocsPoseResult {
  Pose9 pose;
  SimilarityTransform transform;
  std::vector<bool> inliers;
};

/// Two-stage pose recovery: RANSAC Umeyama from NOCS coordinates to the
/// observed points; size is the scale times the per-axis extents of the
/// inlier coordinates.
NocsPoseResult pose_from_nocs_detailed(std::span<const Vec3> coords,
                                       std::span<const Vec3> observed, const RansacConfig& cfg);

inline Pose9 pose_from_nocs(std::span<const Vec3> coords, std::span<const Vec3> observed,
                            const RansacConfig& cfg) {
  return pose_from_nocs_detailed(coords, observed, cfg).pose;
}

}  // namespace catpose
