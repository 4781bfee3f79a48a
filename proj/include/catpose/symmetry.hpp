#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "catpose/geometry.hpp"

namespace catpose {

enum class SymmetryKind { None, RotationalY, ReflectionXY };

/// Category symmetry descriptor. The symmetry axis is the object y axis and
/// the reflection plane is the object xy-plane.
struct SymmetryClass {
  SymmetryKind kind = SymmetryKind::None;
  /// Number of sampled candidate rotations about y; meaningful for
  /// RotationalY only.
  int candidate_count = 1;

  static SymmetryClass none() { return {SymmetryKind::None, 1}; }
  static SymmetryClass rotational_y(int n = 36) { return {SymmetryKind::RotationalY, n}; }
  static SymmetryClass reflection_xy() { return {SymmetryKind::ReflectionXY, 1}; }
};

/// Throws ValidationError on n < 1 or None with n != 1.
void validate_symmetry(const SymmetryClass& sym);

std::string_view to_string(SymmetryKind kind);
/// Accepts "none", "rotational_y", "reflection_xy".
SymmetryKind symmetry_kind_from_string(std::string_view name);

/// Per-category knowledge: symmetry, mean extents and the NOCS-scale prior.
struct CategoryProfile {
  std::string name;
  SymmetryClass symmetry;
  Vec3 mean_size = Vec3::Ones();
  PointCloud prior;
};

void validate_profile(const CategoryProfile& profile);

/// Diagonal of the canonical mirror map.
Vec3 mirror_signs(SymmetryKind kind);

/// Canonical-frame mirror: identity, (-x, y, -z) or (x, y, -z).
Vec3 mirror_point(const Vec3& p, const SymmetryClass& sym);

/// Mirror in world frame: R F(R^T (p - t)) + t.
Vec3 mirror_world(const Vec3& p, const Pose9& pose, const SymmetryClass& sym);

/// Candidate ground-truth rotations under the category symmetry:
/// R_gt rot_y(2 pi k / n) for RotationalY, otherwise just R_gt.
std::vector<Mat3> candidate_rotations(const Mat3& r_gt, const SymmetryClass& sym);

/// Symmetry of the built-in category names (bottle, can, bowl, laptop,
/// camera, mug, box). Throws ValidationError for unknown names.
SymmetryClass category_symmetry(std::string_view category, int rotational_candidates = 36);

}  // namespace catpose
