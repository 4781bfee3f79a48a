#include "catpose/symmetry.hpp"

#include <numbers>

#include "catpose/errors.hpp"

namespace catpose {

void validate_symmetry(const SymmetryClass& sym) {
  if (sym.candidate_count < 1) throw ValidationError("symmetry: candidate_count must be >= 1");
  if (sym.kind != SymmetryKind::RotationalY && sym.candidate_count != 1) {
    throw ValidationError("symmetry: candidate_count must be 1 unless rotational_y");
  }
}

std::string_view to_string(SymmetryKind kind) {
  switch (kind) {
    case SymmetryKind::None: return "none";
    case SymmetryKind::RotationalY: return "rotational_y";
    case SymmetryKind::ReflectionXY: return "reflection_xy";
  }
  return "none";
}

SymmetryKind symmetry_kind_from_string(std::string_view name) {
  if (name == "none") return SymmetryKind::None;
  if (name == "rotational_y") return SymmetryKind::RotationalY;
  if (name == "reflection_xy") return SymmetryKind::ReflectionXY;
  throw ValidationError("unknown symmetry kind '" + std::string(name) + "'");
}

void validate_profile(const CategoryProfile& profile) {
  validate_symmetry(profile.symmetry);
  if (profile.prior.empty()) throw ValidationError("profile '" + profile.name + "': empty prior");
  if (!(profile.mean_size.minCoeff() > 0.0)) {
    throw ValidationError("profile '" + profile.name + "': mean size must be positive");
  }
}

Vec3 mirror_signs(SymmetryKind kind) {
  switch (kind) {
    case SymmetryKind::RotationalY: return {-1.0, 1.0, -1.0};
    case SymmetryKind::ReflectionXY: return {1.0, 1.0, -1.0};
    case SymmetryKind::None: break;
  }
  return Vec3::Ones();
}

Vec3 mirror_point(const Vec3& p, const SymmetryClass& sym) {
  return p.cwiseProduct(mirror_signs(sym.kind));
}

Vec3 mirror_world(const Vec3& p, const Pose9& pose, const SymmetryClass& sym) {
  if (sym.kind == SymmetryKind::None) return p;
  const Vec3 local = pose.rotation.transpose() * (p - pose.translation);
  return pose.rotation * mirror_point(local, sym) + pose.translation;
}

std::vector<Mat3> candidate_rotations(const Mat3& r_gt, const SymmetryClass& sym) {
  if (sym.kind != SymmetryKind::RotationalY) return {r_gt};
  std::vector<Mat3> out;
  out.reserve(static_cast<std::size_t>(sym.candidate_count));
  out.push_back(r_gt);
  for (int k = 1; k < sym.candidate_count; ++k) {
    out.push_back(r_gt * rot_y(2.0 * std::numbers::pi * k / sym.candidate_count));
  }
  return out;
}

SymmetryClass category_symmetry(std::string_view category, int rotational_candidates) {
  if (category == "bottle" || category == "can" || category == "bowl") {
    return SymmetryClass::rotational_y(rotational_candidates);
  }
  if (category == "laptop") return SymmetryClass::reflection_xy();
  if (category == "camera" || category == "mug" || category == "box") return SymmetryClass::none();
  throw ValidationError("unknown category '" + std::string(category) + "'");
}

}  // namespace catpose
