#include "catpose/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "catpose/errors.hpp"

namespace catpose {

namespace {
constexpr double kMinColumnNorm = 1e-6;
constexpr double kMinColumnAngle = 1e-4;
}  // namespace

Mat3 recover_rotation(const Vec3& rx_raw, const Vec3& ry_raw) {
  const double nx = rx_raw.norm();
  const double ny = ry_raw.norm();
  if (!(nx >= kMinColumnNorm) || !(ny >= kMinColumnNorm)) {
    throw DegenerateInputError("recover_rotation: rotation column norm below 1e-6");
  }
  if (direction_angle(rx_raw, ry_raw) <= kMinColumnAngle ||
      direction_angle(rx_raw, -ry_raw) <= kMinColumnAngle) {
    throw DegenerateInputError("recover_rotation: rotation columns are parallel");
  }
  const Vec3 y = ry_raw / ny;
  const Vec3 u = rx_raw - rx_raw.dot(y) * y;
  const Vec3 x = u / u.norm();
  Mat3 r;
  r.col(0) = x;
  r.col(1) = y;
  r.col(2) = x.cross(y);
  return r;
}

void recover_rotation_backward(const Vec3& rx_raw, const Vec3& ry_raw, const Mat3& d_rotation,
                               Vec3& d_rx, Vec3& d_ry) {
  const double ny = ry_raw.norm();
  const Vec3 y = ry_raw / ny;
  const Vec3 u = rx_raw - rx_raw.dot(y) * y;
  const double nu = u.norm();
  const Vec3 x = u / nu;

  Vec3 gx = d_rotation.col(0);
  Vec3 gy = d_rotation.col(1);
  const Vec3 gz = d_rotation.col(2);
  // z = x cross y
  gx += y.cross(gz);
  gy += gz.cross(x);
  // x = u / |u|
  const Vec3 gu = (gx - gx.dot(x) * x) / nu;
  // u = rx - (rx . y) y
  d_rx = gu - gu.dot(y) * y;
  gy -= rx_raw.dot(y) * gu + gu.dot(y) * rx_raw;
  // y = ry / |ry|
  d_ry = (gy - gy.dot(y) * y) / ny;
}

Vec3 centroid(std::span<const Vec3> cloud) {
  if (cloud.empty()) throw ValidationError("centroid: empty point cloud");
  Vec3 acc = Vec3::Zero();
  for (const auto& p : cloud) acc += p;
  return acc / static_cast<double>(cloud.size());
}

Vec3 recover_translation(const Vec3& t_residual, std::span<const Vec3> cloud) {
  return t_residual + centroid(cloud);
}

Vec3 recover_size(const Vec3& s_residual, const Vec3& mean_size) {
  const Vec3 s = s_residual + mean_size;
  if (!(s.minCoeff() > 0.0)) throw ValidationError("recover_size: non-positive size component");
  return s;
}

Pose9 pose_from_params(const PoseParams& p, const Vec3& cloud_mean, const Vec3& mean_size) {
  Pose9 pose;
  pose.rotation = recover_rotation(p);
  pose.translation = p.t_residual + cloud_mean;
  pose.size = recover_size(p.s_residual, mean_size);
  return pose;
}

Vec3 nocs_coordinate(const Vec3& p, const Pose9& pose) {
  return pose.rotation.transpose() * (p - pose.translation) / pose.diagonal();
}

Vec3 world_location(const Vec3& c, const Pose9& pose) {
  return pose.rotation * (pose.diagonal() * c) + pose.translation;
}

PointCloud nocs_coordinates(std::span<const Vec3> points, const Pose9& pose) {
  PointCloud out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(nocs_coordinate(p, pose));
  return out;
}

PointCloud world_locations(std::span<const Vec3> coords, const Pose9& pose) {
  PointCloud out;
  out.reserve(coords.size());
  for (const auto& c : coords) out.push_back(world_location(c, pose));
  return out;
}

Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

double geodesic_angle(const Mat3& a, const Mat3& b) {
  // atan2 form stays accurate near 0 and pi where acos of the trace does not.
  const Mat3 r = a * b.transpose();
  const Vec3 w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * w.norm(), 0.5 * (r.trace() - 1.0));
}

double direction_angle(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

bool is_rotation(const Mat3& r, double tol) {
  if (!r.allFinite()) return false;
  if (((r.transpose() * r) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

void validate_pose(const Pose9& pose) {
  if (!is_rotation(pose.rotation)) throw ValidationError("pose: rotation is not a proper rotation");
  if (!pose.translation.allFinite()) throw ValidationError("pose: non-finite translation");
  if (!pose.size.allFinite() || !(pose.size.minCoeff() > 0.0)) {
    throw ValidationError("pose: size components must be positive");
  }
}

ParamsGrad backprop_params(const PoseParams& p, const PoseGrad& g) {
  ParamsGrad out;
  recover_rotation_backward(p.rx_raw, p.ry_raw, g.rotation, out.rx, out.ry);
  out.t = g.translation;
  out.s = g.size;
  return out;
}

Vec3 nocs_coordinate_backward(const Vec3& p, const Pose9& pose, const Vec3& c, const Vec3& dc,
                              PoseGrad& g) {
  const double len = pose.diagonal();
  const Vec3 d = p - pose.translation;
  // c_j = sum_k R_kj d_k / L
  g.rotation += d * dc.transpose() / len;
  const Vec3 dd = pose.rotation * dc / len;
  g.translation -= dd;
  const double d_len = -dc.dot(c) / len;
  g.size += d_len * pose.size / len;
  return dd;
}

}  // namespace catpose
