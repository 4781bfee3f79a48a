#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace catpose {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Ordered point set. Per-point maps preserve length and order.
using PointCloud = std::vector<Vec3>;

/// Full 9DoF object state: rotation, translation (meters) and per-axis
/// bounding-box extents (meters).
struct Pose9 {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Vec3 size = Vec3::Ones();

  /// Bounding-box diagonal, the NOCS normalization length.
  double diagonal() const { return size.norm(); }
};

/// Raw output of the direct pose branch: two unnormalized rotation columns
/// plus translation and size residuals.
struct PoseParams {
  Vec3 rx_raw = Vec3::UnitX();
  Vec3 ry_raw = Vec3::UnitY();
  Vec3 t_residual = Vec3::Zero();
  Vec3 s_residual = Vec3::Zero();
};

/// Gram-Schmidt with the y column kept fixed: y = ry/|ry|, x = rx minus its
/// y component, normalized, z = x cross y.
/// Throws DegenerateInputError for short or (near) parallel columns.
Mat3 recover_rotation(const Vec3& rx_raw, const Vec3& ry_raw);
inline Mat3 recover_rotation(const PoseParams& p) { return recover_rotation(p.rx_raw, p.ry_raw); }

Vec3 centroid(std::span<const Vec3> cloud);
Vec3 recover_translation(const Vec3& t_residual, std::span<const Vec3> cloud);
Vec3 recover_size(const Vec3& s_residual, const Vec3& mean_size);

/// Assembles a Pose9 from branch outputs; `cloud_mean` is the observed
/// centroid and `mean_size` the category mean extents.
Pose9 pose_from_params(const PoseParams& p, const Vec3& cloud_mean, const Vec3& mean_size);

/// c = R^T (p - t) / L
Vec3 nocs_coordinate(const Vec3& p, const Pose9& pose);
/// p = R (L c) + t
Vec3 world_location(const Vec3& c, const Pose9& pose);

PointCloud nocs_coordinates(std::span<const Vec3> points, const Pose9& pose);
PointCloud world_locations(std::span<const Vec3> coords, const Pose9& pose);

Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);
Mat3 axis_angle(const Vec3& axis, double angle);

/// Angle of R_a R_b^T in radians, in [0, pi].
double geodesic_angle(const Mat3& a, const Mat3& b);
/// Angle between two directions in radians.
double direction_angle(const Vec3& a, const Vec3& b);

bool is_rotation(const Mat3& r, double tol = 1e-9);
/// Throws ValidationError unless the rotation is proper and the size positive.
void validate_pose(const Pose9& pose);

// -- adjoints -------------------------------------------------------------

/// Gradient of a scalar with respect to the fields of a Pose9.
struct PoseGrad {
  Mat3 rotation = Mat3::Zero();
  Vec3 translation = Vec3::Zero();
  Vec3 size = Vec3::Zero();

  PoseGrad& operator+=(const PoseGrad& o) {
    rotation += o.rotation;
    translation += o.translation;
    size += o.size;
    return *this;
  }
};

/// Gradient of a scalar with respect to PoseParams.
struct ParamsGrad {
  Vec3 rx = Vec3::Zero();
  Vec3 ry = Vec3::Zero();
  Vec3 t = Vec3::Zero();
  Vec3 s = Vec3::Zero();
};

/// Back-propagates dR through recover_rotation.
void recover_rotation_backward(const Vec3& rx_raw, const Vec3& ry_raw, const Mat3& d_rotation,
                               Vec3& d_rx, Vec3& d_ry);

/// Chains a Pose9 gradient through pose_from_params.
ParamsGrad backprop_params(const PoseParams& p, const PoseGrad& g);

/// Accumulates the pose gradient of a scalar that depends on
/// c = nocs_coordinate(p, pose) with upstream gradient `dc`.
/// `c` must be the already evaluated coordinate. Returns dl/dp.
Vec3 nocs_coordinate_backward(const Vec3& p, const Pose9& pose, const Vec3& c, const Vec3& dc,
                              PoseGrad& g);

}  // namespace catpose
