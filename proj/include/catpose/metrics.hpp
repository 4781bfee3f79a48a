#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "catpose/geometry.hpp"
#include "catpose/symmetry.hpp"

namespace catpose {

struct PoseError {
  double rotation_error = 0.0;     // degrees
  double translation_error = 0.0;  // meters
  double iou3d = 0.0;
};

/// Oriented-box IoU by exact convex clipping. Boxes are centered at t,
/// oriented by R with extents s. Symmetric in its arguments.
double iou3d(const Pose9& a, const Pose9& b);

/// Rotation error in degrees under the category symmetry: y-axis angle for
/// RotationalY, geodesic angle otherwise (ReflectionXY also tries the pi
/// flip about y). IoU for RotationalY is the maximum over the candidate
/// yaws of the prediction.
double rotation_error_deg(const Mat3& pred, const Mat3& gt, const SymmetryClass& sym);
PoseError pose_error(const Pose9& pred, const Pose9& gt, const SymmetryClass& sym);

/// Fraction of instances passing each threshold. Pose buckets need both
/// errors strictly below the thresholds, IoU buckets need iou >= threshold.
struct Precision {
  int count = 0;
  double iou25 = 0.0, iou50 = 0.0, iou75 = 0.0;
  double deg5_cm2 = 0.0, deg5_cm5 = 0.0, deg10_cm5 = 0.0, deg10_cm10 = 0.0;
};

struct MetricsReport {
  Precision overall;
  std::map<std::string, Precision> per_category;
};

/// Throws ValidationError on an empty list.
Precision aggregate(std::span<const PoseError> errors);
MetricsReport aggregate(std::span<const PoseError> errors, std::span<const std::string> categories);

/// (name, value) pairs in report order.
std::vector<std::pair<std::string, double>> precision_fields(const Precision& p);

}  // namespace catpose
