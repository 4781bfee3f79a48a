#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "catpose/geometry.hpp"
#include "catpose/objective.hpp"
#include "catpose/symmetry.hpp"

namespace catpose {

enum class ShapeKind { Cylinder, BowlShell, Box, HingedPlates, Composite };

struct ParamRange {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
};

/// Parametric canonical shape family. Parameters are metric (meters or
/// radians); the y axis is up and the shape is symmetric per `symmetry`.
struct ShapeSpec {
  std::string category;
  ShapeKind kind = ShapeKind::Box;
  std::vector<ParamRange> params;
  SymmetryClass symmetry;
};

using ShapeParams = std::map<std::string, double>;

void validate_spec(const ShapeSpec& spec);

/// can, bowl, box, laptop, camera.
ShapeSpec builtin_spec(std::string_view category);
const std::vector<std::string>& builtin_categories();

ShapeParams draw_params(const ShapeSpec& spec, std::uint64_t seed);

/// Surface samples of one shape in NOCS: (metric point - box center) / L.
struct CanonicalShape {
  PointCloud coords;
  Vec3 extents;  // metric bounding-box size
};

CanonicalShape sample_shape(const ShapeSpec& spec, const ShapeParams& params, int points,
                            std::uint64_t seed);

/// Mean shape of a given population: every member is sampled with the same
/// surface parameters and part fractions, the metric samples are averaged
/// pointwise and normalized by the mean bounding box.
CategoryProfile make_prior_from_params(const ShapeSpec& spec,
                                       const std::vector<ShapeParams>& population, int points,
                                       std::uint64_t seed);

/// Draws `population` parameter sets and builds their mean-shape profile.
CategoryProfile make_prior(const ShapeSpec& spec, int population, int points, std::uint64_t seed);

enum class PoseSampler { Upright, Uniform };

struct InstanceOptions {
  int points = 1024;
  double noise_sigma = 0.0;
  double outlier_fraction = 0.0;
  PoseSampler sampler = PoseSampler::Upright;
  double max_tilt = 25.0 * 3.14159265358979323846 / 180.0;  // Upright only
  Vec3 translation_lo{-0.2, -0.2, 0.6};
  Vec3 translation_hi{0.2, 0.2, 1.0};
  double outlier_margin = 0.25;    // inflation of the sampling box, meters
  double outlier_min_dist = 0.15;  // minimum distance to the gt location
};

void validate_instance_options(const InstanceOptions& opt);

struct Instance {
  PointCloud observed;
  PointCloud coords_gt;
  Pose9 pose_gt;
  InlierMask inliers_gt;
  std::string category;
  std::uint64_t seed = 0;
};

Instance make_instance(const ShapeSpec& spec, const InstanceOptions& opt, std::uint64_t seed);

}  // namespace catpose
