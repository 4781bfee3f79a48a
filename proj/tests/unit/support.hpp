#pragma once

#include <cmath>
#include <random>

#include "catpose/geometry.hpp"
#include "catpose/random.hpp"

namespace testing {

using catpose::Mat3;
using catpose::Pose9;
using catpose::Vec3;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 random_vec(std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

/// Uniform rotation from a normalized Gaussian quaternion.
inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline Pose9 random_pose(std::mt19937_64& rng) {
  Pose9 p;
  p.rotation = random_rotation(rng);
  p.translation = random_vec(rng, -1.0, 1.0);
  p.size = random_vec(rng, 0.05, 0.5);
  return p;
}

inline double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace testing
