#include "catpose/prior.hpp"

#include <cmath>
#include <string>

#include "catpose/errors.hpp"

namespace catpose {

void validate_matching(const MatchingMatrix& m, double tol) {
  if (m.rows() == 0 || m.cols() == 0) throw ValidationError("matching matrix is empty");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      if (!std::isfinite(v) || v < -tol) {
        throw ValidationError("matching row " + std::to_string(i) + " has a negative entry");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) {
      throw ValidationError("matching row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

PointCloud deform(std::span<const Vec3> prior, std::span<const Vec3> d) {
  if (prior.size() != d.size()) {
    throw ValidationError("deform: field has " + std::to_string(d.size()) + " vectors for " +
                          std::to_string(prior.size()) + " prior points");
  }
  PointCloud out(prior.size());
  for (std::size_t i = 0; i < prior.size(); ++i) out[i] = prior[i] + d[i];
  return out;
}

PointCloud reconstruct_coordinates(std::span<const Vec3> prior, std::span<const Vec3> d,
                                   const MatchingMatrix& m) {
  if (static_cast<std::size_t>(m.cols()) != prior.size()) {
    throw ValidationError("reconstruct_coordinates: matching columns differ from prior size");
  }
  validate_matching(m);
  const PointCloud deformed = deform(prior, d);
  PointCloud out;
  kernels::omp::mix_rows(m, deformed, out);
  return out;
}

double deformation_regularizer(std::span<const Vec3> d) {
  if (d.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& v : d) acc += v.squaredNorm();
  return acc / static_cast<double>(d.size());
}

double matching_regularizer(const MatchingMatrix& m) {
  return kernels::omp::mean_row_entropy(m, nullptr);
}

MatchingMatrix matching_from_logits(const RowMatrix& logits) {
  MatchingMatrix out;
  kernels::omp::softmax_rows(logits, out);
  return out;
}

}  // namespace catpose
