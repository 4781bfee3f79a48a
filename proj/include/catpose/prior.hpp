#pragma once

#include <span>

#include "catpose/geometry.hpp"
#include "catpose/kernels.hpp"

namespace catpose {

/// Per-prior-point displacement D (NOCS scale).
using DeformationField = PointCloud;

/// Row-stochastic |P_obs| x |P_prior| matrix M.
using MatchingMatrix = RowMatrix;

/// Throws ValidationError unless every row is on the probability simplex
/// within `tol`.
void validate_matching(const MatchingMatrix& m, double tol = 1e-9);

/// P_prior + D. Throws ValidationError on cardinality mismatch.
PointCloud deform(std::span<const Vec3> prior, std::span<const Vec3> d);

/// C = M (P_prior + D)
PointCloud reconstruct_coordinates(std::span<const Vec3> prior, std::span<const Vec3> d,
                                   const MatchingMatrix& m);

/// Mean squared displacement magnitude.
double deformation_regularizer(std::span<const Vec3> d);
/// Mean row entropy in nats.
double matching_regularizer(const MatchingMatrix& m);

/// Row-wise normalized exponential of unconstrained logits.
MatchingMatrix matching_from_logits(const RowMatrix& logits);

}  // namespace catpose
