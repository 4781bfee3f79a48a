#pragma once

// Data-parallel inner loops of the objective and the RANSAC solver.
//
// Every kernel exists twice with identical signatures: `serial::` is the
// plain reference loop, `omp::` the OpenMP version used by the library.
// The OpenMP versions only parallelize independent per-element work and
// reduce in fixed index order, so both produce bitwise-identical results
// for any thread count.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "catpose/geometry.hpp"

namespace catpose {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace kernels {

struct ChamferResult {
  double value = 0.0;
  PointCloud grad_a;  // empty unless requested
  PointCloud grad_b;
};

/// A similarity hypothesis scored by ransac_scores.
struct Hypothesis {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

struct HypothesisScore {
  int inliers = 0;
  double residual = 0.0;  // sum of inlier residuals
};

namespace serial {

/// Brute-force nearest neighbour of every `from` point in `to`; ties go to
/// the lowest index.
void nearest(std::span<const Vec3> from, std::span<const Vec3> to, std::span<int> index,
             std::span<double> distance);

/// Bidirectional average nearest-neighbour Euclidean distance.
ChamferResult chamfer(std::span<const Vec3> a, std::span<const Vec3> b, bool with_grad);

void softmax_rows(const RowMatrix& logits, RowMatrix& probs);

/// d_logits_i = probs_i * (d_probs_i - <probs_i, d_probs_i>)
void softmax_rows_backward(const RowMatrix& probs, const RowMatrix& d_probs, RowMatrix& d_logits);

/// out_i = sum_j w_ij p_j
void mix_rows(const RowMatrix& weights, std::span<const Vec3> points, PointCloud& out);
void mix_rows_backward(const RowMatrix& weights, std::span<const Vec3> points,
                       std::span<const Vec3> d_out, RowMatrix& d_weights, PointCloud& d_points);

/// Mean Shannon entropy (nats) of the rows of `probs`. When `d_logits` is
/// given it receives the gradient with respect to the logits that produced
/// `probs` through softmax_rows.
double mean_row_entropy(const RowMatrix& probs, RowMatrix* d_logits);

/// Row softmax of `logits` into `probs` together with the mean row entropy
/// (nats), evaluated as lse_i - sum_j p_ij l_ij so no per-entry logarithm
/// is taken. `d_entropy`, when given, receives the entropy gradient with
/// respect to the logits.
double softmax_entropy(const RowMatrix& logits, RowMatrix& probs, RowMatrix* d_entropy);

/// out_ij = residual_ij - beta |a_i - b_j|^2
void affinity_logits(std::span<const Vec3> a, std::span<const Vec3> b, const RowMatrix& residual,
                     double beta, RowMatrix& out);
/// Gradients of affinity_logits with respect to `a` and `b`; the residual
/// gradient is d_out itself.
void affinity_backward(std::span<const Vec3> a, std::span<const Vec3> b, const RowMatrix& d_out,
                       double beta, PointCloud& d_a, PointCloud& d_b);

/// For each rotation Q_k: mean over `rows` of |coords_i - Q_k^T nocs_i|_1.
std::vector<double> candidate_l1(std::span<const Vec3> coords, std::span<const Vec3> nocs,
                                 std::span<const int> rows, std::span<const Mat3> rotations);

/// Inlier count and residual sum of each hypothesis over paired clouds.
std::vector<HypothesisScore> ransac_scores(std::span<const Vec3> source,
                                           std::span<const Vec3> target,
                                           std::span<const Hypothesis> hypotheses,
                                           double threshold);

}  // namespace serial

// Same contracts as serial::, OpenMP-parallel.
namespace omp {

void nearest(std::span<const Vec3> from, std::span<const Vec3> to, std::span<int> index,
             std::span<double> distance);
ChamferResult chamfer(std::span<const Vec3> a, std::span<const Vec3> b, bool with_grad);
void softmax_rows(const RowMatrix& logits, RowMatrix& probs);
void softmax_rows_backward(const RowMatrix& probs, const RowMatrix& d_probs, RowMatrix& d_logits);
void mix_rows(const RowMatrix& weights, std::span<const Vec3> points, PointCloud& out);
void mix_rows_backward(const RowMatrix& weights, std::span<const Vec3> points,
                       std::span<const Vec3> d_out, RowMatrix& d_weights, PointCloud& d_points);
double mean_row_entropy(const RowMatrix& probs, RowMatrix* d_logits);
double softmax_entropy(const RowMatrix& logits, RowMatrix& probs, RowMatrix* d_entropy);
void affinity_logits(std::span<const Vec3> a, std::span<const Vec3> b, const RowMatrix& residual,
                     double beta, RowMatrix& out);
void affinity_backward(std::span<const Vec3> a, std::span<const Vec3> b, const RowMatrix& d_out,
                       double beta, PointCloud& d_a, PointCloud& d_b);
std::vector<double> candidate_l1(std::span<const Vec3> coords, std::span<const Vec3> nocs,
                                 std::span<const int> rows, std::span<const Mat3> rotations);
std::vector<HypothesisScore> ransac_scores(std::span<const Vec3> source,
                                           std::span<const Vec3> target,
                                           std::span<const Hypothesis> hypotheses,
                                           double threshold);

}  // namespace omp

}  // namespace kernels
}  // namespace catpose
