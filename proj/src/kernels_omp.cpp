#include <cmath>
#include <limits>

#include "catpose/kernels.hpp"

namespace catpose::kernels::omp {

namespace {

long as_long(std::size_t n) { return static_cast<long>(n); }

}  // namespace

void nearest(std::span<const Vec3> from, std::span<const Vec3> to, std::span<int> index,
             std::span<double> distance) {
#pragma omp parallel for schedule(static)
  for (long i = 0; i < as_long(from.size()); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (std::size_t j = 0; j < to.size(); ++j) {
      const double d = (from[i] - to[j]).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<int>(j);
      }
    }
    index[i] = arg;
    distance[i] = std::sqrt(best);
  }
}

ChamferResult chamfer(std::span<const Vec3> a, std::span<const Vec3> b, bool with_grad) {
  std::vector<int> ia(a.size()), ib(b.size());
  std::vector<double> da(a.size()), db(b.size());
  nearest(a, b, ia, da);
  nearest(b, a, ib, db);

  // Scatter into grad_b / grad_a targets arbitrary indices; kept sequential
  // so the summation order matches the reference.
  ChamferResult out;
  double sa = 0.0, sb = 0.0;
  for (double d : da) sa += d;
  for (double d : db) sb += d;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  out.value = sa / na + sb / nb;
  if (!with_grad) return out;

  out.grad_a.assign(a.size(), Vec3::Zero());
  out.grad_b.assign(b.size(), Vec3::Zero());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (da[i] <= 0.0) continue;
    const Vec3 g = (a[i] - b[ia[i]]) / (da[i] * na);
    out.grad_a[i] += g;
    out.grad_b[ia[i]] -= g;
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (db[j] <= 0.0) continue;
    const Vec3 g = (b[j] - a[ib[j]]) / (db[j] * nb);
    out.grad_b[j] += g;
    out.grad_a[ib[j]] -= g;
  }
  return out;
}

void softmax_rows(const RowMatrix& logits, RowMatrix& probs) {
  probs.resize(logits.rows(), logits.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const double e = std::exp(logits(i, j) - m);
      probs(i, j) = e;
      z += e;
    }
    for (Eigen::Index j = 0; j < logits.cols(); ++j) probs(i, j) /= z;
  }
}

void softmax_rows_backward(const RowMatrix& probs, const RowMatrix& d_probs, RowMatrix& d_logits) {
  d_logits.resize(probs.rows(), probs.cols());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    double inner = 0.0;
    for (Eigen::Index j = 0; j < probs.cols(); ++j) inner += probs(i, j) * d_probs(i, j);
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
      d_logits(i, j) = probs(i, j) * (d_probs(i, j) - inner);
    }
  }
}

void mix_rows(const RowMatrix& weights, std::span<const Vec3> points, PointCloud& out) {
  out.assign(static_cast<std::size_t>(weights.rows()), Vec3::Zero());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    Vec3 acc = Vec3::Zero();
    for (Eigen::Index j = 0; j < weights.cols(); ++j) acc += weights(i, j) * points[j];
    out[i] = acc;
  }
}

void mix_rows_backward(const RowMatrix& weights, std::span<const Vec3> points,
                       std::span<const Vec3> d_out, RowMatrix& d_weights, PointCloud& d_points) {
  d_weights.resize(weights.rows(), weights.cols());
  d_points.assign(points.size(), Vec3::Zero());
#pragma omp parallel
  {
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < weights.cols(); ++j) d_weights(i, j) = d_out[i].dot(points[j]);
    }
    // Column-parallel gather keeps the row order of each accumulation.
#pragma omp for schedule(static)
    for (Eigen::Index j = 0; j < weights.cols(); ++j) {
      Vec3 acc = Vec3::Zero();
      for (Eigen::Index i = 0; i < weights.rows(); ++i) acc += weights(i, j) * d_out[i];
      d_points[j] = acc;
    }
  }
}

double mean_row_entropy(const RowMatrix& probs, RowMatrix* d_logits) {
  const Eigen::Index n = probs.rows();
  if (d_logits) d_logits->resize(n, probs.cols());
  std::vector<double> row_h(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    double h = 0.0;
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
      const double p = probs(i, j);
      if (p > 0.0) h -= p * std::log(p);
    }
    row_h[i] = h;
    if (d_logits) {
      for (Eigen::Index j = 0; j < probs.cols(); ++j) {
        const double p = probs(i, j);
        (*d_logits)(i, j) = p > 0.0 ? -p * (std::log(p) + h) / static_cast<double>(n) : 0.0;
      }
    }
  }
  double total = 0.0;
  for (double h : row_h) total += h;
  return total / static_cast<double>(n);
}

double softmax_entropy(const RowMatrix& logits, RowMatrix& probs, RowMatrix* d_entropy) {
  const Eigen::Index n = logits.rows(), cols = logits.cols();
  probs.resize(n, cols);
  if (d_entropy) d_entropy->resize(n, cols);
  std::vector<double> row_h(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    double z = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double e = std::exp(logits(i, j) - m);
      probs(i, j) = e;
      z += e;
    }
    const double lse = m + std::log(z);
    double pl = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) {
      probs(i, j) /= z;
      pl += probs(i, j) * logits(i, j);
    }
    const double h = lse - pl;
    row_h[i] = h;
    if (d_entropy) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        (*d_entropy)(i, j) = -probs(i, j) * (logits(i, j) - lse + h) / static_cast<double>(n);
      }
    }
  }
  double total = 0.0;
  for (double h : row_h) total += h;
  return total / static_cast<double>(n);
}

void affinity_logits(std::span<const Vec3> a, std::span<const Vec3> b, const RowMatrix& residual,
                     double beta, RowMatrix& out) {
  out.resize(residual.rows(), residual.cols());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < as_long(a.size()); ++i) {
    const Vec3 ai = a[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < b.size(); ++j) {
      const auto c = static_cast<Eigen::Index>(j);
      out(i, c) = residual(i, c) - beta * (ai - b[j]).squaredNorm();
    }
  }
}

void affinity_backward(std::span<const Vec3> a, std::span<const Vec3> b, const RowMatrix& d_out,
                       double beta, PointCloud& d_a, PointCloud& d_b) {
  d_a.assign(a.size(), Vec3::Zero());
  d_b.assign(b.size(), Vec3::Zero());
#pragma omp parallel
  {
#pragma omp for schedule(static)
    for (long i = 0; i < as_long(a.size()); ++i) {
      const Vec3 ai = a[static_cast<std::size_t>(i)];
      Vec3 acc = Vec3::Zero();
      for (std::size_t j = 0; j < b.size(); ++j) {
        acc -= (2.0 * beta * d_out(i, static_cast<Eigen::Index>(j))) * (ai - b[j]);
      }
      d_a[static_cast<std::size_t>(i)] = acc;
    }
#pragma omp for schedule(static)
    for (long j = 0; j < as_long(b.size()); ++j) {
      const Vec3 bj = b[static_cast<std::size_t>(j)];
      Vec3 acc = Vec3::Zero();
      for (std::size_t i = 0; i < a.size(); ++i) {
        acc += (2.0 * beta * d_out(static_cast<Eigen::Index>(i), j)) * (a[i] - bj);
      }
      d_b[static_cast<std::size_t>(j)] = acc;
    }
  }
}

std::vector<double> candidate_l1(std::span<const Vec3> coords, std::span<const Vec3> nocs,
                                 std::span<const int> rows, std::span<const Mat3> rotations) {
  std::vector<double> out(rotations.size(), 0.0);
#pragma omp parallel for schedule(static)
  for (long k = 0; k < as_long(rotations.size()); ++k) {
    const Mat3 qt = rotations[k].transpose();
    double acc = 0.0;
    for (int i : rows) acc += (coords[i] - qt * nocs[i]).cwiseAbs().sum();
    out[k] = acc / static_cast<double>(rows.size());
  }
  return out;
}

std::vector<HypothesisScore> ransac_scores(std::span<const Vec3> source,
                                           std::span<const Vec3> target,
                                           std::span<const Hypothesis> hypotheses,
                                           double threshold) {
  std::vector<HypothesisScore> out(hypotheses.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long h = 0; h < as_long(hypotheses.size()); ++h) {
    const auto& hy = hypotheses[h];
    const Mat3 sr = hy.scale * hy.rotation;
    HypothesisScore s;
    for (std::size_t i = 0; i < source.size(); ++i) {
      const double r = (sr * source[i] + hy.translation - target[i]).norm();
      if (r <= threshold) {
        ++s.inliers;
        s.residual += r;
      }
    }
    out[h] = s;
  }
  return out;
}

}  // namespace catpose::kernels::omp
