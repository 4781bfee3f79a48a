#include "catpose/similarity.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include <Eigen/SVD>

#include "catpose/errors.hpp"
#include "catpose/kernels.hpp"
#include "catpose/random.hpp"

namespace catpose {

namespace {

constexpr double kRankTolerance = 1e-12;

/// Distinct indices for one RANSAC iteration; depends only on (seed, iteration).
std::vector<int> draw_sample(std::uint64_t seed, int iteration, int n, int k) {
  auto rng = make_rng(seed, static_cast<std::uint64_t>(iteration));
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(k));
  while (static_cast<int>(out.size()) < k) {
    const int idx = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
  }
  return out;
}

}  // namespace

void validate_ransac_config(const RansacConfig& cfg) {
  if (cfg.max_iterations < 1) throw ValidationError("ransac: max_iterations must be positive");
  if (!(cfg.inlier_threshold > 0.0)) throw ValidationError("ransac: inlier_threshold must be > 0");
  if (cfg.min_sample_size < 3) throw ValidationError("ransac: min_sample_size must be >= 3");
}

SimilarityTransform umeyama(std::span<const Vec3> source, std::span<const Vec3> target) {
  if (source.size() != target.size()) throw ValidationError("umeyama: cloud sizes differ");
  if (source.size() < 3) throw ValidationError("umeyama: need at least 3 point pairs");
  const double n = static_cast<double>(source.size());

  const Vec3 mu_s = centroid(source);
  const Vec3 mu_t = centroid(target);
  Mat3 cov_s = Mat3::Zero();
  Mat3 cross = Mat3::Zero();
  double var_s = 0.0;
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Vec3 ds = source[i] - mu_s;
    const Vec3 dt = target[i] - mu_t;
    cov_s += ds * ds.transpose();
    cross += dt * ds.transpose();
    var_s += ds.squaredNorm();
  }
  cov_s /= n;
  cross /= n;
  var_s /= n;

  const Eigen::JacobiSVD<Mat3> src_svd(cov_s);
  const Vec3 sv = src_svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= kRankTolerance * sv(0)) {
    throw DegenerateInputError("umeyama: source points are collinear or coincident");
  }

  const Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 signs = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) signs(2) = -1.0;

  SimilarityTransform out;
  out.rotation = svd.matrixU() * signs.asDiagonal() * svd.matrixV().transpose();
  out.scale = svd.singularValues().dot(signs) / var_s;
  if (!(out.scale > 0.0)) throw DegenerateInputError("umeyama: non-positive scale");
  out.translation = mu_t - out.scale * out.rotation * mu_s;
  return out;
}

RansacResult umeyama_ransac(std::span<const Vec3> source, std::span<const Vec3> target,
                            const RansacConfig& cfg) {
  validate_ransac_config(cfg);
  if (source.size() != target.size()) throw ValidationError("umeyama_ransac: cloud sizes differ");
  const int n = static_cast<int>(source.size());
  if (n < cfg.min_sample_size) {
    throw ValidationError("umeyama_ransac: fewer pairs than min_sample_size");
  }

  std::vector<kernels::Hypothesis> hypotheses;
  hypotheses.reserve(static_cast<std::size_t>(cfg.max_iterations));
  std::vector<Vec3> ss(static_cast<std::size_t>(cfg.min_sample_size));
  std::vector<Vec3> st(ss.size());
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const auto idx = draw_sample(cfg.seed, it, n, cfg.min_sample_size);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      ss[k] = source[idx[k]];
      st[k] = target[idx[k]];
    }
    try {
      const auto t = umeyama(ss, st);
      hypotheses.push_back({t.scale, t.rotation, t.translation});
    } catch (const DegenerateInputError&) {
      // degenerate minimal sample
    }
  }

  const auto scores = kernels::omp::ransac_scores(source, target, hypotheses, cfg.inlier_threshold);
  int best = -1;
  for (std::size_t h = 0; h < scores.size(); ++h) {
    if (best < 0 || scores[h].inliers > scores[best].inliers ||
        (scores[h].inliers == scores[best].inliers && scores[h].residual < scores[best].residual)) {
      best = static_cast<int>(h);
    }
  }
  if (best < 0 || scores[best].inliers < cfg.min_sample_size) {
    throw NoConsensusError("umeyama_ransac: no consensus (best inlier count " +
                           std::to_string(best < 0 ? 0 : scores[best].inliers) + ")");
  }

  const auto& hy = hypotheses[best];
  const Mat3 sr = hy.scale * hy.rotation;
  std::vector<Vec3> in_s, in_t;
  for (int i = 0; i < n; ++i) {
    if ((sr * source[i] + hy.translation - target[i]).norm() <= cfg.inlier_threshold) {
      in_s.push_back(source[i]);
      in_t.push_back(target[i]);
    }
  }

  RansacResult out;
  try {
    out.transform = umeyama(in_s, in_t);
  } catch (const DegenerateInputError&) {
    out.transform = {hy.scale, hy.rotation, hy.translation};
  }
  out.inliers.assign(static_cast<std::size_t>(n), false);
  for (int i = 0; i < n; ++i) {
    if ((out.transform.apply(source[i]) - target[i]).norm() <= cfg.inlier_threshold) {
      out.inliers[i] = true;
      ++out.inlier_count;
    }
  }
  if (out.inlier_count < cfg.min_sample_size) {
    throw NoConsensusError("umeyama_ransac: refit lost consensus");
  }
  return out;
}

NocsPoseResult pose_from_nocs_detailed(std::span<const Vec3> coords,
                                       std::span<const Vec3> observed, const RansacConfig& cfg) {
  auto fit = umeyama_ransac(coords, observed, cfg);
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (!fit.inliers[i]) continue;
    lo = lo.cwiseMin(coords[i]);
    hi = hi.cwiseMax(coords[i]);
  }
  NocsPoseResult out;
  out.transform = fit.transform;
  out.inliers = std::move(fit.inliers);
  out.pose.rotation = fit.transform.rotation;
  out.pose.translation = fit.transform.translation;
  out.pose.size = fit.transform.scale * (hi - lo);
  if (!(out.pose.size.minCoeff() > 0.0)) {
    throw DegenerateInputError("pose_from_nocs: inlier coordinates are flat along an axis");
  }
  return out;
}

}  // namespace catpose
