#include "catpose/objective.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "catpose/errors.hpp"

namespace catpose {

namespace {

Vec3 sgn(const Vec3& v) {
  return v.unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ValidationError(std::string(what) + ": cardinality mismatch (" + std::to_string(a) +
                          " vs " + std::to_string(b) + ")");
  }
}

std::vector<int> inlier_rows(const InlierMask& mask, const char* what) {
  auto rows = mask.indices();
  if (rows.empty()) throw DegenerateInputError(std::string(what) + ": no inliers");
  return rows;
}

std::vector<Mat3> relative_candidates(const SymmetryClass& sym, bool use_symmetry) {
  if (!use_symmetry || sym.kind != SymmetryKind::RotationalY) return {Mat3::Identity()};
  return candidate_rotations(Mat3::Identity(), sym);
}

// Each term below returns its unweighted value. With `scale` != 0 it also
// accumulates scale * d(term) into the supplied gradient buffers.

double pose_term(const Pose9& pred, const Pose9& gt, const SymmetryClass& sym, double scale,
                 PoseGrad* d_pred, PoseGrad* d_gt) {
  const Vec3 dt = pred.translation - gt.translation;
  const Vec3 ds = pred.size - gt.size;
  const Vec3 dy = pred.rotation.col(1) - gt.rotation.col(1);
  double value = dt.cwiseAbs().sum() + ds.cwiseAbs().sum() + dy.cwiseAbs().sum();
  const bool use_x = sym.kind != SymmetryKind::RotationalY;
  const Vec3 dx = pred.rotation.col(0) - gt.rotation.col(0);
  if (use_x) value += dx.cwiseAbs().sum();
  if (scale != 0.0) {
    PoseGrad g;
    g.translation = scale * sgn(dt);
    g.size = scale * sgn(ds);
    g.rotation.col(1) = scale * sgn(dy);
    if (use_x) g.rotation.col(0) = scale * sgn(dx);
    if (d_pred) *d_pred += g;
    if (d_gt) {
      d_gt->translation -= g.translation;
      d_gt->size -= g.size;
      d_gt->rotation -= g.rotation;
    }
  }
  return value;
}

}  // namespace

void validate_weights(const LossWeights& w) {
  for (double v : {w.pose, w.shape_prior, w.mask, w.reconstruction, w.consistency}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError("loss weights must be finite and non-negative");
    }
  }
}

std::vector<int> InlierMask::indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < inlier.size(); ++i) {
    if (inlier[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

int InlierMask::count() const {
  int n = 0;
  for (auto v : inlier) n += v ? 1 : 0;
  return n;
}

InlierMask InlierMask::all(std::size_t n) {
  return {std::vector<std::uint8_t>(n, 1), std::vector<double>(n, 1.0)};
}

InlierMask gt_inliers(std::span<const Vec3> observed, std::span<const Vec3> coords_gt,
                      const Pose9& pose_gt, double threshold) {
  require_same_size(observed.size(), coords_gt.size(), "gt_inliers");
  InlierMask out;
  out.inlier.resize(observed.size());
  out.score.resize(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const bool in = (observed[i] - world_location(coords_gt[i], pose_gt)).norm() <= threshold;
    out.inlier[i] = in ? 1 : 0;
    out.score[i] = in ? 1.0 : 0.0;
  }
  return out;
}

double pose_loss(const Pose9& pred, const Pose9& gt, const SymmetryClass& sym) {
  return pose_term(pred, gt, sym, 0.0, nullptr, nullptr);
}

double consistency_loss(std::span<const Vec3> coords_pred, std::span<const Vec3> observed,
                        const Pose9& pose_pred, const InlierMask& mask) {
  require_same_size(coords_pred.size(), observed.size(), "consistency_loss");
  require_same_size(mask.size(), observed.size(), "consistency_loss");
  const auto rows = inlier_rows(mask, "consistency_loss");
  double acc = 0.0;
  for (int i : rows) acc += (nocs_coordinate(observed[i], pose_pred) - coords_pred[i]).cwiseAbs().sum();
  return acc / static_cast<double>(rows.size());
}

double sym_coordinate_loss(std::span<const Vec3> coords_pred, std::span<const Vec3> observed,
                           const Pose9& pose_gt, const SymmetryClass& sym,
                           const InlierMask& mask) {
  require_same_size(coords_pred.size(), observed.size(), "sym_coordinate_loss");
  require_same_size(mask.size(), observed.size(), "sym_coordinate_loss");
  const auto rows = inlier_rows(mask, "sym_coordinate_loss");
  const PointCloud nocs = nocs_coordinates(observed, pose_gt);
  const auto rots = relative_candidates(sym, true);
  const auto vals = kernels::omp::candidate_l1(coords_pred, nocs, rows, rots);
  double best = vals[0];
  for (double v : vals) best = v < best ? v : best;
  return best;
}

double sym_shape_loss(std::span<const Vec3> deformed, std::span<const Vec3> mirrored_canonical) {
  if (deformed.empty() || mirrored_canonical.empty()) {
    throw ValidationError("sym_shape_loss: empty point cloud");
  }
  return kernels::omp::chamfer(deformed, mirrored_canonical, false).value;
}

double reconstruction_loss(std::span<const Vec3> mirrored_pred, std::span<const Vec3> observed,
                           const Pose9& pose_gt, const SymmetryClass& sym,
                           const InlierMask& mask) {
  require_same_size(mirrored_pred.size(), observed.size(), "reconstruction_loss");
  require_same_size(mask.size(), observed.size(), "reconstruction_loss");
  const auto rows = inlier_rows(mask, "reconstruction_loss");
  double acc = 0.0;
  for (int i : rows) {
    acc += (mirror_world(observed[i], pose_gt, sym) - mirrored_pred[i]).cwiseAbs().sum();
  }
  return acc / static_cast<double>(rows.size());
}

double mask_loss(std::span<const double> scores, const InlierMask& mask_gt) {
  require_same_size(scores.size(), mask_gt.size(), "mask_loss");
  if (scores.empty()) throw ValidationError("mask_loss: empty mask");
  double acc = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    acc += std::abs(scores[i] - (mask_gt.inlier[i] ? 1.0 : 0.0));
  }
  return acc / static_cast<double>(scores.size());
}

LossReport total_loss(const Prediction& pred, const Supervision& gt,
                      std::span<const Vec3> observed, std::span<const Vec3> prior,
                      const SymmetryClass& sym, const LossOptions& opt, bool with_grad) {
  validate_weights(opt.weights);
  const std::size_t n = observed.size();
  const std::size_t np = prior.size();
  if (n == 0 || np == 0) throw ValidationError("total_loss: empty point cloud");
  require_same_size(static_cast<std::size_t>(pred.logits.rows()), n, "total_loss logits rows");
  require_same_size(static_cast<std::size_t>(pred.logits.cols()), np, "total_loss logits cols");
  require_same_size(pred.deformation.size(), np, "total_loss deformation");
  require_same_size(gt.mask.size(), n, "total_loss mask");
  if (opt.sym_recon) require_same_size(pred.mirrored.size(), n, "total_loss mirrored");
  if (opt.mask_term) require_same_size(pred.scores.size(), n, "total_loss scores");

  const auto rows = inlier_rows(gt.mask, "total_loss");
  const double ni = static_cast<double>(rows.size());
  const auto& w = opt.weights;
  const auto& sw = opt.shape_prior;
  const double g = with_grad ? 1.0 : 0.0;
  const Vec3 fdiag = mirror_signs(sym.kind);

  LossReport rep;
  LossTerms& T = rep.terms;
  LossGradients& G = rep.grad;
  PointCloud d_coords;
  if (with_grad) {
    G.deformation.assign(np, Vec3::Zero());
    d_coords.assign(n, Vec3::Zero());
    if (opt.sym_recon) G.mirrored.assign(n, Vec3::Zero());
    if (opt.mask_term) G.scores.assign(n, 0.0);
  }

  // C = softmax(logits) (P + D)
  RowMatrix probs, d_entropy;
  T.matching = kernels::omp::softmax_entropy(pred.logits, probs, with_grad ? &d_entropy : nullptr);
  const PointCloud deformed = deform(prior, pred.deformation);
  kernels::omp::mix_rows(probs, deformed, rep.coords);
  const PointCloud& coords = rep.coords;

  // pose
  if (opt.pose_term) {
    T.pose = pose_term(pred.pose, gt.pose, sym, g * w.pose, &G.pose, &G.pose_gt);
  }

  // consistency against the predicted pose
  {
    double acc = 0.0;
    const double scale = g * w.consistency / ni;
    for (int i : rows) {
      const Vec3 c = nocs_coordinate(observed[i], pred.pose);
      const Vec3 r = c - coords[i];
      acc += r.cwiseAbs().sum();
      if (with_grad) {
        const Vec3 s = scale * sgn(r);
        d_coords[i] -= s;
        nocs_coordinate_backward(observed[i], pred.pose, c, s, G.pose);
      }
    }
    T.consistency = acc / ni;
  }

  const PointCloud nocs_gt = nocs_coordinates(observed, gt.pose);

  // symmetry-aware coordinate term
  {
    const auto rots = relative_candidates(sym, opt.sym_losses);
    const auto vals = kernels::omp::candidate_l1(coords, nocs_gt, rows, rots);
    std::size_t best = 0;
    for (std::size_t k = 1; k < vals.size(); ++k) {
      if (vals[k] < vals[best]) best = k;
    }
    T.coordinate = vals[best];
    if (with_grad) {
      const Mat3& q = rots[best];
      const double scale = w.shape_prior * sw.coordinate / ni;
      for (int i : rows) {
        const Vec3 s = scale * sgn(coords[i] - q.transpose() * nocs_gt[i]);
        d_coords[i] += s;
        nocs_coordinate_backward(observed[i], gt.pose, nocs_gt[i], -(q * s), G.pose_gt);
      }
    }
  }

  // symmetry-aware shape term: Chamfer between deformed prior and target
  {
    PointCloud target;
    target.reserve(rows.size());
    for (int i : rows) {
      if (opt.sym_recon) {
        target.push_back(nocs_coordinate(pred.mirrored[i], gt.pose));
      } else if (opt.sym_losses) {
        target.push_back(nocs_gt[i].cwiseProduct(fdiag));
      } else {
        target.push_back(nocs_gt[i]);
      }
    }
    const auto ch = kernels::omp::chamfer(deformed, target, with_grad);
    T.shape = ch.value;
    if (with_grad) {
      const double scale = w.shape_prior * sw.shape;
      for (std::size_t j = 0; j < np; ++j) G.deformation[j] += scale * ch.grad_a[j];
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const int i = rows[k];
        const Vec3 dc = scale * ch.grad_b[k];
        if (opt.sym_recon) {
          G.mirrored[i] += nocs_coordinate_backward(pred.mirrored[i], gt.pose, target[k], dc,
                                                    G.pose_gt);
        } else if (opt.sym_losses) {
          nocs_coordinate_backward(observed[i], gt.pose, nocs_gt[i], dc.cwiseProduct(fdiag),
                                   G.pose_gt);
        } else {
          nocs_coordinate_backward(observed[i], gt.pose, nocs_gt[i], dc, G.pose_gt);
        }
      }
    }
  }

  // prior regularizers
  T.deformation = deformation_regularizer(pred.deformation);
  if (with_grad) {
    const double scale = w.shape_prior * sw.deformation * 2.0 / static_cast<double>(np);
    for (std::size_t j = 0; j < np; ++j) G.deformation[j] += scale * pred.deformation[j];
  }
  T.shape_prior = sw.coordinate * T.coordinate + sw.shape * T.shape +
                  sw.deformation * T.deformation + sw.matching * T.matching;

  // mask
  if (opt.mask_term) {
    double acc = 0.0;
    const double scale = w.mask / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = pred.scores[i] - (gt.mask.inlier[i] ? 1.0 : 0.0);
      acc += std::abs(r);
      if (with_grad) G.scores[i] += scale * sgn(r);
    }
    T.mask = acc / static_cast<double>(n);
  }

  // mirrored-point reconstruction
  if (opt.sym_recon) {
    double acc = 0.0;
    const double scale = w.reconstruction / ni;
    const Mat3& R = gt.pose.rotation;
    for (int i : rows) {
      const Vec3 v = observed[i] - gt.pose.translation;
      const Vec3 b = R.transpose() * v;
      const Vec3 m = R * b.cwiseProduct(fdiag) + gt.pose.translation;
      const Vec3 r = m - pred.mirrored[i];
      acc += r.cwiseAbs().sum();
      if (with_grad) {
        const Vec3 s = scale * sgn(r);
        G.mirrored[i] -= s;
        if (sym.kind != SymmetryKind::None) {
          const Vec3 a = R.transpose() * s;
          G.pose_gt.rotation += s * b.cwiseProduct(fdiag).transpose() +
                                v * a.cwiseProduct(fdiag).transpose();
          G.pose_gt.translation += s - R * a.cwiseProduct(fdiag);
        }
      }
    }
    T.reconstruction = acc / ni;
  }

  T.total = w.shape_prior * T.shape_prior + w.consistency * T.consistency;
  if (opt.pose_term) T.total += w.pose * T.pose;
  if (opt.mask_term) T.total += w.mask * T.mask;
  if (opt.sym_recon) T.total += w.reconstruction * T.reconstruction;

  if (with_grad) {
    RowMatrix d_probs;
    PointCloud d_deformed;
    kernels::omp::mix_rows_backward(probs, deformed, d_coords, d_probs, d_deformed);
    for (std::size_t j = 0; j < np; ++j) G.deformation[j] += d_deformed[j];
    kernels::omp::softmax_rows_backward(probs, d_probs, G.logits);
    G.logits += (w.shape_prior * sw.matching) * d_entropy;
  }
  return rep;
}

}  // namespace catpose
