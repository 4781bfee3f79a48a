#include "catpose/fitter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "catpose/errors.hpp"
#include "catpose/random.hpp"

namespace catpose {

namespace {

constexpr double kMaxPerturbation = 20.0 * std::numbers::pi / 180.0;
constexpr double kOracleLogitGap = 50.0;

Mat3 small_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, kMaxPerturbation);
  const Vec3 axis(n(rng), n(rng), n(rng));
  return axis_angle(axis, u(rng));
}

FitState base_state(const Instance& inst, const CategoryProfile& profile, const Mat3& rotation) {
  FitState s;
  s.params.rx_raw = rotation.col(0);
  s.params.ry_raw = rotation.col(1);
  const std::size_t n = inst.observed.size(), np = profile.prior.size();
  s.deformation.assign(np, Vec3::Zero());
  s.logits = RowMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(np));
  s.mirrored.assign(n, Vec3::Zero());
  s.scores.assign(n, 1.0);
  return s;
}

// -- flat packing for the optimizer --------------------------------------------

struct Layout {
  Eigen::Index n_obs = 0, n_prior = 0;
  Eigen::Index size() const { return 12 + 3 * n_prior + n_obs * n_prior + 3 * n_obs + n_obs; }
};

void pack(const FitState& s, Eigen::VectorXd& x) {
  const Eigen::Index np = static_cast<Eigen::Index>(s.deformation.size());
  const Eigen::Index n = s.logits.rows();
  x.resize(Layout{n, np}.size());
  Eigen::Index k = 0;
  for (const Vec3* v : {&s.params.rx_raw, &s.params.ry_raw, &s.params.t_residual,
                        &s.params.s_residual}) {
    x.segment<3>(k) = *v;
    k += 3;
  }
  for (const auto& d : s.deformation) {
    x.segment<3>(k) = d;
    k += 3;
  }
  x.segment(k, s.logits.size()) = Eigen::Map<const Eigen::VectorXd>(s.logits.data(), s.logits.size());
  k += s.logits.size();
  for (const auto& q : s.mirrored) {
    x.segment<3>(k) = q;
    k += 3;
  }
  for (double v : s.scores) x[k++] = v;
}

void unpack(const Eigen::VectorXd& x, FitState& s) {
  Eigen::Index k = 0;
  for (Vec3* v : {&s.params.rx_raw, &s.params.ry_raw, &s.params.t_residual,
                  &s.params.s_residual}) {
    *v = x.segment<3>(k);
    k += 3;
  }
  for (auto& d : s.deformation) {
    d = x.segment<3>(k);
    k += 3;
  }
  Eigen::Map<Eigen::VectorXd>(s.logits.data(), s.logits.size()) = x.segment(k, s.logits.size());
  k += s.logits.size();
  for (auto& q : s.mirrored) {
    q = x.segment<3>(k);
    k += 3;
  }
  for (auto& v : s.scores) v = x[k++];
}

Eigen::VectorXd step_lengths(const FitState& s, const FitConfig& cfg) {
  const Eigen::Index np = static_cast<Eigen::Index>(s.deformation.size());
  const Eigen::Index n = s.logits.rows();
  Eigen::VectorXd lr(Layout{n, np}.size());
  const auto& st = cfg.steps;
  Eigen::Index k = 0;
  auto fill = [&](Eigen::Index count, double value) {
    lr.segment(k, count).setConstant(value * cfg.step_size);
    k += count;
  };
  fill(6, st.rotation);
  fill(3, st.translation);
  fill(3, st.size);
  fill(3 * np, st.deformation);
  fill(n * np, st.logits);
  fill(3 * n, st.mirrored);
  fill(n, st.scores);
  return lr;
}

// -- one evaluation ------------------------------------------------------------

struct Problem {
  const PointCloud& observed;
  const CategoryProfile& profile;
  Vec3 cloud_mean;
  LossOptions options;
  bool direct = true;
  double affinity = 0.0;
};

LossOptions loss_options(const FitConfig& cfg) {
  LossOptions opt;
  opt.weights = cfg.weights;
  opt.shape_prior = cfg.shape_prior;
  opt.sym_losses = cfg.toggles.sym_losses;
  opt.sym_recon = cfg.toggles.sym_recon;
  opt.mask_term = cfg.toggles.outlier_removal;
  return opt;
}

struct Evaluation {
  bool ok = false;
  double total = std::numeric_limits<double>::infinity();
  Pose9 pose;
  LossReport report;
  PointCloud nocs;      // direct branch: canonical observation
  PointCloud deformed;  // direct branch: P + D
};

/// Pose from the current coordinates when the direct branch is off: the
/// Umeyama similarity from inlier coordinates to inlier observations, with
/// the size scaled so that its diagonal equals the recovered scale.
Pose9 coordinate_pose(const FitState& s, const Problem& pb, const InlierMask& labels) {
  RowMatrix probs;
  kernels::omp::softmax_rows(s.logits, probs);
  PointCloud coords;
  kernels::omp::mix_rows(probs, deform(pb.profile.prior, s.deformation), coords);
  PointCloud src, dst;
  for (int i : labels.indices()) {
    src.push_back(coords[i]);
    dst.push_back(pb.observed[i]);
  }
  const auto t = umeyama(src, dst);
  Pose9 pose;
  pose.rotation = t.rotation;
  pose.translation = t.translation;
  pose.size = t.scale * pb.profile.mean_size / pb.profile.mean_size.norm();
  return pose;
}

Evaluation evaluate(const FitState& s, const Problem& pb, const InlierMask& labels, bool grad) {
  Evaluation e;
  Prediction pred;
  try {
    pred.pose = pb.direct ? pose_from_params(s.params, pb.cloud_mean, pb.profile.mean_size)
                          : coordinate_pose(s, pb, labels);
  } catch (const Error&) {
    return e;
  }
  const auto& sym = pb.profile.symmetry;
  pred.deformation = s.deformation;
  if (pb.direct) {
    e.nocs = nocs_coordinates(pb.observed, pred.pose);
    e.deformed = deform(pb.profile.prior, s.deformation);
    kernels::omp::affinity_logits(e.nocs, e.deformed, s.logits, pb.affinity, pred.logits);
  } else {
    pred.logits = s.logits;
  }
  pred.mirrored.resize(s.mirrored.size());
  for (std::size_t i = 0; i < s.mirrored.size(); ++i) {
    pred.mirrored[i] = mirror_world(pb.observed[i], pred.pose, sym) + s.mirrored[i];
  }
  pred.scores.resize(s.scores.size());
  for (std::size_t i = 0; i < s.scores.size(); ++i) pred.scores[i] = std::clamp(s.scores[i], 0.0, 1.0);
  const Supervision sup{pred.pose, labels};
  e.report = total_loss(pred, sup, pb.observed, pb.profile.prior, sym, pb.options, grad);
  e.total = e.report.terms.total;
  e.ok = std::isfinite(e.total);
  e.pose = pred.pose;
  return e;
}

Eigen::VectorXd flat_gradient(const FitState& s, const Problem& pb, const Evaluation& e) {
  const auto& G = e.report.grad;
  FitState g = s;
  g.deformation = G.deformation;
  g.logits = G.logits;
  if (G.mirrored.empty()) {
    std::fill(g.mirrored.begin(), g.mirrored.end(), Vec3::Zero());
  } else {
    g.mirrored = G.mirrored;
  }
  if (pb.direct) {
    PoseGrad pg = G.pose;
    pg += G.pose_gt;  // supervision slot is bound to the estimate
    const Pose9& pose = e.pose;
    PointCloud d_nocs, d_deformed;
    kernels::omp::affinity_backward(e.nocs, e.deformed, G.logits, pb.affinity, d_nocs, d_deformed);
    for (std::size_t j = 0; j < d_deformed.size(); ++j) g.deformation[j] += d_deformed[j];
    for (std::size_t i = 0; i < d_nocs.size(); ++i) {
      nocs_coordinate_backward(pb.observed[i], pose, e.nocs[i], d_nocs[i], pg);
    }
    if (!G.mirrored.empty() && pb.profile.symmetry.kind != SymmetryKind::None) {
      // mirror_world(p) = R F R^T (p - t) + t
      const Vec3 f = mirror_signs(pb.profile.symmetry.kind);
      const Mat3& R = pose.rotation;
      for (std::size_t i = 0; i < G.mirrored.size(); ++i) {
        const Vec3& dm = G.mirrored[i];
        const Vec3 v = pb.observed[i] - pose.translation;
        const Vec3 b = R.transpose() * v;
        const Vec3 a = R.transpose() * dm;
        pg.rotation += dm * b.cwiseProduct(f).transpose() + v * a.cwiseProduct(f).transpose();
        pg.translation += dm - R * a.cwiseProduct(f);
      }
    }
    const ParamsGrad d = backprop_params(s.params, pg);
    g.params = {d.rx, d.ry, d.t, d.s};
  } else {
    g.params = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  }
  for (std::size_t i = 0; i < g.scores.size(); ++i) {
    const bool inside = s.scores[i] >= 0.0 && s.scores[i] <= 1.0;
    g.scores[i] = (G.scores.empty() || !inside) ? 0.0 : G.scores[i];
  }
  Eigen::VectorXd out;
  pack(g, out);
  return out;
}

InlierMask relabel(const Evaluation& e, const Problem& pb, const FitConfig& cfg) {
  const std::size_t n = pb.observed.size();
  InlierMask m;
  m.inlier.resize(n);
  m.score.resize(n);
  int count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool in = (pb.observed[i] - world_location(e.report.coords[i], e.pose)).norm() <=
                    cfg.outlier_threshold;
    m.inlier[i] = in ? 1 : 0;
    m.score[i] = in ? 1.0 : 0.0;
    count += in ? 1 : 0;
  }
  if (count < cfg.min_inliers) return InlierMask::all(n);
  return m;
}

/// Adam direction scaled by per-entry step lengths; the caller backtracks.
struct Adam {
  static constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-12;
  Eigen::VectorXd lr, m, v;
  int t = 0;
  double scale = 1.0;

  explicit Adam(Eigen::VectorXd steps)
      : lr(std::move(steps)),
        m(Eigen::VectorXd::Zero(lr.size())),
        v(Eigen::VectorXd::Zero(lr.size())) {}

  Eigen::VectorXd direction(const Eigen::VectorXd& g) {
    ++t;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(beta1, t), c2 = 1.0 - std::pow(beta2, t);
    return lr.cwiseProduct((m / c1).cwiseQuotient(((v / c2).cwiseSqrt().array() + eps).matrix()));
  }
  void accept() { scale = std::min(1.0, scale * 1.5); }
  void reset() {
    m.setZero();
    v.setZero();
    t = 0;
    scale = 1.0;
  }
};

// Coarse variables: the 12 pose parameters and a per-axis scaling a of the
// prior, D_j = D0_j + (a - 1) * P_j. The raw scaling u is normalized so that
// the scaled prior box keeps its diagonal: a = |e| u / |u * e|.
Vec3 axis_scaling(const Vec3& u, const Vec3& e) { return e.norm() / u.cwiseProduct(e).norm() * u; }

Vec3 axis_scaling_backward(const Vec3& u, const Vec3& e, const Vec3& da) {
  const double n = u.cwiseProduct(e).norm();
  const Vec3 ee = e.cwiseProduct(e).cwiseProduct(u);
  return e.norm() * (da / n - ee * (u.dot(da) / (n * n * n)));
}

FitState coarse_state(const FitState& base, const Eigen::VectorXd& y, const PointCloud& prior,
                      const Vec3& extent) {
  FitState s = base;
  s.params = {y.segment<3>(0), y.segment<3>(3), y.segment<3>(6), y.segment<3>(9)};
  const Vec3 a = axis_scaling(y.segment<3>(12), extent) - Vec3::Ones();
  for (std::size_t j = 0; j < prior.size(); ++j) {
    s.deformation[j] = base.deformation[j] + a.cwiseProduct(prior[j]);
  }
  return s;
}

StartResult run_start(FitState state, const Problem& pb, const FitConfig& cfg) {
  const std::size_t n = pb.observed.size();
  const PointCloud& prior = pb.profile.prior;
  InlierMask labels = InlierMask::all(n);

  if (!pb.direct) {
    // The two-stage branch starts from the matching the init pose implies.
    const Pose9 pose = pose_from_params(state.params, pb.cloud_mean, pb.profile.mean_size);
    RowMatrix logits;
    kernels::omp::affinity_logits(nocs_coordinates(pb.observed, pose),
                                  deform(prior, state.deformation), state.logits, pb.affinity,
                                  logits);
    state.logits = std::move(logits);
  }

  Evaluation cur = evaluate(state, pb, labels, true);
  if (!cur.ok) throw DegenerateInputError("fit: initial state is not evaluable");
  const double initial = cur.total;

  StartResult out;
  out.trajectory.reserve(static_cast<std::size_t>(cfg.max_steps));

  // One backtracking step from x along the optimizer direction; `to_state`
  // maps a variable vector to a full state.
  FitState best_state = state;
  Evaluation best = cur;
  auto descend = [&](Eigen::VectorXd& x, Adam& opt, const Eigen::VectorXd& g, auto&& to_state) {
    const Eigen::VectorXd dir = opt.direction(g);
    if (!cfg.monotone) {
      FitState trial = to_state(x - dir);
      Evaluation e = evaluate(trial, pb, labels, true);
      if (e.ok) {
        x -= dir;
        state = std::move(trial);
        cur = std::move(e);
        if (cur.total <= best.total) {
          best_state = state;
          best = cur;
        }
        return;
      }
      opt.reset();
      return;
    }
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      FitState trial = to_state(x - opt.scale * dir);
      Evaluation e = evaluate(trial, pb, labels, true);
      if (e.ok && e.total <= cur.total) {
        x -= opt.scale * dir;
        state = std::move(trial);
        cur = std::move(e);
        opt.accept();
        return;
      }
      opt.scale *= 0.5;
    }
    opt.reset();
  };
  auto record = [&] {
    if (cur.total > 10.0 * initial) throw DivergenceError("fit: loss exceeded 10x its initial value");
    out.trajectory.push_back(cur.total);
  };

  const int coarse_steps =
      pb.direct ? static_cast<int>(std::ceil(cfg.rigid_fraction * cfg.max_steps)) : 0;
  const Eigen::VectorXd lr = step_lengths(state, cfg);
  int step = 0;
  if (coarse_steps > 0) {
    const FitState base = state;
    Eigen::VectorXd y(15);
    y << state.params.rx_raw, state.params.ry_raw, state.params.t_residual,
        state.params.s_residual, Vec3::Ones();
    Eigen::VectorXd steps(15);
    steps << lr.head(12), Eigen::Vector3d::Constant(cfg.steps.axis_scale * cfg.step_size);
    Adam opt(steps);
    Vec3 lo = prior[0], hi = prior[0];
    for (const auto& q : prior) {
      lo = lo.cwiseMin(q);
      hi = hi.cwiseMax(q);
    }
    const Vec3 extent = hi - lo;
    auto to_state = [&](const Eigen::VectorXd& v) { return coarse_state(base, v, prior, extent); };
    for (; step < std::min(coarse_steps, cfg.max_steps); ++step) {
      const Eigen::VectorXd g = flat_gradient(state, pb, cur);
      Eigen::VectorXd gy(15);
      gy.head(12) = g.head(12);
      Vec3 ga = Vec3::Zero();
      for (std::size_t j = 0; j < prior.size(); ++j) {
        ga += g.segment<3>(12 + 3 * static_cast<Eigen::Index>(j)).cwiseProduct(prior[j]);
      }
      gy.tail(3) = axis_scaling_backward(y.segment<3>(12), extent, ga);
      descend(y, opt, gy, to_state);
      record();
    }
  }

  const int warmup = static_cast<int>(std::ceil(cfg.warmup_fraction * cfg.max_steps));
  Eigen::VectorXd x;
  pack(state, x);
  Adam opt(lr);
  FitState shape = state;
  auto to_state = [&](const Eigen::VectorXd& v) {
    unpack(v, shape);
    return shape;
  };
  for (; step < cfg.max_steps; ++step) {
    if (cfg.toggles.outlier_removal && step >= warmup && (step - warmup) % cfg.relabel_interval == 0) {
      InlierMask cand = relabel(cur, pb, cfg);
      if (cand.inlier != labels.inlier) {
        Evaluation e = evaluate(state, pb, cand, true);
        if (e.ok && e.total <= cur.total) {
          labels = std::move(cand);
          cur = std::move(e);
          best_state = state;
          best = cur;
        }
      }
    }
    descend(x, opt, flat_gradient(state, pb, cur), to_state);
    record();
  }

  if (!cfg.monotone) {
    state = std::move(best_state);
    cur = std::move(best);
  }
  out.final_loss = cur.total;
  out.terms = cur.report.terms;
  out.mask = labels;
  if (pb.direct) {
    out.pose = cur.pose;
  } else {
    RansacConfig rc = cfg.ransac;
    out.pose = pose_from_nocs(cur.report.coords, pb.observed, rc);
  }
  return out;
}

std::vector<int> subsample(std::size_t n, int count, std::uint64_t seed) {
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  if (count <= 0 || static_cast<std::size_t>(count) >= n) return idx;
  auto rng = make_rng(seed, 7);
  for (int i = 0; i < count; ++i) {
    const std::size_t j = static_cast<std::size_t>(i) + rng() % (n - static_cast<std::size_t>(i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(count));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

void validate_fit_config(const FitConfig& cfg) {
  if (cfg.max_steps < 1) throw ValidationError("fit: max_steps must be positive");
  if (!(cfg.step_size > 0.0)) throw ValidationError("fit: step_size must be > 0");
  if (!cfg.toggles.direct && !cfg.toggles.prior) {
    throw ValidationError("fit: at least one of direct and prior must be enabled");
  }
  validate_weights(cfg.weights);
  if (!(cfg.outlier_threshold > 0.0)) throw ValidationError("fit: outlier_threshold must be > 0");
  if (cfg.relabel_interval < 1) throw ValidationError("fit: relabel_interval must be positive");
  if (cfg.max_backtracks < 0) throw ValidationError("fit: max_backtracks must be >= 0");
  if (!(cfg.affinity >= 0.0)) throw ValidationError("fit: affinity must be >= 0");
  if (!(cfg.rigid_fraction >= 0.0 && cfg.rigid_fraction <= 1.0)) {
    throw ValidationError("fit: rigid_fraction must lie in [0, 1]");
  }
  validate_ransac_config(cfg.ransac);
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"A1", "A2", "A3", "B1", "B2", "C", "D"};
  return names;
}

FitConfig preset_config(std::string_view name) {
  FitConfig cfg;
  auto& t = cfg.toggles;
  if (name == "A1") {
    t = {true, false, false, false, false};
  } else if (name == "A2") {
    t = {false, true, false, false, false};
  } else if (name == "A3") {
    t = {true, true, false, false, false};
  } else if (name == "B1") {
    t = {false, true, true, false, false};
  } else if (name == "B2") {
    t = {true, true, true, false, false};
  } else if (name == "C") {
    t = {true, true, true, true, false};
  } else if (name == "D") {
    t = {true, true, true, true, true};
  } else {
    throw ValidationError("unknown preset '" + std::string(name) + "'");
  }
  return cfg;
}

std::vector<FitState> init_params(const Instance& instance, const CategoryProfile& profile,
                                  std::string_view scheme, std::uint64_t seed) {
  if (instance.observed.empty()) throw ValidationError("init_params: empty instance");
  validate_profile(profile);
  auto rng = make_rng(seed, 5);
  std::vector<FitState> out;
  if (scheme == "identity") {
    out.push_back(base_state(instance, profile, Mat3::Identity()));
  } else if (scheme == "perturbed") {
    out.push_back(base_state(instance, profile, small_rotation(rng)));
  } else if (scheme.starts_with("multistart-")) {
    int k = 0;
    try {
      k = std::stoi(std::string(scheme.substr(11)));
    } catch (const std::exception&) {
      k = 0;
    }
    if (k < 1) throw ValidationError("init_params: bad start count in '" + std::string(scheme) + "'");
    for (int i = 0; i < k; ++i) {
      const Mat3 r = rot_y(2.0 * std::numbers::pi * i / k) * small_rotation(rng);
      out.push_back(base_state(instance, profile, r));
    }
  } else if (scheme == "truth") {
    FitState s = base_state(instance, profile, instance.pose_gt.rotation);
    s.params.t_residual = instance.pose_gt.translation - centroid(instance.observed);
    s.params.s_residual = instance.pose_gt.size - profile.mean_size;
    out.push_back(std::move(s));
  } else if (scheme == "oracle") {
    const Pose9& gt = instance.pose_gt;
    FitState s = base_state(instance, profile, gt.rotation);
    const Vec3 mean = centroid(instance.observed);
    s.params.t_residual = gt.translation - mean;
    s.params.s_residual = gt.size - profile.mean_size;
    for (std::size_t i = 0; i < instance.observed.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < profile.prior.size(); ++j) {
        if ((profile.prior[j] - instance.coords_gt[i]).squaredNorm() <
            (profile.prior[best] - instance.coords_gt[i]).squaredNorm()) {
          best = j;
        }
      }
      s.logits(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best)) = kOracleLogitGap;
      s.scores[i] = instance.inliers_gt.inlier.empty() ? 1.0 : instance.inliers_gt.inlier[i];
    }
    out.push_back(std::move(s));
  } else {
    throw ValidationError("unknown init scheme '" + std::string(scheme) + "'");
  }
  return out;
}

FitObjective fit_objective(const FitState& state, const PointCloud& observed,
                           const CategoryProfile& profile, const FitConfig& cfg,
                           const InlierMask& labels) {
  const Problem pb{observed, profile, centroid(observed), loss_options(cfg), cfg.toggles.direct,
                   cfg.affinity};
  const Evaluation e = evaluate(state, pb, labels, true);
  if (!e.ok) throw DegenerateInputError("fit_objective: state is not evaluable");
  FitObjective out;
  out.value = e.total;
  out.pose = e.pose;
  out.grad = state;
  unpack(flat_gradient(state, pb, e), out.grad);
  return out;
}

FitResult fit(const Instance& instance, const CategoryProfile& profile, const FitConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  validate_fit_config(cfg);
  validate_profile(profile);
  if (instance.observed.size() < 32) throw ValidationError("fit: instance needs >= 32 points");

  FitResult res;
  res.two_stage = !cfg.toggles.direct;
  res.points = subsample(instance.observed.size(), cfg.fit_points, cfg.seed);
  Instance sub;
  sub.category = instance.category;
  sub.seed = instance.seed;
  sub.pose_gt = instance.pose_gt;
  for (int i : res.points) {
    sub.observed.push_back(instance.observed[i]);
    if (!instance.coords_gt.empty()) sub.coords_gt.push_back(instance.coords_gt[i]);
    if (!instance.inliers_gt.inlier.empty()) {
      sub.inliers_gt.inlier.push_back(instance.inliers_gt.inlier[i]);
      sub.inliers_gt.score.push_back(instance.inliers_gt.score[i]);
    }
  }

  const auto inits = init_params(sub, profile, cfg.init_scheme, cfg.seed);
  const Vec3 mean = centroid(sub.observed);

  if (!cfg.toggles.prior) {
    // Without the prior nothing constrains the pose: report the first start.
    for (const auto& s : inits) {
      StartResult r;
      r.pose = pose_from_params(s.params, mean, profile.mean_size);
      r.mask = InlierMask::all(sub.observed.size());
      res.starts.push_back(std::move(r));
    }
  } else {
    const Problem pb{sub.observed, profile, mean, loss_options(cfg), cfg.toggles.direct,
                     cfg.affinity};
    for (const auto& s : inits) res.starts.push_back(run_start(s, pb, cfg));
  }

  for (std::size_t k = 1; k < res.starts.size(); ++k) {
    if (res.starts[k].final_loss < res.starts[res.best_start].final_loss) {
      res.best_start = static_cast<int>(k);
    }
  }
  const StartResult& best = res.starts[res.best_start];
  res.pose = best.pose;
  res.trajectory = best.trajectory;
  res.mask = best.mask;
  res.final_loss = best.final_loss;
  res.terms = best.terms;
  res.steps = static_cast<int>(best.trajectory.size());
  res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace catpose
