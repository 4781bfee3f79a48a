#include "catpose/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "catpose/errors.hpp"
#include "catpose/objective.hpp"

namespace catpose {

namespace {

constexpr int kObserved = 12;
constexpr int kPrior = 10;

struct Config {
  PoseParams pred, gt;
  Vec3 cloud_mean, mean_size;
  PointCloud observed, prior, deformation, mirrored;
  RowMatrix logits;
  std::vector<double> scores;
  InlierMask mask;
  SymmetryClass sym;
};

Config random_config(std::mt19937_64& rng, int trial) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto nvec = [&] { return Vec3(normal(rng), normal(rng), normal(rng)); };
  auto uvec = [&](double lo, double hi) {
    return Vec3(lo + (hi - lo) * unit(rng), lo + (hi - lo) * unit(rng), lo + (hi - lo) * unit(rng));
  };

  Config c;
  const SymmetryClass kinds[] = {SymmetryClass::none(), SymmetryClass::rotational_y(),
                                 SymmetryClass::reflection_xy()};
  c.sym = kinds[trial % 3];
  c.mean_size = uvec(0.1, 0.3);
  c.cloud_mean = uvec(-0.5, 0.5);
  for (PoseParams* p : {&c.pred, &c.gt}) {
    p->rx_raw = nvec();
    p->ry_raw = nvec();
    p->t_residual = 0.05 * nvec();
    p->s_residual = uvec(-0.05, 0.05);
  }
  const Pose9 pose = pose_from_params(c.gt, c.cloud_mean, c.mean_size);
  for (int i = 0; i < kObserved; ++i) {
    c.observed.push_back(world_location(uvec(-0.4, 0.4), pose));
    c.mirrored.push_back(mirror_world(c.observed.back(), pose, c.sym) + 0.02 * nvec());
    c.scores.push_back(0.05 + 0.9 * unit(rng));
  }
  for (int j = 0; j < kPrior; ++j) {
    c.prior.push_back(uvec(-0.4, 0.4));
    c.deformation.push_back(0.05 * nvec());
  }
  c.logits = RowMatrix(kObserved, kPrior);
  for (int i = 0; i < kObserved; ++i) {
    for (int j = 0; j < kPrior; ++j) c.logits(i, j) = 2.0 * normal(rng);
  }
  c.mask.inlier.resize(kObserved);
  c.mask.score.resize(kObserved);
  for (int i = 0; i < kObserved; ++i) {
    c.mask.inlier[i] = (i == 0 || unit(rng) < 0.8) ? 1 : 0;
    c.mask.score[i] = c.mask.inlier[i];
  }
  return c;
}

// Flat variable vector: pred params, gt params, D, logits, mirrored, scores.
Eigen::VectorXd pack(const Config& c) {
  std::vector<double> v;
  for (const PoseParams* p : {&c.pred, &c.gt}) {
    for (const Vec3* x : {&p->rx_raw, &p->ry_raw, &p->t_residual, &p->s_residual}) {
      v.insert(v.end(), x->data(), x->data() + 3);
    }
  }
  for (const auto& x : c.deformation) v.insert(v.end(), x.data(), x.data() + 3);
  for (Eigen::Index i = 0; i < c.logits.size(); ++i) v.push_back(c.logits.data()[i]);
  for (const auto& x : c.mirrored) v.insert(v.end(), x.data(), x.data() + 3);
  v.insert(v.end(), c.scores.begin(), c.scores.end());
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void unpack(const Eigen::VectorXd& v, Config& c) {
  Eigen::Index k = 0;
  auto take = [&](Vec3& x) {
    x = v.segment<3>(k);
    k += 3;
  };
  for (PoseParams* p : {&c.pred, &c.gt}) {
    take(p->rx_raw);
    take(p->ry_raw);
    take(p->t_residual);
    take(p->s_residual);
  }
  for (auto& x : c.deformation) take(x);
  for (Eigen::Index i = 0; i < c.logits.size(); ++i) c.logits.data()[i] = v[k++];
  for (auto& x : c.mirrored) take(x);
  for (auto& s : c.scores) s = v[k++];
}

LossOptions isolate(const std::string& term) {
  LossOptions o;
  o.weights = {0.0, 0.0, 0.0, 0.0, 0.0};
  o.shape_prior = {0.0, 0.0, 0.0, 0.0};
  if (term == "pose") o.weights.pose = 1.0;
  if (term == "consistency") o.weights.consistency = 1.0;
  if (term == "coordinate") o.shape_prior.coordinate = 1.0;
  if (term == "shape") o.shape_prior.shape = 1.0;
  if (term == "deformation") o.shape_prior.deformation = 1.0;
  if (term == "matching") o.shape_prior.matching = 1.0;
  if (term == "mask") o.weights.mask = 1.0;
  if (term == "reconstruction") o.weights.reconstruction = 1.0;
  if (o.shape_prior.coordinate + o.shape_prior.shape + o.shape_prior.deformation +
          o.shape_prior.matching > 0.0) {
    o.weights.shape_prior = 1.0;
  }
  return o;
}

LossReport evaluate(const Config& c, const LossOptions& o, bool with_grad) {
  Prediction pred;
  pred.pose = pose_from_params(c.pred, c.cloud_mean, c.mean_size);
  pred.deformation = c.deformation;
  pred.logits = c.logits;
  pred.mirrored = c.mirrored;
  pred.scores = c.scores;
  const Supervision gt{pose_from_params(c.gt, c.cloud_mean, c.mean_size), c.mask};
  return total_loss(pred, gt, c.observed, c.prior, c.sym, o, with_grad);
}

Eigen::VectorXd analytic_gradient(const Config& c, const LossOptions& o) {
  const auto rep = evaluate(c, o, true);
  Config g = c;
  const ParamsGrad gp = backprop_params(c.pred, rep.grad.pose);
  const ParamsGrad gg = backprop_params(c.gt, rep.grad.pose_gt);
  g.pred = {gp.rx, gp.ry, gp.t, gp.s};
  g.gt = {gg.rx, gg.ry, gg.t, gg.s};
  g.deformation = rep.grad.deformation;
  g.logits = rep.grad.logits;
  g.mirrored = rep.grad.mirrored;
  g.scores = rep.grad.scores;
  return pack(g);
}

}  // namespace

const std::vector<std::string>& gradcheck_terms() {
  static const std::vector<std::string> terms = {"pose",        "consistency", "coordinate",
                                                 "shape",       "deformation", "matching",
                                                 "mask",        "reconstruction"};
  return terms;
}

std::vector<GradcheckRow> run_gradcheck(const GradcheckOptions& opt) {
  if (opt.trials < 1) throw ValidationError("gradcheck: trials must be >= 1");
  std::vector<GradcheckRow> rows;
  for (const auto& term : gradcheck_terms()) {
    GradcheckRow row{term, opt.trials, 0.0, true};
    const LossOptions o = isolate(term);
    std::mt19937_64 rng(opt.seed);
    for (int trial = 0; trial < opt.trials; ++trial) {
      Config c = random_config(rng, trial);
      Eigen::VectorXd ga = analytic_gradient(c, o);
      if (term == opt.fault_term) ga *= 1.01;
      const Eigen::VectorXd x0 = pack(c);
      Eigen::VectorXd gf(x0.size());
      Config work = c;
      for (Eigen::Index k = 0; k < x0.size(); ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(x0[k]));
        Eigen::VectorXd x = x0;
        x[k] = x0[k] + h;
        unpack(x, work);
        const double fp = evaluate(work, o, false).terms.total;
        x[k] = x0[k] - h;
        unpack(x, work);
        const double fm = evaluate(work, o, false).terms.total;
        gf[k] = (fp - fm) / (2.0 * h);
      }
      const double denom =
          std::max({ga.cwiseAbs().maxCoeff(), gf.cwiseAbs().maxCoeff(), 1e-8});
      row.max_rel_error = std::max(row.max_rel_error, (ga - gf).cwiseAbs().maxCoeff() / denom);
    }
    row.pass = row.max_rel_error < opt.tolerance;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace catpose
