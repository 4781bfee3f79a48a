// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "catpose/errors.hpp"
#include "catpose/experiment.hpp"
#include "catpose/gradcheck.hpp"
#include "catpose/metrics.hpp"
#include "catpose/objective.hpp"
#include "catpose/random.hpp"
#include "catpose/similarity.hpp"
#include "catpose/symmetry.hpp"
#include "catpose/synthgen.hpp"

using namespace catpose;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = 180.0 / kPi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Vec3 random_vec(std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  return {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, lo, hi)};
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  return q.normalized().toRotationMatrix();
}

Pose9 random_pose(std::mt19937_64& rng) {
  return {random_rotation(rng), random_vec(rng), random_vec(rng, 0.05, 0.5)};
}

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

fs::path work_dir() {
  static const fs::path dir = fs::temp_directory_path() / ("catpose_acceptance_" + std::to_string(::getpid()));
  return dir;
}

// Every report generated by this run, checked for IoU monotonicity at the end.
std::vector<MetricsReport> g_reports;

bool monotone(const Precision& p) { return p.iou75 <= p.iou50 && p.iou50 <= p.iou25; }

// ---------------------------------------------------------------------------

Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckOptions opt;
  opt.trials = 100;
  const auto rows = run_gradcheck(opt);
  const double secs = seconds_since(t0);
  bool ok = secs < 60.0;
  double worst = 0.0;
  std::string failing;
  for (const auto& r : rows) {
    ok = ok && r.pass && r.trials >= 100;
    worst = std::max(worst, r.max_rel_error);
    if (!r.pass) failing += " " + r.term;
  }
  return {ok, fmt("%zu terms x 100 trials, max rel error %.2e, %.1f s%s", rows.size(), worst, secs,
                  failing.empty() ? "" : (" failing:" + failing).c_str())};
}

Outcome round_trip() {
  auto rng = make_rng(2);
  double worst = 0.0;
  for (int k = 0; k < 100000; ++k) {
    const Pose9 pose = random_pose(rng);
    const Vec3 p = random_vec(rng, -2, 2);
    const Vec3 back = world_location(nocs_coordinate(p, pose), pose);
    worst = std::max(worst, (back - p).norm() / std::max(1.0, p.norm()));
  }
  return {worst < 1e-12, fmt("1e5 pairs, max relative error %.2e", worst)};
}

Outcome umeyama_exactness() {
  auto rng = make_rng(3);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    SimilarityTransform planted{uniform(rng, 0.5, 2.0), random_rotation(rng), random_vec(rng)};
    PointCloud src, dst;
    for (int i = 0; i < 50; ++i) {
      src.push_back(random_vec(rng, -0.5, 0.5));
      dst.push_back(planted.apply(src.back()));
    }
    const auto t = umeyama(src, dst);
    worst = std::max({worst, std::abs(t.scale - planted.scale), (t.rotation - planted.rotation).cwiseAbs().maxCoeff(),
                      (t.translation - planted.translation).cwiseAbs().maxCoeff()});
  }

  int good = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto r2 = make_rng(1003, trial);
    SimilarityTransform planted{uniform(r2, 0.5, 2.0), random_rotation(r2), random_vec(r2)};
    PointCloud src, dst;
    for (int i = 0; i < 50; ++i) {
      src.push_back(random_vec(r2, -0.5, 0.5));
      dst.push_back(planted.apply(src.back()));
    }
    Vec3 lo = dst[0], hi = dst[0];
    for (const auto& p : dst) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    for (int i = 0; i < 15; ++i) {  // 30 %
      for (int a = 0; a < 3; ++a) dst[i][a] = uniform(r2, lo[a], hi[a]);
    }
    try {
      const auto r = umeyama_ransac(src, dst, RansacConfig{200, 0.01, 4, static_cast<std::uint64_t>(trial)});
      if (geodesic_angle(r.transform.rotation, planted.rotation) * kDeg < 0.5) ++good;
    } catch (const Error&) {
    }
  }
  return {worst < 1e-10 && good >= 190,
          fmt("max component error %.2e over 200 clouds; ransac %d/200 under 0.5 deg", worst, good)};
}

Outcome symmetry_invariants() {
  auto rng = make_rng(4);
  bool involution = true;
  for (const auto& sym : {SymmetryClass::none(), SymmetryClass::rotational_y(), SymmetryClass::reflection_xy()}) {
    for (int k = 0; k < 10000; ++k) {
      const Vec3 p = random_vec(rng);
      involution = involution && mirror_point(mirror_point(p, sym), sym) == p;
    }
  }

  const auto sym = SymmetryClass::rotational_y(36);
  double orbit_gap = 0.0;
  int above_plain = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Pose9 gt = random_pose(rng);
    const int n = 40;
    PointCloud observed, pred;
    for (int i = 0; i < n; ++i) {
      observed.push_back(world_location(random_vec(rng, -0.5, 0.5), gt));
      pred.push_back(random_vec(rng, -0.5, 0.5));
    }
    const InlierMask mask = InlierMask::all(n);
    const double base = sym_coordinate_loss(pred, observed, gt, sym, mask);

    Pose9 turned = gt;
    turned.rotation = gt.rotation * rot_y(2 * kPi / 36);
    const double spun = sym_coordinate_loss(pred, observed, turned, sym, mask);
    orbit_gap = std::max(orbit_gap, std::abs(spun - base) / std::max(base, 1e-300));

    double plain = 0.0;
    const PointCloud nocs = nocs_coordinates(observed, gt);
    for (int i = 0; i < n; ++i) plain += (pred[i] - nocs[i]).cwiseAbs().sum();
    if (base > plain / n) ++above_plain;
  }
  return {involution && orbit_gap < 1e-12 && above_plain == 0,
          fmt("involution %s; orbit relative gap %.2e; %d/1000 above plain L1", involution ? "exact" : "BROKEN",
              orbit_gap, above_plain)};
}

Outcome outlier_labels() {
  InstanceOptions opt;
  opt.noise_sigma = 0.005;
  opt.outlier_fraction = 0.2;
  int checked = 0, mismatched = 0;
  for (const auto& cat : builtin_categories()) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Instance inst = make_instance(builtin_spec(cat), opt, 5000 + seed);
      const InlierMask m = gt_inliers(inst.observed, inst.coords_gt, inst.pose_gt, 0.1);
      ++checked;
      if (m.inlier != inst.inliers_gt.inlier) ++mismatched;
    }
  }
  return {mismatched == 0, fmt("%d instances, %d with label mismatches", checked, mismatched)};
}

Outcome convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.seed = 6;
  cfg.generation.count = 100;
  cfg.preset = "D";
  cfg.jobs = jobs();
  const fs::path dir = work_dir() / "convergence";
  cmd_gen(cfg, dir / "bundle");
  cmd_fit(cfg, dir / "bundle", dir / "results.json");
  const MetricsReport rep = cmd_eval(dir / "results.json", dir / "bundle", dir / "metrics");
  g_reports.push_back(rep);
  const double secs = seconds_since(t0);
  std::string per;
  for (const auto& [cat, p] : rep.per_category) per += fmt(" %s %.2f", cat.c_str(), p.deg5_cm2);
  return {rep.overall.deg5_cm2 >= 0.95 && secs < 600.0,
          fmt("5deg2cm %.3f over %d fits (%s ), %.0f s with %d threads", rep.overall.deg5_cm2, rep.overall.count,
              per.c_str(), secs, cfg.jobs)};
}

struct AblationRun {
  std::map<std::string, double> median;
};

AblationRun ablation() {
  ExperimentConfig cfg;
  cfg.seed = 7;
  cfg.generation.count = 10;  // 50 instances over five categories
  cfg.generation.instance.noise_sigma = 0.005;
  cfg.generation.instance.outlier_fraction = 0.2;
  cfg.jobs = jobs();
  const fs::path dir = work_dir() / "ablation";
  cmd_gen(cfg, dir / "bundle");
  AblationRun run;
  for (const char* preset : {"D", "C", "B2", "A3", "A2", "A1"}) {
    cfg.preset = preset;
    const fs::path res = dir / (std::string(preset) + ".json");
    run.median[preset] = cmd_fit(cfg, dir / "bundle", res).median_rotation_error;
    g_reports.push_back(cmd_eval(res, dir / "bundle", dir / ("metrics_" + std::string(preset))));
  }
  return run;
}

Outcome ablation_order(const AblationRun& r) {
  const auto& m = r.median;
  const bool ok = m.at("D") <= m.at("C") && m.at("C") <= m.at("B2") && m.at("B2") <= m.at("A3") &&
                  m.at("A3") <= m.at("A1") && m.at("A1") - m.at("D") > 0.0;
  return {ok, fmt("median rotation error D %.2f  C %.2f  B2 %.2f  A3 %.2f  A1 %.2f deg", m.at("D"), m.at("C"),
                  m.at("B2"), m.at("A3"), m.at("A1"))};
}

Outcome two_stage(const AblationRun& r) {
  const auto& m = r.median;
  return {m.at("A3") < m.at("A2"), fmt("A3 %.2f deg vs A2 %.2f deg", m.at("A3"), m.at("A2"))};
}

bool inside(const Pose9& b, const Vec3& p) {
  const Vec3 l = b.rotation.transpose() * (p - b.translation);
  return (l.cwiseAbs() - 0.5 * b.size).maxCoeff() <= 0.0;
}

double monte_carlo_iou(const Pose9& a, const Pose9& b, int samples, std::uint64_t seed) {
  Vec3 lo = Vec3::Constant(1e300), hi = -lo;
  for (const Pose9* box : {&a, &b}) {
    for (int k = 0; k < 8; ++k) {
      const Vec3 c((k & 1) ? 0.5 : -0.5, (k & 2) ? 0.5 : -0.5, (k & 4) ? 0.5 : -0.5);
      const Vec3 w = box->rotation * c.cwiseProduct(box->size) + box->translation;
      lo = lo.cwiseMin(w);
      hi = hi.cwiseMax(w);
    }
  }
  auto rng = make_rng(seed);
  long in_a = 0, in_b = 0, both = 0;
  for (int s = 0; s < samples; ++s) {
    const Vec3 p(uniform(rng, lo.x(), hi.x()), uniform(rng, lo.y(), hi.y()), uniform(rng, lo.z(), hi.z()));
    const bool ia = inside(a, p), ib = inside(b, p);
    in_a += ia;
    in_b += ib;
    both += ia && ib;
  }
  const long uni = in_a + in_b - both;
  return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

Outcome iou_oracle() {
  auto rng = make_rng(9);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Pose9 a = random_pose(rng);
    Pose9 b = a;
    b.rotation = random_rotation(rng);
    b.translation = a.translation + random_vec(rng, -0.15, 0.15);
    b.size = a.size.cwiseProduct(random_vec(rng, 0.6, 1.4));
    worst = std::max(worst, std::abs(iou3d(a, b) - monte_carlo_iou(a, b, 1000000, 900 + k)));
  }
  int reports = 0, broken = 0;
  for (const auto& r : g_reports) {
    ++reports;
    broken += monotone(r.overall) ? 0 : 1;
    for (const auto& [cat, p] : r.per_category) broken += monotone(p) ? 0 : 1;
  }
  return {worst < 1e-2 && broken == 0 && reports > 0,
          fmt("max |exact - MC| %.2e over 50 pairs; %d reports, %d non-monotone entries", worst, reports, broken)};
}

std::string tree_bytes(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root));
  }
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += f.string() + '\n' + read_text(root / f);
  return all;
}

Outcome determinism() {
  const fs::path dir = work_dir() / "determinism";
  fs::create_directories(dir);
  write_text(dir / "config.json", R"({"seed": 10, "generation": {"count": 2, "noise_sigma": 0.005,
      "outlier_fraction": 0.2}, "fit": {"max_steps": 30}, "jobs": 2})");
  std::vector<std::string> trees;
  for (int run = 0; run < 2; ++run) {
    const std::string out = (dir / ("run" + std::to_string(run))).string();
    const std::string cli = CATPOSE_CLI;
    const std::string cfg = (dir / "config.json").string();
    const std::string cmd = cli + " gen --config " + cfg + " --out " + out + "/bundle >/dev/null && " + cli +
                            " fit --config " + cfg + " " + out + "/bundle --out " + out + "/results.json >/dev/null && " +
                            cli + " eval " + out + "/results.json " + out + "/bundle --out " + out + "/metrics >/dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "command failed: " + cmd};
    trees.push_back(tree_bytes(out));
  }
  return {trees[0] == trees[1] && !trees[0].empty(),
          fmt("gen/fit/eval twice through the CLI, %zu bytes, %s", trees[0].size(),
              trees[0] == trees[1] ? "identical" : "DIFFERENT")};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("criterion %2d  %-4s  %-26s %s  [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  };

  fs::remove_all(work_dir());
  report(1, "gradient suite", gradients);
  report(2, "geometry round-trip", round_trip);
  report(3, "umeyama exactness", umeyama_exactness);
  report(4, "symmetry invariants", symmetry_invariants);
  report(5, "outlier labeling", outlier_labels);
  report(6, "fit convergence", convergence);

  AblationRun ab;
  std::string ablation_error;
  try {
    ab = ablation();
  } catch (const std::exception& e) {
    ablation_error = e.what();
  }
  auto guarded = [&](auto check) {
    return [&, check]() -> Outcome {
      if (!ablation_error.empty()) return {false, "ablation run failed: " + ablation_error};
      return check(ab);
    };
  };
  report(7, "ablation ordering", guarded(ablation_order));
  report(8, "two-stage vs direct", guarded(two_stage));
  report(9, "iou oracle", iou_oracle);
  report(10, "determinism", determinism);
  fs::remove_all(work_dir());

  std::printf("%d of 10 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
