#include <doctest.h>

#include <cmath>

#include "catpose/errors.hpp"
#include "catpose/kernels.hpp"
#include "catpose/synthgen.hpp"
#include "support.hpp"

using namespace catpose;

namespace {

ShapeParams cylinder(double r, double h) { return {{"radius", r}, {"height", h}}; }

double max_nn_spacing(const PointCloud& c) {
  double worst = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    double best = 1e300;
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (i != j) best = std::min(best, (c[i] - c[j]).norm());
    }
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

TEST_CASE("builtin specs") {
  CHECK(builtin_categories() == std::vector<std::string>{"can", "bowl", "box", "laptop", "camera"});
  CHECK(builtin_spec("can").symmetry.kind == SymmetryKind::RotationalY);
  CHECK(builtin_spec("bowl").symmetry.kind == SymmetryKind::RotationalY);
  CHECK(builtin_spec("box").symmetry.kind == SymmetryKind::None);
  CHECK(builtin_spec("laptop").symmetry.kind == SymmetryKind::ReflectionXY);
  CHECK(builtin_spec("camera").symmetry.kind == SymmetryKind::None);
  CHECK_THROWS_AS(builtin_spec("teapot"), ValidationError);
  ShapeSpec bad = builtin_spec("can");
  bad.params[0].lo = -1;
  CHECK_THROWS_AS(validate_spec(bad), ValidationError);
}

TEST_CASE("canonical shapes fit the unit NOCS cube") {
  for (const auto& cat : builtin_categories()) {
    const ShapeSpec spec = builtin_spec(cat);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto shape = sample_shape(spec, draw_params(spec, seed), 500, seed);
      for (const auto& c : shape.coords) CHECK(c.cwiseAbs().maxCoeff() <= 0.5 + 1e-12);
      // The box diagonal is normalized to one.
      Vec3 lo = shape.coords[0], hi = lo;
      for (const auto& c : shape.coords) {
        lo = lo.cwiseMin(c);
        hi = hi.cwiseMax(c);
      }
      CHECK((hi - lo).norm() <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("symmetric generators are mirror-invariant up to sampling") {
  for (const char* cat : {"can", "bowl", "laptop"}) {
    const ShapeSpec spec = builtin_spec(cat);
    const auto shape = sample_shape(spec, draw_params(spec, 3), 600, 3);
    PointCloud mirrored;
    for (const auto& c : shape.coords) mirrored.push_back(mirror_point(c, spec.symmetry));
    const double ch = kernels::serial::chamfer(shape.coords, mirrored, false).value;
    INFO(cat);
    CHECK(ch <= 2.0 * max_nn_spacing(shape.coords));
  }
}

TEST_CASE("make_prior of an identical population is that shape") {
  const ShapeSpec spec = builtin_spec("can");
  const double r = 0.04, h = 0.1;
  const auto prof = make_prior_from_params(spec, {cylinder(r, h), cylinder(r, h)}, 200, 5);
  const double len = std::sqrt(8 * r * r + h * h);
  CHECK((prof.mean_size - Vec3(2 * r, h, 2 * r)).norm() < 1e-15);
  // Surface oracle: side wall at radius r or one of the two caps.
  for (const auto& c : prof.prior) {
    const double rho = std::hypot(c.x(), c.z()) * len;
    const double y = c.y() * len + h / 2;
    const bool side = std::abs(rho - r) < 1e-12 && y >= -1e-12 && y <= h + 1e-12;
    const bool cap = (std::abs(y) < 1e-12 || std::abs(y - h) < 1e-12) && rho <= r + 1e-12;
    CHECK((side || cap));
  }
}

TEST_CASE("make_prior averages matched samples") {
  const ShapeSpec spec = builtin_spec("can");
  const auto prof = make_prior_from_params(spec, {cylinder(0.3, 0.2), cylinder(0.5, 0.2)}, 400, 6);
  const double len = std::sqrt(8 * 0.4 * 0.4 + 0.2 * 0.2);
  int side = 0;
  for (const auto& c : prof.prior) {
    const double y = c.y() * len + 0.1;
    if (y > 1e-9 && y < 0.2 - 1e-9) {  // off the caps: side wall
      CHECK(std::hypot(c.x(), c.z()) * len == doctest::Approx(0.4).epsilon(1e-12));
      ++side;
    }
  }
  CHECK(side > 100);

  const ShapeSpec box = builtin_spec("box");
  const ShapeParams a{{"width", 0.07}, {"height", 0.2}, {"depth", 0.1}};
  const ShapeParams b{{"width", 0.27}, {"height", 0.2}, {"depth", 0.1}};
  const auto pb = make_prior_from_params(box, {a, b}, 100, 1);
  CHECK((pb.mean_size - Vec3(0.2, 0.2, 0.1)).norm() < 1e-15);
  CHECK_THROWS_AS(make_prior_from_params(box, {a}, 100, 1), ValidationError);
}

TEST_CASE("make_instance") {
  const ShapeSpec spec = builtin_spec("laptop");
  InstanceOptions opt;
  const Instance clean = make_instance(spec, opt, 9);
  CHECK(clean.observed.size() == 1024);
  CHECK(clean.observed == world_locations(clean.coords_gt, clean.pose_gt));
  CHECK(clean.inliers_gt.count() == 1024);
  CHECK(is_rotation(clean.pose_gt.rotation));
  CHECK(clean.category == "laptop");

  opt.outlier_fraction = 0.2;
  const Instance dirty = make_instance(spec, opt, 9);
  CHECK(1024 - dirty.inliers_gt.count() == 205);
  for (std::size_t i = 0; i < dirty.observed.size(); ++i) {
    const double r = (dirty.observed[i] - world_location(dirty.coords_gt[i], dirty.pose_gt)).norm();
    if (!dirty.inliers_gt.inlier[i]) CHECK(r > 0.15);
  }

  InstanceOptions noisy;
  noisy.points = 10000;
  noisy.noise_sigma = 0.005;
  const Instance n = make_instance(builtin_spec("can"), noisy, 10);
  double ss = 0.0;
  for (std::size_t i = 0; i < n.observed.size(); ++i) {
    ss += (n.observed[i] - world_location(n.coords_gt[i], n.pose_gt)).squaredNorm();
  }
  const double sd = std::sqrt(ss / (3.0 * n.observed.size()));
  CHECK(sd == doctest::Approx(0.005).epsilon(0.15));

  opt.outlier_fraction = 1.0;
  CHECK_THROWS_AS(make_instance(spec, opt, 1), ValidationError);
}

TEST_CASE("generated labels round-trip through gt_inliers") {
  InstanceOptions opt;
  opt.noise_sigma = 0.005;
  opt.outlier_fraction = 0.3;
  for (const auto& cat : builtin_categories()) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Instance inst = make_instance(builtin_spec(cat), opt, seed);
      const InlierMask m = gt_inliers(inst.observed, inst.coords_gt, inst.pose_gt, 0.1);
      CHECK(m.inlier == inst.inliers_gt.inlier);
    }
  }
}

TEST_CASE("generation is deterministic") {
  InstanceOptions opt;
  opt.noise_sigma = 0.01;
  opt.outlier_fraction = 0.1;
  opt.sampler = PoseSampler::Uniform;
  const Instance a = make_instance(builtin_spec("camera"), opt, 77);
  const Instance b = make_instance(builtin_spec("camera"), opt, 77);
  CHECK(a.observed == b.observed);
  CHECK(a.coords_gt == b.coords_gt);
  CHECK(a.pose_gt.rotation == b.pose_gt.rotation);
  const auto p = make_prior(builtin_spec("bowl"), 16, 128, 4);
  const auto q = make_prior(builtin_spec("bowl"), 16, 128, 4);
  CHECK(p.prior == q.prior);
  CHECK(p.prior.size() == 128);
}

TEST_CASE("upright sampler keeps the tilt bounded") {
  InstanceOptions opt;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Instance inst = make_instance(builtin_spec("box"), opt, seed);
    CHECK(direction_angle(inst.pose_gt.rotation.col(1), Vec3::UnitY()) <= opt.max_tilt + 1e-12);
  }
}
