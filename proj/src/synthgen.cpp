#include "catpose/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "catpose/errors.hpp"
#include "catpose/random.hpp"

namespace catpose {

namespace {

constexpr double kPi = std::numbers::pi;

struct Part {
  double area;
  std::function<Vec3(double, double)> at;  // (a, b) in [0, 1)^2 -> surface point
};

struct Surface {
  std::vector<Part> parts;
  Vec3 lo, hi;
};

Part rect(const Vec3& o, const Vec3& u, const Vec3& v) {
  return {u.cross(v).norm(), [o, u, v](double a, double b) { return Vec3(o + a * u + b * v); }};
}

enum Face { XMinus = 1, XPlus = 2, YMinus = 4, YPlus = 8, ZMinus = 16, ZPlus = 32 };

void box_faces(std::vector<Part>& out, const Vec3& lo, const Vec3& hi, int skip = 0) {
  const Vec3 d = hi - lo;
  const Vec3 ex(d.x(), 0, 0), ey(0, d.y(), 0), ez(0, 0, d.z());
  if (!(skip & XMinus)) out.push_back(rect(lo, ey, ez));
  if (!(skip & XPlus)) out.push_back(rect(Vec3(hi.x(), lo.y(), lo.z()), ey, ez));
  if (!(skip & YMinus)) out.push_back(rect(lo, ex, ez));
  if (!(skip & YPlus)) out.push_back(rect(Vec3(lo.x(), hi.y(), lo.z()), ex, ez));
  if (!(skip & ZMinus)) out.push_back(rect(lo, ex, ey));
  if (!(skip & ZPlus)) out.push_back(rect(Vec3(lo.x(), lo.y(), hi.z()), ex, ey));
}

/// Disc of radius r in the plane y = const (area-uniform).
Part disc_y(double r, double y) {
  return {kPi * r * r, [r, y](double a, double b) {
            const double th = 2 * kPi * a, rr = r * std::sqrt(b);
            return Vec3(rr * std::cos(th), y, rr * std::sin(th));
          }};
}

double get(const ShapeParams& p, const char* key) {
  const auto it = p.find(key);
  if (it == p.end()) throw ValidationError(std::string("missing shape parameter '") + key + "'");
  return it->second;
}

Surface build_surface(ShapeKind kind, const ShapeParams& p) {
  Surface s;
  switch (kind) {
    case ShapeKind::Cylinder: {
      const double r = get(p, "radius"), h = get(p, "height");
      s.parts.push_back({2 * kPi * r * h, [r, h](double a, double b) {
                           const double th = 2 * kPi * a;
                           return Vec3(r * std::cos(th), h * b, r * std::sin(th));
                         }});
      s.parts.push_back(disc_y(r, 0.0));
      s.parts.push_back(disc_y(r, h));
      s.lo = Vec3(-r, 0, -r);
      s.hi = Vec3(r, h, r);
      break;
    }
    case ShapeKind::BowlShell: {
      // paraboloid y = H (rho / R)^2, open at the top
      const double R = get(p, "radius"), H = get(p, "height");
      s.parts.push_back({1.3 * kPi * R * R, [R, H](double a, double b) {
                           const double th = 2 * kPi * a, rho = R * std::sqrt(b);
                           return Vec3(rho * std::cos(th), H * (rho / R) * (rho / R),
                                       rho * std::sin(th));
                         }});
      s.lo = Vec3(-R, 0, -R);
      s.hi = Vec3(R, H, R);
      break;
    }
    case ShapeKind::Box: {
      // box with a tab on the +x side so that no rotation maps it to itself
      const double W = get(p, "width"), H = get(p, "height"), D = get(p, "depth");
      const double tab = 0.03;
      box_faces(s.parts, Vec3(-W / 2, 0, -D / 2), Vec3(W / 2, H, D / 2));
      box_faces(s.parts, Vec3(W / 2, 0.6 * H, 0), Vec3(W / 2 + tab, H, D / 2), XMinus);
      s.lo = Vec3(-W / 2, 0, -D / 2);
      s.hi = Vec3(W / 2 + tab, H, D / 2);
      break;
    }
    case ShapeKind::HingedPlates: {
      // base plate along +x, lid opened by `angle` around the z hinge
      const double a = get(p, "base"), b = get(p, "lid"), d = get(p, "depth");
      const double phi = get(p, "angle");
      const Vec3 u(std::cos(phi), std::sin(phi), 0);
      const Vec3 o(0, 0, -d / 2), ez(0, 0, d);
      s.parts.push_back(rect(o, Vec3(a, 0, 0), ez));
      s.parts.push_back(rect(o, b * u, ez));
      s.lo = Vec3(std::min({0.0, a, b * u.x()}), 0, -d / 2);
      s.hi = Vec3(std::max({0.0, a, b * u.x()}), b * u.y(), d / 2);
      break;
    }
    case ShapeKind::Composite: {
      // body, off-center lens barrel on +z and a viewfinder bump on top
      const double W = get(p, "width"), H = get(p, "height"), D = get(p, "depth");
      const double lr = get(p, "lens_radius"), ll = get(p, "lens_length");
      const double cx = -0.15 * W, cy = 0.5 * H, vh = 0.015;
      box_faces(s.parts, Vec3(-W / 2, 0, -D / 2), Vec3(W / 2, H, D / 2));
      s.parts.push_back({2 * kPi * lr * ll, [=](double a, double b) {
                           const double th = 2 * kPi * a;
                           return Vec3(cx + lr * std::cos(th), cy + lr * std::sin(th),
                                       D / 2 + ll * b);
                         }});
      s.parts.push_back({kPi * lr * lr, [=](double a, double b) {
                           const double th = 2 * kPi * a, rr = lr * std::sqrt(b);
                           return Vec3(cx + rr * std::cos(th), cy + rr * std::sin(th), D / 2 + ll);
                         }});
      box_faces(s.parts, Vec3(0.1 * W, H, -D / 2), Vec3(0.35 * W, H + vh, D / 2), YMinus);
      s.lo = Vec3(-W / 2, 0, -D / 2);
      s.hi = Vec3(W / 2, H + vh, D / 2 + ll);
      break;
    }
  }
  return s;
}

std::vector<double> area_fractions(const Surface& s) {
  double total = 0.0;
  for (const auto& p : s.parts) total += p.area;
  std::vector<double> f;
  for (const auto& p : s.parts) f.push_back(p.area / total);
  return f;
}

using UV = std::vector<std::pair<double, double>>;

UV draw_uv(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  UV out(static_cast<std::size_t>(n));
  for (auto& [a, b] : out) {
    a = u(rng);
    b = u(rng);
  }
  return out;
}

/// Metric samples: part k receives floor(f_k n) points, the remainder goes to
/// the largest part.
PointCloud sample_surface(const Surface& s, const std::vector<double>& fractions, const UV& uv) {
  const int n = static_cast<int>(uv.size());
  std::vector<int> counts;
  int used = 0;
  for (double f : fractions) {
    counts.push_back(static_cast<int>(std::floor(f * n)));
    used += counts.back();
  }
  const auto largest = std::max_element(fractions.begin(), fractions.end()) - fractions.begin();
  counts[largest] += n - used;
  PointCloud out;
  out.reserve(uv.size());
  std::size_t k = 0;
  for (std::size_t part = 0; part < s.parts.size(); ++part) {
    for (int i = 0; i < counts[part]; ++i, ++k) out.push_back(s.parts[part].at(uv[k].first, uv[k].second));
  }
  return out;
}

ShapeParams mean_params(const std::vector<ShapeParams>& pop) {
  ShapeParams out;
  for (const auto& [k, v] : pop.front()) {
    double acc = 0.0;
    for (const auto& p : pop) acc += get(p, k.c_str());
    out[k] = acc / static_cast<double>(pop.size());
  }
  return out;
}

Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace

void validate_spec(const ShapeSpec& spec) {
  validate_symmetry(spec.symmetry);
  if (spec.params.empty()) throw ValidationError("shape '" + spec.category + "': no parameters");
  for (const auto& r : spec.params) {
    if (!(r.lo > 0.0) || !(r.hi >= r.lo) || !std::isfinite(r.hi)) {
      throw ValidationError("shape '" + spec.category + "': invalid range for '" + r.name + "'");
    }
  }
}

ShapeSpec builtin_spec(std::string_view category) {
  ShapeSpec s;
  s.category = std::string(category);
  s.symmetry = category_symmetry(category);
  if (category == "can") {
    s.kind = ShapeKind::Cylinder;
    s.params = {{"radius", 0.03, 0.05}, {"height", 0.08, 0.14}};
  } else if (category == "bowl") {
    s.kind = ShapeKind::BowlShell;
    s.params = {{"radius", 0.06, 0.09}, {"height", 0.04, 0.07}};
  } else if (category == "box") {
    s.kind = ShapeKind::Box;
    s.params = {{"width", 0.08, 0.16}, {"height", 0.06, 0.12}, {"depth", 0.06, 0.12}};
  } else if (category == "laptop") {
    s.kind = ShapeKind::HingedPlates;
    s.params = {{"base", 0.12, 0.18}, {"lid", 0.10, 0.16}, {"depth", 0.16, 0.24},
                {"angle", 1.75, 2.25}};
  } else if (category == "camera") {
    s.kind = ShapeKind::Composite;
    s.params = {{"width", 0.08, 0.12},         {"height", 0.05, 0.08},
                {"depth", 0.03, 0.05},         {"lens_radius", 0.015, 0.022},
                {"lens_length", 0.02, 0.05}};
  } else {
    throw ValidationError("unknown synthetic category '" + std::string(category) + "'");
  }
  return s;
}

const std::vector<std::string>& builtin_categories() {
  static const std::vector<std::string> names = {"can", "bowl", "box", "laptop", "camera"};
  return names;
}

ShapeParams draw_params(const ShapeSpec& spec, std::uint64_t seed) {
  validate_spec(spec);
  auto rng = make_rng(seed, 1);
  ShapeParams out;
  for (const auto& r : spec.params) {
    out[r.name] = std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
  }
  return out;
}

CanonicalShape sample_shape(const ShapeSpec& spec, const ShapeParams& params, int points,
                            std::uint64_t seed) {
  if (points < 1) throw ValidationError("sample_shape: points must be positive");
  const Surface s = build_surface(spec.kind, params);
  auto rng = make_rng(seed, 2);
  const PointCloud metric = sample_surface(s, area_fractions(s), draw_uv(rng, points));
  const Vec3 center = 0.5 * (s.lo + s.hi);
  const double len = (s.hi - s.lo).norm();
  CanonicalShape out;
  out.extents = s.hi - s.lo;
  out.coords.reserve(metric.size());
  for (const auto& p : metric) out.coords.push_back((p - center) / len);
  return out;
}

CategoryProfile make_prior_from_params(const ShapeSpec& spec,
                                       const std::vector<ShapeParams>& population, int points,
                                       std::uint64_t seed) {
  if (population.size() < 2) throw ValidationError("make_prior: population must be >= 2");
  if (points < 1) throw ValidationError("make_prior: points must be positive");
  const auto fractions = area_fractions(build_surface(spec.kind, mean_params(population)));
  auto rng = make_rng(seed, 3);
  const UV uv = draw_uv(rng, points);

  PointCloud acc(static_cast<std::size_t>(points), Vec3::Zero());
  Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
  for (const auto& params : population) {
    const Surface s = build_surface(spec.kind, params);
    const PointCloud pts = sample_surface(s, fractions, uv);
    for (std::size_t i = 0; i < pts.size(); ++i) acc[i] += pts[i];
    lo += s.lo;
    hi += s.hi;
  }
  const double m = static_cast<double>(population.size());
  lo /= m;
  hi /= m;
  const Vec3 center = 0.5 * (lo + hi);
  const double len = (hi - lo).norm();

  CategoryProfile out;
  out.name = spec.category;
  out.symmetry = spec.symmetry;
  out.mean_size = hi - lo;
  out.prior.reserve(acc.size());
  for (const auto& p : acc) out.prior.push_back((p / m - center) / len);
  return out;
}

CategoryProfile make_prior(const ShapeSpec& spec, int population, int points, std::uint64_t seed) {
  validate_spec(spec);
  if (population < 2) throw ValidationError("make_prior: population must be >= 2");
  std::vector<ShapeParams> pop;
  for (int k = 0; k < population; ++k) {
    pop.push_back(draw_params(spec, splitmix64(seed) + static_cast<std::uint64_t>(k)));
  }
  return make_prior_from_params(spec, pop, points, seed);
}

void validate_instance_options(const InstanceOptions& opt) {
  if (opt.points < 1) throw ValidationError("instance: points must be positive");
  if (!(opt.noise_sigma >= 0.0)) throw ValidationError("instance: noise_sigma must be >= 0");
  if (!(opt.outlier_fraction >= 0.0 && opt.outlier_fraction < 1.0)) {
    throw ValidationError("instance: outlier_fraction must be in [0, 1)");
  }
  if (!(opt.max_tilt >= 0.0)) throw ValidationError("instance: max_tilt must be >= 0");
  if ((opt.translation_hi - opt.translation_lo).minCoeff() < 0.0) {
    throw ValidationError("instance: translation range is inverted");
  }
  if (!(opt.outlier_margin >= 0.0) || !(opt.outlier_min_dist > 0.0)) {
    throw ValidationError("instance: invalid outlier placement parameters");
  }
}

Instance make_instance(const ShapeSpec& spec, const InstanceOptions& opt, std::uint64_t seed) {
  validate_spec(spec);
  validate_instance_options(opt);
  auto rng = make_rng(seed, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const ShapeParams params = draw_params(spec, seed);
  const CanonicalShape shape = sample_shape(spec, params, opt.points, seed);

  Instance inst;
  inst.category = spec.category;
  inst.seed = seed;
  inst.coords_gt = shape.coords;
  if (opt.sampler == PoseSampler::Uniform) {
    inst.pose_gt.rotation = random_rotation(rng);
  } else {
    const double yaw = 2 * kPi * unit(rng);
    const double az = 2 * kPi * unit(rng);
    const double tilt = opt.max_tilt * unit(rng);
    const Vec3 axis(std::cos(az), 0.0, std::sin(az));
    inst.pose_gt.rotation = axis_angle(axis, tilt) * rot_y(yaw);
  }
  for (int k = 0; k < 3; ++k) {
    inst.pose_gt.translation[k] =
        opt.translation_lo[k] + (opt.translation_hi[k] - opt.translation_lo[k]) * unit(rng);
  }
  inst.pose_gt.size = shape.extents;

  std::normal_distribution<double> noise(0.0, 1.0);
  inst.observed = world_locations(inst.coords_gt, inst.pose_gt);
  if (opt.noise_sigma > 0.0) {
    for (auto& p : inst.observed) p += opt.noise_sigma * Vec3(noise(rng), noise(rng), noise(rng));
  }

  const int n = opt.points;
  const int n_out = static_cast<int>(std::lround(opt.outlier_fraction * n));
  if (n_out > 0) {
    Vec3 lo = inst.observed.front(), hi = lo;
    for (const auto& p : inst.observed) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    lo.array() -= opt.outlier_margin;
    hi.array() += opt.outlier_margin;
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = 0; i < n_out; ++i) {
      const int j = i + static_cast<int>(rng() % static_cast<std::uint64_t>(n - i));
      std::swap(order[i], order[j]);
    }
    for (int k = 0; k < n_out; ++k) {
      const int i = order[k];
      const Vec3 gt = world_location(inst.coords_gt[i], inst.pose_gt);
      Vec3 q;
      do {
        for (int d = 0; d < 3; ++d) q[d] = lo[d] + (hi[d] - lo[d]) * unit(rng);
      } while ((q - gt).norm() <= opt.outlier_min_dist);
      inst.observed[i] = q;
    }
  }
  inst.inliers_gt = gt_inliers(inst.observed, inst.coords_gt, inst.pose_gt);
  return inst;
}

}  // namespace catpose
