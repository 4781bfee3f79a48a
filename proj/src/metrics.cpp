#include "catpose/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "catpose/errors.hpp"

namespace catpose {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;
constexpr double kPlaneEps = 1e-12;

struct Face {
  std::vector<Vec3> pts;  // ordered polygon
  Vec3 normal;            // outward
};

using Polytope = std::vector<Face>;

struct Plane {
  Vec3 normal;  // inside: normal . x <= offset
  double offset;
};

Polytope box_polytope(const Pose9& b) {
  const Vec3 h = 0.5 * b.size;
  auto corner = [&](int sx, int sy, int sz) {
    return Vec3(b.rotation * Vec3(sx * h.x(), sy * h.y(), sz * h.z()) + b.translation);
  };
  Polytope out;
  for (int axis = 0; axis < 3; ++axis) {
    for (int side : {-1, 1}) {
      std::array<Vec3, 4> q;
      const int u = (axis + 1) % 3, v = (axis + 2) % 3;
      const int su[4] = {-1, 1, 1, -1}, sv[4] = {-1, -1, 1, 1};
      for (int k = 0; k < 4; ++k) {
        int s[3];
        s[axis] = side;
        s[u] = su[k];
        s[v] = sv[k];
        q[k] = corner(s[0], s[1], s[2]);
      }
      out.push_back({{q.begin(), q.end()}, side * b.rotation.col(axis)});
    }
  }
  return out;
}

std::array<Plane, 6> box_planes(const Pose9& b) {
  std::array<Plane, 6> out;
  for (int axis = 0; axis < 3; ++axis) {
    const Vec3 n = b.rotation.col(axis);
    const double c = n.dot(b.translation), h = 0.5 * b.size[axis];
    out[2 * axis] = {n, c + h};
    out[2 * axis + 1] = {-n, -c + h};
  }
  return out;
}

Polytope clip(const Polytope& poly, const Plane& pl) {
  Polytope out;
  std::vector<Vec3> on_plane;
  bool coplanar_face = false;
  auto dist = [&](const Vec3& x) {
    const double d = pl.normal.dot(x) - pl.offset;
    return std::abs(d) <= kPlaneEps ? 0.0 : d;
  };
  for (const auto& f : poly) {
    Face g{{}, f.normal};
    const std::size_t m = f.pts.size();
    for (std::size_t i = 0; i < m; ++i) {
      const Vec3& a = f.pts[i];
      const Vec3& b = f.pts[(i + 1) % m];
      const double da = dist(a);
      const double db = dist(b);
      if (da <= 0.0) g.pts.push_back(a);
      if (da == 0.0) on_plane.push_back(a);
      if ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0)) {
        const Vec3 x = a + (da / (da - db)) * (b - a);
        g.pts.push_back(x);
        on_plane.push_back(x);
      }
    }
    if (g.pts.size() >= 3) {
      bool flat = true;
      for (const auto& p : g.pts) flat = flat && dist(p) == 0.0;
      coplanar_face = coplanar_face || flat;
      out.push_back(std::move(g));
    }
  }
  if (!coplanar_face && on_plane.size() >= 3) {
    Vec3 c = Vec3::Zero();
    for (const auto& p : on_plane) c += p;
    c /= static_cast<double>(on_plane.size());
    const Vec3 e1 = pl.normal.unitOrthogonal();
    const Vec3 e2 = pl.normal.cross(e1);
    std::sort(on_plane.begin(), on_plane.end(), [&](const Vec3& a, const Vec3& b) {
      return std::atan2((a - c).dot(e2), (a - c).dot(e1)) <
             std::atan2((b - c).dot(e2), (b - c).dot(e1));
    });
    out.push_back({on_plane, pl.normal});
  }
  return out;
}

double volume(const Polytope& poly) {
  if (poly.size() < 4) return 0.0;
  Vec3 c = Vec3::Zero();
  double n = 0.0;
  for (const auto& f : poly) {
    for (const auto& p : f.pts) {
      c += p;
      n += 1.0;
    }
  }
  c /= n;
  double v = 0.0;
  for (const auto& f : poly) {
    Vec3 area = Vec3::Zero();
    for (std::size_t i = 1; i + 1 < f.pts.size(); ++i) {
      area += (f.pts[i] - f.pts[0]).cross(f.pts[i + 1] - f.pts[0]);
    }
    v += 0.5 * area.norm() * f.normal.dot(f.pts[0] - c) / 3.0;
  }
  return std::max(v, 0.0);
}

double intersection_volume(const Pose9& a, const Pose9& b) {
  Polytope p = box_polytope(a);
  for (const auto& pl : box_planes(b)) {
    p = clip(p, pl);
    if (p.empty()) return 0.0;
  }
  return volume(p);
}

}  // namespace

double iou3d(const Pose9& a, const Pose9& b) {
  const double inter = 0.5 * (intersection_volume(a, b) + intersection_volume(b, a));
  const double va = a.size.prod(), vb = b.size.prod();
  const double iou = inter / (va + vb - inter);
  return std::clamp(iou, 0.0, 1.0);
}

double rotation_error_deg(const Mat3& pred, const Mat3& gt, const SymmetryClass& sym) {
  switch (sym.kind) {
    case SymmetryKind::RotationalY:
      return direction_angle(pred.col(1), gt.col(1)) * kRadToDeg;
    case SymmetryKind::ReflectionXY:
      return std::min(geodesic_angle(pred, gt), geodesic_angle(pred, gt * rot_y(std::numbers::pi))) *
             kRadToDeg;
    case SymmetryKind::None:
      break;
  }
  return geodesic_angle(pred, gt) * kRadToDeg;
}

PoseError pose_error(const Pose9& pred, const Pose9& gt, const SymmetryClass& sym) {
  PoseError e;
  e.rotation_error = rotation_error_deg(pred.rotation, gt.rotation, sym);
  e.translation_error = (pred.translation - gt.translation).norm();
  e.iou3d = iou3d(pred, gt);
  if (sym.kind == SymmetryKind::RotationalY) {
    Pose9 cand = pred;
    for (const Mat3& r : candidate_rotations(pred.rotation, sym)) {
      cand.rotation = r;
      e.iou3d = std::max(e.iou3d, iou3d(cand, gt));
    }
  }
  return e;
}

Precision aggregate(std::span<const PoseError> errors) {
  if (errors.empty()) throw ValidationError("aggregate: empty error list");
  Precision p;
  p.count = static_cast<int>(errors.size());
  for (const auto& e : errors) {
    const double r = e.rotation_error, t = e.translation_error;
    p.iou25 += e.iou3d >= 0.25;
    p.iou50 += e.iou3d >= 0.50;
    p.iou75 += e.iou3d >= 0.75;
    p.deg5_cm2 += r < 5.0 && t < 0.02;
    p.deg5_cm5 += r < 5.0 && t < 0.05;
    p.deg10_cm5 += r < 10.0 && t < 0.05;
    p.deg10_cm10 += r < 10.0 && t < 0.10;
  }
  const double n = static_cast<double>(errors.size());
  for (double* v : {&p.iou25, &p.iou50, &p.iou75, &p.deg5_cm2, &p.deg5_cm5, &p.deg10_cm5,
                    &p.deg10_cm10}) {
    *v /= n;
  }
  return p;
}

MetricsReport aggregate(std::span<const PoseError> errors, std::span<const std::string> categories) {
  if (errors.size() != categories.size()) {
    throw ValidationError("aggregate: one category per error is required");
  }
  MetricsReport rep;
  rep.overall = aggregate(errors);
  std::map<std::string, std::vector<PoseError>> groups;
  for (std::size_t i = 0; i < errors.size(); ++i) groups[categories[i]].push_back(errors[i]);
  for (const auto& [name, list] : groups) rep.per_category[name] = aggregate(list);
  return rep;
}

std::vector<std::pair<std::string, double>> precision_fields(const Precision& p) {
  return {{"iou25", p.iou25},         {"iou50", p.iou50},         {"iou75", p.iou75},
          {"5deg2cm", p.deg5_cm2},    {"5deg5cm", p.deg5_cm5},    {"10deg5cm", p.deg10_cm5},
          {"10deg10cm", p.deg10_cm10}};
}

}  // namespace catpose
