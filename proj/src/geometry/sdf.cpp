#include "gripsim/geometry/sdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gripsim/errors.hpp"

namespace gripsim {

namespace {

Vec3d any_perpendicular(const Vec3d& axis) {
  const Vec3d trial = std::abs(axis.x()) < 0.9 ? Vec3d::UnitX() : Vec3d::UnitY();
  return axis.cross(trial).normalized();
}

}  // namespace

SdfResult sphere_sdf(double radius, const Vec3d& p) {
  if (!(radius > 0)) throw InputError("sphere radius must be positive");
  const double n = p.norm();
  SdfResult r;
  r.distance = n - radius;
  r.normal = n > 0 ? Vec3d(p / n) : Vec3d::UnitY();
  return r;
}

SdfResult box_sdf(const Vec3d& h, const Vec3d& p) {
  if (!(h.minCoeff() > 0)) throw InputError("box half extents must be positive");
  const Vec3d q = p.cwiseAbs() - h;
  SdfResult r;
  const Vec3d sign(p.x() < 0 ? -1.0 : 1.0, p.y() < 0 ? -1.0 : 1.0, p.z() < 0 ? -1.0 : 1.0);
  if (q.maxCoeff() > 0) {
    const Vec3d outside = q.cwiseMax(0.0);
    r.distance = outside.norm();
    r.normal = sign.cwiseProduct(outside) / r.distance;
  } else {
    int axis = 0;
    r.distance = q.maxCoeff(&axis);
    r.normal = Vec3d::Zero();
    r.normal[axis] = sign[axis];
  }
  return r;
}

SdfResult capsule_sdf(double radius, double half_length, const Vec3d& p) {
  if (!(radius > 0) || !(half_length > 0)) throw InputError("capsule sizes must be positive");
  const Vec3d axis_point(0, 0, std::clamp(p.z(), -half_length, half_length));
  const Vec3d v = p - axis_point;
  const double n = v.norm();
  SdfResult r;
  r.distance = n - radius;
  r.normal = n > 0 ? Vec3d(v / n) : Vec3d::UnitX();
  return r;
}

SdfResult segment_capsule_sdf(const Vec3d& a, const Vec3d& b, double radius, const Vec3d& p, double* t_out) {
  const Vec3d ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  if (t_out) *t_out = t;
  const Vec3d v = p - (a + t * ab);
  const double n = v.norm();
  SdfResult r;
  r.distance = n - radius;
  r.normal = n > 0 ? Vec3d(v / n) : (len2 > 0 ? any_perpendicular(ab / std::sqrt(len2)) : Vec3d::UnitX());
  return r;
}

Vec3d closest_point_on_triangle(const Vec3d& p, const Vec3d& a, const Vec3d& b, const Vec3d& c) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
  const Vec3d ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;
  const Vec3d bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + (d1 / (d1 - d3)) * ab;
  const Vec3d cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

SdfResult convex_mesh_sdf(const ConvexMesh& m, const Vec3d& p) {
  if (m.faces.empty() || m.face_normals.size() != m.faces.size()) throw InputError("convex mesh was not built with make_convex_mesh");
  double max_plane = -std::numeric_limits<double>::infinity();
  std::size_t max_face = 0;
  for (std::size_t i = 0; i < m.faces.size(); ++i) {
    const double d = m.face_normals[i].dot(p) - m.face_offsets[i];
    if (d > max_plane) {
      max_plane = d;
      max_face = i;
    }
  }
  SdfResult r;
  if (max_plane <= 0) {
    r.distance = max_plane;
    r.normal = m.face_normals[max_face];
    return r;
  }
  // Outside: the nearest boundary point lies on a face whose plane the point is in front of.
  double best = std::numeric_limits<double>::infinity();
  Vec3d best_point = p;
  for (std::size_t i = 0; i < m.faces.size(); ++i) {
    if (m.face_normals[i].dot(p) - m.face_offsets[i] <= 0) continue;
    const auto& f = m.faces[i];
    const Vec3d c = closest_point_on_triangle(p, m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]]);
    const double d2 = (p - c).squaredNorm();
    if (d2 < best) {
      best = d2;
      best_point = c;
    }
  }
  r.distance = std::sqrt(best);
  r.normal = (p - best_point) / r.distance;
  return r;
}

SdfResult signed_distance_local(const Shape& shape, const Vec3d& p) {
  if (!p.allFinite()) throw InputError("signed_distance: point is not finite");
  return std::visit(Overloaded{
                        [&](const Sphere& s) { return sphere_sdf(s.radius, p); },
                        [&](const Box& b) { return box_sdf(b.half_extents, p); },
                        [&](const Capsule& c) { return capsule_sdf(c.radius, c.half_length, p); },
                        [&](const ConvexMesh& m) { return convex_mesh_sdf(m, p); },
                    },
                    shape);
}

SdfResult signed_distance(const Shape& shape, const Pose& pose, const Vec3d& point) {
  SdfResult r = signed_distance_local(shape, pose.inverse_transform(point));
  r.normal = pose.rotation * r.normal;
  return r;
}

}  // namespace gripsim
