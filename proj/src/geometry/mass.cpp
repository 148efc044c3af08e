#include "gripsim/geometry/mass.hpp"

#include <cmath>

#include "gripsim/errors.hpp"

namespace gripsim {

namespace {

MassProperties mesh_mass(const ConvexMesh& m, double density) {
  if (!is_closed(m)) throw InputError("mass_properties: mesh is not closed");
  // Second moment of the canonical tetrahedron (0, e1, e2, e3).
  Mat3d canonical;
  canonical << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  canonical /= 120.0;

  double volume = 0;
  Vec3d first = Vec3d::Zero();
  Mat3d second = Mat3d::Zero();
  for (const auto& f : m.faces) {
    Mat3d A;
    A.col(0) = m.vertices[f[0]];
    A.col(1) = m.vertices[f[1]];
    A.col(2) = m.vertices[f[2]];
    const double det = A.determinant();
    volume += det / 6.0;
    first += det / 24.0 * (A.col(0) + A.col(1) + A.col(2));
    second += det * A * canonical * A.transpose();
  }
  if (!(volume > 0)) throw InputError("mass_properties: mesh encloses no volume");
  MassProperties out;
  out.mass = density * volume;
  out.center_of_mass = first / volume;
  const Mat3d covariance = density * second - out.mass * out.center_of_mass * out.center_of_mass.transpose();
  out.inertia = covariance.trace() * Mat3d::Identity() - covariance;
  out.inertia = 0.5 * (out.inertia + out.inertia.transpose()).eval();
  return out;
}

}  // namespace

MassProperties mass_properties(const Shape& shape, double density) {
  if (!(density > 0)) throw InputError("mass_properties: density must be positive");
  validate_shape(shape);
  return std::visit(
      Overloaded{
          [&](const Sphere& s) {
            MassProperties out;
            out.mass = density * 4.0 / 3.0 * M_PI * std::pow(s.radius, 3);
            out.inertia = Mat3d::Identity() * (0.4 * out.mass * s.radius * s.radius);
            return out;
          },
          [&](const Box& b) {
            const Vec3d& h = b.half_extents;
            MassProperties out;
            out.mass = density * 8.0 * h.prod();
            const Vec3d sq = h.cwiseProduct(h);
            out.inertia = (Vec3d(sq.y() + sq.z(), sq.x() + sq.z(), sq.x() + sq.y()) * (out.mass / 3.0)).asDiagonal();
            return out;
          },
          [&](const Capsule& c) {
            const double r = c.radius, h = c.half_length;
            const double m_cyl = density * M_PI * r * r * 2.0 * h;
            const double m_caps = density * 4.0 / 3.0 * M_PI * r * r * r;
            MassProperties out;
            out.mass = m_cyl + m_caps;
            const double axial = m_cyl * r * r / 2.0 + m_caps * 0.4 * r * r;
            const double transverse = m_cyl * (3.0 * r * r + 4.0 * h * h) / 12.0 + m_caps * (0.4 * r * r + h * h + 0.75 * h * r);
            out.inertia = Vec3d(transverse, transverse, axial).asDiagonal();
            return out;
          },
          [&](const ConvexMesh& m) { return mesh_mass(m, density); },
      },
      shape);
}

}  // namespace gripsim
