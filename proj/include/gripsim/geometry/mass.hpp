#pragma once

#include "gripsim/geometry/pose.hpp"
#include "gripsim/geometry/shape.hpp"

namespace gripsim {

struct MassProperties {
  double mass = 0;
  Vec3d center_of_mass = Vec3d::Zero();  // body frame
  Mat3d inertia = Mat3d::Zero();  // about the center of mass, body frame
};

/// Uniform-density mass properties. Closed forms for primitives; convex
/// meshes are integrated with the divergence theorem over origin tetrahedra.
MassProperties mass_properties(const Shape& shape, double density);

}  // namespace gripsim
