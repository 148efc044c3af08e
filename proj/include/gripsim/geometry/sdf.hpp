#pragma once

#include "gripsim/geometry/pose.hpp"
#include "gripsim/geometry/shape.hpp"

namespace gripsim {

struct SdfResult {
  double distance = 0;  // negative inside
  Vec3d normal = Vec3d::UnitY();  // unit gradient of the distance field
};

/// Signed distance from a world point to a posed shape with the outward
/// field gradient expressed in the world frame.
SdfResult signed_distance(const Shape& shape, const Pose& shape_pose, const Vec3d& point);

/// Same query in the shape's canonical frame.
SdfResult signed_distance_local(const Shape& shape, const Vec3d& point);

SdfResult sphere_sdf(double radius, const Vec3d& p);
SdfResult box_sdf(const Vec3d& half_extents, const Vec3d& p);
SdfResult capsule_sdf(double radius, double half_length, const Vec3d& p);
SdfResult convex_mesh_sdf(const ConvexMesh& mesh, const Vec3d& p);

/// Capsule given by world-space endpoints. `t` receives the clamped segment
/// parameter of the closest axis point, which callers need for endpoint
/// derivatives.
SdfResult segment_capsule_sdf(const Vec3d& a, const Vec3d& b, double radius, const Vec3d& p, double* t = nullptr);

/// Closest point on triangle (a, b, c) to p.
Vec3d closest_point_on_triangle(const Vec3d& p, const Vec3d& a, const Vec3d& b, const Vec3d& c);

}  // namespace gripsim
