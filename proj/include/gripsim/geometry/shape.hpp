#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "gripsim/geometry/pose.hpp"

namespace gripsim {

struct Sphere {
  double radius = 0;
};

struct Box {
  Vec3d half_extents = Vec3d::Zero();
};

/// Capsule whose axis is the local z axis, spanning z in [-half_length, half_length].
struct Capsule {
  double radius = 0;
  double half_length = 0;
};

/// Closed convex polyhedron with outward-wound triangles. Construct with
/// make_convex_mesh so the face planes are populated and validated.
struct ConvexMesh {
  std::vector<Vec3d> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Vec3d> face_normals;
  std::vector<double> face_offsets;  // n . x = offset on the face plane
};

using Shape = std::variant<Sphere, Box, Capsule, ConvexMesh>;

/// Visitor built from lambdas.
template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

struct PosedShape {
  Shape shape;
  Pose pose;
};

/// Builds and validates a convex mesh. Throws InputError if the mesh is not
/// closed, not convex or has inconsistent winding.
ConvexMesh make_convex_mesh(std::vector<Vec3d> vertices, std::vector<std::array<int, 3>> faces);

/// Right prism over a regular n-gon in the xy plane, extruded along z.
ConvexMesh make_prism(int sides, double circumradius, double half_height);

/// Throws InputError for non-positive sizes or malformed meshes.
void validate_shape(const Shape& shape);

/// True when every edge is shared by exactly two faces with opposite directions.
bool is_closed(const ConvexMesh& mesh);

std::string shape_kind(const Shape& shape);

/// Radius of the smallest origin-centred sphere containing the shape.
double bounding_radius(const Shape& shape);

/// Corners of the tightest axis-aligned box around the shape, canonical frame.
std::array<Vec3d, 8> tight_corners(const Shape& shape);

/// Support extent of the shape along a unit direction (max over points of d.x).
double support(const Shape& shape, const Vec3d& direction);

/// Deterministic stratified surface samples in the shape's canonical frame.
std::vector<Vec3d> sample_surface(const Shape& shape, int count, std::uint64_t seed);

}  // namespace gripsim
