#include "gripsim/geometry/shape.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

#include "gripsim/errors.hpp"
#include "gripsim/rng.hpp"

namespace gripsim {

namespace {

constexpr double kPlaneTolerance = 1e-9;

// Largest-remainder apportionment of `total` items by weight.
std::vector<int> apportion(const std::vector<double>& weights, int total) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> counts(weights.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = total * weights[i] / sum;
    counts[i] = static_cast<int>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - counts[i], i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++counts[remainders[k % remainders.size()].second];
  return counts;
}

// Latitude rings about the y axis with point counts proportional to ring
// circumference. Rings are mirror-symmetric about the equator and the polar
// rings are regular polygons, so a sphere resting on either pole is balanced.
std::vector<Vec3d> ring_sphere(int n, double radius) {
  std::vector<Vec3d> pts;
  pts.reserve(n);
  const int rings = std::max(1, static_cast<int>(std::lround(std::sqrt(M_PI * n) / 2.0)));
  std::vector<double> weights(rings);
  for (int k = 0; k < rings; ++k) weights[k] = std::sin(M_PI * (k + 0.5) / rings);
  std::vector<int> counts = apportion(weights, n);
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < rings; ++k) {
    const double theta = M_PI * (k + 0.5) / rings;
    const double y = std::cos(theta), r = std::sin(theta);
    for (int j = 0; j < counts[k]; ++j) {
      const double phi = golden * k + 2.0 * M_PI * j / counts[k];
      pts.emplace_back(radius * r * std::cos(phi), radius * y, radius * r * std::sin(phi));
    }
  }
  return pts;
}

// Points on the triangle, stratified along a sqrt-parameterised grid.
void sample_triangle(const Vec3d& a, const Vec3d& b, const Vec3d& c, int n, Rng& rng, std::vector<Vec3d>& out) {
  for (int i = 0; i < n; ++i) {
    const double s = (i + uniform01(rng)) / n;
    const double t = uniform01(rng);
    const double r1 = std::sqrt(s);
    out.push_back((1 - r1) * a + r1 * (1 - t) * b + r1 * t * c);
  }
}

}  // namespace

bool is_closed(const ConvexMesh& mesh) {
  std::map<std::pair<int, int>, int> directed;
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) ++directed[{f[k], f[(k + 1) % 3]}];
  }
  for (const auto& [edge, count] : directed) {
    if (count != 1) return false;
    auto it = directed.find({edge.second, edge.first});
    if (it == directed.end() || it->second != 1) return false;
  }
  return !mesh.faces.empty();
}

ConvexMesh make_convex_mesh(std::vector<Vec3d> vertices, std::vector<std::array<int, 3>> faces) {
  ConvexMesh mesh;
  mesh.vertices = std::move(vertices);
  mesh.faces = std::move(faces);
  if (mesh.vertices.size() < 4 || mesh.faces.size() < 4) throw InputError("convex mesh needs at least 4 vertices and 4 faces");
  const int nv = static_cast<int>(mesh.vertices.size());
  std::vector<bool> used(nv, false);
  for (const auto& f : mesh.faces) {
    for (int idx : f) {
      if (idx < 0 || idx >= nv) throw InputError("convex mesh face references a missing vertex");
      used[idx] = true;
    }
  }
  if (std::find(used.begin(), used.end(), false) != used.end()) throw InputError("convex mesh has a vertex off the hull");
  if (!is_closed(mesh)) throw InputError("convex mesh is not closed");

  double scale = 0;
  for (const auto& v : mesh.vertices) scale = std::max(scale, v.norm());
  const double tol = kPlaneTolerance * std::max(1.0, scale);
  for (const auto& f : mesh.faces) {
    const Vec3d& a = mesh.vertices[f[0]];
    Vec3d n = (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
    const double len = n.norm();
    if (!(len > 0)) throw InputError("convex mesh has a degenerate face");
    n /= len;
    const double offset = n.dot(a);
    for (const auto& v : mesh.vertices) {
      if (n.dot(v) - offset > tol) throw InputError("convex mesh is not convex or has inward-wound faces");
    }
    mesh.face_normals.push_back(n);
    mesh.face_offsets.push_back(offset);
  }
  return mesh;
}

ConvexMesh make_prism(int sides, double circumradius, double half_height) {
  if (sides < 3 || !(circumradius > 0) || !(half_height > 0)) throw InputError("prism needs >= 3 sides and positive sizes");
  std::vector<Vec3d> v;
  for (int z = 0; z < 2; ++z) {
    for (int i = 0; i < sides; ++i) {
      const double a = 2.0 * M_PI * i / sides;
      v.emplace_back(circumradius * std::cos(a), circumradius * std::sin(a), z == 0 ? -half_height : half_height);
    }
  }
  std::vector<std::array<int, 3>> f;
  for (int i = 1; i + 1 < sides; ++i) {
    f.push_back({0, i + 1, i});                          // bottom, facing -z
    f.push_back({sides, sides + i, sides + i + 1});      // top, facing +z
  }
  for (int i = 0; i < sides; ++i) {
    const int j = (i + 1) % sides;
    f.push_back({i, j, sides + j});
    f.push_back({i, sides + j, sides + i});
  }
  return make_convex_mesh(std::move(v), std::move(f));
}

void validate_shape(const Shape& shape) {
  std::visit(Overloaded{
                 [](const Sphere& s) {
                   if (!(s.radius > 0)) throw InputError("sphere radius must be positive");
                 },
                 [](const Box& b) {
                   if (!(b.half_extents.minCoeff() > 0)) throw InputError("box half extents must be positive");
                 },
                 [](const Capsule& c) {
                   if (!(c.radius > 0) || !(c.half_length > 0)) throw InputError("capsule sizes must be positive");
                 },
                 [](const ConvexMesh& m) {
                   if (m.face_normals.size() != m.faces.size() || m.faces.empty())
                     throw InputError("convex mesh was not built with make_convex_mesh");
                 },
             },
             shape);
}

std::string shape_kind(const Shape& shape) {
  return std::visit(Overloaded{
                        [](const Sphere&) { return std::string("sphere"); },
                        [](const Box&) { return std::string("box"); },
                        [](const Capsule&) { return std::string("capsule"); },
                        [](const ConvexMesh&) { return std::string("convex_mesh"); },
                    },
                    shape);
}

double bounding_radius(const Shape& shape) {
  return std::visit(Overloaded{
                        [](const Sphere& s) { return s.radius; },
                        [](const Box& b) { return b.half_extents.norm(); },
                        [](const Capsule& c) { return c.radius + c.half_length; },
                        [](const ConvexMesh& m) {
                          double r = 0;
                          for (const auto& v : m.vertices) r = std::max(r, v.norm());
                          return r;
                        },
                    },
                    shape);
}

double support(const Shape& shape, const Vec3d& d) {
  return std::visit(Overloaded{
                        [&](const Sphere& s) { return s.radius * d.norm(); },
                        [&](const Box& b) { return b.half_extents.dot(d.cwiseAbs()); },
                        [&](const Capsule& c) { return c.half_length * std::abs(d.z()) + c.radius * d.norm(); },
                        [&](const ConvexMesh& m) {
                          double best = -1e300;
                          for (const auto& v : m.vertices) best = std::max(best, d.dot(v));
                          return best;
                        },
                    },
                    shape);
}

std::array<Vec3d, 8> tight_corners(const Shape& shape) {
  Vec3d hi, lo;
  for (int k = 0; k < 3; ++k) {
    hi[k] = support(shape, Vec3d::Unit(k));
    lo[k] = -support(shape, -Vec3d::Unit(k));
  }
  std::array<Vec3d, 8> corners;
  for (int i = 0; i < 8; ++i) {
    corners[i] = Vec3d((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(), (i & 4) ? hi.z() : lo.z());
  }
  return corners;
}

std::vector<Vec3d> sample_surface(const Shape& shape, int count, std::uint64_t seed) {
  if (count <= 0) throw InputError("sample_surface: count must be positive");
  validate_shape(shape);
  Rng rng(seed);
  std::vector<Vec3d> out;
  out.reserve(count);
  std::visit(
      Overloaded{
          [&](const Sphere& s) { out = ring_sphere(count, s.radius); },
          [&](const Box& b) {
            const Vec3d& h = b.half_extents;
            // Corners carry the contact-relevant extremes; the rest is stratified by face area.
            for (const auto& c : tight_corners(shape)) {
              if (static_cast<int>(out.size()) < count) out.push_back(c);
            }
            const int remaining = count - static_cast<int>(out.size());
            if (remaining <= 0) return;
            std::vector<double> areas;
            for (int axis = 0; axis < 3; ++axis) {
              const double a = 4.0 * h[(axis + 1) % 3] * h[(axis + 2) % 3];
              areas.push_back(a);
              areas.push_back(a);
            }
            const auto counts = apportion(areas, remaining);
            for (int face = 0; face < 6; ++face) {
              const int axis = face / 2;
              const double sign = (face % 2 == 0) ? 1.0 : -1.0;
              const int u = (axis + 1) % 3, v = (axis + 2) % 3;
              const int n = counts[face];
              const int grid = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))));
              for (int i = 0; i < n; ++i) {
                const int gu = i % grid, gv = i / grid;
                Vec3d p;
                p[axis] = sign * h[axis];
                p[u] = h[u] * (2.0 * (gu + uniform01(rng)) / grid - 1.0);
                p[v] = h[v] * (2.0 * (gv + uniform01(rng)) / grid - 1.0);
                out.push_back(p);
              }
            }
          },
          [&](const Capsule& c) {
            const double cyl = 2.0 * M_PI * c.radius * 2.0 * c.half_length;
            const double caps = 4.0 * M_PI * c.radius * c.radius;
            const auto counts = apportion({cyl, caps}, count);
            const double golden = M_PI * (3.0 - std::sqrt(5.0));
            for (int i = 0; i < counts[0]; ++i) {
              const double z = -c.half_length + 2.0 * c.half_length * (i + uniform01(rng)) / counts[0];
              const double phi = golden * i;
              out.emplace_back(c.radius * std::cos(phi), c.radius * std::sin(phi), z);
            }
            for (const auto& p : ring_sphere(counts[1], c.radius)) {
              // Rings about y; swap axes so the hemispheres split along z.
              const Vec3d q(p.x(), p.z(), p.y());
              out.emplace_back(q.x(), q.y(), q.z() + (q.z() >= 0 ? c.half_length : -c.half_length));
            }
          },
          [&](const ConvexMesh& m) {
            for (const auto& v : m.vertices) {
              if (static_cast<int>(out.size()) < count) out.push_back(v);
            }
            const int remaining = count - static_cast<int>(out.size());
            if (remaining <= 0) return;
            std::vector<double> areas;
            for (const auto& f : m.faces) {
              areas.push_back(0.5 * (m.vertices[f[1]] - m.vertices[f[0]]).cross(m.vertices[f[2]] - m.vertices[f[0]]).norm());
            }
            const auto counts = apportion(areas, remaining);
            for (std::size_t i = 0; i < m.faces.size(); ++i) {
              const auto& f = m.faces[i];
              sample_triangle(m.vertices[f[0]], m.vertices[f[1]], m.vertices[f[2]], counts[i], rng, out);
            }
          },
      },
      shape);
  return out;
}

}  // namespace gripsim
