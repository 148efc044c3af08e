#pragma once

#include <limits>
#include <vector>

#include "gripsim/geometry/hand.hpp"
#include "gripsim/geometry/sdf.hpp"

namespace gripsim {

/// Union of the palm box and finger capsules, flattened for repeated
/// point queries.
struct HandCollider {
  Mat3d palm_rotation = Mat3d::Identity();
  Vec3d palm_translation = Vec3d::Zero();
  Vec3d palm_half_extents = Vec3d::Zero();
  std::vector<CapsuleSegment> capsules;

  explicit HandCollider(const HandKinematics& kin);

  struct Query {
    double distance = std::numeric_limits<double>::infinity();
    Vec3d normal = Vec3d::UnitY();  // gradient of the hand distance field, world frame
    int primitive = -1;  // 0 = palm, k + 1 = capsule k
    double segment_t = 0;  // closest axis parameter for capsules
    Vec3d palm_local_normal = Vec3d::UnitY();
  };

  /// Distance to the nearest primitive. `mask` (optional, size 1 + capsules)
  /// restricts the query to the flagged primitives.
  Query query(const Vec3d& p, const std::vector<char>* mask = nullptr) const;

  /// Flags primitives whose distance to a sphere (centre, radius) can be below `margin`.
  std::vector<char> near_sphere(const Vec3d& centre, double radius, double margin) const;
};

}  // namespace gripsim
