#include "gripsim/sim/hand_collider.hpp"

namespace gripsim {

HandCollider::HandCollider(const HandKinematics& kin)
    : palm_rotation(kin.pose.root.matrix()),
      palm_translation(kin.pose.root.translation),
      palm_half_extents(kin.palm.half_extents),
      capsules(kin.capsules) {}

HandCollider::Query HandCollider::query(const Vec3d& p, const std::vector<char>* mask) const {
  Query best;
  if (!mask || (*mask)[0]) {
    const Vec3d local = palm_rotation.transpose() * (p - palm_translation);
    const SdfResult r = box_sdf(palm_half_extents, local);
    best.distance = r.distance;
    best.normal = palm_rotation * r.normal;
    best.primitive = 0;
    best.palm_local_normal = r.normal;
  }
  for (std::size_t k = 0; k < capsules.size(); ++k) {
    if (mask && !(*mask)[k + 1]) continue;
    const auto& c = capsules[k];
    double t = 0;
    const SdfResult r = segment_capsule_sdf(c.a, c.b, c.radius, p, &t);
    if (r.distance < best.distance) {
      best.distance = r.distance;
      best.normal = r.normal;
      best.primitive = static_cast<int>(k) + 1;
      best.segment_t = t;
    }
  }
  return best;
}

std::vector<char> HandCollider::near_sphere(const Vec3d& centre, double radius, double margin) const {
  std::vector<char> mask(1 + capsules.size(), 0);
  const Vec3d local = palm_rotation.transpose() * (centre - palm_translation);
  mask[0] = box_sdf(palm_half_extents, local).distance <= radius + margin;
  for (std::size_t k = 0; k < capsules.size(); ++k) {
    const auto& c = capsules[k];
    mask[k + 1] = segment_capsule_sdf(c.a, c.b, c.radius, centre).distance <= radius + margin;
  }
  return mask;
}

}  // namespace gripsim
