#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "gripsim/geometry/pose.hpp"
#include "gripsim/geometry/shape.hpp"

namespace gripsim {

/// One capsule link rotating about a hinge at its proximal end. The link
/// extends along the local +z axis of its frame.
struct HingeSegment {
  double length = 0;
  double radius = 0;
  Vec3d axis = -Vec3d::UnitX();  // hinge axis in the parent frame
  double lower = 0;
  double upper = 0;
};

struct FingerChain {
  Pose base;  // chain frame relative to the palm (root) frame
  std::vector<HingeSegment> segments;
};

/// A surface sample rigidly attached to a body: body 0 is the palm, body
/// k >= 1 is the (k-1)-th segment in chain order.
struct SurfaceSample {
  int body = 0;
  Vec3d local = Vec3d::Zero();
};

/// Static description of the kinematic hand: a box palm in the root frame
/// and capsule finger chains.
struct HandModel {
  Box palm;
  std::vector<FingerChain> fingers;
  std::vector<SurfaceSample> samples;

  int joint_count() const;
  int segment_count() const { return joint_count(); }
  /// Tracked keypoints: palm centre, then per finger the base and each segment end.
  int keypoint_count() const;
  Eigen::VectorXd lower_limits() const;
  Eigen::VectorXd upper_limits() const;
};

inline constexpr std::uint64_t kHandSampleSeed = 0x5eedc0ffeeULL;

/// Five-finger capsule hand: three fingers on the +z palm edge, two opposing
/// ones on the -z edge, all curling towards the palm normal (+y).
HandModel make_default_hand(int surface_samples = 64);

/// Replaces the surface samples with `count` stratified points on the palm's
/// grasping face (+y) and the segment lateral surfaces.
void resample_hand_surface(HandModel& hand, int count, std::uint64_t seed = kHandSampleSeed);

/// Articulation state: hinge angles in chain order and the palm (root) pose.
struct HandPose {
  Eigen::VectorXd angles;
  Pose root;
};

HandPose rest_pose(const HandModel& hand);

struct CapsuleSegment {
  Vec3d a = Vec3d::Zero();
  Vec3d b = Vec3d::Zero();
  double radius = 0;
};

/// Posed hand with everything the simulator, feature builder and losses need.
/// Points that carry derivatives ("tracked points") are stored in the root
/// frame together with their Jacobian with respect to the hinge angles; the
/// world position is root * local.
struct HandKinematics {
  HandPose pose;  // angles after clamping to the joint limits
  Eigen::Matrix<double, Eigen::Dynamic, 3> surface_points;  // world, V_h x 3
  Eigen::Matrix<double, Eigen::Dynamic, 3> keypoints;  // world, K x 3
  std::vector<CapsuleSegment> capsules;  // world
  Box palm;

  Eigen::Matrix<double, Eigen::Dynamic, 3> local_points;  // root frame, all tracked points
  std::vector<Eigen::Matrix<double, 3, Eigen::Dynamic>> local_jacobians;  // d local / d angles
  int surface_count = 0;
  int keypoint_count = 0;

  int surface_index(int i) const { return i; }
  int keypoint_index(int k) const { return surface_count + k; }
  int capsule_end_index(int segment, int end) const { return surface_count + keypoint_count + 2 * segment + end; }

  const Pose& root() const { return pose.root; }
  /// Palm and capsules as posed shapes (capsule axes aligned with local z).
  std::vector<PosedShape> collision_primitives() const;
};

/// Forward kinematics. Angles are clamped to limits; clamped joints get a
/// zero Jacobian column. Throws InputError for non-finite input.
HandKinematics forward_kinematics(const HandModel& hand, const HandPose& pose);

/// World-frame Jacobian (3 x n_angles) of tracked point `index`.
Eigen::Matrix<double, 3, Eigen::Dynamic> angle_jacobian(const HandKinematics& kin, int index);

/// World-frame Jacobian (3 x 6) of a world point rigidly attached to the root
/// with respect to [root translation, root rotation tangent], where the
/// rotation is perturbed as exp(w) * R.
Eigen::Matrix<double, 3, 6> root_jacobian(const HandKinematics& kin, const Vec3d& world_point);

/// Reverse-mode accumulator for hand quantities.
struct HandGradient {
  Eigen::VectorXd angles;
  Mat3d root_rotation = Mat3d::Zero();  // d/dR entries
  Vec3d root_translation = Vec3d::Zero();

  explicit HandGradient(int n_angles = 0) : angles(Eigen::VectorXd::Zero(n_angles)) {}
  /// Adds the pull-back of dL/d(world position of tracked point `index`).
  void add_tracked(const HandKinematics& kin, int index, const Vec3d& g);
  /// Adds the pull-back of dL/d(palm-frame local coordinate u = R^T (p - t))
  /// through the root pose, for a fixed world point p.
  void add_palm_query(const HandKinematics& kin, const Vec3d& world_point, const Vec3d& g_local);
  /// Gradient with respect to [translation, rotation tangent], matching root_jacobian.
  Eigen::Matrix<double, 6, 1> root_tangent(const HandKinematics& kin) const;
};

}  // namespace gripsim
