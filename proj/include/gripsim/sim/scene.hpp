#pragma once

#include <memory>
#include <vector>

#include "gripsim/geometry/hand.hpp"
#include "gripsim/geometry/mass.hpp"
#include "gripsim/geometry/pose.hpp"
#include "gripsim/geometry/shape.hpp"

namespace gripsim {

struct SymmetryAxis {
  Vec3d axis = Vec3d::UnitZ();
  int order = 1;  // rotations by 2*pi*k/order, k = 0..order-1
};

/// Rigid object in its canonical frame. The canonical origin is the centre
/// of mass, so the pose translation is the object centre.
struct ObjectTemplate {
  Shape shape;
  double density = 1000.0;
  MassProperties mass;
  std::vector<Vec3d> surface;  // V_o canonical samples
  std::array<Vec3d, 8> corners;
  std::vector<SymmetryAxis> symmetry_axes;
  std::vector<Mat3d> symmetries;  // always starts with the identity
  double bounding_radius = 0;
};

inline constexpr std::uint64_t kObjectSampleSeed = 0x0b1ec7ULL;

/// Validates the shape, re-centres convex meshes on their centre of mass and
/// precomputes samples, corners and the symmetry set.
std::shared_ptr<const ObjectTemplate> make_object(Shape shape, double density, int surface_samples = 96,
                                                  std::vector<SymmetryAxis> symmetry = {});

inline constexpr std::size_t kMaxSymmetries = 120;

/// Identity followed by the rest of the rotation group generated by the axis
/// entries. Throws InputError when the group is infinite or too large.
std::vector<Mat3d> make_symmetry_set(const std::vector<SymmetryAxis>& axes);

/// Simulator input: a posed static hand and a posed rigid object.
struct Configuration {
  std::shared_ptr<const HandModel> hand;
  HandKinematics kin;
  std::shared_ptr<const ObjectTemplate> object;
  Pose object_pose;

  const HandPose& hand_pose() const { return kin.pose; }
  /// Posed object surface samples, V_o x 3.
  Eigen::Matrix<double, Eigen::Dynamic, 3> object_points() const;
};

Configuration make_configuration(std::shared_ptr<const HandModel> hand, const HandPose& hand_pose,
                                 std::shared_ptr<const ObjectTemplate> object, const Pose& object_pose);

/// Throws InputError when sizes disagree or coordinates are not finite.
void validate_configuration(const Configuration& config);

}  // namespace gripsim
