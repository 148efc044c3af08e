#include "gripsim/sim/scene.hpp"

#include <utility>

#include "gripsim/errors.hpp"

namespace gripsim {

std::vector<Mat3d> make_symmetry_set(const std::vector<SymmetryAxis>& axes) {
  std::vector<Mat3d> set{Mat3d::Identity()};
  auto add = [&](const Mat3d& R) {
    for (const auto& S : set)
      if ((S - R).norm() < 1e-9) return false;
    if (set.size() >= kMaxSymmetries) throw InputError("symmetry axes generate more than 120 rotations");
    set.push_back(R);
    return true;
  };
  for (const auto& entry : axes) {
    if (entry.order < 1) throw InputError("symmetry order must be >= 1");
    if (!(entry.axis.norm() > 0)) throw InputError("symmetry axis must be non-zero");
    for (int k = 1; k < entry.order; ++k) add(axis_angle_matrix<double>(entry.axis, 2.0 * M_PI * k / entry.order));
  }
  // close under composition
  for (std::size_t i = 1; i < set.size(); ++i)
    for (std::size_t j = 1; j <= i; ++j) {
      const Mat3d a = set[i] * set[j], b = set[j] * set[i];
      add(a);
      add(b);
    }
  return set;
}

std::shared_ptr<const ObjectTemplate> make_object(Shape shape, double density, int surface_samples,
                                                  std::vector<SymmetryAxis> symmetry) {
  validate_shape(shape);
  MassProperties mass = mass_properties(shape, density);
  if (auto* mesh = std::get_if<ConvexMesh>(&shape)) {
    if (mass.center_of_mass.norm() > 1e-12) {
      std::vector<Vec3d> verts = mesh->vertices;
      for (auto& v : verts) v -= mass.center_of_mass;
      shape = make_convex_mesh(std::move(verts), mesh->faces);
      mass = mass_properties(shape, density);
    }
  }
  auto obj = std::make_shared<ObjectTemplate>();
  obj->density = density;
  obj->mass = mass;
  obj->surface = sample_surface(shape, surface_samples, kObjectSampleSeed);
  obj->corners = tight_corners(shape);
  obj->bounding_radius = bounding_radius(shape);
  obj->symmetries = make_symmetry_set(symmetry);
  obj->symmetry_axes = std::move(symmetry);
  obj->shape = std::move(shape);
  return obj;
}

Eigen::Matrix<double, Eigen::Dynamic, 3> Configuration::object_points() const {
  Eigen::Matrix<double, Eigen::Dynamic, 3> pts(object->surface.size(), 3);
  for (std::size_t i = 0; i < object->surface.size(); ++i) pts.row(i) = (object_pose * object->surface[i]).transpose();
  return pts;
}

Configuration make_configuration(std::shared_ptr<const HandModel> hand, const HandPose& hand_pose,
                                 std::shared_ptr<const ObjectTemplate> object, const Pose& object_pose) {
  if (!hand || !object) throw InputError("configuration needs a hand and an object");
  Configuration c;
  c.kin = forward_kinematics(*hand, hand_pose);
  c.hand = std::move(hand);
  c.object = std::move(object);
  c.object_pose = object_pose;
  validate_configuration(c);
  return c;
}

void validate_configuration(const Configuration& c) {
  if (!c.hand || !c.object) throw InputError("configuration needs a hand and an object");
  if (c.kin.surface_points.rows() != static_cast<Eigen::Index>(c.hand->samples.size()))
    throw InputError("configuration: hand point count does not match the hand model");
  if (!c.kin.surface_points.allFinite()) throw InputError("configuration: non-finite hand points");
  if (!c.object_pose.translation.allFinite() || !c.object_pose.rotation.coeffs().allFinite())
    throw InputError("configuration: non-finite object pose");
}

}  // namespace gripsim
