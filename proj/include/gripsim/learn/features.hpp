#pragma once

#include <vector>

#include <Eigen/Core>

#include "gripsim/geometry/hand.hpp"
#include "gripsim/sim/scene.hpp"

namespace gripsim {

/// Signed distances of hand samples to the object (c_h) and of posed object
/// samples to the nearest hand primitive (c_o).
struct ContactFeatures {
  Eigen::VectorXd hand;
  Eigen::VectorXd object;
};

/// Everything the reverse pass needs, recorded while computing the features.
struct FeatureTape {
  ContactFeatures features;
  std::vector<Vec3d> hand_normals_world;  // object SDF gradient at each hand sample
  std::vector<Vec3d> hand_normals_local;  // same, in the object frame
  std::vector<Vec3d> object_normals;  // hand SDF gradient at each object sample
  std::vector<int> object_primitive;  // 0 palm, k + 1 capsule k
  std::vector<double> object_segment_t;
  std::vector<Vec3d> object_palm_local_normal;
};

ContactFeatures contact_features(const Configuration& config);
FeatureTape record_features(const Configuration& config);

inline constexpr double kInputScale = 1.0;  // metres per input unit

/// Layout [hand points; object points; c_h; c_o], root-centred and divided by the scale.
struct InputLayout {
  int hand_points = 0;
  int object_points = 0;

  int size() const { return 4 * hand_points + 4 * object_points; }
  int hand_offset() const { return 0; }
  int object_offset() const { return 3 * hand_points; }
  int hand_distance_offset() const { return 3 * hand_points + 3 * object_points; }
  int object_distance_offset() const { return 4 * hand_points + 3 * object_points; }
};

InputLayout input_layout(const Configuration& config);

Eigen::VectorXd assemble_input(const Configuration& config, const ContactFeatures& feats, double scale = kInputScale);
Eigen::VectorXd assemble_input(const Configuration& config, double scale = kInputScale);

/// Reverse-mode gradient with respect to the configuration's free parameters.
struct ConfigurationGradient {
  HandGradient hand;
  Vec3d object_translation = Vec3d::Zero();
  Mat3d object_rotation = Mat3d::Zero();  // dL/dR

  /// [translation, rotation tangent] for perturbations R' = exp(w) R.
  Eigen::Matrix<double, 6, 1> object_tangent(const Pose& object_pose) const;
};

/// Pulls dL/d(input) back to the configuration. The tape must come from the
/// same configuration.
ConfigurationGradient input_vjp(const Configuration& config, const FeatureTape& tape, const Eigen::VectorXd& g,
                                double scale = kInputScale);

/// Dense Jacobian of the input with respect to
/// [object translation (3), object rotation tangent (3), root translation (3),
///  root rotation tangent (3), joint angles (n)].
Eigen::MatrixXd input_jacobian(const Configuration& config, double scale = kInputScale);

/// Gradient of sum(G .* R) along the tangent R' = exp(w) R.
Vec3d rotation_tangent(const Mat3d& dR, const Mat3d& R);

}  // namespace gripsim
