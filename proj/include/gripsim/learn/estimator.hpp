#pragma once

#include <array>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "gripsim/learn/features.hpp"
#include "gripsim/learn/mlp.hpp"
#include "gripsim/sim/scene.hpp"

namespace gripsim {

using PointSet = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// Layout of the pose encoding [angles, root 6D, root t, object 6D, object t - root t].
struct PoseEncoding {
  int joints = 0;

  int size() const { return joints + 18; }
  int angles() const { return 0; }
  int root_rotation() const { return joints; }
  int root_translation() const { return joints + 6; }
  int object_rotation() const { return joints + 9; }
  int object_offset() const { return joints + 15; }
};

inline constexpr double kTranslationUnit = 0.1;  // metres per normalised unit

Eigen::VectorXd encode_pose(const HandPose& hand, const Pose& object);
/// Encoding of the rest hand at the identity with the object at the root.
Eigen::VectorXd rest_encoding(int joints);
/// Per-entry unit: kTranslationUnit on translation blocks, 1 elsewhere.
Eigen::VectorXd encoding_units(int joints);
/// (encoding - rest) / units, the space the generator and observations live in.
Eigen::VectorXd normalise_encoding(const Eigen::VectorXd& encoding);
Eigen::VectorXd denormalise_encoding(const Eigen::VectorXd& normalised);

struct SceneSample {
  std::shared_ptr<const HandModel> hand_model;
  std::shared_ptr<const ObjectTemplate> object;
  HandPose hand;
  Pose object_pose;
  PointSet joints;  // ground-truth keypoints
  PointSet surface;  // ground-truth hand samples
  Eigen::VectorXd observation;  // normalised, noisy
  bool stable = false;
  double gt_loss = 0;

  Configuration configuration() const;
};

struct Prediction {
  Eigen::VectorXd encoding;
  Configuration config;

  const HandKinematics& kin() const { return config.kin; }
  const Pose& object_pose() const { return config.object_pose; }
};

/// Decodes a raw (denormalised) encoding. Throws InputError for degenerate 6D blocks.
Prediction decode_prediction(const std::shared_ptr<const HandModel>& hand, std::shared_ptr<const ObjectTemplate> object,
                             const Eigen::VectorXd& encoding);

/// dL/d(encoding) from a configuration gradient.
Eigen::VectorXd encoding_backward(const Prediction& pred, const ConfigurationGradient& g);

inline constexpr double kJointLimitWeight = 1.0;

/// dL/d(encoding) of 0.5 * weight * sum(excess^2), where excess is how far each
/// raw predicted angle lies beyond its joint limit. Clamped joints have no
/// kinematic gradient, so this is what brings them back into range.
Eigen::VectorXd joint_limit_backward(const Prediction& pred, double weight = kJointLimitWeight);

/// Observation -> normalised pose encoding.
struct PoseGenerator {
  Mlp mlp;
  int frozen_prefix = 1;  // leading layers held fixed during stability-bearing updates

  PoseGenerator() = default;
  PoseGenerator(int observation_size, int joints, const std::vector<int>& hidden, std::uint64_t seed,
                Activation hidden_activation = Activation::Tanh);

  int joints() const { return mlp.output_size() - 18; }
  std::vector<bool> frozen_layers(bool stability_update) const;
};

Prediction predict(const PoseGenerator& gen, const SceneSample& sample);
Prediction predict(const PoseGenerator& gen, const std::shared_ptr<const HandModel>& hand,
                   std::shared_ptr<const ObjectTemplate> object, const Eigen::VectorXd& observation);

struct HyperParams {
  double hand = 0.5;
  double corner = 0.0;
  double symmetric_corner = 0.2;
  double ordinal = 0.0;  // accepted for completeness; its loss is not implemented
  double stability = 0.1;
  double success_threshold = 0.01;

  void validate() const;
};

/// Mean squared point error over joints plus the same over surface points.
double hand_loss(const PointSet& pred_joints, const PointSet& pred_surface, const PointSet& joints,
                 const PointSet& surface);
/// Mean squared distance between the 8 transformed corners.
double corner_loss(const Mat3d& pred_R, const Vec3d& pred_t, const Mat3d& R, const Vec3d& t,
                   const std::array<Vec3d, 8>& corners);
/// Minimum of corner_loss over R * S_k; `argmin` receives the first minimiser.
double symmetric_corner_loss(const Mat3d& pred_R, const Vec3d& pred_t, const Mat3d& R, const Vec3d& t,
                             const std::array<Vec3d, 8>& corners, const std::vector<Mat3d>& symmetries,
                             int* argmin = nullptr);

struct LossComponents {
  double hand = 0;
  double corner = 0;
  double symmetric_corner = 0;
  double stability = 0;
};

LossComponents accuracy_losses(const SceneSample& sample, const Prediction& pred);

/// Weighted sum; the stability term is dropped when masked or when the
/// sample is not stable.
double total_loss(const LossComponents& c, bool masked, bool stable, const HyperParams& hp);
double total_loss(const SceneSample& sample, const Prediction& pred, double stability, bool masked,
                  const HyperParams& hp);

/// Gradient of the weighted accuracy terms with respect to the predicted configuration.
ConfigurationGradient accuracy_backward(const SceneSample& sample, const Prediction& pred, const HyperParams& hp);

}  // namespace gripsim
