#include "gripsim/learn/estimator.hpp"

#include <limits>

#include "gripsim/errors.hpp"
#include "gripsim/geometry/rotation6d.hpp"

namespace gripsim {

Eigen::VectorXd encode_pose(const HandPose& hand, const Pose& object) {
  const PoseEncoding L{static_cast<int>(hand.angles.size())};
  Eigen::VectorXd e(L.size());
  e.segment(L.angles(), L.joints) = hand.angles;
  e.segment<6>(L.root_rotation()) = rotation_to_6d<double>(hand.root.matrix());
  e.segment<3>(L.root_translation()) = hand.root.translation;
  e.segment<6>(L.object_rotation()) = rotation_to_6d<double>(object.matrix());
  e.segment<3>(L.object_offset()) = object.translation - hand.root.translation;
  return e;
}

Eigen::VectorXd rest_encoding(int joints) {
  HandPose hand;
  hand.angles = Eigen::VectorXd::Zero(joints);
  return encode_pose(hand, Pose::Identity());
}

Eigen::VectorXd encoding_units(int joints) {
  const PoseEncoding L{joints};
  Eigen::VectorXd u = Eigen::VectorXd::Ones(L.size());
  u.segment<3>(L.root_translation()).setConstant(kTranslationUnit);
  u.segment<3>(L.object_offset()).setConstant(kTranslationUnit);
  return u;
}

Eigen::VectorXd normalise_encoding(const Eigen::VectorXd& e) {
  const int joints = static_cast<int>(e.size()) - 18;
  return (e - rest_encoding(joints)).cwiseQuotient(encoding_units(joints));
}

Eigen::VectorXd denormalise_encoding(const Eigen::VectorXd& n) {
  const int joints = static_cast<int>(n.size()) - 18;
  return rest_encoding(joints) + n.cwiseProduct(encoding_units(joints));
}

Configuration SceneSample::configuration() const { return make_configuration(hand_model, hand, object, object_pose); }

Prediction decode_prediction(const std::shared_ptr<const HandModel>& hand, std::shared_ptr<const ObjectTemplate> object,
                             const Eigen::VectorXd& e) {
  const PoseEncoding L{hand->joint_count()};
  if (e.size() != L.size()) throw InputError("decode_prediction: encoding size does not match the hand");
  if (!e.allFinite()) throw InputError("decode_prediction: non-finite encoding");
  HandPose hp;
  hp.angles = e.segment(L.angles(), L.joints);
  const Mat3d root_R = rotation_from_6d<double>(e.segment<6>(L.root_rotation()));
  hp.root = Pose(Eigen::Quaterniond(root_R), e.segment<3>(L.root_translation()));
  const Mat3d obj_R = rotation_from_6d<double>(e.segment<6>(L.object_rotation()));
  const Pose obj(Eigen::Quaterniond(obj_R), hp.root.translation + e.segment<3>(L.object_offset()));
  Prediction p;
  p.encoding = e;
  p.config = make_configuration(hand, hp, std::move(object), obj);
  return p;
}

Eigen::VectorXd encoding_backward(const Prediction& pred, const ConfigurationGradient& g) {
  const PoseEncoding L{static_cast<int>(pred.kin().pose.angles.size())};
  Eigen::VectorXd d = Eigen::VectorXd::Zero(L.size());
  d.segment(L.angles(), L.joints) = g.hand.angles;
  d.segment<6>(L.root_rotation()) =
      rotation_from_6d_backward<double>(pred.encoding.segment<6>(L.root_rotation()), g.hand.root_rotation);
  d.segment<3>(L.root_translation()) = g.hand.root_translation + g.object_translation;
  d.segment<6>(L.object_rotation()) =
      rotation_from_6d_backward<double>(pred.encoding.segment<6>(L.object_rotation()), g.object_rotation);
  d.segment<3>(L.object_offset()) = g.object_translation;
  return d;
}

Eigen::VectorXd joint_limit_backward(const Prediction& pred, double weight) {
  const int n = static_cast<int>(pred.kin().pose.angles.size());
  const PoseEncoding L{n};
  Eigen::VectorXd d = Eigen::VectorXd::Zero(L.size());
  const Eigen::VectorXd raw = pred.encoding.segment(L.angles(), n);
  d.segment(L.angles(), n) = weight * (raw - pred.kin().pose.angles);
  return d;
}

PoseGenerator::PoseGenerator(int observation_size, int joints, const std::vector<int>& hidden, std::uint64_t seed,
                             Activation hidden_activation) {
  std::vector<int> sizes{observation_size};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(PoseEncoding{joints}.size());
  mlp = Mlp(sizes, hidden_activation, Activation::Identity, seed);
}

std::vector<bool> PoseGenerator::frozen_layers(bool stability_update) const {
  std::vector<bool> f(mlp.layers().size(), false);
  if (stability_update)
    for (int l = 0; l < frozen_prefix && l < static_cast<int>(f.size()); ++l) f[l] = true;
  return f;
}

Prediction predict(const PoseGenerator& gen, const std::shared_ptr<const HandModel>& hand,
                   std::shared_ptr<const ObjectTemplate> object, const Eigen::VectorXd& observation) {
  const Eigen::VectorXd out = mlp_forward(gen.mlp, observation);
  return decode_prediction(hand, std::move(object), denormalise_encoding(out));
}

Prediction predict(const PoseGenerator& gen, const SceneSample& sample) {
  return predict(gen, sample.hand_model, sample.object, sample.observation);
}

void HyperParams::validate() const {
  for (double w : {hand, corner, symmetric_corner, ordinal, stability})
    if (!(w >= 0)) throw InputError("loss weights must be >= 0");
  if (!(success_threshold > 0)) throw InputError("success threshold must be positive");
}

double hand_loss(const PointSet& pj, const PointSet& ps, const PointSet& j, const PointSet& s) {
  if (pj.rows() != j.rows() || ps.rows() != s.rows() || j.rows() == 0 || s.rows() == 0)
    throw InputError("hand_loss: point set sizes do not match");
  return (pj - j).rowwise().squaredNorm().mean() + (ps - s).rowwise().squaredNorm().mean();
}

double corner_loss(const Mat3d& pR, const Vec3d& pt, const Mat3d& R, const Vec3d& t, const std::array<Vec3d, 8>& c) {
  double s = 0;
  for (const auto& v : c) s += ((pR * v + pt) - (R * v + t)).squaredNorm();
  return s / 8.0;
}

double symmetric_corner_loss(const Mat3d& pR, const Vec3d& pt, const Mat3d& R, const Vec3d& t,
                             const std::array<Vec3d, 8>& c, const std::vector<Mat3d>& S, int* argmin) {
  if (S.empty()) throw InputError("symmetric_corner_loss: empty symmetry set");
  double best = std::numeric_limits<double>::infinity();
  int best_k = 0;
  for (std::size_t k = 0; k < S.size(); ++k) {
    const double v = corner_loss(pR, pt, R * S[k], t, c);
    if (v < best) {
      best = v;
      best_k = static_cast<int>(k);
    }
  }
  if (argmin) *argmin = best_k;
  return best;
}

LossComponents accuracy_losses(const SceneSample& sample, const Prediction& pred) {
  LossComponents c;
  c.hand = hand_loss(pred.kin().keypoints, pred.kin().surface_points, sample.joints, sample.surface);
  const Mat3d pR = pred.object_pose().matrix();
  const Vec3d& pt = pred.object_pose().translation;
  const Mat3d R = sample.object_pose.matrix();
  const Vec3d& t = sample.object_pose.translation;
  c.corner = corner_loss(pR, pt, R, t, sample.object->corners);
  c.symmetric_corner = symmetric_corner_loss(pR, pt, R, t, sample.object->corners, sample.object->symmetries);
  return c;
}

double total_loss(const LossComponents& c, bool masked, bool stable, const HyperParams& hp) {
  double v = hp.hand * c.hand + hp.corner * c.corner + hp.symmetric_corner * c.symmetric_corner;
  if (!masked && stable) v += hp.stability * c.stability;
  return v;
}

double total_loss(const SceneSample& sample, const Prediction& pred, double stability, bool masked,
                  const HyperParams& hp) {
  LossComponents c = accuracy_losses(sample, pred);
  c.stability = stability;
  return total_loss(c, masked, sample.stable, hp);
}

namespace {

void corner_backward(const Mat3d& pR, const Vec3d& pt, const Mat3d& R, const Vec3d& t, const std::array<Vec3d, 8>& c,
                     double weight, ConfigurationGradient& g) {
  for (const auto& v : c) {
    const Vec3d diff = (pR * v + pt) - (R * v + t);
    const Vec3d gd = weight * 2.0 / 8.0 * diff;
    g.object_translation += gd;
    g.object_rotation.noalias() += gd * v.transpose();
  }
}

}  // namespace

ConfigurationGradient accuracy_backward(const SceneSample& sample, const Prediction& pred, const HyperParams& hp) {
  const HandKinematics& kin = pred.kin();
  ConfigurationGradient g;
  g.hand = HandGradient(static_cast<int>(kin.pose.angles.size()));
  if (hp.hand > 0) {
    const double wj = hp.hand * 2.0 / static_cast<double>(kin.keypoints.rows());
    for (Eigen::Index k = 0; k < kin.keypoints.rows(); ++k)
      g.hand.add_tracked(kin, kin.keypoint_index(static_cast<int>(k)),
                         wj * (kin.keypoints.row(k) - sample.joints.row(k)).transpose());
    const double ws = hp.hand * 2.0 / static_cast<double>(kin.surface_points.rows());
    for (Eigen::Index i = 0; i < kin.surface_points.rows(); ++i)
      g.hand.add_tracked(kin, kin.surface_index(static_cast<int>(i)),
                         ws * (kin.surface_points.row(i) - sample.surface.row(i)).transpose());
  }
  const Mat3d pR = pred.object_pose().matrix();
  const Vec3d& pt = pred.object_pose().translation;
  const Mat3d R = sample.object_pose.matrix();
  const Vec3d& t = sample.object_pose.translation;
  if (hp.corner > 0) corner_backward(pR, pt, R, t, sample.object->corners, hp.corner, g);
  if (hp.symmetric_corner > 0) {
    int k = 0;
    symmetric_corner_loss(pR, pt, R, t, sample.object->corners, sample.object->symmetries, &k);
    corner_backward(pR, pt, R * sample.object->symmetries[k], t, sample.object->corners, hp.symmetric_corner, g);
  }
  return g;
}

}  // namespace gripsim
