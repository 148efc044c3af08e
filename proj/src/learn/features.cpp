#include "gripsim/learn/features.hpp"

#include "gripsim/errors.hpp"
#include "gripsim/geometry/sdf.hpp"
#include "gripsim/sim/hand_collider.hpp"

namespace gripsim {

FeatureTape record_features(const Configuration& config) {
  const ObjectTemplate& obj = *config.object;
  const Mat3d R = config.object_pose.matrix();
  const Vec3d& t = config.object_pose.translation;
  const auto& hp = config.kin.surface_points;
  const int vh = static_cast<int>(hp.rows());
  const int vo = static_cast<int>(obj.surface.size());

  FeatureTape tape;
  tape.features.hand.resize(vh);
  tape.features.object.resize(vo);
  tape.hand_normals_world.resize(vh);
  tape.hand_normals_local.resize(vh);
  for (int i = 0; i < vh; ++i) {
    const SdfResult r = signed_distance_local(obj.shape, R.transpose() * (hp.row(i).transpose() - t));
    tape.features.hand[i] = r.distance;
    tape.hand_normals_local[i] = r.normal;
    tape.hand_normals_world[i] = R * r.normal;
  }

  const HandCollider hand(config.kin);
  tape.object_normals.resize(vo);
  tape.object_primitive.resize(vo);
  tape.object_segment_t.resize(vo);
  tape.object_palm_local_normal.resize(vo);
  for (int j = 0; j < vo; ++j) {
    const auto q = hand.query(R * obj.surface[j] + t);
    tape.features.object[j] = q.distance;
    tape.object_normals[j] = q.normal;
    tape.object_primitive[j] = q.primitive;
    tape.object_segment_t[j] = q.segment_t;
    tape.object_palm_local_normal[j] = q.palm_local_normal;
  }
  return tape;
}

ContactFeatures contact_features(const Configuration& config) { return record_features(config).features; }

InputLayout input_layout(const Configuration& config) {
  return {static_cast<int>(config.kin.surface_points.rows()), static_cast<int>(config.object->surface.size())};
}

Eigen::VectorXd assemble_input(const Configuration& config, const ContactFeatures& feats, double scale) {
  const InputLayout layout = input_layout(config);
  if (feats.hand.size() != layout.hand_points || feats.object.size() != layout.object_points)
    throw InputError("assemble_input: feature sizes do not match the configuration");
  if (!(scale > 0)) throw InputError("assemble_input: scale must be positive");
  const Vec3d root = config.kin.pose.root.translation;
  const double inv = 1.0 / scale;
  Eigen::VectorXd x(layout.size());
  for (int i = 0; i < layout.hand_points; ++i)
    x.segment<3>(layout.hand_offset() + 3 * i) = (config.kin.surface_points.row(i).transpose() - root) * inv;
  const Mat3d R = config.object_pose.matrix();
  const Vec3d rel = config.object_pose.translation - root;
  for (int j = 0; j < layout.object_points; ++j)
    x.segment<3>(layout.object_offset() + 3 * j) = (R * config.object->surface[j] + rel) * inv;
  x.segment(layout.hand_distance_offset(), layout.hand_points) = feats.hand * inv;
  x.segment(layout.object_distance_offset(), layout.object_points) = feats.object * inv;
  return x;
}

Eigen::VectorXd assemble_input(const Configuration& config, double scale) {
  return assemble_input(config, contact_features(config), scale);
}

Vec3d rotation_tangent(const Mat3d& dR, const Mat3d& R) {
  Vec3d out;
  for (int k = 0; k < 3; ++k) out[k] = (dR.array() * (skew<double>(Vec3d::Unit(k)) * R).array()).sum();
  return out;
}

Eigen::Matrix<double, 6, 1> ConfigurationGradient::object_tangent(const Pose& object_pose) const {
  Eigen::Matrix<double, 6, 1> out;
  out.head<3>() = object_translation;
  out.tail<3>() = rotation_tangent(object_rotation, object_pose.matrix());
  return out;
}

ConfigurationGradient input_vjp(const Configuration& config, const FeatureTape& tape, const Eigen::VectorXd& g,
                                double scale) {
  const InputLayout layout = input_layout(config);
  if (g.size() != layout.size()) throw InputError("input_vjp: gradient size does not match the input layout");
  const HandKinematics& kin = config.kin;
  const Mat3d R = config.object_pose.matrix();
  const Vec3d& t = config.object_pose.translation;
  const double inv = 1.0 / scale;

  ConfigurationGradient out;
  out.hand = HandGradient(static_cast<int>(kin.pose.angles.size()));
  Vec3d centre_grad = Vec3d::Zero();

  for (int i = 0; i < layout.hand_points; ++i) {
    const Vec3d gp = g.segment<3>(layout.hand_offset() + 3 * i) * inv;
    const double gd = g[layout.hand_distance_offset() + i] * inv;
    const Vec3d h = kin.surface_points.row(i).transpose();
    const Vec3d total = gp + gd * tape.hand_normals_world[i];
    out.hand.add_tracked(kin, kin.surface_index(i), total);
    centre_grad += gp;
    out.object_translation -= gd * tape.hand_normals_world[i];
    out.object_rotation.noalias() += gd * (h - t) * tape.hand_normals_local[i].transpose();
  }

  for (int j = 0; j < layout.object_points; ++j) {
    const Vec3d& m = config.object->surface[j];
    const Vec3d gp = g.segment<3>(layout.object_offset() + 3 * j) * inv;
    const double gd = g[layout.object_distance_offset() + j] * inv;
    const Vec3d& n = tape.object_normals[j];
    const Vec3d dp = gp + gd * n;
    out.object_translation += dp;
    out.object_rotation.noalias() += dp * m.transpose();
    centre_grad += gp;
    if (gd == 0) continue;
    const int prim = tape.object_primitive[j];
    if (prim == 0) {
      out.hand.add_palm_query(kin, R * m + t, gd * tape.object_palm_local_normal[j]);
    } else {
      const int seg = prim - 1;
      const double s = tape.object_segment_t[j];
      out.hand.add_tracked(kin, kin.capsule_end_index(seg, 0), -gd * (1.0 - s) * n);
      out.hand.add_tracked(kin, kin.capsule_end_index(seg, 1), -gd * s * n);
    }
  }
  out.hand.root_translation -= centre_grad;
  return out;
}

Eigen::MatrixXd input_jacobian(const Configuration& config, double scale) {
  const InputLayout layout = input_layout(config);
  const FeatureTape tape = record_features(config);
  const int nq = static_cast<int>(config.kin.pose.angles.size());
  Eigen::MatrixXd J(layout.size(), 12 + nq);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(layout.size());
  for (int r = 0; r < layout.size(); ++r) {
    e[r] = 1.0;
    const ConfigurationGradient cg = input_vjp(config, tape, e, scale);
    J.block<1, 6>(r, 0) = cg.object_tangent(config.object_pose).transpose();
    J.block<1, 6>(r, 6) = cg.hand.root_tangent(config.kin).transpose();
    J.block(r, 12, 1, nq) = cg.hand.angles.transpose();
    e[r] = 0.0;
  }
  return J;
}

}  // namespace gripsim
