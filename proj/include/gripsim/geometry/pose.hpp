#pragma once

#include <cmath>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace gripsim {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

/// Rigid transform: unit quaternion rotation followed by translation.
template <typename Scalar>
struct PoseT {
  Eigen::Quaternion<Scalar> rotation = Eigen::Quaternion<Scalar>::Identity();
  Vec3<Scalar> translation = Vec3<Scalar>::Zero();

  PoseT() = default;
  PoseT(const Eigen::Quaternion<Scalar>& q, const Vec3<Scalar>& t) : rotation(q.normalized()), translation(t) {}
  PoseT(const Mat3<Scalar>& R, const Vec3<Scalar>& t) : rotation(Eigen::Quaternion<Scalar>(R).normalized()), translation(t) {}

  static PoseT Identity() { return PoseT(); }
  static PoseT Translation(const Vec3<Scalar>& t) { return PoseT(Eigen::Quaternion<Scalar>::Identity(), t); }

  Mat3<Scalar> matrix() const { return rotation.toRotationMatrix(); }

  Vec3<Scalar> operator*(const Vec3<Scalar>& p) const { return rotation * p + translation; }

  PoseT operator*(const PoseT& other) const {
    PoseT out;
    out.rotation = (rotation * other.rotation).normalized();
    out.translation = rotation * other.translation + translation;
    return out;
  }

  PoseT inverse() const {
    PoseT out;
    out.rotation = rotation.conjugate();
    out.translation = -(out.rotation * translation);
    return out;
  }

  Vec3<Scalar> inverse_transform(const Vec3<Scalar>& p) const { return rotation.conjugate() * (p - translation); }

  bool isApprox(const PoseT& other, Scalar tol) const {
    // q and -q are the same rotation.
    const Scalar d = std::abs(rotation.dot(other.rotation));
    return std::abs(Scalar(1) - d) <= tol && (translation - other.translation).norm() <= tol;
  }
};

using Pose = PoseT<double>;
using Vec3d = Vec3<double>;
using Mat3d = Mat3<double>;

template <typename Scalar>
Mat3<Scalar> skew(const Vec3<Scalar>& v) {
  Mat3<Scalar> m;
  m << Scalar(0), -v.z(), v.y(), v.z(), Scalar(0), -v.x(), -v.y(), v.x(), Scalar(0);
  return m;
}

/// Quaternion exponential of a rotation vector (axis * angle).
template <typename Scalar>
Eigen::Quaternion<Scalar> quat_exp(const Vec3<Scalar>& rotvec) {
  const Scalar angle = rotvec.norm();
  if (angle < Scalar(1e-12)) {
    Eigen::Quaternion<Scalar> q(Scalar(1), rotvec.x() / 2, rotvec.y() / 2, rotvec.z() / 2);
    return q.normalized();
  }
  return Eigen::Quaternion<Scalar>(Eigen::AngleAxis<Scalar>(angle, rotvec / angle));
}

template <typename Scalar>
Mat3<Scalar> axis_angle_matrix(const Vec3<Scalar>& axis, Scalar angle) {
  return Eigen::AngleAxis<Scalar>(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace gripsim
