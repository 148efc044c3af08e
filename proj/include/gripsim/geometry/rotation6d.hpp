#pragma once

#include <Eigen/Core>

#include "gripsim/errors.hpp"
#include "gripsim/geometry/pose.hpp"

namespace gripsim {

template <typename Scalar>
using Vec6 = Eigen::Matrix<Scalar, 6, 1>;

inline constexpr double kRotation6dMinNorm = 1e-9;

/// Continuous 6D rotation encoding: Gram-Schmidt on two 3-vectors, the
/// third column completes a right-handed frame.
template <typename Scalar>
Mat3<Scalar> rotation_from_6d(const Vec6<Scalar>& r) {
  const Vec3<Scalar> a1 = r.template head<3>();
  const Vec3<Scalar> a2 = r.template tail<3>();
  const Scalar n1 = a1.norm();
  if (!(n1 > Scalar(kRotation6dMinNorm))) throw InputError("rotation_from_6d: first column is degenerate");
  const Vec3<Scalar> b1 = a1 / n1;
  const Vec3<Scalar> u = a2 - b1.dot(a2) * b1;
  const Scalar nu = u.norm();
  if (!(nu > Scalar(kRotation6dMinNorm))) throw InputError("rotation_from_6d: second column is parallel to the first");
  const Vec3<Scalar> b2 = u / nu;
  Mat3<Scalar> R;
  R.col(0) = b1;
  R.col(1) = b2;
  R.col(2) = b1.cross(b2);
  return R;
}

template <typename Scalar>
Vec6<Scalar> rotation_to_6d(const Mat3<Scalar>& R) {
  Vec6<Scalar> r;
  r << R.col(0), R.col(1);
  return r;
}

/// Pulls a gradient with respect to the rotation matrix entries back to the
/// 6D encoding.
template <typename Scalar>
Vec6<Scalar> rotation_from_6d_backward(const Vec6<Scalar>& r, const Mat3<Scalar>& dR) {
  const Vec3<Scalar> a1 = r.template head<3>();
  const Vec3<Scalar> a2 = r.template tail<3>();
  const Scalar n1 = a1.norm();
  const Vec3<Scalar> b1 = a1 / n1;
  const Scalar proj = b1.dot(a2);
  const Vec3<Scalar> u = a2 - proj * b1;
  const Scalar nu = u.norm();
  const Vec3<Scalar> b2 = u / nu;

  const Vec3<Scalar> g3 = dR.col(2);
  Vec3<Scalar> gb1 = dR.col(0) + b2.cross(g3);
  const Vec3<Scalar> gb2 = dR.col(1) + g3.cross(b1);

  const Vec3<Scalar> gu = (gb2 - b2 * b2.dot(gb2)) / nu;
  const Vec3<Scalar> ga2 = gu - b1 * b1.dot(gu);
  gb1 -= proj * gu + a2 * b1.dot(gu);
  const Vec3<Scalar> ga1 = (gb1 - b1 * b1.dot(gb1)) / n1;

  Vec6<Scalar> out;
  out << ga1, ga2;
  return out;
}

}  // namespace gripsim
