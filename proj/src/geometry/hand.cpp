#include "gripsim/geometry/hand.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gripsim/errors.hpp"
#include "gripsim/rng.hpp"

namespace gripsim {

int HandModel::joint_count() const {
  int n = 0;
  for (const auto& f : fingers) n += static_cast<int>(f.segments.size());
  return n;
}

int HandModel::keypoint_count() const {
  int n = 1;
  for (const auto& f : fingers) n += 1 + static_cast<int>(f.segments.size());
  return n;
}

Eigen::VectorXd HandModel::lower_limits() const {
  Eigen::VectorXd v(joint_count());
  int j = 0;
  for (const auto& f : fingers)
    for (const auto& s : f.segments) v[j++] = s.lower;
  return v;
}

Eigen::VectorXd HandModel::upper_limits() const {
  Eigen::VectorXd v(joint_count());
  int j = 0;
  for (const auto& f : fingers)
    for (const auto& s : f.segments) v[j++] = s.upper;
  return v;
}

HandModel make_default_hand(int surface_samples) {
  HandModel hand;
  hand.palm.half_extents = Vec3d(0.04, 0.01, 0.045);
  const double lengths[3] = {0.035, 0.025, 0.02};
  auto chain = [&](const Pose& base) {
    FingerChain f;
    f.base = base;
    for (double len : lengths) f.segments.push_back({len, 0.0085, -Vec3d::UnitX(), -0.3, 1.8});
    return f;
  };
  for (double x : {-0.026, 0.0, 0.026}) hand.fingers.push_back(chain(Pose::Translation(Vec3d(x, 0.0, 0.045))));
  const Eigen::Quaterniond flip(Eigen::AngleAxisd(M_PI, Vec3d::UnitY()));
  for (double x : {-0.016, 0.016}) hand.fingers.push_back(chain(Pose(flip, Vec3d(x, 0.0, -0.045))));
  resample_hand_surface(hand, surface_samples);
  return hand;
}

void resample_hand_surface(HandModel& hand, int count, std::uint64_t seed) {
  if (count <= 0) throw InputError("hand surface sample count must be positive");
  const Vec3d& h = hand.palm.half_extents;
  std::vector<double> areas{4.0 * h.x() * h.z()};
  for (const auto& f : hand.fingers)
    for (const auto& s : f.segments) areas.push_back(2.0 * M_PI * s.radius * s.length);
  // Largest-remainder apportionment by area.
  const double total = std::accumulate(areas.begin(), areas.end(), 0.0);
  std::vector<int> counts(areas.size());
  std::vector<std::pair<double, int>> rem;
  int assigned = 0;
  for (std::size_t i = 0; i < areas.size(); ++i) {
    const double exact = count * areas[i] / total;
    counts[i] = static_cast<int>(std::floor(exact));
    assigned += counts[i];
    rem.emplace_back(exact - counts[i], static_cast<int>(i));
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < count; ++k, ++assigned) ++counts[rem[k % rem.size()].second];

  Rng rng(seed);
  hand.samples.clear();
  hand.samples.reserve(count);
  {
    const int n = counts[0];
    const int grid = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))));
    for (int i = 0; i < n; ++i) {
      const int gu = i % grid, gv = i / grid;
      const double x = h.x() * (2.0 * (gu + uniform01(rng)) / grid - 1.0);
      const double z = h.z() * (2.0 * (gv + uniform01(rng)) / grid - 1.0);
      hand.samples.push_back({0, Vec3d(x, h.y(), z)});
    }
  }
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  int body = 1;
  for (const auto& f : hand.fingers) {
    for (const auto& s : f.segments) {
      const int n = counts[body];
      const double phase = uniform(rng, 0.0, 2.0 * M_PI);
      for (int i = 0; i < n; ++i) {
        const double z = s.length * (i + uniform01(rng)) / n;
        const double phi = phase + golden * i;
        hand.samples.push_back({body, Vec3d(s.radius * std::cos(phi), s.radius * std::sin(phi), z)});
      }
      ++body;
    }
  }
}

HandPose rest_pose(const HandModel& hand) {
  HandPose p;
  p.angles = Eigen::VectorXd::Zero(hand.joint_count());
  return p;
}

namespace {

struct BodyFrame {
  Mat3d R = Mat3d::Identity();  // root frame
  Vec3d o = Vec3d::Zero();
};

}  // namespace

HandKinematics forward_kinematics(const HandModel& hand, const HandPose& pose) {
  const int nq = hand.joint_count();
  if (pose.angles.size() != nq) throw InputError("forward_kinematics: expected " + std::to_string(nq) + " joint angles");
  if (!pose.angles.allFinite()) throw InputError("forward_kinematics: non-finite joint angle");
  if (!pose.root.translation.allFinite() || !pose.root.rotation.coeffs().allFinite())
    throw InputError("forward_kinematics: non-finite root pose");

  HandKinematics kin;
  kin.palm = hand.palm;
  kin.pose.root = pose.root;
  kin.pose.angles = pose.angles.cwiseMax(hand.lower_limits()).cwiseMin(hand.upper_limits());
  std::vector<bool> clamped(nq);
  for (int j = 0; j < nq; ++j) clamped[j] = kin.pose.angles[j] != pose.angles[j];

  // Body frames in the root frame, plus the hinge axes / origins that generate Jacobian columns.
  std::vector<BodyFrame> bodies(1 + nq);
  std::vector<Vec3d> hinge_axis(nq), hinge_origin(nq);
  std::vector<int> finger_of(nq), first_joint_of_finger;
  int j = 0;
  for (std::size_t fi = 0; fi < hand.fingers.size(); ++fi) {
    const auto& f = hand.fingers[fi];
    first_joint_of_finger.push_back(j);
    BodyFrame frame{f.base.matrix(), f.base.translation};
    for (const auto& s : f.segments) {
      hinge_axis[j] = frame.R * s.axis.normalized();
      hinge_origin[j] = frame.o;
      frame.R = frame.R * axis_angle_matrix<double>(s.axis, kin.pose.angles[j]);
      bodies[1 + j] = frame;
      finger_of[j] = static_cast<int>(fi);
      frame.o = frame.o + frame.R * Vec3d(0, 0, s.length);
      ++j;
    }
  }

  const int ns = static_cast<int>(hand.samples.size());
  const int nk = hand.keypoint_count();
  const int total = ns + nk + 2 * nq;
  kin.surface_count = ns;
  kin.keypoint_count = nk;
  kin.local_points.resize(total, 3);
  kin.local_jacobians.assign(total, Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, nq));

  // Columns for a point attached to segment `seg` (or a keypoint whose last driving joint is `last`).
  auto fill_jacobian = [&](int row, const Vec3d& p, int last_joint) {
    if (last_joint < 0) return;
    const int first = first_joint_of_finger[finger_of[last_joint]];
    for (int q = first; q <= last_joint; ++q) {
      if (clamped[q]) continue;
      kin.local_jacobians[row].col(q) = hinge_axis[q].cross(p - hinge_origin[q]);
    }
  };

  for (int i = 0; i < ns; ++i) {
    const auto& s = hand.samples[i];
    const BodyFrame& b = bodies[s.body];
    const Vec3d p = b.R * s.local + b.o;
    kin.local_points.row(i) = p.transpose();
    fill_jacobian(i, p, s.body - 1);
  }

  int row = ns;
  kin.local_points.row(row++) = Vec3d::Zero().transpose();  // palm centre
  j = 0;
  for (const auto& f : hand.fingers) {
    kin.local_points.row(row) = f.base.translation.transpose();
    ++row;
    for (const auto& s : f.segments) {
      const Vec3d tip = bodies[1 + j].R * Vec3d(0, 0, s.length) + bodies[1 + j].o;
      kin.local_points.row(row) = tip.transpose();
      fill_jacobian(row, tip, j);
      ++row;
      ++j;
    }
  }

  j = 0;
  for (const auto& f : hand.fingers) {
    for (const auto& s : f.segments) {
      const Vec3d a = bodies[1 + j].o;
      const Vec3d b = bodies[1 + j].R * Vec3d(0, 0, s.length) + a;
      kin.local_points.row(row) = a.transpose();
      fill_jacobian(row, a, j - 1 >= first_joint_of_finger[finger_of[j]] ? j - 1 : -1);
      kin.local_points.row(row + 1) = b.transpose();
      fill_jacobian(row + 1, b, j);
      row += 2;
      ++j;
    }
  }

  const Mat3d R = pose.root.matrix();
  const Vec3d& t = pose.root.translation;
  auto world = [&](int r) -> Vec3d { return R * kin.local_points.row(r).transpose() + t; };
  kin.surface_points.resize(ns, 3);
  for (int i = 0; i < ns; ++i) kin.surface_points.row(i) = world(i).transpose();
  kin.keypoints.resize(nk, 3);
  for (int k = 0; k < nk; ++k) kin.keypoints.row(k) = world(ns + k).transpose();
  j = 0;
  for (const auto& f : hand.fingers) {
    for (const auto& s : f.segments) {
      kin.capsules.push_back({world(kin.capsule_end_index(j, 0)), world(kin.capsule_end_index(j, 1)), s.radius});
      ++j;
    }
  }
  return kin;
}

std::vector<PosedShape> HandKinematics::collision_primitives() const {
  std::vector<PosedShape> out;
  out.push_back({palm, pose.root});
  for (const auto& c : capsules) {
    const Vec3d axis = c.b - c.a;
    const double len = axis.norm();
    const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(Vec3d::UnitZ(), axis / len);
    out.push_back({Capsule{c.radius, 0.5 * len}, Pose(q, 0.5 * (c.a + c.b))});
  }
  return out;
}

Eigen::Matrix<double, 3, Eigen::Dynamic> angle_jacobian(const HandKinematics& kin, int index) {
  return kin.pose.root.matrix() * kin.local_jacobians.at(index);
}

Eigen::Matrix<double, 3, 6> root_jacobian(const HandKinematics& kin, const Vec3d& world_point) {
  Eigen::Matrix<double, 3, 6> J;
  J.leftCols<3>() = Mat3d::Identity();
  J.rightCols<3>() = -skew<double>(world_point - kin.pose.root.translation);
  return J;
}

void HandGradient::add_tracked(const HandKinematics& kin, int index, const Vec3d& g) {
  const Mat3d R = kin.pose.root.matrix();
  const Vec3d p = kin.local_points.row(index).transpose();
  angles.noalias() += kin.local_jacobians[index].transpose() * (R.transpose() * g);
  root_rotation.noalias() += g * p.transpose();
  root_translation += g;
}

void HandGradient::add_palm_query(const HandKinematics& kin, const Vec3d& world_point, const Vec3d& g_local) {
  const Vec3d rel = world_point - kin.pose.root.translation;
  root_rotation.noalias() += rel * g_local.transpose();
  root_translation -= kin.pose.root.matrix() * g_local;
}

Eigen::Matrix<double, 6, 1> HandGradient::root_tangent(const HandKinematics& kin) const {
  const Mat3d R = kin.pose.root.matrix();
  Eigen::Matrix<double, 6, 1> out;
  out.head<3>() = root_translation;
  for (int k = 0; k < 3; ++k) {
    const Mat3d dR = skew<double>(Vec3d::Unit(k)) * R;
    out[3 + k] = (root_rotation.array() * dR.array()).sum();
  }
  return out;
}

}  // namespace gripsim
