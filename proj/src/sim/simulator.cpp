#include "gripsim/sim/simulator.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include <Eigen/Dense>

#include "gripsim/errors.hpp"
#include "gripsim/geometry/sdf.hpp"
#include "gripsim/sim/hand_collider.hpp"

namespace gripsim {

using Vec6d = Eigen::Matrix<double, 6, 1>;
using Mat6d = Eigen::Matrix<double, 6, 6>;

void SimParams::validate() const {
  if (!(dt > 0)) throw InputError("sim: dt must be positive");
  if (steps < 1) throw InputError("sim: steps must be >= 1");
  if (!gravity.allFinite()) throw InputError("sim: gravity must be finite");
  if (!(contact_stiffness > 0)) throw InputError("sim: contact stiffness must be positive");
  if (!(contact_damping >= 0)) throw InputError("sim: contact damping must be >= 0");
  if (!(friction >= 0)) throw InputError("sim: friction must be >= 0");
  if (!(friction_velocity > 0)) throw InputError("sim: friction velocity must be positive");
  if (!(adhesion_gain >= 0) || !(adhesion_max >= 0)) throw InputError("sim: adhesion gain and cap must be >= 0");
  if (!(activation_distance >= 0)) throw InputError("sim: activation distance must be >= 0");
  if (solver_iterations < 1) throw InputError("sim: solver iterations must be >= 1");
}

std::vector<ContactPoint> detect_contacts(const Configuration& config, const Pose& object_pose,
                                          double activation_distance) {
  std::vector<ContactPoint> contacts;
  const ObjectTemplate& obj = *config.object;
  const Mat3d R = object_pose.matrix();
  const Vec3d& c = object_pose.translation;
  const double reach = obj.bounding_radius + activation_distance;

  auto push_unique = [&](const ContactPoint& cp) {
    for (const auto& other : contacts) {
      if (other.source == cp.source && (other.position - cp.position).squaredNorm() < 1e-8) return;
    }
    contacts.push_back(cp);
  };

  const auto& hp = config.kin.surface_points;
  for (Eigen::Index i = 0; i < hp.rows(); ++i) {
    const Vec3d v = hp.row(i).transpose();
    if ((v - c).squaredNorm() > reach * reach) continue;
    const SdfResult r = signed_distance_local(obj.shape, R.transpose() * (v - c));
    if (r.distance <= activation_distance) {
      push_unique({v, -(R * r.normal), -r.distance, ContactSource::HandVertex});
    }
  }

  const HandCollider hand(config.kin);
  const std::vector<char> mask = hand.near_sphere(c, obj.bounding_radius, activation_distance);
  bool any = false;
  for (char m : mask) any = any || m;
  if (!any) return contacts;
  for (const auto& local : obj.surface) {
    const Vec3d p = R * local + c;
    const auto q = hand.query(p, &mask);
    if (q.distance <= activation_distance) push_unique({p, q.normal, -q.distance, ContactSource::ObjectVertex});
  }
  return contacts;
}

ContactForce contact_force_components(const ContactPoint& cp, const BodyState& state, const SimParams& params) {
  const Vec3d r = cp.position - state.pose.translation;
  const Vec3d u = state.linear_velocity + state.angular_velocity.cross(r);
  const double vn = u.dot(cp.normal);
  ContactForce f;
  f.normal = std::max(0.0, params.contact_stiffness * cp.depth - params.contact_damping * vn);
  const Vec3d vt = u - vn * cp.normal;
  const double slip = vt.norm();
  if (f.normal > 0 && slip > 0) {
    const double scale = params.friction * f.normal * std::min(1.0, slip / params.friction_velocity);
    f.tangential = -scale * vt / slip;
  }
  return f;
}

Vec3d contact_force(const ContactPoint& cp, const BodyState& state, const SimParams& params) {
  return contact_force_components(cp, state, params).total(cp.normal);
}

Vec3d adhesion_force(const ContactPoint& cp, const SimParams& params, int active_contacts) {
  if (cp.depth < -params.activation_distance || active_contacts < 1) return Vec3d::Zero();
  const double total = std::min(params.adhesion_gain, params.adhesion_max);
  return -cp.normal * (total / active_contacts);
}

BodyState integrate(const BodyState& s, const MassProperties& mass, const Vec3d& gravity, const Vec3d& force,
                    const Vec3d& torque, double dt) {
  BodyState out;
  const Mat3d R = s.pose.matrix();
  const Mat3d inertia_world = R * mass.inertia * R.transpose();
  const Vec3d& w = s.angular_velocity;
  out.linear_velocity = s.linear_velocity + dt * (gravity + force / mass.mass);
  out.angular_velocity = w + dt * inertia_world.ldlt().solve(torque - w.cross(inertia_world * w));
  out.pose.translation = s.pose.translation + dt * out.linear_velocity;
  out.pose.rotation = (quat_exp<double>(out.angular_velocity * dt) * s.pose.rotation).normalized();
  return out;
}

namespace {

struct ContactTerm {
  ContactPoint cp;
  Vec3d arm;  // contact position relative to the centre of mass
  Vec3d adhesion;
  double friction_load = 0;  // lagged normal force scaling the friction potential
};

using Jac = Eigen::Matrix<double, 3, 6>;

inline Vec3d point_velocity(const Vec6d& xi, const Vec3d& r) { return xi.head<3>() + xi.tail<3>().cross(r); }

Jac point_jacobian(const Vec3d& r) {
  Jac J;
  J.leftCols<3>() = Mat3d::Identity();
  J.rightCols<3>() = -skew<double>(r);
  return J;
}

// Implicit contact step as a convex minimisation over the end-of-step twist
// xi = (v, w):
//   E = 1/2 |xi - xi0|_M^2 - dt xi.F + dt sum_i [ max(0, k phi - c vn)^2 / (2c) + mu N_i D(vt) ]
// with c = d + k dt and D the Huber-like friction dissipation. Its gradient
// is the backward-Euler residual with the normal force at the predicted depth.
struct ContactEnergy {
  const std::vector<ContactTerm>& terms;
  std::vector<Jac> jac;
  Mat6d M;
  Vec6d xi0;
  Vec6d external;
  const SimParams& p;

  double c() const { return p.contact_damping + p.contact_stiffness * p.dt; }

  double value(const Vec6d& xi) const {
    const Vec6d d = xi - xi0;
    double e = 0.5 * d.dot(M * d) - p.dt * xi.dot(external);
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const Vec3d u = jac[i] * xi;
      const Vec3d& n = terms[i].cp.normal;
      const double vn = u.dot(n);
      const double fn = std::max(0.0, p.contact_stiffness * terms[i].cp.depth - c() * vn);
      double dis = 0;
      const double s = (u - vn * n).norm();
      if (s < p.friction_velocity) dis = s * s / (2.0 * p.friction_velocity);
      else dis = s - 0.5 * p.friction_velocity;
      e += p.dt * (fn * fn / (2.0 * c()) + p.friction * terms[i].friction_load * dis);
    }
    return e;
  }

  // Gradient, and the Hessian when `hess` is given.
  void derivatives(const Vec6d& xi, Vec6d& grad, Mat6d* hess) const {
    grad = M * (xi - xi0) - p.dt * external;
    if (hess) *hess = M;
    const double cc = c();
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const Jac& J = jac[i];
      const Vec3d u = J * xi;
      const Vec3d& n = terms[i].cp.normal;
      const double vn = u.dot(n);
      const double fn = std::max(0.0, p.contact_stiffness * terms[i].cp.depth - cc * vn);
      const Vec3d vt = u - vn * n;
      const double s = vt.norm();
      const double load = p.friction * terms[i].friction_load;
      Vec3d g = -fn * n;
      Mat3d H = Mat3d::Zero();
      if (hess && fn > 0) H += cc * n * n.transpose();
      if (load > 0) {
        if (s < p.friction_velocity) {
          g += load * vt / p.friction_velocity;
          if (hess) H += load / p.friction_velocity * (Mat3d::Identity() - n * n.transpose());
        } else {
          const Vec3d dir = vt / s;
          g += load * dir;
          if (hess) H += load / s * (Mat3d::Identity() - n * n.transpose() - dir * dir.transpose());
        }
      }
      grad.noalias() += p.dt * J.transpose() * g;
      if (hess) hess->noalias() += p.dt * J.transpose() * H * J;
    }
  }
};

}  // namespace

BodyState step(const BodyState& state, const Configuration& config, const SimParams& params, std::size_t step_index,
               StepDiagnostics* diag) {
  const MassProperties& mass = config.object->mass;
  const std::vector<ContactPoint> contacts = detect_contacts(config, state.pose, params.activation_distance);
  if (diag) *diag = StepDiagnostics{};

  auto check = [&](const BodyState& next) {
    if (!next.pose.translation.allFinite() || !next.linear_velocity.allFinite() ||
        !next.angular_velocity.allFinite() || !next.pose.rotation.coeffs().allFinite())
      throw SimulationDiverged(step_index, "non-finite state");
    return next;
  };

  if (contacts.empty()) return check(integrate(state, mass, params.gravity, Vec3d::Zero(), Vec3d::Zero(), params.dt));

  const int n_active = static_cast<int>(contacts.size());
  std::vector<ContactTerm> terms;
  terms.reserve(contacts.size());
  for (const auto& cp : contacts)
    terms.push_back({cp, cp.position - state.pose.translation, adhesion_force(cp, params, n_active)});

  const double dt = params.dt;
  const Mat3d R = state.pose.matrix();
  const Mat3d inertia_world = R * mass.inertia * R.transpose();

  ContactEnergy energy{terms, {}, Mat6d::Zero(), Vec6d::Zero(), Vec6d::Zero(), params};
  for (const auto& t : terms) energy.jac.push_back(point_jacobian(t.arm));
  energy.M.topLeftCorner<3, 3>() = mass.mass * Mat3d::Identity();
  energy.M.bottomRightCorner<3, 3>() = inertia_world;
  energy.xi0 << state.linear_velocity, state.angular_velocity;
  energy.external << mass.mass * params.gravity, -state.angular_velocity.cross(inertia_world * state.angular_velocity);
  for (const auto& t : terms) {
    energy.external.head<3>() += t.adhesion;
    energy.external.tail<3>() += t.arm.cross(t.adhesion);
  }
  const Eigen::LDLT<Mat6d> M_inv(energy.M);

  auto normal_force = [&](const ContactTerm& t, const Vec6d& xi) {
    const double vn = (point_velocity(xi, t.arm)).dot(t.cp.normal);
    return std::max(0.0, params.contact_stiffness * t.cp.depth - energy.c() * vn);
  };

  // Damped Newton on the convex energy; friction loads are lagged between passes.
  Vec6d xi = energy.xi0;
  int iterations = 0;
  bool converged = false;
  constexpr int kMaxPasses = 40;
  int passes = 0;
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    ++passes;
    if (pass > 0) {
      double change = 0;
      for (auto& t : terms) {
        const double fn = normal_force(t, xi);
        change = std::max(change, std::abs(fn - t.friction_load));
        t.friction_load = fn;
      }
      if (pass > 1 && change < 1e-7) break;
    }
    converged = false;
    Vec6d grad;
    Mat6d hess;
    for (int it = 0; it < params.solver_iterations; ++it) {
      energy.derivatives(xi, grad, &hess);
      if (M_inv.solve(grad).norm() < params.solver_tolerance) {
        converged = true;
        break;
      }
      ++iterations;
      const Vec6d delta = -hess.ldlt().solve(grad);
      if (!delta.allFinite() || !(grad.dot(delta) < 0)) break;
      // The energy is convex along the ray, so any step whose end slope is
      // still non-positive decreases it. Slopes avoid cancellation in E.
      double alpha = 1.0;
      Vec6d g_trial;
      for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
        energy.derivatives(xi + alpha * delta, g_trial, nullptr);
        if (g_trial.dot(delta) <= 0) break;
      }
      xi += alpha * delta;
    }
    if (!converged) {
      energy.derivatives(xi, grad, nullptr);
      converged = M_inv.solve(grad).norm() < params.solver_tolerance;
    }
  }

  // Apply the forces evaluated at the solved velocity explicitly.
  BodyState probe;
  probe.pose = state.pose;
  probe.linear_velocity = xi.head<3>();
  probe.angular_velocity = xi.tail<3>();
  Vec3d force = Vec3d::Zero(), torque = Vec3d::Zero();
  if (diag) {
    diag->contacts = contacts;
    diag->solver_iterations = iterations;
    diag->passes = passes;
    diag->converged = converged;
  }
  for (const auto& t : terms) {
    ContactPoint predicted = t.cp;
    predicted.depth = t.cp.depth - dt * point_velocity(xi, t.arm).dot(t.cp.normal);
    const ContactForce cf = contact_force_components(predicted, probe, params);
    const Vec3d f = cf.total(t.cp.normal) + t.adhesion;
    force += f;
    torque += t.arm.cross(f);
    if (diag) {
      diag->forces.push_back(cf);
      diag->adhesion.push_back(t.adhesion);
    }
  }
  return check(integrate(state, mass, params.gravity, force, torque, dt));
}

Trajectory simulate(const Configuration& q0, const SimParams& params) {
  params.validate();
  validate_configuration(q0);
  Trajectory traj;
  traj.dt = params.dt;
  traj.states.reserve(params.steps + 1);
  BodyState s;
  s.pose = q0.object_pose;
  traj.states.push_back(s);
  StepDiagnostics diag;
  for (int k = 0; k < params.steps; ++k) {
    s = step(s, q0, params, static_cast<std::size_t>(k), &diag);
    traj.states.push_back(s);
    traj.contact_counts.push_back(static_cast<int>(diag.contacts.size()));
    double total = 0;
    for (std::size_t i = 0; i < diag.forces.size(); ++i)
      total += (diag.forces[i].total(diag.contacts[i].normal) + diag.adhesion[i]).norm();
    traj.contact_force_totals.push_back(total);
  }
  return traj;
}

double stability_loss(const Trajectory& traj) {
  if (traj.states.empty()) throw InputError("stability_loss: empty trajectory");
  return (traj.states.back().pose.translation - traj.states.front().pose.translation).norm();
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "step,t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,wx,wy,wz,n_contacts,f_total\n";
  char buf[512];
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const auto& s = traj.states[k];
    const auto& q = s.pose.rotation;
    const int n = k == 0 ? 0 : traj.contact_counts[k - 1];
    const double f = k == 0 ? 0.0 : traj.contact_force_totals[k - 1];
    std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%d,%.12g\n",
                  k, k * traj.dt, s.pose.translation.x(), s.pose.translation.y(), s.pose.translation.z(), q.w(), q.x(),
                  q.y(), q.z(), s.linear_velocity.x(), s.linear_velocity.y(), s.linear_velocity.z(),
                  s.angular_velocity.x(), s.angular_velocity.y(), s.angular_velocity.z(), n, f);
    os << buf;
  }
}

}  // namespace gripsim
