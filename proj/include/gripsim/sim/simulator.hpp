#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "gripsim/geometry/pose.hpp"
#include "gripsim/sim/scene.hpp"

namespace gripsim {

struct SimParams {
  double dt = 0.02;
  int steps = 100;
  Vec3d gravity = Vec3d(0, -9.8, 0);
  double contact_stiffness = 1e4;  // N/m per contact
  double contact_damping = 50;  // N s/m per contact
  double friction = 0.8;
  double friction_velocity = 1e-3;  // m/s, Coulomb regularisation
  double adhesion_gain = 100;  // N
  double adhesion_max = 10;  // N
  double activation_distance = 1e-3;  // m
  int solver_iterations = 50;
  double solver_tolerance = 1e-10;

  /// Throws InputError when an invariant (dt > 0, T >= 1, ...) is violated.
  void validate() const;
  SimParams with_steps(int n) const {
    SimParams p = *this;
    p.steps = n;
    return p;
  }
};

struct BodyState {
  Pose pose;
  Vec3d linear_velocity = Vec3d::Zero();
  Vec3d angular_velocity = Vec3d::Zero();  // world frame
};

enum class ContactSource { HandVertex, ObjectVertex };

struct ContactPoint {
  Vec3d position = Vec3d::Zero();
  Vec3d normal = Vec3d::UnitY();  // from the hand into the object
  double depth = 0;  // penetration; negative means separated
  ContactSource source = ContactSource::HandVertex;
};

/// Normal magnitude and tangential vector of a contact force on the object.
struct ContactForce {
  double normal = 0;
  Vec3d tangential = Vec3d::Zero();
  Vec3d total(const Vec3d& n) const { return normal * n + tangential; }
};

struct Trajectory {
  std::vector<BodyState> states;  // T + 1 entries, states[0] is the input
  std::vector<int> contact_counts;  // per transition, T entries
  std::vector<double> contact_force_totals;  // per transition, summed |f| over contacts and adhesion
  double dt = 0;
};

/// Per-step record used by invariant checks.
struct StepDiagnostics {
  std::vector<ContactPoint> contacts;
  std::vector<ContactForce> forces;
  std::vector<Vec3d> adhesion;
  int solver_iterations = 0;
  int passes = 0;
  bool converged = true;
};

/// Bidirectional contact detection: hand samples against the object SDF and
/// object samples against the nearest hand primitive, within the activation
/// distance, with same-source duplicates closer than 1e-4 m removed.
std::vector<ContactPoint> detect_contacts(const Configuration& config, const Pose& object_pose,
                                          double activation_distance);

/// Penalty normal force with damping plus regularised Coulomb friction,
/// evaluated for the object body state.
ContactForce contact_force_components(const ContactPoint& cp, const BodyState& state, const SimParams& params);
Vec3d contact_force(const ContactPoint& cp, const BodyState& state, const SimParams& params);

/// Capped attraction along -normal. The total pull min(gain, max) is shared
/// by the `active_contacts` contacts currently within the activation distance.
Vec3d adhesion_force(const ContactPoint& cp, const SimParams& params, int active_contacts = 1);

/// One semi-implicit Euler step. Contact forces are evaluated at the end-of-
/// step velocity (and the matching predicted penetration), found by a damped
/// Newton solve; velocities are then updated from those forces.
BodyState step(const BodyState& state, const Configuration& config, const SimParams& params, std::size_t step_index = 0,
               StepDiagnostics* diagnostics = nullptr);

/// Velocity update of a free body under explicit external force and torque
/// (world frame, about the centre of mass).
BodyState integrate(const BodyState& state, const MassProperties& mass, const Vec3d& gravity, const Vec3d& force,
                    const Vec3d& torque, double dt);

/// T steps from rest. Deterministic; throws SimulationDiverged.
Trajectory simulate(const Configuration& q0, const SimParams& params);

/// Object centre displacement between the last and first state.
double stability_loss(const Trajectory& traj);

void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

}  // namespace gripsim
