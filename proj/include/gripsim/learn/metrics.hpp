#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gripsim/learn/estimator.hpp"
#include "gripsim/learn/surrogate.hpp"
#include "gripsim/sim/simulator.hpp"

namespace gripsim {

/// Physics and accuracy metrics over one split. Distances in cm, AE in mm,
/// rates in percent. PD is empty when no prediction touches the object; AE
/// is empty when no surrogate was evaluated.
struct MetricsRecord {
  double mje = 0;
  double mce = 0;
  double smce = 0;
  double cp = 0;
  std::optional<double> pd;
  double sd = 0;
  double sr = 0;
  std::optional<double> ae;
  int samples = 0;
  int diverged = 0;  // rollouts that blew up; excluded from SD, counted as failures in SR
};

/// Object centre displacement over the metric horizon (`params.steps`).
double simulation_displacement(const Configuration& config, const SimParams& params);

/// Percentage of displacements strictly below `threshold`.
double success_rate(const std::vector<double>& displacements, double threshold = 0.01);

/// True when at least one contact lies within the activation distance.
bool in_contact(const Configuration& config, double activation_distance);
/// Percentage of configurations in contact.
double contact_percentage(const std::vector<Configuration>& configs, double activation_distance);

/// Deepest penetration of one configuration (clamped at 0), or nothing when
/// the configuration has no contact.
std::optional<double> max_penetration(const Configuration& config, double activation_distance);
/// Mean of the per-configuration maxima over configurations in contact.
std::optional<double> penetration_depth(const std::vector<Configuration>& configs, double activation_distance);

/// Mean Euclidean keypoint distance after aligning the `root` keypoints.
double mean_joint_error(const PointSet& pred, const PointSet& gt, int root = 0);

/// Mean Euclidean corner distance; with `symmetries`, the minimum over R * S_k.
double corner_error(const Mat3d& pred_R, const Vec3d& pred_t, const Mat3d& R, const Vec3d& t,
                    const std::array<Vec3d, 8>& corners, const std::vector<Mat3d>* symmetries = nullptr);

struct GradProbeEntry {
  double epsilon = 0;
  Vec3d fd = Vec3d::Zero();
  bool diverged = false;
};

/// Finite-difference and surrogate gradients of the stability loss with
/// respect to the object translation.
struct GradProbe {
  std::vector<GradProbeEntry> entries;
  Vec3d surrogate = Vec3d::Zero();

  double fd_norm(std::size_t i) const { return entries[i].fd.norm(); }
  double surrogate_norm() const { return surrogate.norm(); }
};

GradProbe grad_compare(const Configuration& config, const StabilityNet& net, const SimParams& params,
                       const std::vector<double>& epsilons);

void write_metrics_csv_header(std::ostream& os);
void write_metrics_csv_row(std::ostream& os, const std::string& split, const MetricsRecord& m);
/// Columns probe, epsilon, fd_norm, surrogate_norm.
void write_probe_csv(std::ostream& os, const std::vector<GradProbe>& probes);

}  // namespace gripsim
