#include "gripsim/learn/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>

#include "gripsim/errors.hpp"

namespace gripsim {

double simulation_displacement(const Configuration& config, const SimParams& params) {
  return stability_loss(simulate(config, params));
}

double success_rate(const std::vector<double>& d, double threshold) {
  if (d.empty()) throw InputError("success_rate: no displacements");
  const auto n = std::count_if(d.begin(), d.end(), [&](double x) { return x < threshold; });
  return 100.0 * static_cast<double>(n) / static_cast<double>(d.size());
}

bool in_contact(const Configuration& config, double activation_distance) {
  return !detect_contacts(config, config.object_pose, activation_distance).empty();
}

double contact_percentage(const std::vector<Configuration>& configs, double activation_distance) {
  if (configs.empty()) throw InputError("contact_percentage: no configurations");
  const auto n = std::count_if(configs.begin(), configs.end(),
                               [&](const Configuration& c) { return in_contact(c, activation_distance); });
  return 100.0 * static_cast<double>(n) / static_cast<double>(configs.size());
}

std::optional<double> max_penetration(const Configuration& config, double activation_distance) {
  const auto contacts = detect_contacts(config, config.object_pose, activation_distance);
  if (contacts.empty()) return std::nullopt;
  double deepest = 0;
  for (const auto& c : contacts) deepest = std::max(deepest, c.depth);
  return deepest;
}

std::optional<double> penetration_depth(const std::vector<Configuration>& configs, double activation_distance) {
  double total = 0;
  int n = 0;
  for (const auto& c : configs) {
    if (const auto d = max_penetration(c, activation_distance)) {
      total += *d;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return total / n;
}

double mean_joint_error(const PointSet& pred, const PointSet& gt, int root) {
  if (pred.rows() != gt.rows() || pred.rows() == 0) throw InputError("mean_joint_error: joint counts differ");
  if (root < 0 || root >= pred.rows()) throw InputError("mean_joint_error: bad root index");
  const Eigen::RowVector3d shift = gt.row(root) - pred.row(root);
  return ((pred.rowwise() + shift) - gt).rowwise().norm().mean();
}

double corner_error(const Mat3d& pR, const Vec3d& pt, const Mat3d& R, const Vec3d& t,
                    const std::array<Vec3d, 8>& corners, const std::vector<Mat3d>* symmetries) {
  auto error = [&](const Mat3d& gR) {
    double s = 0;
    for (const auto& c : corners) s += ((pR * c + pt) - (gR * c + t)).norm();
    return s / 8.0;
  };
  if (!symmetries) return error(R);
  if (symmetries->empty()) throw InputError("corner_error: empty symmetry set");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& S : *symmetries) best = std::min(best, error(R * S));
  return best;
}

GradProbe grad_compare(const Configuration& config, const StabilityNet& net, const SimParams& params,
                       const std::vector<double>& epsilons) {
  GradProbe probe;
  const Eigen::VectorXd input = assemble_input(config);
  const Eigen::VectorXd g = surrogate_input_gradient(net, input);
  probe.surrogate = input_jacobian(config).leftCols<3>().transpose() * g;

  auto shifted = [&](int axis, double delta) {
    Pose p = config.object_pose;
    p.translation[axis] += delta;
    Configuration c = config;
    c.object_pose = p;
    return stability_loss(simulate(c, params));
  };
  for (double eps : epsilons) {
    if (!(eps > 0)) throw InputError("grad_compare: epsilons must be positive");
    GradProbeEntry e;
    e.epsilon = eps;
    try {
      for (int k = 0; k < 3; ++k) e.fd[k] = (shifted(k, eps) - shifted(k, -eps)) / (2 * eps);
    } catch (const SimulationDiverged&) {
      e.diverged = true;
      e.fd.setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    probe.entries.push_back(e);
  }
  return probe;
}

namespace {
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}
std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("nan"); }
}  // namespace

void write_metrics_csv_header(std::ostream& os) {
  os << "split,samples,mje_cm,mce_cm,smce_cm,cp_pct,pd_cm,sd_cm,sr_pct,ae_mm,diverged\n";
}

void write_metrics_csv_row(std::ostream& os, const std::string& split, const MetricsRecord& m) {
  os << split << ',' << m.samples << ',' << fmt(m.mje) << ',' << fmt(m.mce) << ',' << fmt(m.smce) << ','
     << fmt(m.cp) << ',' << fmt(m.pd) << ',' << fmt(m.sd) << ',' << fmt(m.sr) << ',' << fmt(m.ae) << ','
     << m.diverged << '\n';
}

void write_probe_csv(std::ostream& os, const std::vector<GradProbe>& probes) {
  os << "probe,epsilon,fd_norm,surrogate_norm\n";
  for (std::size_t p = 0; p < probes.size(); ++p)
    for (std::size_t i = 0; i < probes[p].entries.size(); ++i)
      os << p << ',' << fmt(probes[p].entries[i].epsilon) << ',' << fmt(probes[p].fd_norm(i)) << ','
         << fmt(probes[p].surrogate_norm()) << '\n';
}

}  // namespace gripsim
