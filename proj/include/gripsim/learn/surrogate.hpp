#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gripsim/learn/features.hpp"
#include "gripsim/learn/mlp.hpp"
#include "gripsim/rng.hpp"
#include "gripsim/sim/simulator.hpp"

namespace gripsim {

/// What the head regresses: the scalar loss (S), the centre displacement (T),
/// or the displacement plus the relative rotation in 6D form (RT).
enum class TargetMode : std::uint32_t { S = 0, T = 1, RT = 2 };

int head_size(TargetMode mode);
std::string mode_name(TargetMode mode);
TargetMode parse_mode(const std::string& name);

struct StabilityNet {
  Mlp mlp;
  TargetMode mode = TargetMode::S;

  StabilityNet() = default;
  StabilityNet(int input_size, TargetMode mode, const std::vector<int>& hidden, std::uint64_t seed,
               Activation hidden_activation = Activation::Tanh);
  StabilityNet(Mlp mlp, TargetMode mode);

  int input_size() const { return mlp.input_size(); }
};

struct Replicated {
  double loss = 0;  // L^_s, metres
  Eigen::VectorXd head;
};

Replicated replicate_stability(const StabilityNet& net, const Eigen::VectorXd& input);

/// L^_s for a batch (one input per column).
Eigen::VectorXd replicate_batch(const StabilityNet& net, const Eigen::MatrixXd& inputs);

/// dL^_s / d(input).
Eigen::VectorXd surrogate_input_gradient(const StabilityNet& net, const Eigen::VectorXd& input);

/// L^_s per column and its input gradient per column.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> surrogate_batch_gradient(const StabilityNet& net,
                                                                     const Eigen::MatrixXd& inputs);

enum class Provenance : std::uint8_t { Generator = 0, Perturbed = 1, GroundTruth = 2 };
std::string provenance_name(Provenance p);

struct LabelledSample {
  Eigen::VectorXd input;
  double loss = 0;
  Vec3d displacement = Vec3d::Zero();  // final minus initial centre
  Mat3d relative_rotation = Mat3d::Identity();  // R_T R_0^T
  Provenance provenance = Provenance::Generator;

  /// Regression target for `mode`.
  Eigen::VectorXd target(TargetMode mode) const;
};

void write_labelled(std::ostream& os, const LabelledSample& s);
LabelledSample read_labelled(std::istream& is);

/// Simulates and records the loss and final state. Returns nullopt (and bumps
/// `diverged`) when the simulation diverges.
std::optional<LabelledSample> label(const Configuration& config, const SimParams& params, Provenance provenance,
                                    int* diverged = nullptr, double scale = kInputScale);

struct PerturbParams {
  double translation = 0.02;  // half-width of the uniform jitter, metres
  double max_angle = 10.0 * M_PI / 180.0;
  double joint = 0.05;  // radians
};

Configuration perturb(const Configuration& config, std::uint64_t seed, const PerturbParams& p = {});

/// |L^ - L| for scalars; Euclidean norm of the difference for head vectors.
double approximation_loss(double predicted, double actual);
double approximation_loss(const Eigen::VectorXd& head, const Eigen::VectorXd& target);

/// Stability bins [0, 0.01), [0.01, 0.05), [0.05, inf).
int stability_bin(double loss);
bool mask_check(double predicted, double actual);

/// Bounded FIFO of labelled samples.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 50000);

  void push(LabelledSample s);
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t inserted() const { return inserted_; }
  const LabelledSample& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t count(Provenance p) const { return by_tag_[static_cast<int>(p)].size(); }
  /// Index into the buffer of the k-th live sample with tag p.
  std::size_t index_of(Provenance p, std::size_t k) const;

  void write(std::ostream& os) const;
  static ReplayBuffer read(std::istream& is);

 private:
  std::size_t capacity_;
  std::uint64_t inserted_ = 0;
  std::deque<LabelledSample> samples_;
  std::array<std::deque<std::uint64_t>, 3> by_tag_;  // insertion serials
};

/// Batch indices with provenance ratio generator : perturbed : ground truth
/// = 2 : 1 : 1, redistributed over the tags that are present.
std::vector<std::size_t> sample_batch(const ReplayBuffer& buffer, int batch_size, Rng& rng);

struct SurrogateStepReport {
  bool ran = false;  // false for an empty buffer
  bool applied = false;  // optimizer accepted the gradient
  double loss = 0;  // mean approximation loss over the batch, before the update
};

SurrogateStepReport surrogate_train_step(StabilityNet& net, const ReplayBuffer& buffer, int batch_size,
                                         AdamState& optimizer, Rng& rng, double clip = 1.0);

/// Mean |L^ - L| over samples, in metres.
double approximation_error(const StabilityNet& net, const std::vector<LabelledSample>& samples);

void write_stability_net(std::ostream& os, const StabilityNet& net);
StabilityNet read_stability_net(std::istream& is);

}  // namespace gripsim
