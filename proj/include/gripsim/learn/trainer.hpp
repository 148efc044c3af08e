#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gripsim/learn/dataset.hpp"
#include "gripsim/learn/estimator.hpp"
#include "gripsim/learn/metrics.hpp"
#include "gripsim/learn/surrogate.hpp"

namespace gripsim {

struct TrainConfig {
  int generator_warmup = 5000;  // accuracy-only generator steps
  int surrogate_warmup = 5000;  // surrogate-only steps on the initial buffer
  int joint_steps = 20000;
  int generator_batch = 32;
  int surrogate_batch = 32;
  int label_batch = 8;  // generator outputs simulated per joint step; only these carry the stability term
  int ratio = 2;  // surrogate updates per generator update
  int initial_perturbations = 2;  // per train scene when the buffer is first filled
  std::uint64_t seed = 7;
  double generator_lr = 1e-3;
  double joint_generator_lr = 1e-4;
  double surrogate_lr = 5e-4;
  double clip = 1.0;
  std::vector<int> generator_hidden{128, 128};
  std::vector<int> surrogate_hidden{256, 256, 128};
  int frozen_prefix = 1;
  TargetMode mode = TargetMode::S;
  bool surrogate = true;  // run the surrogate phases at all
  bool resample_observations = true;  // redraw observation noise each time a scene is drawn
  ObservationNoise noise;
  HyperParams hp;
  PerturbParams perturb;
  SimParams sim;  // loss horizon
  int metric_steps = 10;  // metric horizon
  std::size_t buffer_capacity = 50000;
  int eval_every = 0;  // test-split metrics every n joint steps; 0 disables

  void validate() const;
  long total_steps() const { return static_cast<long>(generator_warmup) + surrogate_warmup + joint_steps; }
};

/// One report line. Columns that do not apply to a step are NaN.
struct TrainRow {
  long step = 0;
  double hand = 0;
  double corner = 0;
  double symmetric_corner = 0;
  double stability = 0;  // mean L^_s over labelled generator outputs
  double approximation = 0;  // mean surrogate training loss
  double ae = 0;  // mean |L^_s - L_s| on fresh labels, metres
  double masked = 0;  // masked fraction of labelled samples
};

struct EvalRow {
  long step = 0;
  MetricsRecord test;
};

struct TrainReport {
  std::vector<TrainRow> rows;
  std::vector<EvalRow> evals;
  long diverged_labels = 0;
  long skipped_updates = 0;  // optimizer steps rejected for non-finite gradients
};

struct EvalParams {
  SimParams sim;  // loss horizon, used for AE labels
  int metric_steps = 10;
  double success_threshold = 0.01;
};

/// Metrics of generator predictions over a split. With `net`, predictions
/// are also labelled at the loss horizon to report the surrogate's AE.
MetricsRecord evaluate(const std::vector<SceneSample>& split, const PoseGenerator& gen, const EvalParams& params,
                       const StabilityNet* net = nullptr);
MetricsRecord evaluate_predictions(const std::vector<SceneSample>& split, const std::vector<Prediction>& preds,
                                   const EvalParams& params, const StabilityNet* net = nullptr);

class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(long step)
      : std::runtime_error("training diverged at step " + std::to_string(step)), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// Alternating generator / surrogate optimisation. Steps are numbered
/// globally: generator warm-up, then surrogate warm-up (the buffer is filled
/// on its first step), then joint steps, each made of `ratio` surrogate
/// updates on freshly labelled generator outputs followed by one generator
/// update on accuracy plus masked stability terms.
class Trainer {
 public:
  Trainer(const Dataset& data, TrainConfig cfg);
  Trainer(const Dataset& data, TrainConfig cfg, PoseGenerator gen, StabilityNet net);

  const TrainConfig& config() const { return cfg_; }
  long step() const { return step_; }
  bool done() const { return step_ >= cfg_.total_steps(); }
  /// One global step. Throws TrainingDiverged on a non-finite loss.
  void advance();
  /// Advances until done or `until` steps, calling `checkpoint` every `every` steps.
  void run(long until = -1, long every = 0, const std::function<void(const Trainer&)>& checkpoint = {});

  const PoseGenerator& generator() const { return gen_; }
  const StabilityNet& surrogate() const { return net_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const TrainReport& report() const { return report_; }

  /// Full training state; resuming from it reproduces an uninterrupted run.
  void save(std::ostream& os) const;
  void load(std::istream& is);
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  void generator_warmup_step();
  void surrogate_warmup_step();
  void joint_step();
  void fill_buffer();
  void evaluate_if_due();
  std::vector<int> draw_batch(int n);
  Eigen::MatrixXd observations(const std::vector<int>& idx);
  bool surrogate_active() const { return cfg_.surrogate; }

  const Dataset& data_;
  TrainConfig cfg_;
  PoseGenerator gen_;
  StabilityNet net_;
  AdamState gen_opt_;
  AdamState net_opt_;
  ReplayBuffer buffer_;
  std::vector<std::optional<LabelledSample>> gt_labels_;
  Rng gen_rng_;
  Rng net_rng_;
  Rng aug_rng_;
  long step_ = 0;
  TrainReport report_;
};

/// Runs a fresh Trainer to completion and returns its report; `gen` and
/// `net` receive the final networks.
TrainReport train_joint(const Dataset& data, PoseGenerator& gen, StabilityNet& net, const TrainConfig& cfg);

void write_report_csv(std::ostream& os, const TrainReport& report);
void write_eval_csv(std::ostream& os, const TrainReport& report);

}  // namespace gripsim
