#include "gripsim/learn/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "gripsim/errors.hpp"
#include "gripsim/io/binary.hpp"

namespace gripsim {

namespace {

constexpr std::uint32_t kTrainMagic = 0x4e525447;  // "GTRN"
constexpr std::uint32_t kTrainVersion = 1;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

TrainRow blank_row(long step) { return TrainRow{step, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN, kNaN}; }

void write_rng(std::ostream& os, const Rng& rng) {
  std::ostringstream ss;
  ss << rng;
  bin::write_string(os, ss.str());
}

void read_rng(std::istream& is, Rng& rng) {
  std::istringstream ss(bin::read_string(is));
  ss >> rng;
  if (!ss) throw InputError("checkpoint: corrupt random state");
}

void write_optional(std::ostream& os, const std::optional<double>& v) {
  bin::write<std::uint8_t>(os, v ? 1 : 0);
  bin::write(os, v.value_or(0.0));
}

std::optional<double> read_optional(std::istream& is) {
  const bool has = bin::read<std::uint8_t>(is) != 0;
  const double v = bin::read<double>(is);
  return has ? std::optional<double>(v) : std::nullopt;
}

void write_record(std::ostream& os, const MetricsRecord& m) {
  for (double v : {m.mje, m.mce, m.smce, m.cp, m.sd, m.sr}) bin::write(os, v);
  write_optional(os, m.pd);
  write_optional(os, m.ae);
  bin::write<std::int32_t>(os, m.samples);
  bin::write<std::int32_t>(os, m.diverged);
}

MetricsRecord read_record(std::istream& is) {
  MetricsRecord m;
  for (double* v : {&m.mje, &m.mce, &m.smce, &m.cp, &m.sd, &m.sr}) *v = bin::read<double>(is);
  m.pd = read_optional(is);
  m.ae = read_optional(is);
  m.samples = bin::read<std::int32_t>(is);
  m.diverged = bin::read<std::int32_t>(is);
  return m;
}

// Accuracy gradient of one prediction with respect to the generator output
// (normalised encoding).
Eigen::VectorXd output_gradient(const SceneSample& s, const Prediction& p, const HyperParams& hp) {
  const Eigen::VectorXd d = encoding_backward(p, accuracy_backward(s, p, hp)) + joint_limit_backward(p);
  return d.cwiseProduct(encoding_units(static_cast<int>(p.kin().pose.angles.size())));
}

}  // namespace

void TrainConfig::validate() const {
  if (generator_warmup < 0 || surrogate_warmup < 0 || joint_steps < 0)
    throw InputError("train config: step counts must be >= 0");
  if (generator_batch < 1 || surrogate_batch < 1) throw InputError("train config: batch sizes must be >= 1");
  if (label_batch < 0) throw InputError("train config: label_batch must be >= 0");
  if (ratio < 1) throw InputError("train config: ratio must be >= 1");
  if (initial_perturbations < 0) throw InputError("train config: initial_perturbations must be >= 0");
  if (!(generator_lr >= 0) || !(joint_generator_lr >= 0) || !(surrogate_lr >= 0))
    throw InputError("train config: learning rates must be >= 0");
  if (!(clip >= 0)) throw InputError("train config: clip must be >= 0");
  if (frozen_prefix < 0) throw InputError("train config: frozen_prefix must be >= 0");
  if (metric_steps < 1) throw InputError("train config: metric_steps must be >= 1");
  if (buffer_capacity == 0) throw InputError("train config: buffer capacity must be positive");
  if (eval_every < 0) throw InputError("train config: eval_every must be >= 0");
  hp.validate();
  sim.validate();
}

MetricsRecord evaluate_predictions(const std::vector<SceneSample>& split, const std::vector<Prediction>& preds,
                                   const EvalParams& params, const StabilityNet* net) {
  if (split.size() != preds.size()) throw InputError("evaluate: prediction count does not match the split");
  MetricsRecord m;
  m.samples = static_cast<int>(split.size());
  if (split.empty()) return m;
  const SimParams metric = params.sim.with_steps(params.metric_steps);
  const double delta = params.sim.activation_distance;
  std::vector<double> sds;
  double sd_total = 0, pd_total = 0, ae_total = 0;
  int successes = 0, contacts = 0, ae_count = 0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const SceneSample& s = split[i];
    const Prediction& p = preds[i];
    m.mje += mean_joint_error(p.kin().keypoints, s.joints);
    const Mat3d pR = p.object_pose().matrix();
    const Mat3d R = s.object_pose.matrix();
    m.mce += corner_error(pR, p.object_pose().translation, R, s.object_pose.translation, s.object->corners);
    m.smce += corner_error(pR, p.object_pose().translation, R, s.object_pose.translation, s.object->corners,
                           &s.object->symmetries);
    if (const auto d = max_penetration(p.config, delta)) {
      ++contacts;
      pd_total += *d;
    }
    try {
      const double sd = simulation_displacement(p.config, metric);
      sd_total += sd;
      sds.push_back(sd);
      if (sd < params.success_threshold) ++successes;
    } catch (const SimulationDiverged&) {
      ++m.diverged;
    }
    if (net) {
      if (const auto l = label(p.config, params.sim, Provenance::Generator)) {
        ae_total += std::abs(replicate_stability(*net, l->input).loss - l->loss);
        ++ae_count;
      }
    }
  }
  const double n = static_cast<double>(split.size());
  m.mje = 100.0 * m.mje / n;
  m.mce = 100.0 * m.mce / n;
  m.smce = 100.0 * m.smce / n;
  m.cp = 100.0 * contacts / n;
  if (contacts > 0) m.pd = 100.0 * pd_total / contacts;
  m.sd = sds.empty() ? kNaN : 100.0 * sd_total / static_cast<double>(sds.size());
  m.sr = 100.0 * successes / n;
  if (ae_count > 0) m.ae = 1000.0 * ae_total / ae_count;
  return m;
}

MetricsRecord evaluate(const std::vector<SceneSample>& split, const PoseGenerator& gen, const EvalParams& params,
                       const StabilityNet* net) {
  std::vector<Prediction> preds;
  preds.reserve(split.size());
  for (const auto& s : split) preds.push_back(predict(gen, s));
  return evaluate_predictions(split, preds, params, net);
}

Trainer::Trainer(const Dataset& data, TrainConfig cfg)
    : Trainer(data, cfg,
              PoseGenerator(data.train.empty() ? 0 : static_cast<int>(data.train.front().observation.size()),
                            data.hand ? data.hand->joint_count() : 0, cfg.generator_hidden, derive_rng(cfg.seed, 1)()),
              StabilityNet(data.train.empty() ? 0 : input_layout(data.train.front().configuration()).size(), cfg.mode,
                           cfg.surrogate_hidden, derive_rng(cfg.seed, 2)())) {}

Trainer::Trainer(const Dataset& data, TrainConfig cfg, PoseGenerator gen, StabilityNet net)
    : data_(data),
      cfg_(std::move(cfg)),
      gen_(std::move(gen)),
      net_(std::move(net)),
      buffer_(cfg_.buffer_capacity),
      gen_rng_(derive_rng(cfg_.seed, 3)),
      net_rng_(derive_rng(cfg_.seed, 4)),
      aug_rng_(derive_rng(cfg_.seed, 5)) {
  cfg_.validate();
  if (data_.train.empty()) throw InputError("trainer: empty training split");
  if (net_.mode != cfg_.mode) throw InputError("trainer: surrogate mode does not match the config");
  gen_.frozen_prefix = cfg_.frozen_prefix;
  gen_opt_ = AdamState(gen_.mlp, cfg_.generator_lr);
  net_opt_ = AdamState(net_.mlp, cfg_.surrogate_lr);
  gt_labels_.resize(data_.train.size());
}

std::vector<int> Trainer::draw_batch(int n) {
  std::vector<int> idx(n);
  for (auto& i : idx) i = static_cast<int>(uniform_index(gen_rng_, data_.train.size()));
  return idx;
}

Eigen::MatrixXd Trainer::observations(const std::vector<int>& idx) {
  Eigen::MatrixXd obs(gen_.mlp.input_size(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const SceneSample& s = data_.train[idx[i]];
    obs.col(static_cast<Eigen::Index>(i)) =
        cfg_.resample_observations ? make_observation(s.hand, s.object_pose, cfg_.noise, gen_rng_) : s.observation;
  }
  return obs;
}

void Trainer::advance() {
  if (done()) return;
  if (step_ < cfg_.generator_warmup) {
    generator_warmup_step();
  } else {
    if (surrogate_active() && buffer_.inserted() == 0) fill_buffer();
    if (step_ < static_cast<long>(cfg_.generator_warmup) + cfg_.surrogate_warmup)
      surrogate_warmup_step();
    else
      joint_step();
  }
  ++step_;
  evaluate_if_due();
}

void Trainer::run(long until, long every, const std::function<void(const Trainer&)>& checkpoint) {
  const long end = until < 0 ? cfg_.total_steps() : std::min(until, cfg_.total_steps());
  while (step_ < end) {
    advance();
    if (checkpoint && every > 0 && step_ % every == 0) checkpoint(*this);
  }
}

void Trainer::generator_warmup_step() {
  const auto idx = draw_batch(cfg_.generator_batch);
  const int b = static_cast<int>(idx.size());
  const Eigen::MatrixXd obs = observations(idx);
  Tape tape;
  const Eigen::MatrixXd out = mlp_forward(gen_.mlp, obs, &tape);
  Eigen::MatrixXd grad(out.rows(), b);
  TrainRow row = blank_row(step_);
  row.hand = row.corner = row.symmetric_corner = 0;
  double total = 0;
  for (int i = 0; i < b; ++i) {
    const SceneSample& s = data_.train[idx[i]];
    const Prediction p = decode_prediction(s.hand_model, s.object, denormalise_encoding(out.col(i)));
    const LossComponents c = accuracy_losses(s, p);
    row.hand += c.hand / b;
    row.corner += c.corner / b;
    row.symmetric_corner += c.symmetric_corner / b;
    total += total_loss(c, true, s.stable, cfg_.hp) / b;
    grad.col(i) = output_gradient(s, p, cfg_.hp) / b;
  }
  if (!std::isfinite(total)) throw TrainingDiverged(step_);
  gen_opt_.learning_rate = cfg_.generator_lr;
  const auto back = mlp_backward(gen_.mlp, tape, grad);
  if (!adam_step(gen_opt_, gen_.mlp, back.params, cfg_.clip).applied) ++report_.skipped_updates;
  report_.rows.push_back(row);
}

void Trainer::fill_buffer() {
  const auto n = data_.train.size();
  for (std::size_t i = 0; i < n; ++i) {
    const SceneSample& s = data_.train[i];
    const Configuration gt = s.configuration();
    gt_labels_[i] = label(gt, cfg_.sim, Provenance::GroundTruth, nullptr);
    if (!gt_labels_[i]) ++report_.diverged_labels;
    const Configuration pred = predict(gen_, s).config;
    int diverged = 0;
    if (auto l = label(pred, cfg_.sim, Provenance::Generator, &diverged)) buffer_.push(std::move(*l));
    for (int k = 0; k < cfg_.initial_perturbations; ++k) {
      const Configuration base = (k % 2 == 0) ? pred : gt;
      if (auto l = label(perturb(base, aug_rng_(), cfg_.perturb), cfg_.sim, Provenance::Perturbed, &diverged))
        buffer_.push(std::move(*l));
    }
    if (gt_labels_[i]) buffer_.push(*gt_labels_[i]);
    report_.diverged_labels += diverged;
  }
}

void Trainer::surrogate_warmup_step() {
  TrainRow row = blank_row(step_);
  if (surrogate_active()) {
    const auto r = surrogate_train_step(net_, buffer_, cfg_.surrogate_batch, net_opt_, net_rng_, cfg_.clip);
    if (r.ran) row.approximation = r.loss;
    if (r.ran && !r.applied) ++report_.skipped_updates;
  }
  report_.rows.push_back(row);
}

void Trainer::joint_step() {
  const auto idx = draw_batch(cfg_.generator_batch);
  const int b = static_cast<int>(idx.size());
  const Eigen::MatrixXd obs = observations(idx);
  Tape tape;
  const Eigen::MatrixXd out = mlp_forward(gen_.mlp, obs, &tape);
  std::vector<Prediction> preds;
  preds.reserve(b);
  for (int i = 0; i < b; ++i) {
    const SceneSample& s = data_.train[idx[i]];
    try {
      preds.push_back(decode_prediction(s.hand_model, s.object, denormalise_encoding(out.col(i))));
    } catch (const InputError&) {
      throw TrainingDiverged(step_);
    }
  }

  TrainRow row = blank_row(step_);
  const bool stability = surrogate_active() && cfg_.hp.stability > 0;
  const int labelled = surrogate_active() ? std::min(cfg_.label_batch, b) : 0;

  // (a) label the current outputs, then update the surrogate with the generator fixed.
  std::vector<std::optional<LabelledSample>> fresh(labelled);
  if (surrogate_active()) {
    int diverged = 0;
    for (int i = 0; i < labelled; ++i) fresh[i] = label(preds[i].config, cfg_.sim, Provenance::Generator, &diverged);
    std::vector<LabelledSample> extra;
    for (int j = 0; j < labelled / 2; ++j) {
      const Configuration base = (j % 2 == 0) ? preds[j].config : data_.train[idx[j]].configuration();
      if (auto l = label(perturb(base, aug_rng_(), cfg_.perturb), cfg_.sim, Provenance::Perturbed, &diverged))
        extra.push_back(std::move(*l));
    }
    report_.diverged_labels += diverged;

    double ae = 0;
    int n_ae = 0;
    for (const auto& f : fresh) {
      if (!f) continue;
      ae += std::abs(replicate_stability(net_, f->input).loss - f->loss);
      ++n_ae;
    }
    if (n_ae > 0) row.ae = ae / n_ae;

    for (const auto& f : fresh)
      if (f) buffer_.push(*f);
    for (auto& e : extra) buffer_.push(std::move(e));
    for (int j = 0; j < labelled / 2; ++j)
      if (const auto& g = gt_labels_[idx[j]]) buffer_.push(*g);

    double la = 0;
    int n_la = 0;
    for (int r = 0; r < cfg_.ratio; ++r) {
      const auto rep = surrogate_train_step(net_, buffer_, cfg_.surrogate_batch, net_opt_, net_rng_, cfg_.clip);
      if (!rep.ran) continue;
      if (!rep.applied) ++report_.skipped_updates;
      la += rep.loss;
      ++n_la;
    }
    if (n_la > 0) row.approximation = la / n_la;
  }

  // (b) generator update with the surrogate fixed.
  Eigen::MatrixXd grad(out.rows(), b);
  row.hand = row.corner = row.symmetric_corner = 0;
  double total = 0;
  for (int i = 0; i < b; ++i) {
    const SceneSample& s = data_.train[idx[i]];
    const LossComponents c = accuracy_losses(s, preds[i]);
    row.hand += c.hand / b;
    row.corner += c.corner / b;
    row.symmetric_corner += c.symmetric_corner / b;
    total += total_loss(c, true, s.stable, cfg_.hp) / b;
    grad.col(i) = output_gradient(s, preds[i], cfg_.hp) / b;
  }
  if (labelled > 0) {
    double shat = 0;
    int masked = 0;
    for (int i = 0; i < labelled; ++i) {
      const SceneSample& s = data_.train[idx[i]];
      const FeatureTape ft = record_features(preds[i].config);
      const Eigen::VectorXd input = assemble_input(preds[i].config, ft.features);
      const Replicated rep = replicate_stability(net_, input);
      shat += rep.loss / labelled;
      const bool keep = fresh[i] && s.stable && mask_check(rep.loss, fresh[i]->loss);
      if (!keep) {
        ++masked;
        continue;
      }
      if (!stability) continue;
      total += cfg_.hp.stability * rep.loss / labelled;
      const Eigen::VectorXd g_in = surrogate_input_gradient(net_, input);
      const Eigen::VectorXd d = encoding_backward(preds[i], input_vjp(preds[i].config, ft, g_in));
      grad.col(i) += (cfg_.hp.stability / labelled) *
                     d.cwiseProduct(encoding_units(static_cast<int>(preds[i].kin().pose.angles.size())));
    }
    row.stability = shat;
    row.masked = static_cast<double>(masked) / labelled;
  }
  if (!std::isfinite(total)) throw TrainingDiverged(step_);
  gen_opt_.learning_rate = cfg_.joint_generator_lr;
  const auto back = mlp_backward(gen_.mlp, tape, grad);
  const std::vector<bool> frozen = gen_.frozen_layers(stability);
  if (!adam_step(gen_opt_, gen_.mlp, back.params, cfg_.clip, &frozen).applied) ++report_.skipped_updates;
  report_.rows.push_back(row);
}

void Trainer::evaluate_if_due() {
  const long joint_start = static_cast<long>(cfg_.generator_warmup) + cfg_.surrogate_warmup;
  if (cfg_.eval_every <= 0 || step_ <= joint_start || data_.test.empty()) return;
  if ((step_ - joint_start) % cfg_.eval_every != 0) return;
  EvalParams p;
  p.sim = cfg_.sim;
  p.metric_steps = cfg_.metric_steps;
  p.success_threshold = cfg_.hp.success_threshold;
  report_.evals.push_back({step_, evaluate(data_.test, gen_, p)});
}

void Trainer::save(std::ostream& os) const {
  bin::write(os, kTrainMagic);
  bin::write(os, kTrainVersion);
  bin::write<std::uint64_t>(os, cfg_.seed);
  bin::write<std::int64_t>(os, cfg_.total_steps());
  bin::write<std::int64_t>(os, step_);
  write_mlp(os, gen_.mlp);
  write_adam(os, gen_opt_);
  write_stability_net(os, net_);
  write_adam(os, net_opt_);
  buffer_.write(os);
  bin::write<std::uint64_t>(os, gt_labels_.size());
  for (const auto& g : gt_labels_) {
    bin::write<std::uint8_t>(os, g ? 1 : 0);
    if (g) write_labelled(os, *g);
  }
  write_rng(os, gen_rng_);
  write_rng(os, net_rng_);
  write_rng(os, aug_rng_);
  bin::write<std::int64_t>(os, report_.diverged_labels);
  bin::write<std::int64_t>(os, report_.skipped_updates);
  bin::write<std::uint64_t>(os, report_.rows.size());
  for (const auto& r : report_.rows) {
    bin::write<std::int64_t>(os, r.step);
    for (double v : {r.hand, r.corner, r.symmetric_corner, r.stability, r.approximation, r.ae, r.masked})
      bin::write(os, v);
  }
  bin::write<std::uint64_t>(os, report_.evals.size());
  for (const auto& e : report_.evals) {
    bin::write<std::int64_t>(os, e.step);
    write_record(os, e.test);
  }
}

void Trainer::load(std::istream& is) {
  bin::expect_magic(is, kTrainMagic, kTrainVersion, "training checkpoint");
  if (bin::read<std::uint64_t>(is) != cfg_.seed) throw InputError("checkpoint: seed does not match the config");
  if (bin::read<std::int64_t>(is) != cfg_.total_steps())
    throw InputError("checkpoint: schedule does not match the config");
  const long step = bin::read<std::int64_t>(is);
  Mlp gen = read_mlp(is);
  if (gen.input_size() != gen_.mlp.input_size() || gen.output_size() != gen_.mlp.output_size())
    throw InputError("checkpoint: generator dimensions do not match the dataset");
  AdamState gen_opt = read_adam(is, gen);
  StabilityNet net = read_stability_net(is);
  if (net.mode != cfg_.mode || net.input_size() != net_.input_size())
    throw InputError("checkpoint: surrogate does not match the config");
  AdamState net_opt = read_adam(is, net.mlp);
  ReplayBuffer buffer = ReplayBuffer::read(is);
  const auto n_gt = bin::read<std::uint64_t>(is);
  if (n_gt != data_.train.size()) throw InputError("checkpoint: dataset size does not match");
  std::vector<std::optional<LabelledSample>> gt(n_gt);
  for (auto& g : gt)
    if (bin::read<std::uint8_t>(is)) g = read_labelled(is);
  Rng gen_rng, net_rng, aug_rng;
  read_rng(is, gen_rng);
  read_rng(is, net_rng);
  read_rng(is, aug_rng);
  TrainReport report;
  report.diverged_labels = bin::read<std::int64_t>(is);
  report.skipped_updates = bin::read<std::int64_t>(is);
  const auto n_rows = bin::read<std::uint64_t>(is);
  if (n_rows > static_cast<std::uint64_t>(cfg_.total_steps())) throw InputError("checkpoint: corrupt report");
  report.rows.resize(n_rows);
  for (auto& r : report.rows) {
    r.step = bin::read<std::int64_t>(is);
    for (double* v : {&r.hand, &r.corner, &r.symmetric_corner, &r.stability, &r.approximation, &r.ae, &r.masked})
      *v = bin::read<double>(is);
  }
  const auto n_evals = bin::read<std::uint64_t>(is);
  if (n_evals > static_cast<std::uint64_t>(cfg_.total_steps())) throw InputError("checkpoint: corrupt report");
  report.evals.resize(n_evals);
  for (auto& e : report.evals) {
    e.step = bin::read<std::int64_t>(is);
    e.test = read_record(is);
  }
  gen_.mlp = std::move(gen);
  gen_opt_ = std::move(gen_opt);
  net_ = std::move(net);
  net_opt_ = std::move(net_opt);
  buffer_ = std::move(buffer);
  gt_labels_ = std::move(gt);
  gen_rng_ = gen_rng;
  net_rng_ = net_rng;
  aug_rng_ = aug_rng;
  report_ = std::move(report);
  step_ = step;
}

void Trainer::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path);
  save(os);
  if (!os) throw InputError("failed writing " + path);
}

void Trainer::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read " + path);
  load(is);
}

TrainReport train_joint(const Dataset& data, PoseGenerator& gen, StabilityNet& net, const TrainConfig& cfg) {
  Trainer t(data, cfg, gen, net);
  t.run();
  gen = t.generator();
  net = t.surrogate();
  return t.report();
}

namespace {
std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}
}  // namespace

void write_report_csv(std::ostream& os, const TrainReport& report) {
  os << "step,L_h,L_o1,L_o2,Ls_hat,L_a,AE,masked_frac\n";
  for (const auto& r : report.rows)
    os << r.step << ',' << num(r.hand) << ',' << num(r.corner) << ',' << num(r.symmetric_corner) << ','
       << num(r.stability) << ',' << num(r.approximation) << ',' << num(r.ae) << ',' << num(r.masked) << '\n';
}

void write_eval_csv(std::ostream& os, const TrainReport& report) {
  os << "step,";
  write_metrics_csv_header(os);
  for (const auto& e : report.evals) {
    os << e.step << ',';
    write_metrics_csv_row(os, "test", e.test);
  }
}

}  // namespace gripsim
