#include "gripsim/learn/surrogate.hpp"

#include <cmath>
#include <sstream>

#include "gripsim/errors.hpp"
#include "gripsim/geometry/rotation6d.hpp"
#include "gripsim/io/binary.hpp"

namespace gripsim {

namespace {
constexpr std::uint32_t kNetMagic = 0x4e545347;  // "GSTN"
constexpr std::uint32_t kNetVersion = 1;
constexpr std::uint32_t kBufferMagic = 0x46425247;  // "GRBF"
constexpr std::uint32_t kBufferVersion = 1;

// dL^/d(head) for a single head column.
Eigen::VectorXd loss_head_gradient(TargetMode mode, const Eigen::VectorXd& head) {
  if (mode == TargetMode::S) return Eigen::VectorXd::Ones(1);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(head.size());
  const double n = head.head<3>().norm();
  if (n > 0) g.head<3>() = head.head<3>() / n;
  return g;
}

double loss_from_head(TargetMode mode, const Eigen::VectorXd& head) {
  return mode == TargetMode::S ? head[0] : head.head<3>().norm();
}
}  // namespace

int head_size(TargetMode mode) {
  switch (mode) {
    case TargetMode::S: return 1;
    case TargetMode::T: return 3;
    case TargetMode::RT: return 9;
  }
  return 1;
}

std::string mode_name(TargetMode mode) {
  switch (mode) {
    case TargetMode::S: return "S";
    case TargetMode::T: return "T";
    case TargetMode::RT: return "RT";
  }
  return "?";
}

TargetMode parse_mode(const std::string& name) {
  if (name == "S" || name == "s") return TargetMode::S;
  if (name == "T" || name == "t") return TargetMode::T;
  if (name == "RT" || name == "rt") return TargetMode::RT;
  throw InputError("unknown target mode '" + name + "'");
}

StabilityNet::StabilityNet(int input_size, TargetMode m, const std::vector<int>& hidden, std::uint64_t seed,
                           Activation hidden_activation)
    : mode(m) {
  std::vector<int> sizes{input_size};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(head_size(m));
  mlp = Mlp(sizes, hidden_activation, m == TargetMode::S ? Activation::Softplus : Activation::Identity, seed);
}

StabilityNet::StabilityNet(Mlp net, TargetMode m) : mlp(std::move(net)), mode(m) {
  if (mlp.output_size() != head_size(m)) throw InputError("stability net: head size does not match the mode");
}

Replicated replicate_stability(const StabilityNet& net, const Eigen::VectorXd& input) {
  if (input.size() != net.input_size()) throw InputError("replicate_stability: input dimension mismatch");
  Replicated r;
  r.head = mlp_forward(net.mlp, input);
  r.loss = loss_from_head(net.mode, r.head);
  return r;
}

Eigen::VectorXd replicate_batch(const StabilityNet& net, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != net.input_size()) throw InputError("replicate_batch: input dimension mismatch");
  const Eigen::MatrixXd heads = mlp_forward(net.mlp, inputs);
  Eigen::VectorXd out(heads.cols());
  for (Eigen::Index c = 0; c < heads.cols(); ++c) out[c] = loss_from_head(net.mode, heads.col(c));
  return out;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> surrogate_batch_gradient(const StabilityNet& net,
                                                                     const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != net.input_size()) throw InputError("surrogate gradient: input dimension mismatch");
  Tape tape;
  const Eigen::MatrixXd heads = mlp_forward(net.mlp, inputs, &tape);
  Eigen::VectorXd losses(heads.cols());
  Eigen::MatrixXd dhead(heads.rows(), heads.cols());
  for (Eigen::Index c = 0; c < heads.cols(); ++c) {
    losses[c] = loss_from_head(net.mode, heads.col(c));
    dhead.col(c) = loss_head_gradient(net.mode, heads.col(c));
  }
  return {losses, mlp_backward(net.mlp, tape, dhead).input};
}

Eigen::VectorXd surrogate_input_gradient(const StabilityNet& net, const Eigen::VectorXd& input) {
  return surrogate_batch_gradient(net, Eigen::MatrixXd(input)).second.col(0);
}

std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Generator: return "generator";
    case Provenance::Perturbed: return "perturbed";
    case Provenance::GroundTruth: return "ground_truth";
  }
  return "?";
}

Eigen::VectorXd LabelledSample::target(TargetMode mode) const {
  Eigen::VectorXd t(head_size(mode));
  if (mode == TargetMode::S) {
    t[0] = loss;
  } else {
    t.head<3>() = displacement;
    if (mode == TargetMode::RT) t.tail<6>() = rotation_to_6d<double>(relative_rotation);
  }
  return t;
}

std::optional<LabelledSample> label(const Configuration& config, const SimParams& params, Provenance provenance,
                                    int* diverged, double scale) {
  LabelledSample s;
  s.provenance = provenance;
  try {
    const Trajectory traj = simulate(config, params);
    const auto& first = traj.states.front().pose;
    const auto& last = traj.states.back().pose;
    s.displacement = last.translation - first.translation;
    s.loss = stability_loss(traj);
    s.relative_rotation = last.matrix() * first.matrix().transpose();
  } catch (const SimulationDiverged&) {
    if (diverged) ++*diverged;
    return std::nullopt;
  }
  s.input = assemble_input(config, scale);
  return s;
}

Configuration perturb(const Configuration& config, std::uint64_t seed, const PerturbParams& p) {
  Rng rng(seed);
  Pose object = config.object_pose;
  Vec3d jitter;
  for (int k = 0; k < 3; ++k) jitter[k] = uniform(rng, -p.translation, p.translation);
  const Vec3d axis = uniform_unit_vector(rng);
  const double angle = uniform(rng, 0.0, p.max_angle);
  HandPose hand = config.hand_pose();
  Eigen::VectorXd dq(hand.angles.size());
  for (Eigen::Index k = 0; k < dq.size(); ++k) dq[k] = uniform(rng, -p.joint, p.joint);
  if (p.translation == 0 && p.max_angle == 0 && p.joint == 0) return config;
  object.translation += jitter;
  object.rotation = (quat_exp<double>(axis * angle) * object.rotation).normalized();
  hand.angles += dq;
  return make_configuration(config.hand, hand, config.object, object);
}

double approximation_loss(double predicted, double actual) { return std::abs(predicted - actual); }

double approximation_loss(const Eigen::VectorXd& head, const Eigen::VectorXd& target) {
  if (head.size() != target.size()) throw InputError("approximation_loss: size mismatch");
  return (head - target).norm();
}

int stability_bin(double loss) {
  if (loss < 0.01) return 0;
  if (loss < 0.05) return 1;
  return 2;
}

bool mask_check(double predicted, double actual) { return stability_bin(predicted) == stability_bin(actual); }

void write_labelled(std::ostream& os, const LabelledSample& s) {
  bin::write<std::uint8_t>(os, static_cast<std::uint8_t>(s.provenance));
  bin::write(os, s.loss);
  bin::write_doubles(os, s.displacement.data(), 3);
  bin::write_doubles(os, s.relative_rotation.data(), 9);
  bin::write_vector(os, s.input);
}

LabelledSample read_labelled(std::istream& is) {
  LabelledSample s;
  const auto tag = bin::read<std::uint8_t>(is);
  if (tag > 2) throw InputError("labelled sample: bad provenance tag");
  s.provenance = static_cast<Provenance>(tag);
  s.loss = bin::read<double>(is);
  bin::read_doubles(is, s.displacement.data(), 3);
  bin::read_doubles(is, s.relative_rotation.data(), 9);
  s.input = bin::read_vector(is);
  return s;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw InputError("replay buffer: capacity must be positive");
}

void ReplayBuffer::push(LabelledSample s) {
  if (samples_.size() == capacity_) {
    by_tag_[static_cast<int>(samples_.front().provenance)].pop_front();
    samples_.pop_front();
  }
  by_tag_[static_cast<int>(s.provenance)].push_back(inserted_);
  samples_.push_back(std::move(s));
  ++inserted_;
}

std::size_t ReplayBuffer::index_of(Provenance p, std::size_t k) const {
  const std::uint64_t first = inserted_ - samples_.size();
  return static_cast<std::size_t>(by_tag_[static_cast<int>(p)].at(k) - first);
}

void ReplayBuffer::write(std::ostream& os) const {
  bin::write(os, kBufferMagic);
  bin::write(os, kBufferVersion);
  bin::write<std::uint64_t>(os, capacity_);
  bin::write<std::uint64_t>(os, inserted_);
  bin::write<std::uint64_t>(os, samples_.size());
  for (const auto& s : samples_) write_labelled(os, s);
}

ReplayBuffer ReplayBuffer::read(std::istream& is) {
  bin::expect_magic(is, kBufferMagic, kBufferVersion, "replay buffer");
  const auto capacity = bin::read<std::uint64_t>(is);
  const auto inserted = bin::read<std::uint64_t>(is);
  const auto n = bin::read<std::uint64_t>(is);
  if (capacity == 0 || n > capacity || n > inserted) throw InputError("replay buffer: inconsistent header");
  ReplayBuffer buf(capacity);
  buf.inserted_ = inserted - n;
  for (std::uint64_t i = 0; i < n; ++i) buf.push(read_labelled(is));
  return buf;
}

std::vector<std::size_t> sample_batch(const ReplayBuffer& buffer, int batch_size, Rng& rng) {
  std::vector<std::size_t> out;
  if (buffer.empty() || batch_size <= 0) return out;
  const std::array<double, 3> ratio{2.0, 1.0, 1.0};
  double present = 0;
  for (int k = 0; k < 3; ++k)
    if (buffer.count(static_cast<Provenance>(k)) > 0) present += ratio[k];
  // Largest-remainder split of the batch over the present tags.
  std::array<int, 3> counts{0, 0, 0};
  std::array<double, 3> rem{-1, -1, -1};
  int assigned = 0;
  for (int k = 0; k < 3; ++k) {
    if (buffer.count(static_cast<Provenance>(k)) == 0) continue;
    const double exact = batch_size * ratio[k] / present;
    counts[k] = static_cast<int>(std::floor(exact));
    rem[k] = exact - counts[k];
    assigned += counts[k];
  }
  while (assigned < batch_size) {
    int best = 0;
    for (int k = 1; k < 3; ++k)
      if (rem[k] > rem[best]) best = k;
    ++counts[best];
    rem[best] = -1;
    ++assigned;
  }
  out.reserve(batch_size);
  for (int k = 0; k < 3; ++k) {
    const auto tag = static_cast<Provenance>(k);
    for (int i = 0; i < counts[k]; ++i) out.push_back(buffer.index_of(tag, uniform_index(rng, buffer.count(tag))));
  }
  return out;
}

SurrogateStepReport surrogate_train_step(StabilityNet& net, const ReplayBuffer& buffer, int batch_size,
                                         AdamState& optimizer, Rng& rng, double clip) {
  SurrogateStepReport report;
  if (buffer.empty() || batch_size <= 0) return report;
  report.ran = true;
  const std::vector<std::size_t> idx = sample_batch(buffer, batch_size, rng);
  const int b = static_cast<int>(idx.size());
  Eigen::MatrixXd inputs(net.input_size(), b);
  for (int i = 0; i < b; ++i) inputs.col(i) = buffer[idx[i]].input;
  Tape tape;
  const Eigen::MatrixXd heads = mlp_forward(net.mlp, inputs, &tape);
  Eigen::MatrixXd dhead(heads.rows(), b);
  double total = 0;
  for (int i = 0; i < b; ++i) {
    const Eigen::VectorXd diff = heads.col(i) - buffer[idx[i]].target(net.mode);
    const double n = diff.norm();
    total += n;
    dhead.col(i) = n > 0 ? Eigen::VectorXd(diff / (n * b)) : Eigen::VectorXd::Zero(diff.size());
  }
  report.loss = total / b;
  const BackwardResult back = mlp_backward(net.mlp, tape, dhead);
  report.applied = adam_step(optimizer, net.mlp, back.params, clip).applied;
  return report;
}

double approximation_error(const StabilityNet& net, const std::vector<LabelledSample>& samples) {
  if (samples.empty()) throw InputError("approximation_error: no samples");
  double total = 0;
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, samples.size() - start);
    Eigen::MatrixXd inputs(net.input_size(), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) inputs.col(static_cast<Eigen::Index>(i)) = samples[start + i].input;
    const Eigen::VectorXd pred = replicate_batch(net, inputs);
    for (std::size_t i = 0; i < n; ++i) total += std::abs(pred[static_cast<Eigen::Index>(i)] - samples[start + i].loss);
  }
  return total / static_cast<double>(samples.size());
}

void write_stability_net(std::ostream& os, const StabilityNet& net) {
  bin::write(os, kNetMagic);
  bin::write(os, kNetVersion);
  bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(net.mode));
  write_mlp(os, net.mlp);
}

StabilityNet read_stability_net(std::istream& is) {
  bin::expect_magic(is, kNetMagic, kNetVersion, "stability net");
  const auto mode = bin::read<std::uint32_t>(is);
  if (mode > 2) throw InputError("stability net: bad target mode");
  return StabilityNet(read_mlp(is), static_cast<TargetMode>(mode));
}

}  // namespace gripsim
