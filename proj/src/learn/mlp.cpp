#include "gripsim/learn/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "gripsim/errors.hpp"
#include "gripsim/io/binary.hpp"
#include "gripsim/rng.hpp"

namespace gripsim {

namespace {

constexpr std::uint32_t kMlpMagic = 0x504c4d47;  // "GMLP"
constexpr std::uint32_t kMlpVersion = 1;
constexpr std::uint32_t kAdamMagic = 0x4d444147;  // "GADM"
constexpr std::uint32_t kAdamVersion = 1;

double softplus(double x) { return x > 30 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

void activate(Activation a, Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::Relu: z = z.cwiseMax(0.0); break;
    case Activation::Tanh: z = z.array().tanh().matrix(); break;
    case Activation::Identity: break;
    case Activation::Softplus: z = z.unaryExpr(&softplus); break;
  }
}

// Multiplies `grad` in place by the activation derivative, expressed through
// the pre-activation `z` or the activated output `y`.
void activation_backward(Activation a, const Eigen::MatrixXd& y, const Eigen::MatrixXd& z, Eigen::MatrixXd& grad) {
  switch (a) {
    case Activation::Relu: grad.array() *= (y.array() > 0).cast<double>(); break;
    case Activation::Tanh: grad.array() *= 1.0 - y.array().square(); break;
    case Activation::Identity: break;
    case Activation::Softplus: grad.array() *= z.unaryExpr(&sigmoid).array(); break;
  }
}

}  // namespace

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
    case Activation::Softplus: return "softplus";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  if (name == "softplus") return Activation::Softplus;
  throw InputError("unknown activation '" + name + "'");
}

Mlp::Mlp(const std::vector<int>& sizes, Activation hidden, Activation output, std::uint64_t seed) : seed_(seed) {
  if (sizes.size() < 2) throw InputError("mlp: need at least input and output sizes");
  for (int s : sizes)
    if (s < 1) throw InputError("mlp: layer sizes must be positive");
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Layer layer;
    const int in = sizes[l], out = sizes[l + 1];
    const double bound = std::sqrt(6.0 / (in + out));
    layer.weight.resize(out, in);
    for (int c = 0; c < in; ++c)
      for (int r = 0; r < out; ++r) layer.weight(r, c) = uniform(rng, -bound, bound);
    layer.bias = Eigen::VectorXd::Zero(out);
    layer.activation = (l + 2 == sizes.size()) ? output : hidden;
    layers_.push_back(std::move(layer));
  }
}

Mlp::Mlp(std::vector<Layer> layers, std::uint64_t seed) : layers_(std::move(layers)), seed_(seed) {
  if (layers_.empty()) throw InputError("mlp: no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    if (L.bias.size() != L.weight.rows()) throw InputError("mlp: bias size does not match weight rows");
    if (l > 0 && L.weight.cols() != layers_[l - 1].weight.rows())
      throw InputError("mlp: consecutive layer dimensions do not chain");
  }
}

int Mlp::input_size() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols()); }
int Mlp::output_size() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows()); }

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool Mlp::operator==(const Mlp& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& a = layers_[l];
    const auto& b = other.layers_[l];
    if (a.activation != b.activation || a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols())
      return false;
    if (std::memcmp(a.weight.data(), b.weight.data(), sizeof(double) * a.weight.size()) != 0) return false;
    if (std::memcmp(a.bias.data(), b.bias.data(), sizeof(double) * a.bias.size()) != 0) return false;
  }
  return true;
}

MlpGradients MlpGradients::zeros_like(const Mlp& net) {
  MlpGradients g;
  for (const auto& l : net.layers()) {
    g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

double MlpGradients::squared_norm() const {
  double s = 0;
  for (std::size_t l = 0; l < weight.size(); ++l) s += weight[l].squaredNorm() + bias[l].squaredNorm();
  return s;
}

bool MlpGradients::all_finite() const {
  for (std::size_t l = 0; l < weight.size(); ++l)
    if (!weight[l].allFinite() || !bias[l].allFinite()) return false;
  return true;
}

MlpGradients& MlpGradients::operator+=(const MlpGradients& other) {
  for (std::size_t l = 0; l < weight.size(); ++l) {
    weight[l] += other.weight[l];
    bias[l] += other.bias[l];
  }
  return *this;
}

MlpGradients& MlpGradients::operator*=(double s) {
  for (std::size_t l = 0; l < weight.size(); ++l) {
    weight[l] *= s;
    bias[l] *= s;
  }
  return *this;
}

Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& input, Tape* tape) {
  if (input.rows() != net.input_size())
    throw InputError("mlp_forward: input has " + std::to_string(input.rows()) + " rows, expected " +
                     std::to_string(net.input_size()));
  if (tape) {
    tape->net = &net;
    tape->generation = net.generation();
    tape->inputs.clear();
    tape->outputs.clear();
  }
  Eigen::MatrixXd x = input;
  for (const auto& layer : net.layers()) {
    Eigen::MatrixXd z = layer.weight * x;
    z.colwise() += layer.bias;
    if (tape) tape->inputs.push_back(std::move(x));
    activate(layer.activation, z);
    if (tape) tape->outputs.push_back(z);
    x = std::move(z);
  }
  return x;
}

Eigen::VectorXd mlp_forward(const Mlp& net, const Eigen::VectorXd& input, Tape* tape) {
  return mlp_forward(net, Eigen::MatrixXd(input), tape).col(0);
}

BackwardResult mlp_backward(const Mlp& net, const Tape& tape, const Eigen::MatrixXd& output_grad) {
  if (tape.net != &net || tape.generation != net.generation() || tape.inputs.size() != net.layers().size())
    throw UsageError("mlp_backward: tape is stale or belongs to another network");
  const auto& out = tape.outputs.back();
  if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols())
    throw InputError("mlp_backward: output gradient shape mismatch");
  BackwardResult res;
  res.params = MlpGradients::zeros_like(net);
  Eigen::MatrixXd grad = output_grad;
  for (std::size_t li = net.layers().size(); li-- > 0;) {
    const Layer& layer = net.layers()[li];
    const Eigen::MatrixXd& y = tape.outputs[li];
    if (layer.activation == Activation::Softplus) {
      Eigen::MatrixXd z = layer.weight * tape.inputs[li];
      z.colwise() += layer.bias;
      activation_backward(layer.activation, y, z, grad);
    } else {
      activation_backward(layer.activation, y, y, grad);
    }
    res.params.weight[li].noalias() = grad * tape.inputs[li].transpose();
    res.params.bias[li] = grad.rowwise().sum();
    grad = layer.weight.transpose() * grad;
  }
  res.input = std::move(grad);
  return res;
}

AdamState::AdamState(const Mlp& net, double lr)
    : learning_rate(lr), m(MlpGradients::zeros_like(net)), v(MlpGradients::zeros_like(net)) {}

AdamReport adam_step(AdamState& state, Mlp& net, const MlpGradients& grads, double clip,
                     const std::vector<bool>* frozen) {
  const std::size_t n_layers = net.layers().size();
  if (grads.weight.size() != n_layers || state.m.weight.size() != n_layers)
    throw InputError("adam_step: gradient layout does not match the network");
  auto is_frozen = [&](std::size_t l) { return frozen && l < frozen->size() && (*frozen)[l]; };
  AdamReport report;
  double sq = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (is_frozen(l)) continue;
    if (grads.weight[l].rows() != net.layers()[l].weight.rows() || grads.weight[l].cols() != net.layers()[l].weight.cols())
      throw InputError("adam_step: gradient shape mismatch");
    if (!grads.weight[l].allFinite() || !grads.bias[l].allFinite()) return report;
    sq += grads.weight[l].squaredNorm() + grads.bias[l].squaredNorm();
  }
  report.grad_norm = std::sqrt(sq);
  if (!std::isfinite(report.grad_norm)) return report;
  const double scale = (clip > 0 && report.grad_norm > clip) ? clip / report.grad_norm : 1.0;

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double lr = state.learning_rate;
  auto& layers = net.mutable_layers();
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = state.beta1 * m + (1.0 - state.beta1) * (scale * g);
    v = state.beta2 * v + (1.0 - state.beta2) * (scale * g).cwiseAbs2();
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  };
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (is_frozen(l)) continue;
    update(layers[l].weight, state.m.weight[l], state.v.weight[l], grads.weight[l]);
    update(layers[l].bias, state.m.bias[l], state.v.bias[l], grads.bias[l]);
  }
  report.applied = true;
  return report;
}

void write_mlp(std::ostream& os, const Mlp& net) {
  bin::write(os, kMlpMagic);
  bin::write(os, kMlpVersion);
  bin::write<std::uint64_t>(os, net.seed());
  bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(l.weight.cols()));
    bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(l.weight.rows()));
    bin::write<std::uint32_t>(os, static_cast<std::uint32_t>(l.activation));
    bin::write_matrix(os, l.weight);
    bin::write_doubles(os, l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
}

Mlp read_mlp(std::istream& is) {
  bin::expect_magic(is, kMlpMagic, kMlpVersion, "mlp checkpoint");
  const auto seed = bin::read<std::uint64_t>(is);
  const auto n = bin::read<std::uint32_t>(is);
  if (n == 0 || n > 64) throw InputError("mlp checkpoint: bad layer count");
  std::vector<Layer> layers;
  for (std::uint32_t i = 0; i < n; ++i) {
    Layer l;
    const auto in = bin::read<std::uint32_t>(is);
    const auto out = bin::read<std::uint32_t>(is);
    const auto act = bin::read<std::uint32_t>(is);
    if (in == 0 || out == 0 || in > (1u << 20) || out > (1u << 20)) throw InputError("mlp checkpoint: bad layer size");
    if (act > 3) throw InputError("mlp checkpoint: bad activation");
    l.activation = static_cast<Activation>(act);
    l.weight = bin::read_matrix(is, out, in);
    l.bias.resize(out);
    bin::read_doubles(is, l.bias.data(), out);
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers), seed);
}

void save_mlp(const std::string& path, const Mlp& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path);
  write_mlp(os, net);
}

Mlp load_mlp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read " + path);
  return read_mlp(is);
}

void write_adam(std::ostream& os, const AdamState& s) {
  bin::write(os, kAdamMagic);
  bin::write(os, kAdamVersion);
  bin::write(os, s.learning_rate);
  bin::write(os, s.beta1);
  bin::write(os, s.beta2);
  bin::write(os, s.epsilon);
  bin::write(os, s.step);
  for (const MlpGradients* g : {&s.m, &s.v}) {
    for (std::size_t l = 0; l < g->weight.size(); ++l) {
      bin::write_matrix(os, g->weight[l]);
      bin::write_doubles(os, g->bias[l].data(), static_cast<std::size_t>(g->bias[l].size()));
    }
  }
}

AdamState read_adam(std::istream& is, const Mlp& net) {
  bin::expect_magic(is, kAdamMagic, kAdamVersion, "optimizer state");
  AdamState s(net, 0.0);
  s.learning_rate = bin::read<double>(is);
  s.beta1 = bin::read<double>(is);
  s.beta2 = bin::read<double>(is);
  s.epsilon = bin::read<double>(is);
  s.step = bin::read<std::uint64_t>(is);
  for (MlpGradients* g : {&s.m, &s.v}) {
    for (std::size_t l = 0; l < g->weight.size(); ++l) {
      g->weight[l] = bin::read_matrix(is, g->weight[l].rows(), g->weight[l].cols());
      bin::read_doubles(is, g->bias[l].data(), static_cast<std::size_t>(g->bias[l].size()));
    }
  }
  return s;
}

}  // namespace gripsim
