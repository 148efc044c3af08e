#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace gripsim {

enum class Activation : std::uint32_t { Relu = 0, Tanh = 1, Identity = 2, Softplus = 3 };

std::string activation_name(Activation a);
Activation parse_activation(const std::string& name);

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::Identity;
};

/// Dense feed-forward network. Batches are matrices with one sample per column.
class Mlp {
 public:
  Mlp() = default;
  /// sizes = {in, hidden..., out}; Glorot-uniform weights from `seed`, zero biases.
  Mlp(const std::vector<int>& sizes, Activation hidden, Activation output, std::uint64_t seed);
  explicit Mlp(std::vector<Layer> layers, std::uint64_t seed = 0);

  int input_size() const;
  int output_size() const;
  std::size_t parameter_count() const;
  std::uint64_t seed() const { return seed_; }

  const std::vector<Layer>& layers() const { return layers_; }
  /// Mutable access invalidates outstanding tapes.
  std::vector<Layer>& mutable_layers() {
    ++generation_;
    return layers_;
  }
  std::uint64_t generation() const { return generation_; }

  bool operator==(const Mlp& other) const;

 private:
  std::vector<Layer> layers_;
  std::uint64_t seed_ = 0;
  std::uint64_t generation_ = 0;
};

/// Activations recorded by a forward pass, tied to the network state that produced them.
struct Tape {
  const Mlp* net = nullptr;
  std::uint64_t generation = 0;
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
  std::vector<Eigen::MatrixXd> outputs;  // activated output of each layer
};

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  static MlpGradients zeros_like(const Mlp& net);
  double squared_norm() const;
  bool all_finite() const;
  MlpGradients& operator+=(const MlpGradients& other);
  MlpGradients& operator*=(double s);
};

Eigen::MatrixXd mlp_forward(const Mlp& net, const Eigen::MatrixXd& input, Tape* tape = nullptr);
Eigen::VectorXd mlp_forward(const Mlp& net, const Eigen::VectorXd& input, Tape* tape = nullptr);

struct BackwardResult {
  MlpGradients params;  // summed over the batch
  Eigen::MatrixXd input;  // same shape as the forward input
};

/// Reverse pass for upstream gradient `output_grad` (same shape as the
/// forward output). Throws UsageError if the network changed since the tape
/// was recorded.
BackwardResult mlp_backward(const Mlp& net, const Tape& tape, const Eigen::MatrixXd& output_grad);

struct AdamState {
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  MlpGradients m;
  MlpGradients v;

  AdamState() = default;
  AdamState(const Mlp& net, double lr);
};

struct AdamReport {
  bool applied = false;  // false when the gradient was non-finite
  double grad_norm = 0;  // before clipping
};

/// Global-norm clipping to `clip` (<= 0 disables), then a bias-corrected Adam
/// update. Layers flagged in `frozen` are neither updated nor counted in the norm.
AdamReport adam_step(AdamState& state, Mlp& net, const MlpGradients& grads, double clip,
                     const std::vector<bool>* frozen = nullptr);

/// Checkpoint blob: magic, version, seed, layer count, then per layer
/// (in, out, activation, row-major weights, bias).
void write_mlp(std::ostream& os, const Mlp& net);
Mlp read_mlp(std::istream& is);
void save_mlp(const std::string& path, const Mlp& net);
Mlp load_mlp(const std::string& path);

void write_adam(std::ostream& os, const AdamState& state);
AdamState read_adam(std::istream& is, const Mlp& net);

}  // namespace gripsim
