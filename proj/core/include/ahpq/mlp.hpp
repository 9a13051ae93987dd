#pragma once

// Small fully connected network with analytic backpropagation and an Adam
// optimizer. Samples are columns.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ahpq/mimo_sim.hpp"

namespace ahpq::nn {

enum class Activation { kTanh, kRelu };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// Hidden layers apply the activation; the output layer is affine.
class Mlp {
 public:
  Mlp() = default;
  /// sizes = {in, hidden..., out}. Weights are Glorot-uniform, biases zero;
  /// the output layer's weights are scaled by output_gain.
  Mlp(std::vector<int> sizes, Activation act, sim::Rng& rng, double output_gain = 1.0);

  const std::vector<int>& sizes() const { return sizes_; }
  Activation activation() const { return act_; }
  int layers() const { return static_cast<int>(weights_.size()); }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t parameter_count() const;

  Eigen::MatrixXd& weight(int l) { return weights_[l]; }
  const Eigen::MatrixXd& weight(int l) const { return weights_[l]; }
  Eigen::VectorXd& bias(int l) { return biases_[l]; }
  const Eigen::VectorXd& bias(int l) const { return biases_[l]; }

  /// Layer inputs kept for the backward pass; inputs[0] is the network input
  /// and inputs[l] the activated output of layer l-1.
  struct Tape {
    std::vector<Eigen::MatrixXd> inputs;
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Tape& tape) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

  struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
  };
  Gradients zero_gradients() const;
  /// Gradients of a loss whose derivative w.r.t. the output is d_out.
  Gradients backward(const Tape& tape, const Eigen::MatrixXd& d_out) const;

  bool finite() const;

  /// {"version":1,"activation":"tanh","sizes":[...],
  ///  "weights":[[row-major out x in]...],"biases":[[...]...]}
  std::string to_json() const;
  static Mlp from_json(std::string_view text);
  void save(const std::string& path) const;
  static Mlp load(const std::string& path);

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  std::vector<int> sizes_;
  Activation act_ = Activation::kTanh;
  std::vector<Eigen::MatrixXd> weights_;  // out x in
  std::vector<Eigen::VectorXd> biases_;
};

/// Column-wise softmax.
Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 0.0;  // 0 disables clipping
};

class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, AdamConfig cfg);
  /// Descends along `grad` (a loss gradient).
  void step(Mlp& net, const Mlp::Gradients& grad);
  std::uint64_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  Mlp::Gradients m_;
  Mlp::Gradients v_;
};

}  // namespace ahpq::nn
