#include "ahpq/mlp.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace ahpq::nn {

std::string_view to_string(Activation a) {
  return a == Activation::kTanh ? "tanh" : "relu";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

Mlp::Mlp(std::vector<int> sizes, Activation act, sim::Rng& rng, double output_gain)
    : sizes_(std::move(sizes)), act_(act) {
  if (sizes_.size() < 2) throw std::invalid_argument("an MLP needs at least two layer sizes");
  for (const int s : sizes_) {
    if (s < 1) throw std::invalid_argument("layer sizes must be >= 1");
  }
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    double limit = std::sqrt(6.0 / (in + out));
    if (l + 2 == sizes_.size()) limit *= output_gain;
    std::uniform_real_distribution<double> u(-limit, limit);
    Eigen::MatrixXd w(out, in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    weights_.push_back(std::move(w));
    biases_.push_back(Eigen::VectorXd::Zero(out));
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  }
  return n;
}

namespace {

void activate(Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::kTanh) {
    z = z.array().tanh();
  } else {
    z = z.array().max(0.0);
  }
}

}  // namespace

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Tape& tape) const {
  if (x.rows() != input_size()) {
    throw std::invalid_argument("input has " + std::to_string(x.rows()) + " rows, expected " +
                                std::to_string(input_size()));
  }
  tape.inputs.clear();
  tape.inputs.reserve(weights_.size());
  Eigen::MatrixXd h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    tape.inputs.push_back(h);
    Eigen::MatrixXd z = weights_[l] * h;
    z.colwise() += biases_[l];
    if (l + 1 < weights_.size()) activate(z, act_);
    h = std::move(z);
  }
  return h;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  Tape tape;
  return forward(x, tape);
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  const Eigen::MatrixXd out = forward(Eigen::MatrixXd(x));
  return out.col(0);
}

Mlp::Gradients Mlp::zero_gradients() const {
  Gradients g;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
  }
  return g;
}

Mlp::Gradients Mlp::backward(const Tape& tape, const Eigen::MatrixXd& d_out) const {
  if (tape.inputs.size() != weights_.size()) throw std::invalid_argument("tape does not match");
  Gradients g = zero_gradients();
  Eigen::MatrixXd delta = d_out;  // dL/dz of the current layer
  for (int l = layers() - 1; l >= 0; --l) {
    const Eigen::MatrixXd& in = tape.inputs[l];
    g.weights[l].noalias() = delta * in.transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd d_in = weights_[l].transpose() * delta;
    // `in` is the activated output of layer l-1.
    if (act_ == Activation::kTanh) {
      d_in.array() *= 1.0 - in.array().square();
    } else {
      d_in.array() *= (in.array() > 0.0).cast<double>();
    }
    delta = std::move(d_in);
  }
  return g;
}

bool Mlp::finite() const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
  }
  return true;
}

std::string Mlp::to_json() const {
  nlohmann::json j;
  j["version"] = 1;
  j["activation"] = std::string(to_string(act_));
  j["sizes"] = sizes_;
  nlohmann::json ws = nlohmann::json::array();
  nlohmann::json bs = nlohmann::json::array();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(weights_[l].size()));
    for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) w.push_back(weights_[l](r, c));
    }
    ws.push_back(w);
    bs.push_back(std::vector<double>(biases_[l].data(), biases_[l].data() + biases_[l].size()));
  }
  j["weights"] = ws;
  j["biases"] = bs;
  return j.dump();
}

Mlp Mlp::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed checkpoint: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != 1) throw std::invalid_argument("unsupported checkpoint version");
    Mlp net;
    net.act_ = parse_activation(j.at("activation").get<std::string>());
    net.sizes_ = j.at("sizes").get<std::vector<int>>();
    const auto& ws = j.at("weights");
    const auto& bs = j.at("biases");
    if (net.sizes_.size() < 2 || ws.size() + 1 != net.sizes_.size() || bs.size() != ws.size()) {
      throw std::invalid_argument("malformed checkpoint: layer count mismatch");
    }
    for (std::size_t l = 0; l < ws.size(); ++l) {
      const int in = net.sizes_[l];
      const int out = net.sizes_[l + 1];
      const auto w = ws[l].get<std::vector<double>>();
      const auto b = bs[l].get<std::vector<double>>();
      if (w.size() != static_cast<std::size_t>(in) * out || b.size() != static_cast<std::size_t>(out)) {
        throw std::invalid_argument("malformed checkpoint: tensor size mismatch");
      }
      Eigen::MatrixXd wm(out, in);
      for (int r = 0; r < out; ++r) {
        for (int c = 0; c < in; ++c) wm(r, c) = w[static_cast<std::size_t>(r) * in + c];
      }
      net.weights_.push_back(std::move(wm));
      net.biases_.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), out));
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed checkpoint: ") + e.what());
  }
}

void Mlp::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json() << '\n';
}

Mlp Mlp::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.sizes_ != b.sizes_ || a.act_ != b.act_) return false;
  for (std::size_t l = 0; l < a.weights_.size(); ++l) {
    if (a.weights_[l] != b.weights_[l] || a.biases_[l] != b.biases_[l]) return false;
  }
  return true;
}

Eigen::MatrixXd softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits;
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    const double m = p.col(c).maxCoeff();
    p.col(c) = (p.col(c).array() - m).exp();
    p.col(c) /= p.col(c).sum();
  }
  return p;
}

Adam::Adam(const Mlp& net, AdamConfig cfg)
    : cfg_(cfg), m_(net.zero_gradients()), v_(net.zero_gradients()) {}

void Adam::step(Mlp& net, const Mlp::Gradients& grad) {
  double scale = 1.0;
  if (cfg_.max_grad_norm > 0.0) {
    double sq = 0.0;
    for (std::size_t l = 0; l < grad.weights.size(); ++l) {
      sq += grad.weights[l].squaredNorm() + grad.biases[l].squaredNorm();
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg_.max_grad_norm) scale = cfg_.max_grad_norm / norm;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * scale * g;
    v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * (scale * g).cwiseAbs2();
    param.array() -= cfg_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
  };
  for (int l = 0; l < net.layers(); ++l) {
    update(net.weight(l), grad.weights[l], m_.weights[l], v_.weights[l]);
    update(net.bias(l), grad.biases[l], m_.biases[l], v_.biases[l]);
  }
}

}  // namespace ahpq::nn
