#include "ahpq/mlp.hpp"

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

namespace ahpq::nn {
namespace {

double weighted_output(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& w) {
  return (net.forward(x).array() * w.array()).sum();
}

void check_gradients(Activation act, std::uint64_t seed) {
  sim::Rng rng(seed);
  Mlp net({6, 9, 7, 4}, act, rng);
  // Shift biases off zero so ReLU kinks are not hit by the probes.
  for (int l = 0; l < net.layers(); ++l) net.bias(l).setConstant(0.05);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd x(6, 3), w(4, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng);

  Mlp::Tape tape;
  net.forward(x, tape);
  const Mlp::Gradients g = net.backward(tape, w);

  std::uniform_int_distribution<int> layer(0, net.layers() - 1);
  const double h = 1e-6;
  int checked = 0;
  for (int probe = 0; probe < 100; ++probe) {
    const int l = layer(rng);
    const bool bias = probe % 4 == 0;
    Eigen::Index idx = 0;
    double* param = nullptr;
    double analytic = 0.0;
    if (bias) {
      idx = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(net.bias(l).size()));
      param = &net.bias(l)(idx);
      analytic = g.biases[l](idx);
    } else {
      idx = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(net.weight(l).size()));
      param = net.weight(l).data() + idx;
      analytic = g.weights[l].data()[idx];
    }
    const double saved = *param;
    *param = saved + h;
    const double up = weighted_output(net, x, w);
    *param = saved - h;
    const double down = weighted_output(net, x, w);
    *param = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    EXPECT_LE(std::abs(analytic - numeric) / scale, 1e-4)
        << "layer " << l << (bias ? " bias " : " weight ") << idx;
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(Mlp, GradientsMatchFiniteDifferencesTanh) { check_gradients(Activation::kTanh, 1); }
TEST(Mlp, GradientsMatchFiniteDifferencesRelu) { check_gradients(Activation::kRelu, 2); }

TEST(Mlp, GradientIsLinearInLossScale) {
  sim::Rng rng(3);
  const Mlp net({4, 5, 2}, Activation::kTanh, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 2);
  const Eigen::MatrixXd d = Eigen::MatrixXd::Random(2, 2);
  Mlp::Tape tape;
  net.forward(x, tape);
  const Mlp::Gradients g1 = net.backward(tape, d);
  const Mlp::Gradients g3 = net.backward(tape, 3.0 * d);
  for (int l = 0; l < net.layers(); ++l) {
    EXPECT_LT((g3.weights[l] - 3.0 * g1.weights[l]).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((g3.biases[l] - 3.0 * g1.biases[l]).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Mlp, DeadPathHasZeroGradient) {
  sim::Rng rng(4);
  Mlp net({3, 4, 2}, Activation::kRelu, rng);
  // Hidden unit 0 never activates, so its incoming weights get no gradient.
  net.weight(0).row(0).setZero();
  net.bias(0)(0) = -1.0;
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 5);
  Mlp::Tape tape;
  net.forward(x, tape);
  const Mlp::Gradients g = net.backward(tape, Eigen::MatrixXd::Ones(2, 5));
  EXPECT_EQ(g.weights[0].row(0).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.biases[0](0), 0.0);
  EXPECT_EQ(g.weights[1].col(0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Mlp, HandComputedForward) {
  sim::Rng rng(5);
  Mlp net({2, 2, 1}, Activation::kTanh, rng);
  net.weight(0) << 1.0, 2.0, -1.0, 0.5;
  net.bias(0) << 0.1, -0.2;
  net.weight(1) << 0.3, -0.7;
  net.bias(1) << 0.05;
  Eigen::VectorXd x(2);
  x << 0.4, -0.3;
  const double h0 = std::tanh(0.4 - 0.6 + 0.1);
  const double h1 = std::tanh(-0.4 - 0.15 - 0.2);
  EXPECT_NEAR(net.forward(x)(0), 0.3 * h0 - 0.7 * h1 + 0.05, 1e-15);
}

TEST(Mlp, ZeroParametersGiveUniformPolicy) {
  sim::Rng rng(6);
  Mlp net({32, 8, 5}, Activation::kTanh, rng);
  for (int l = 0; l < net.layers(); ++l) {
    net.weight(l).setZero();
    net.bias(l).setZero();
  }
  const Eigen::MatrixXd p = softmax(net.forward(Eigen::MatrixXd(Eigen::MatrixXd::Random(32, 3))));
  for (Eigen::Index i = 0; i < p.size(); ++i) EXPECT_DOUBLE_EQ(p.data()[i], 0.2);
}

TEST(Softmax, PositiveAndNormalised) {
  Eigen::MatrixXd logits(4, 3);
  logits << 1000, -1000, 0, 999, -1000, 1, -5, 0, 2, 3, 700, 3;
  const Eigen::MatrixXd p = softmax(logits);
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    EXPECT_NEAR(p.col(c).sum(), 1.0, 1e-12);
    EXPECT_GE(p.col(c).minCoeff(), 0.0);
    EXPECT_TRUE(p.col(c).allFinite());
  }
}

TEST(Mlp, CheckpointRoundTrip) {
  sim::Rng rng(7);
  const Mlp net({32, 16, 5}, Activation::kRelu, rng);
  EXPECT_EQ(Mlp::from_json(net.to_json()), net);
  const auto path = std::filesystem::temp_directory_path() / "ahpq_mlp_roundtrip.json";
  net.save(path.string());
  const Mlp back = Mlp::load(path.string());
  std::filesystem::remove(path);
  EXPECT_EQ(back, net);
  EXPECT_EQ(back.activation(), Activation::kRelu);
  EXPECT_EQ(back.parameter_count(), 32U * 16 + 16 + 16 * 5 + 5);
}

TEST(Mlp, RejectsMalformedCheckpoints) {
  EXPECT_THROW(Mlp::from_json("[1,2"), std::invalid_argument);
  EXPECT_THROW(Mlp::from_json(R"({"version":2})"), std::invalid_argument);
  EXPECT_THROW(Mlp::from_json(
                   R"({"version":1,"activation":"tanh","sizes":[2,1],"weights":[[1]],"biases":[[0]]})"),
               std::invalid_argument);
  EXPECT_THROW(Mlp::load("/nonexistent/net.json"), std::runtime_error);
}

TEST(Mlp, RejectsBadShapes) {
  sim::Rng rng(8);
  EXPECT_THROW(Mlp({3}, Activation::kTanh, rng), std::invalid_argument);
  EXPECT_THROW(Mlp({3, 0, 2}, Activation::kTanh, rng), std::invalid_argument);
  const Mlp net({3, 2}, Activation::kTanh, rng);
  EXPECT_THROW(net.forward(Eigen::MatrixXd(Eigen::MatrixXd::Zero(4, 1))), std::invalid_argument);
}

TEST(Adam, MinimisesQuadratic) {
  sim::Rng rng(9);
  Mlp net({1, 1}, Activation::kTanh, rng);  // y = w x + b
  Adam opt(net, AdamConfig{.lr = 0.05});
  Eigen::MatrixXd x(1, 4), target(1, 4);
  x << -1, 0, 1, 2;
  target << -1, 1, 3, 5;  // 2x + 1
  for (int it = 0; it < 3000; ++it) {
    Mlp::Tape tape;
    const Eigen::MatrixXd y = net.forward(x, tape);
    opt.step(net, net.backward(tape, 2.0 * (y - target) / 4.0));
  }
  EXPECT_NEAR(net.weight(0)(0, 0), 2.0, 1e-3);
  EXPECT_NEAR(net.bias(0)(0), 1.0, 1e-3);
  EXPECT_EQ(opt.steps(), 3000U);
}

TEST(Adam, ClippingKeepsFirstStepSize) {
  sim::Rng rng(10);
  Mlp a({2, 2}, Activation::kTanh, rng);
  Mlp b = a;
  Adam clipped(a, AdamConfig{.lr = 0.1, .max_grad_norm = 1e-3});
  Adam plain(b, AdamConfig{.lr = 0.1});
  Mlp::Gradients g = a.zero_gradients();
  g.weights[0].setConstant(100.0);
  clipped.step(a, g);
  plain.step(b, g);
  // Adam normalises magnitude, so both steps have size lr; clipping only
  // rescales m and v together. The first step is identical.
  EXPECT_LT((a.weight(0) - b.weight(0)).cwiseAbs().maxCoeff(), 1e-5);
}

}  // namespace
}  // namespace ahpq::nn
