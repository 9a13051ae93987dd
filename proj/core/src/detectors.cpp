#include "ahpq/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ahpq::det {

using fxp::Var;

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kAmp:
      return "amp";
    case Variant::kNnaAmp:
      return "nna";
    case Variant::kHfAmp:
      return "hf";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "amp") return Variant::kAmp;
  if (name == "nna" || name == "nna-amp") return Variant::kNnaAmp;
  if (name == "hf" || name == "hf-amp") return Variant::kHfAmp;
  throw std::invalid_argument("unknown detector: " + std::string(name));
}

Quantizer::Quantizer(const fxp::QuantProfile* profile, TraceSink* sink) : sink_(sink) {
  if (profile == nullptr) return;
  profile->validate();
  active_ = true;
  // Variables outside the profile's scope are never touched by the
  // detectors that accept it; a very wide format keeps them inert.
  static const fxp::QuantScheme kInert(24, 24);
  for (int k = 1; k <= fxp::kNumVariables; ++k) {
    schemes_[k] = profile->has(k) ? profile->at(k) : kInert;
  }
}

void DetectorConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be > 0");
  if (variant == Variant::kHfAmp && constellation.order() != 16) {
    throw std::invalid_argument("the hardware-friendly detector is defined for 16-QAM");
  }
  if (profile) {
    profile->validate();
    if (variant != Variant::kHfAmp && profile->scope() == fxp::ProfileScope::kHfAmp) {
      throw std::invalid_argument("incomplete profile: hf-amp scope lacks NNA-AMP variables");
    }
  }
}

namespace {

void check_dims(std::span<const double> b, const Eigen::MatrixXd& g) {
  const auto n = static_cast<Eigen::Index>(b.size());
  if (n == 0 || g.rows() != n || g.cols() != n) {
    throw std::invalid_argument("dimension mismatch: b has " + std::to_string(b.size()) +
                                " entries, G is " + std::to_string(g.rows()) + "x" +
                                std::to_string(g.cols()));
  }
}

// Row-major copy of G through the k=2 quantizer.
std::vector<double> quantized_gram(const Eigen::MatrixXd& g, const Quantizer& q) {
  const Eigen::Index n = g.rows();
  std::vector<double> out(static_cast<std::size_t>(n * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out[i * n + j] = q(Var::kGram, g(i, j));
  }
  return out;
}

void notify(const DetectOptions& opts, int iteration, std::span<const double> x_hat) {
  if (opts.observer != nullptr && *opts.observer) (*opts.observer)(iteration, x_hat);
}

}  // namespace

std::vector<double> amp_detect(std::span<const double> b, const Eigen::MatrixXd& g,
                               const DetectorConfig& cfg, DetectOptions opts) {
  cfg.validate();
  check_dims(b, g);
  if (cfg.profile) {
    throw std::invalid_argument("amp_detect runs in floating point only");
  }
  const std::size_t n = b.size();
  const auto levels = cfg.constellation.levels();
  const std::size_t m_count = levels.size();

  std::vector<double> d(b.begin(), b.end());
  std::vector<double> x_hat(n, cfg.initial_mean());
  std::vector<double> x_next(n);
  std::vector<double> alpha(m_count);
  double xi_bar = 0.0;

  for (int l = 0; l < cfg.iterations; ++l) {
    const double tau = cfg.sigma2 + cfg.beta * xi_bar;
    if (!(tau > 0.0)) throw std::logic_error("AMP invariant violated: tau <= 0");
    double xi_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = x_hat[i] + d[i];
      double alpha_max = -INFINITY;
      for (std::size_t m = 0; m < m_count; ++m) {
        const double diff = levels[m] - z;
        alpha[m] = -diff * diff / (2.0 * tau);
        alpha_max = std::max(alpha_max, alpha[m]);
      }
      double u = 0.0;
      for (std::size_t m = 0; m < m_count; ++m) {
        alpha[m] = std::exp(alpha[m] - alpha_max);
        u += alpha[m];
      }
      double mean = 0.0;
      double second = 0.0;
      for (std::size_t m = 0; m < m_count; ++m) {
        const double rho = alpha[m] / u;
        mean += levels[m] * rho;
        second += levels[m] * levels[m] * rho;
      }
      x_next[i] = mean;
      xi_sum += second - mean * mean;
    }
    // Per-element mean; the plain sum over-weights the Onsager term by 2N_t.
    xi_bar = xi_sum / static_cast<double>(n);
    const double onsager = cfg.beta * xi_bar / tau;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += g(i, j) * x_next[j];
      d[i] = b[i] - acc + onsager * d[i];
    }
    x_hat.swap(x_next);
    notify(opts, l + 1, x_hat);
  }
  return x_hat;
}

NearestPair nearest_pair(double z, const sim::Constellation& constellation) {
  const int count = constellation.size();
  const double pos = (z + (count - 1)) / 2.0;
  NearestPair p;
  p.m1 = std::clamp(static_cast<int>(std::floor(pos + 0.5)), 0, count - 1);
  if (p.m1 == 0) {
    p.m2 = 1;
  } else if (p.m1 == count - 1) {
    p.m2 = count - 2;
  } else {
    p.m2 = z >= constellation.level(p.m1) ? p.m1 + 1 : p.m1 - 1;
  }
  return p;
}

NnaProbabilities nna_probabilities(double z, double tau,
                                   const sim::Constellation& constellation) {
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be > 0");
  const NearestPair pair = nearest_pair(z, constellation);
  NnaProbabilities out;
  out.m1 = pair.m1;
  out.m2 = pair.m2;
  const double w1 = constellation.level(pair.m1);
  const double w2 = constellation.level(pair.m2);
  out.a = w1 + w2;
  out.s = w2 - w1;
  const double chi = z / tau;
  out.delta = -std::abs(out.s * chi - out.a * out.s / (2.0 * tau));
  out.rho_m1 = 1.0 / (1.0 + std::exp(out.delta));
  out.rho_m2 = 1.0 - out.rho_m1;
  return out;
}

std::vector<double> nna_amp_detect(std::span<const double> b, const Eigen::MatrixXd& g,
                                   const DetectorConfig& cfg, DetectOptions opts) {
  cfg.validate();
  check_dims(b, g);
  const Quantizer q(cfg.profile ? &*cfg.profile : nullptr, opts.trace);
  const std::size_t n = b.size();
  const sim::Constellation& omega = cfg.constellation;

  std::vector<double> bq(n);
  for (std::size_t i = 0; i < n; ++i) bq[i] = q(Var::kMatchedFilter, b[i]);
  const std::vector<double> gq = quantized_gram(g, q);
  const double sigma2 = q(Var::kNoiseVar, cfg.sigma2);

  std::vector<double> d(n);
  std::vector<double> x_hat(n);
  std::vector<double> x_next(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = q(Var::kResidual, bq[i]);
    x_hat[i] = q(Var::kMean, cfg.initial_mean());
  }
  double beta_xi = 0.0;

  for (int l = 0; l < cfg.iterations; ++l) {
    const double tau = q(Var::kTau, sigma2 + beta_xi);
    // A quantized tau of zero saturates the divider at the top of 1/tau's
    // format, so traces stay finite.
    const double inv_tau = q(Var::kInvTau, tau > 0.0 ? 1.0 / tau : q.max(Var::kInvTau));
    double xi_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = q(Var::kSoftInput, x_hat[i] + d[i]);
      const NearestPair pair = nearest_pair(z, omega);
      const double w1 = omega.level(pair.m1);
      const double w2 = omega.level(pair.m2);
      const double a = w1 + w2;
      const double s = w2 - w1;
      const double chi = q(Var::kChi, z * inv_tau);
      const double delta = q(Var::kDelta, -std::abs(s * chi - a * s / 2.0 * inv_tau));
      const double rho1 = q(Var::kProb, 1.0 / (1.0 + std::exp(delta)));
      const double rho2 = q(Var::kProb, 1.0 - rho1);
      const double t1 = q(Var::kOmegaProb, w1 * rho1);
      const double t2 = q(Var::kOmegaProb, w2 * rho2);
      const double mean = q(Var::kMean, t1 + t2);
      const double mean_sq = q(Var::kMeanSq, mean * mean);
      const double u1 = q(Var::kOmegaSqProb, w1 * w1 * rho1);
      const double u2 = q(Var::kOmegaSqProb, w2 * w2 * rho2);
      const double second = q(Var::kSecondMoment, u1 + u2);
      xi_sum += q(Var::kVariance, second - mean_sq);
      x_next[i] = mean;
    }
    const double xi_bar = q(Var::kVarianceSum, xi_sum / static_cast<double>(n));
    beta_xi = q(Var::kBetaVariance, cfg.beta * xi_bar);
    const double onsager = q(Var::kOnsager, beta_xi * inv_tau);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = &gq[i * n];
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += q(Var::kGramProduct, row[j] * x_next[j]);
      const double interference = q(Var::kGramRowSum, acc);
      d[i] = q(Var::kResidual, bq[i] - interference + onsager * d[i]);
    }
    x_hat.swap(x_next);
    notify(opts, l + 1, x_hat);
  }
  return x_hat;
}

IntervalFlags interval_flags(double z) {
  IntervalFlags f;
  if (z < -2.0) {
    f.f1 = true, f.f2 = true, f.f3 = true;
    f.omega_m1 = -3.0, f.omega_m2 = -1.0;
  } else if (z < -1.0) {
    f.f1 = true, f.f2 = true, f.f3 = false;
    f.omega_m1 = -1.0, f.omega_m2 = -3.0;
  } else if (z < 0.0) {
    f.f1 = false, f.f2 = true, f.f3 = false;
    f.omega_m1 = -1.0, f.omega_m2 = 1.0;
  } else if (z < 1.0) {
    f.f1 = false, f.f2 = false, f.f3 = false;
    f.omega_m1 = 1.0, f.omega_m2 = -1.0;
  } else if (z < 2.0) {
    f.f1 = true, f.f2 = false, f.f3 = false;
    f.omega_m1 = 1.0, f.omega_m2 = 3.0;
  } else {
    f.f1 = true, f.f2 = false, f.f3 = true;
    f.omega_m1 = 3.0, f.omega_m2 = 1.0;
  }
  if (z < -1.0) {
    f.f4 = false, f.f5 = true, f.a_sign = -1;
  } else if (z < 1.0) {
    f.f4 = true, f.f5 = true, f.a_sign = 0;
  } else {
    f.f4 = true, f.f5 = false, f.a_sign = 1;
  }
  return f;
}

MeanTerms mean_select_terms(const IntervalFlags& f, double rho_m1, double rho_m2) {
  // x << 1 on a fixed-point value is a doubling.
  if (!f.f1) {
    return f.f2 ? MeanTerms{-rho_m1, rho_m2} : MeanTerms{rho_m1, -rho_m2};
  }
  const double tri1 = rho_m1 + rho_m1 * 2.0;
  const double tri2 = rho_m2 + rho_m2 * 2.0;
  if (!f.f2) {
    return f.f3 ? MeanTerms{tri1, rho_m2} : MeanTerms{rho_m1, tri2};
  }
  return f.f3 ? MeanTerms{-tri1, -rho_m2} : MeanTerms{-rho_m1, -tri2};
}

double mean_select(const IntervalFlags& f, double rho_m1, double rho_m2) {
  const MeanTerms t = mean_select_terms(f, rho_m1, rho_m2);
  return t.m1 + t.m2;
}

std::vector<double> hf_amp_detect(std::span<const double> b, const Eigen::MatrixXd& g,
                                  const DetectorConfig& cfg, DetectOptions opts) {
  cfg.validate();
  check_dims(b, g);
  const Quantizer q(cfg.profile ? &*cfg.profile : nullptr, opts.trace);
  const std::size_t n = b.size();

  std::vector<double> bq(n);
  for (std::size_t i = 0; i < n; ++i) bq[i] = q(Var::kMatchedFilter, b[i]);
  const std::vector<double> gq = quantized_gram(g, q);
  const double sigma2 = q(Var::kNoiseVar, cfg.sigma2);
  // Node compression: tau stays at the noise variance for every iteration.
  const double tau = q(Var::kTau, sigma2);
  const double inv_tau = q(Var::kInvTau, pla_eval(cfg.pla2, tau));
  const double two_inv_tau = inv_tau * 2.0;

  std::vector<double> d(n);
  std::vector<double> x_hat(n);
  std::vector<double> x_next(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = q(Var::kResidual, bq[i]);
    x_hat[i] = q(Var::kMean, cfg.initial_mean());
  }

  for (int l = 0; l < cfg.iterations; ++l) {
    for (std::size_t i = 0; i < n; ++i) {
      const double z = q(Var::kSoftInput, x_hat[i] + d[i]);
      const IntervalFlags flags = interval_flags(z);
      const double chi = q(Var::kChi, z * inv_tau);
      double delta_tmp = chi;
      if (flags.a_sign < 0) delta_tmp = chi + two_inv_tau;
      if (flags.a_sign > 0) delta_tmp = chi - two_inv_tau;
      const double delta =
          q(Var::kDelta, std::clamp(-2.0 * std::abs(delta_tmp), cfg.delta_clip, 0.0));
      double rho1 = 0.0;
      double rho2 = 0.0;
      if (cfg.literal_probabilities) {
        rho1 = q(Var::kProb, 0.5 * delta - 0.125);
        rho2 = q(Var::kProb, -0.5 * delta + 0.875);
      } else {
        rho1 = q(Var::kProb, pla_eval(cfg.pla1, delta));
        rho2 = q(Var::kProb, 1.0 - rho1);
      }
      const MeanTerms terms = mean_select_terms(flags, rho1, rho2);
      x_next[i] = q(Var::kMean, q(Var::kOmegaProb, terms.m1) + q(Var::kOmegaProb, terms.m2));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = &gq[i * n];
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += q(Var::kGramProduct, row[j] * x_next[j]);
      d[i] = q(Var::kResidual, bq[i] - q(Var::kGramRowSum, acc));
    }
    x_hat.swap(x_next);
    notify(opts, l + 1, x_hat);
  }
  return x_hat;
}

std::vector<double> detect(std::span<const double> b, const Eigen::MatrixXd& g,
                           const DetectorConfig& cfg, DetectOptions opts) {
  switch (cfg.variant) {
    case Variant::kAmp:
      return amp_detect(b, g, cfg, opts);
    case Variant::kNnaAmp:
      return nna_amp_detect(b, g, cfg, opts);
    case Variant::kHfAmp:
      return hf_amp_detect(b, g, cfg, opts);
  }
  throw std::logic_error("unhandled detector variant");
}

}  // namespace ahpq::det
