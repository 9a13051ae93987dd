#pragma once

// Message-passing MIMO detectors on the real-valued model: full AMP,
// nearest-neighbour AMP (two candidate levels per element) and the
// hardware-friendly variant with node compression, interval flags,
// shift-add mean selection and piecewise-linear nonlinearities.
//
// All detectors consume b = H^T y and G = H^T H and return x_hat after the
// configured number of iterations. When a quantization profile is set, each
// registered variable is rounded to its 1-p-q format at the point where the
// hardware would produce it.

#include <array>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ahpq/fixed_point.hpp"
#include "ahpq/mimo_sim.hpp"
#include "ahpq/pla.hpp"

namespace ahpq::det {

enum class Variant { kAmp, kNnaAmp, kHfAmp };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);  // "amp" | "nna" | "hf"

/// Initial soft estimate x_hat^(0).
enum class InitMean {
  kEs,    // every element starts at the per-dimension symbol energy
  kZero,  // every element starts at the constellation mean
};

/// Receives every registered variable's value right before it is quantized.
class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void record(int k, double value) = 0;
};

/// Applies a profile's scheme for variable k, or passes values through when
/// no profile is set.
class Quantizer {
 public:
  Quantizer() = default;
  explicit Quantizer(const fxp::QuantProfile* profile, TraceSink* sink = nullptr);

  bool active() const { return active_; }

  double operator()(fxp::Var k, double v) const {
    const int idx = fxp::index(k);
    if (sink_ != nullptr) sink_->record(idx, v);
    return active_ ? schemes_[idx].quantize(v) : v;
  }

  /// Largest value of variable k's format; +inf when inactive.
  double max(fxp::Var k) const {
    return active_ ? schemes_[fxp::index(k)].max() : std::numeric_limits<double>::infinity();
  }

 private:
  bool active_ = false;
  TraceSink* sink_ = nullptr;
  std::array<fxp::QuantScheme, fxp::kNumVariables + 1> schemes_{};
};

struct DetectorConfig {
  Variant variant = Variant::kNnaAmp;
  int iterations = 4;
  double beta = 1.0 / 16.0;
  double sigma2 = 0.1;  // real-model noise variance
  sim::Constellation constellation{16};
  std::optional<fxp::QuantProfile> profile;
  InitMean init_mean = InitMean::kZero;

  // Hardware-friendly variant only.
  PlaFunction pla1 = default_probability_pla();
  PlaFunction pla2 = default_reciprocal_pla();
  double delta_clip = -4.0;  // lower clip bound for the simplified Delta
  /// Use the raw shift-add probability equations (slope 1/2, offset -1/8)
  /// instead of pla1.
  bool literal_probabilities = false;

  void validate() const;
  double initial_mean() const {
    return init_mean == InitMean::kEs ? constellation.es_real() : 0.0;
  }
};

/// Called after each iteration with the 1-based iteration index and x_hat.
using IterationObserver = std::function<void(int, std::span<const double>)>;

struct DetectOptions {
  const IterationObserver* observer = nullptr;
  TraceSink* trace = nullptr;
};

std::vector<double> amp_detect(std::span<const double> b, const Eigen::MatrixXd& g,
                               const DetectorConfig& cfg, DetectOptions opts = {});
std::vector<double> nna_amp_detect(std::span<const double> b, const Eigen::MatrixXd& g,
                                   const DetectorConfig& cfg, DetectOptions opts = {});
std::vector<double> hf_amp_detect(std::span<const double> b, const Eigen::MatrixXd& g,
                                  const DetectorConfig& cfg, DetectOptions opts = {});
/// Dispatches on cfg.variant.
std::vector<double> detect(std::span<const double> b, const Eigen::MatrixXd& g,
                           const DetectorConfig& cfg, DetectOptions opts = {});

/// Nearest and second-nearest level indices. Decision regions are right-open:
/// a value exactly between two levels belongs to the upper one, and a value
/// exactly on a level takes the upper neighbour as runner-up.
struct NearestPair {
  int m1 = 0;
  int m2 = 0;
};
NearestPair nearest_pair(double z, const sim::Constellation& constellation);

struct NnaProbabilities {
  int m1 = 0;  // level indices
  int m2 = 0;
  double a = 0.0;  // omega_m1 + omega_m2
  double s = 0.0;  // omega_m2 - omega_m1
  double delta = 0.0;
  double rho_m1 = 0.0;
  double rho_m2 = 0.0;
};

/// Two-level posterior of element z under Gaussian noise of variance tau.
NnaProbabilities nna_probabilities(double z, double tau,
                                   const sim::Constellation& constellation);

/// 16-QAM region flags. F1F2F3 select (m1, m2) over
/// (-inf,-2) [-2,-1) [-1,0) [0,1) [1,2) [2,inf) as 111 110 010 000 100 101;
/// F4F5 select a_omega in {-4, 0, 4} as 01, 11, 10.
struct IntervalFlags {
  bool f1 = false, f2 = false, f3 = false, f4 = false, f5 = false;
  double omega_m1 = 0.0;
  double omega_m2 = 0.0;
  int a_sign = 0;
};

IntervalFlags interval_flags(double z);

/// omega_m1 rho_m1 and omega_m2 rho_m2 formed with shifts and adds only.
struct MeanTerms {
  double m1 = 0.0;
  double m2 = 0.0;
};
MeanTerms mean_select_terms(const IntervalFlags& f, double rho_m1, double rho_m2);
double mean_select(const IntervalFlags& f, double rho_m1, double rho_m2);

}  // namespace ahpq::det
