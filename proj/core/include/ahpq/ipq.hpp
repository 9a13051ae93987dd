#pragma once

// Integral-bit selection from Monte Carlo value statistics: for each
// variable, the smallest p whose 1-p-q range leaves at most a fraction eps1
// of the observed samples outside.

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "ahpq/detectors.hpp"
#include "ahpq/fixed_point.hpp"
#include "ahpq/mimo_sim.hpp"

namespace ahpq::ipq {

inline constexpr int kDefaultPInit = 12;

/// Streaming statistics of one variable at a fixed fractional width q.
/// Keeps exact out-of-range counters for every candidate p in [0, p_cap] and
/// a bounded, mergeable sample of the values (bottom-k by value hash).
class VariableTrace {
 public:
  VariableTrace() : VariableTrace(0, 0) {}
  VariableTrace(int k, int q, int p_cap = kDefaultPInit, std::size_t reservoir = 1024);

  int k() const { return k_; }
  int q() const { return q_; }
  int p_cap() const { return p_cap_; }
  std::uint64_t count() const { return count_; }
  double min() const { return min_; }
  double max() const { return max_; }

  void add(double v);
  /// Associative, commutative; both traces must share k, q and p_cap.
  void merge(const VariableTrace& other);

  /// Samples outside [-2^p, 2^p - 2^-q].
  std::uint64_t exceedances(int p) const;
  double exceedance_fraction(int p) const;
  std::vector<double> samples() const;

 private:
  int k_;
  int q_;
  int p_cap_;
  std::size_t reservoir_cap_;
  std::uint64_t count_ = 0;
  double min_;
  double max_;
  std::vector<std::uint64_t> below_;  // v < -2^p
  std::vector<std::uint64_t> above_;  // v > 2^p - 2^-q
  std::vector<std::pair<std::uint64_t, double>> reservoir_;  // heap on hash
};

/// Smallest p in [0, p_cap] with exceedance fraction <= eps1. Throws
/// std::runtime_error("unbounded variable ...") if none qualifies and
/// std::invalid_argument for an empty trace or eps1 outside [0, 1).
int integral_bits(const VariableTrace& trace, double eps1);
int integral_bits(std::span<const double> samples, int q, double eps1,
                  int p_cap = kDefaultPInit);

/// One trace per variable, k = 1..21 at index k-1.
using TraceSet = std::array<VariableTrace, fxp::kNumVariables>;

/// TraceSink that feeds a TraceSet.
class TraceCollector final : public det::TraceSink {
 public:
  explicit TraceCollector(TraceSet& traces) : traces_(traces) {}
  void record(int k, double value) override { traces_[k - 1].add(value); }

 private:
  TraceSet& traces_;
};

struct IpqConfig {
  sim::SystemConfig system;  // snr_db is the collection SNR
  /// When non-empty, statistics are pooled over these SNR points instead.
  std::vector<double> pooled_snr_db;
  det::DetectorConfig detector;  // variant, iterations, init; profile replaced
  std::uint64_t n_frames = 2000;  // per SNR point
  double eps1 = 1e-4;
  int p_init = kDefaultPInit;
  /// Lower bound applied to every emitted p.
  int p_floor = 1;
  std::size_t reservoir = 1024;
  int threads = 1;

  void validate() const;
};

/// Runs the detector with every variable at 1-p_init-q_k (q_k taken from
/// `fractional`) and records each registered variable before quantization.
TraceSet collect_traces(const IpqConfig& cfg, const fxp::QuantProfile& fractional);

/// collect_traces followed by integral_bits for every variable in the
/// fractional profile's scope. The result keeps the q widths of
/// `fractional`.
fxp::QuantProfile run_ipq(const IpqConfig& cfg, const fxp::QuantProfile& fractional);

/// p selection on already collected traces.
fxp::QuantProfile assemble_profile(const TraceSet& traces, const fxp::QuantProfile& fractional,
                                   double eps1, int p_floor);

}  // namespace ahpq::ipq
