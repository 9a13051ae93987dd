#pragma once

// Monte Carlo BER sweeps, SNR-loss measurement and profile comparison.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ahpq/detectors.hpp"
#include "ahpq/fixed_point.hpp"
#include "ahpq/fpq_env.hpp"
#include "ahpq/ipq.hpp"
#include "ahpq/mimo_sim.hpp"
#include "ahpq/ppo.hpp"

namespace ahpq::harness {

struct DetectorSpec {
  std::string label;  // "detector" column
  det::DetectorConfig config;  // sigma2/beta are filled in per SNR point
};

/// Per-SNR-point stopping rule. A point stops after the first batch at which
/// every detector has at least min_error_events errors and at least
/// min_frames frames were simulated, or once max_frames is reached.
struct StopRule {
  std::uint64_t min_error_events = 100;
  std::uint64_t min_frames = 0;
  std::uint64_t max_frames = 200000;
  std::uint64_t batch_frames = 250;
};

struct SweepConfig {
  sim::SystemConfig system;
  std::vector<double> snr_db;
  std::vector<DetectorSpec> detectors;
  StopRule stop;
  /// Also report the BER after every intermediate iteration, labelled
  /// "<label>@L<l>".
  bool per_iteration = false;
  int threads = 1;

  void validate() const;
};

struct BerRecord {
  double snr_db = 0.0;
  std::string detector;
  std::string profile;
  std::uint64_t bits = 0;
  std::uint64_t errors = 0;
  double ber = 0.0;
  std::uint64_t seed = 0;
  std::string convention;
};

/// Frames are drawn from sim::stream_for(system.seed, 0, frame) and shared by
/// every detector and every SNR point, so comparisons use common random
/// numbers and the output does not depend on the thread count.
std::vector<BerRecord> ber_sweep(const SweepConfig& cfg);

inline constexpr const char* kCsvHeader = "snr_db,detector,profile,bits,errors,ber,seed,convention";
void write_csv(std::ostream& out, const std::vector<BerRecord>& records);
void write_csv(const std::string& path, const std::vector<BerRecord>& records);
std::vector<BerRecord> read_csv(const std::string& path);

/// (snr_db, ber) points of one detector label, ordered by SNR.
std::vector<std::pair<double, double>> curve(const std::vector<BerRecord>& records,
                                             const std::string& label);

/// SNR at which the curve crosses target_ber, interpolating log10(BER)
/// linearly in dB between the two bracketing points. nullopt when the curve
/// never crosses the target.
std::optional<double> snr_at_ber(const std::vector<std::pair<double, double>>& curve,
                                 double target_ber);

/// snr_at_ber(candidate) - snr_at_ber(reference).
std::optional<double> snr_loss(const std::vector<std::pair<double, double>>& candidate,
                               const std::vector<std::pair<double, double>>& reference,
                               double target_ber = 1e-3);

/// Parses "A:B:STEP" (inclusive) or a single value.
std::vector<double> parse_snr_range(const std::string& spec);

struct ComparisonConfig {
  sim::SystemConfig system;
  std::vector<double> snr_db = {0, 1, 2, 3, 4, 5, 6};
  StopRule stop;
  det::DetectorConfig detector;  // variant, iterations, init; profile ignored
  double target_ber = 1e-3;
  int threads = 1;
  bool simulate = true;  // false: bitwidth table only
};

struct ProfileComparison {
  fxp::QuantProfile a;
  fxp::QuantProfile b;
  fxp::ProfileStats stats_a;
  fxp::ProfileStats stats_b;
  fxp::ProfileStats reduction;  // of a relative to b, percent
  std::optional<double> loss_a;  // dB vs floating point at target BER
  std::optional<double> loss_b;
  std::optional<double> loss_a_vs_b;
  std::vector<BerRecord> records;
};

ProfileComparison compare_profiles(const fxp::QuantProfile& a, const fxp::QuantProfile& b,
                                   const ComparisonConfig& cfg);
std::string format_comparison(const ProfileComparison& c, double target_ber = 1e-3);

/// Integral bits for a fractional profile (widths outside the profile's
/// scope are ignored).
fxp::QuantProfile run_ipq_job(const ipq::IpqConfig& cfg, const fxp::QuantProfile& fractional);

struct FpqJobConfig {
  fpq::EnvConfig env;
  rl::TrainConfig train;
  ipq::IpqConfig ipq;  // system and detector are taken from env
  std::string episode_log;  // JSON lines; empty disables
};

struct FpqJobResult {
  fpq::Widths widths{};
  fxp::QuantProfile fractional;  // 1-p_init-q_k
  fxp::QuantProfile profile;     // after integral-bit selection
  rl::TrainResult training;
  double p_b = 0.0;
};

/// Trains the agent and estimates q_1..q_21; `profile` is left empty.
FpqJobResult run_fpq_training(const FpqJobConfig& cfg);
/// Fills result.profile by integral-bit selection on result.fractional.
/// Throws std::runtime_error("unbounded variable ...") when the widths drive
/// a variable past the p_init range.
void select_integral_bits(const FpqJobConfig& cfg, FpqJobResult& result);
/// run_fpq_training followed by select_integral_bits.
FpqJobResult run_fpq_job(const FpqJobConfig& cfg);

}  // namespace ahpq::harness
