#pragma once

// Reinforcement-learning environment for fractional-bit search. The agent
// sees (k, q_k) one-hot encoded, nudges q_k by an action in [-l_a, l_a] with
// circular wrap, and is rewarded for a low average width as long as the
// quantized detector's BER stays within eps2 of floating point.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <vector>

#include "ahpq/detectors.hpp"
#include "ahpq/fixed_point.hpp"
#include "ahpq/mimo_sim.hpp"

namespace ahpq::rl {

/// Minimal episodic environment used by the PPO trainer.
class Environment {
 public:
  struct Step {
    std::vector<double> state;
    double reward = 0.0;
    bool done = false;
  };

  virtual ~Environment() = default;
  virtual int state_dim() const = 0;
  virtual int action_count() const = 0;
  virtual std::vector<double> reset() = 0;
  virtual Step step(int action) = 0;
};

}  // namespace ahpq::rl

namespace ahpq::fpq {

inline constexpr int kNumAll = fxp::kNumVariables;

using Widths = std::array<int, kNumAll>;  // q_1..q_21 at index k-1

/// How the floating and quantized BERs of one reward evaluation are drawn.
enum class Pairing {
  /// A fixed bank of frames shared by every evaluation. Rewards become a
  /// deterministic function of the widths and are memoized.
  kFixedBank,
  /// Fresh frames per evaluation, shared by both detectors.
  kFreshPaired,
  /// Fresh, separate frames for each detector.
  kIndependent,
};

std::string_view to_string(Pairing p);
Pairing parse_pairing(std::string_view name);  // "bank" | "paired" | "independent"

struct EnvConfig {
  int q_max = 10;
  int l_a = 2;
  int n_ext = 5;
  double eps2 = 0.5;
  double theta1 = 10.0;
  double theta2 = 4.0;
  std::uint64_t eval_bits = 200000;
  int max_timestep = 20;
  int p_init = 12;
  /// Reference BER at the operating SNR; 0 means "compute on construction".
  double p_b = 0.0;
  std::uint64_t p_b_bits = 0;  // 0: max(2e6, 100 / rough BER)
  Pairing pairing = Pairing::kFixedBank;

  sim::SystemConfig system;      // snr_db is the operating SNR; default 6 dB
  det::DetectorConfig detector;  // NNA-AMP, 4 iterations
  std::uint64_t seed = 1;

  int state_dim() const { return kNumAll + q_max + 1; }
  int action_count() const { return 2 * l_a + 1; }
  void validate() const;
};

struct EnvState {
  int k = 1;
  Widths q{};
  std::vector<int> extracted;  // S_ext, ascending
  int t = 0;
  bool done = false;
};

/// oh[k] || oh[q_k].
std::vector<double> encode_state(int k, int q_k, const EnvConfig& cfg);
/// Inverse of encode_state; throws std::invalid_argument on a malformed vector.
std::pair<int, int> decode_state(const std::vector<double>& v, const EnvConfig& cfg);

/// (q_k + a) mod (q_max + 1), result in [0, q_max].
int apply_action(int q_k, int a, const EnvConfig& cfg);

/// theta1 exp(-theta2 q_bar / q_max), or -1 when the relative BER increase
/// exceeds eps2.
double reward_value(double relative_error, double q_bar, const EnvConfig& cfg);

/// Mean q over the extracted variables.
double average_width(const Widths& q, const std::vector<int>& extracted);

/// Profile with every NNA-AMP variable at 1-p_init-q_k.
fxp::QuantProfile widths_profile(const Widths& q, int p_init);

/// Floating-point NNA-AMP BER at the operating SNR over at least n_bits bits.
double precompute_pb(const EnvConfig& cfg, std::uint64_t n_bits, std::uint64_t stream = 2);

struct GateResult {
  std::uint64_t bits = 0;
  std::uint64_t errors_float = 0;
  std::uint64_t errors_quant = 0;
  double relative_error = 0.0;  // (errors_quant - errors_float) / (bits p_b)
  bool passed = false;
};

/// Fresh-frame stream for re-checking a finished profile.
inline constexpr std::uint64_t kGateStream = 9;

/// Paired floating/quantized evaluation of `profile` on n_bits of fresh
/// frames; passed when relative_error <= eps2.
GateResult evaluate_gate(const fxp::QuantProfile& profile, const EnvConfig& cfg,
                         std::uint64_t n_bits, std::uint64_t stream);

class FpqEnv final : public rl::Environment {
 public:
  explicit FpqEnv(EnvConfig cfg);
  ~FpqEnv() override;

  const EnvConfig& config() const { return cfg_; }
  const EnvState& state() const { return state_; }
  double p_b() const { return cfg_.p_b; }

  int state_dim() const override { return cfg_.state_dim(); }
  int action_count() const override { return cfg_.action_count(); }
  std::vector<double> reset() override;
  /// `action` indexes [-l_a, l_a]. Throws std::logic_error once done.
  Step step(int action) override;

  /// Reward for a full width vector with the episode's extracted set.
  double evaluate_reward(const Widths& q, const std::vector<int>& extracted);
  /// Relative BER error of the widths under the configured pairing.
  double relative_error(const Widths& q);

  /// Appends one JSON line per step to `out` (not owned; nullptr disables).
  void set_log(std::ostream* out) { log_ = out; }

  std::uint64_t evaluations() const { return evaluations_; }
  std::uint64_t cache_hits() const { return cache_hits_; }

 private:
  struct Bank;

  EnvConfig cfg_;
  EnvState state_;
  sim::Rng rng_;
  std::uint64_t episode_ = 0;
  std::uint64_t fresh_index_ = 0;
  std::uint64_t evaluations_ = 0;
  std::uint64_t cache_hits_ = 0;
  std::unique_ptr<Bank> bank_;
  std::map<Widths, double> cache_;  // relative error by widths (bank mode)
  std::ostream* log_ = nullptr;
};

}  // namespace ahpq::fpq
