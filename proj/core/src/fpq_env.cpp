#include "ahpq/fpq_env.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace ahpq::fpq {

std::string_view to_string(Pairing p) {
  switch (p) {
    case Pairing::kFixedBank:
      return "bank";
    case Pairing::kFreshPaired:
      return "paired";
    case Pairing::kIndependent:
      return "independent";
  }
  return "?";
}

Pairing parse_pairing(std::string_view name) {
  if (name == "bank") return Pairing::kFixedBank;
  if (name == "paired") return Pairing::kFreshPaired;
  if (name == "independent") return Pairing::kIndependent;
  throw std::invalid_argument("unknown pairing '" + std::string(name) +
                              "' (expected bank, paired or independent)");
}

void EnvConfig::validate() const {
  if (q_max < 1) throw std::invalid_argument("q_max must be >= 1");
  if (l_a < 1 || l_a > q_max / 2) throw std::invalid_argument("need 1 <= l_a <= q_max / 2");
  if (n_ext < 1 || n_ext > kNumAll) throw std::invalid_argument("need 1 <= n_ext <= 21");
  if (!(eps2 >= 0.0)) throw std::invalid_argument("eps2 must be >= 0");
  if (eval_bits == 0) throw std::invalid_argument("eval_bits must be > 0");
  if (max_timestep < 1) throw std::invalid_argument("max_timestep must be >= 1");
  if (p_init < 0 || p_init + q_max > 52) throw std::invalid_argument("bad p_init");
  if (p_b < 0.0) throw std::invalid_argument("p_b must be >= 0");
  if (detector.variant != det::Variant::kNnaAmp) {
    throw std::invalid_argument("the fractional-bit search runs on NNA-AMP");
  }
  system.validate();
}

std::vector<double> encode_state(int k, int q_k, const EnvConfig& cfg) {
  if (k < 1 || k > kNumAll) throw std::invalid_argument("k out of range");
  if (q_k < 0 || q_k > cfg.q_max) throw std::invalid_argument("q_k out of range");
  std::vector<double> v(static_cast<std::size_t>(cfg.state_dim()), 0.0);
  v[k - 1] = 1.0;
  v[kNumAll + q_k] = 1.0;
  return v;
}

std::pair<int, int> decode_state(const std::vector<double>& v, const EnvConfig& cfg) {
  if (static_cast<int>(v.size()) != cfg.state_dim()) {
    throw std::invalid_argument("state vector has the wrong length");
  }
  auto hot = [&](int from, int to) {
    int found = -1;
    for (int i = from; i < to; ++i) {
      if (v[i] == 1.0) {
        if (found >= 0) throw std::invalid_argument("state block is not one-hot");
        found = i - from;
      } else if (v[i] != 0.0) {
        throw std::invalid_argument("state block is not one-hot");
      }
    }
    if (found < 0) throw std::invalid_argument("state block is not one-hot");
    return found;
  };
  return {hot(0, kNumAll) + 1, hot(kNumAll, cfg.state_dim())};
}

int apply_action(int q_k, int a, const EnvConfig& cfg) {
  if (a < -cfg.l_a || a > cfg.l_a) throw std::invalid_argument("action outside [-l_a, l_a]");
  const int m = cfg.q_max + 1;
  return ((q_k + a) % m + m) % m;
}

double reward_value(double relative_error, double q_bar, const EnvConfig& cfg) {
  if (relative_error > cfg.eps2) return -1.0;
  return cfg.theta1 * std::exp(-cfg.theta2 * q_bar / cfg.q_max);
}

double average_width(const Widths& q, const std::vector<int>& extracted) {
  if (extracted.empty()) throw std::invalid_argument("empty extracted set");
  double sum = 0.0;
  for (const int k : extracted) sum += q[k - 1];
  return sum / static_cast<double>(extracted.size());
}

fxp::QuantProfile widths_profile(const Widths& q, int p_init) {
  fxp::QuantProfile profile(fxp::ProfileScope::kNnaAmp, fxp::ProfileOrigin::kCustom);
  for (int k = 1; k <= kNumAll; ++k) profile.set(k, fxp::QuantScheme(p_init, q[k - 1]));
  return profile;
}

namespace {

det::DetectorConfig operating_detector(const EnvConfig& cfg, const sim::Constellation& c) {
  det::DetectorConfig d = cfg.detector;
  d.sigma2 = sim::snr_to_noise_var(cfg.system, c) / 2.0;
  d.beta = cfg.system.beta();
  d.constellation = c;
  d.profile.reset();
  return d;
}

std::uint64_t frames_for(std::uint64_t bits, const sim::SystemConfig& s, const sim::Constellation& c) {
  const auto per_frame = static_cast<std::uint64_t>(2 * s.n_t * c.bits_per_dim());
  return (bits + per_frame - 1) / per_frame;
}

std::uint64_t frame_errors(const sim::MimoInstance& frame, const det::DetectorConfig& d,
                           const sim::Constellation& c) {
  const std::span<const double> b(frame.b.data(), static_cast<std::size_t>(frame.b.size()));
  return sim::count_bit_errors(det::detect(b, frame.g, d), frame.bits, c).errors;
}

}  // namespace

double precompute_pb(const EnvConfig& cfg, std::uint64_t n_bits, std::uint64_t stream) {
  if (n_bits == 0) throw std::invalid_argument("n_bits must be > 0");
  const sim::Constellation c(cfg.system.modulation);
  const det::DetectorConfig d = operating_detector(cfg, c);
  const std::uint64_t frames = frames_for(n_bits, cfg.system, c);
  std::uint64_t errors = 0;
  std::uint64_t bits = 0;
  for (std::uint64_t f = 0; f < frames; ++f) {
    sim::Rng rng = sim::stream_for(cfg.seed, stream, f);
    const sim::MimoInstance frame = sim::simulate_frame(cfg.system, c, rng);
    errors += frame_errors(frame, d, c);
    bits += frame.bits.size();
  }
  return static_cast<double>(errors) / static_cast<double>(bits);
}

GateResult evaluate_gate(const fxp::QuantProfile& profile, const EnvConfig& cfg,
                         std::uint64_t n_bits, std::uint64_t stream) {
  if (!(cfg.p_b > 0.0)) throw std::invalid_argument("p_b must be > 0");
  const sim::Constellation c(cfg.system.modulation);
  const det::DetectorConfig fl = operating_detector(cfg, c);
  det::DetectorConfig qd = fl;
  qd.profile = profile;
  GateResult r;
  const std::uint64_t frames = frames_for(n_bits, cfg.system, c);
  for (std::uint64_t f = 0; f < frames; ++f) {
    sim::Rng rng = sim::stream_for(cfg.seed, stream, f);
    const sim::MimoInstance frame = sim::simulate_frame(cfg.system, c, rng);
    r.errors_float += frame_errors(frame, fl, c);
    r.errors_quant += frame_errors(frame, qd, c);
    r.bits += frame.bits.size();
  }
  r.relative_error = (static_cast<double>(r.errors_quant) - static_cast<double>(r.errors_float)) /
                     (static_cast<double>(r.bits) * cfg.p_b);
  r.passed = r.relative_error <= cfg.eps2;
  return r;
}

struct FpqEnv::Bank {
  std::vector<sim::MimoInstance> frames;
  std::uint64_t bits = 0;
  std::uint64_t errors_float = 0;
};

namespace {
// Stream ids; 0 is reserved for BER sweeps and 1 for IPQ traces.
constexpr std::uint64_t kPbStream = 2;
constexpr std::uint64_t kBankStream = 3;
constexpr std::uint64_t kFreshStream = 4;
constexpr std::uint64_t kFreshQuantStream = 5;
constexpr std::uint64_t kEnvRngStream = 6;
}  // namespace

FpqEnv::FpqEnv(EnvConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  rng_ = sim::stream_for(cfg_.seed, kEnvRngStream, 0);
  if (cfg_.p_b == 0.0) {
    const std::uint64_t bits = cfg_.p_b_bits != 0 ? cfg_.p_b_bits : 2000000;
    cfg_.p_b = precompute_pb(cfg_, bits, kPbStream);
    if (!(cfg_.p_b > 0.0)) {
      throw std::runtime_error("reference BER is zero at the operating SNR; raise p_b_bits");
    }
  }
  if (cfg_.pairing == Pairing::kFixedBank) {
    bank_ = std::make_unique<Bank>();
    const sim::Constellation c(cfg_.system.modulation);
    const det::DetectorConfig fl = operating_detector(cfg_, c);
    const std::uint64_t frames = frames_for(cfg_.eval_bits, cfg_.system, c);
    bank_->frames.reserve(frames);
    for (std::uint64_t f = 0; f < frames; ++f) {
      sim::Rng rng = sim::stream_for(cfg_.seed, kBankStream, f);
      sim::MimoInstance frame = sim::simulate_frame(cfg_.system, c, rng);
      // Only b, G and the bits are needed later.
      frame.h_real.resize(0, 0);
      frame.y.resize(0);
      bank_->errors_float += frame_errors(frame, fl, c);
      bank_->bits += frame.bits.size();
      bank_->frames.push_back(std::move(frame));
    }
  }
  state_.q.fill(cfg_.q_max);
  state_.done = true;
}

FpqEnv::~FpqEnv() = default;

double FpqEnv::relative_error(const Widths& q) {
  ++evaluations_;
  const sim::Constellation c(cfg_.system.modulation);
  const det::DetectorConfig fl = operating_detector(cfg_, c);
  det::DetectorConfig qd = fl;
  qd.profile = widths_profile(q, cfg_.p_init);
  const double scale = cfg_.p_b;

  if (bank_) {
    if (const auto it = cache_.find(q); it != cache_.end()) {
      ++cache_hits_;
      return it->second;
    }
    const double bits = static_cast<double>(bank_->bits);
    // Quantized errors only grow, so the gate is settled as soon as they
    // pass this count. The stored value is then a lower bound.
    const double limit = static_cast<double>(bank_->errors_float) + cfg_.eps2 * bits * scale;
    std::uint64_t errors = 0;
    for (const sim::MimoInstance& frame : bank_->frames) {
      errors += frame_errors(frame, qd, c);
      if (static_cast<double>(errors) > limit) break;
    }
    const double rel =
        (static_cast<double>(errors) - static_cast<double>(bank_->errors_float)) / (bits * scale);
    cache_.emplace(q, rel);
    return rel;
  }

  const std::uint64_t frames = frames_for(cfg_.eval_bits, cfg_.system, c);
  const std::uint64_t base = fresh_index_ * frames;
  ++fresh_index_;
  std::uint64_t ef = 0;
  std::uint64_t eq = 0;
  std::uint64_t bits = 0;
  for (std::uint64_t f = 0; f < frames; ++f) {
    sim::Rng rng = sim::stream_for(cfg_.seed, kFreshStream, base + f);
    const sim::MimoInstance frame = sim::simulate_frame(cfg_.system, c, rng);
    ef += frame_errors(frame, fl, c);
    bits += frame.bits.size();
    if (cfg_.pairing == Pairing::kFreshPaired) {
      eq += frame_errors(frame, qd, c);
    } else {
      sim::Rng rng_q = sim::stream_for(cfg_.seed, kFreshQuantStream, base + f);
      eq += frame_errors(sim::simulate_frame(cfg_.system, c, rng_q), qd, c);
    }
  }
  return (static_cast<double>(eq) - static_cast<double>(ef)) / (static_cast<double>(bits) * scale);
}

double FpqEnv::evaluate_reward(const Widths& q, const std::vector<int>& extracted) {
  return reward_value(relative_error(q), average_width(q, extracted), cfg_);
}

std::vector<double> FpqEnv::reset() {
  std::vector<int> all(kNumAll);
  for (int k = 1; k <= kNumAll; ++k) all[k - 1] = k;
  state_ = EnvState{};
  state_.extracted.reserve(cfg_.n_ext);
  std::sample(all.begin(), all.end(), std::back_inserter(state_.extracted), cfg_.n_ext, rng_);
  state_.q.fill(cfg_.q_max);
  std::uniform_int_distribution<std::size_t> pick(0, state_.extracted.size() - 1);
  state_.k = state_.extracted[pick(rng_)];
  ++episode_;
  return encode_state(state_.k, state_.q[state_.k - 1], cfg_);
}

rl::Environment::Step FpqEnv::step(int action) {
  if (state_.done) throw std::logic_error("step on a finished episode; call reset()");
  if (action < 0 || action >= cfg_.action_count()) {
    throw std::invalid_argument("action index out of range");
  }
  const int a = action - cfg_.l_a;
  const int k = state_.k;
  state_.q[k - 1] = apply_action(state_.q[k - 1], a, cfg_);
  const double reward = evaluate_reward(state_.q, state_.extracted);

  if (log_ != nullptr) {
    nlohmann::json rec = {{"episode", episode_}, {"t", state_.t}, {"k", k},
                          {"q_vector", state_.q}, {"action", a}, {"reward", reward}};
    *log_ << rec.dump() << '\n';
  }

  ++state_.t;
  std::uniform_int_distribution<std::size_t> pick(0, state_.extracted.size() - 1);
  state_.k = state_.extracted[pick(rng_)];
  state_.done = state_.t >= cfg_.max_timestep;
  return {encode_state(state_.k, state_.q[state_.k - 1], cfg_), reward, state_.done};
}

}  // namespace ahpq::fpq
