#include "ahpq/fixed_point.hpp"

#include <stdexcept>
#include <string>

namespace ahpq::fxp {

QuantScheme::QuantScheme(int p, int q) : p_(p), q_(q) {
  if (p < 0 || q < 0) throw std::invalid_argument("bit counts must be >= 0");
  if (p + q > 52) throw std::invalid_argument("p + q must be <= 52");
  scale_ = std::ldexp(1.0, q);
  step_ = std::ldexp(1.0, -q);
  min_ = -std::ldexp(1.0, p);
  max_ = std::ldexp(1.0, p) - step_;
}

void quantize_vector(std::span<const double> in, std::span<double> out,
                     const QuantScheme& s) {
  if (in.size() != out.size()) throw std::invalid_argument("length mismatch");
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = s.quantize(in[i]);
}

std::vector<double> quantize_vector(std::span<const double> in,
                                    const QuantScheme& s) {
  std::vector<double> out(in.size());
  quantize_vector(in, out, s);
  return out;
}

namespace {

constexpr std::array<std::string_view, kNumVariables> kNames = {
    "b_i",       "g_ij",         "sigma2_n",         "rho_i",       "omega_rho",
    "x_hat_i",   "x_hat_sq",     "omega_sq_rho",     "sum_omega_sq_rho",
    "xi_i",      "xi_bar",       "beta_xi_bar",      "tau",         "inv_tau",
    "d_i",       "z_i",          "g_x_hat",          "sum_g_x_hat", "beta_xi_bar_over_tau",
    "chi_i",     "delta_i",
};

}  // namespace

std::string_view variable_name(int k) {
  if (k < 1 || k > kNumVariables) throw std::out_of_range("variable index out of range");
  return kNames[k - 1];
}

std::string_view to_string(ProfileOrigin o) {
  switch (o) {
    case ProfileOrigin::kUq:
      return "UQ";
    case ProfileOrigin::kAhpq:
      return "AHPQ";
    case ProfileOrigin::kCustom:
      return "custom";
  }
  return "custom";
}

std::string_view to_string(ProfileScope s) {
  return s == ProfileScope::kHfAmp ? "hf-amp" : "nna-amp";
}

QuantProfile QuantProfile::uniform(int p, int q, ProfileScope scope) {
  QuantProfile profile(scope, ProfileOrigin::kUq);
  for (int k : profile.required()) profile.set(k, QuantScheme(p, q));
  profile.id = "UQ 1-" + std::to_string(p) + "-" + std::to_string(q);
  return profile;
}

void QuantProfile::set(int k, QuantScheme s) {
  if (k < 1 || k > kNumVariables) throw std::out_of_range("variable index out of range");
  entries_[k - 1] = s;
}

const QuantScheme& QuantProfile::at(int k) const {
  const auto& e = entries_.at(k - 1);
  if (!e) {
    throw std::out_of_range("profile has no allocation for k=" + std::to_string(k) +
                            " (" + std::string(variable_name(k)) + ")");
  }
  return *e;
}

std::vector<int> QuantProfile::required() const {
  if (scope_ == ProfileScope::kHfAmp) {
    return {kHfAmpVariables.begin(), kHfAmpVariables.end()};
  }
  std::vector<int> all(kNumVariables);
  for (int k = 1; k <= kNumVariables; ++k) all[k - 1] = k;
  return all;
}

bool QuantProfile::complete() const {
  for (int k : required()) {
    if (!has(k)) return false;
  }
  return true;
}

void QuantProfile::validate() const {
  for (int k : required()) {
    if (!has(k)) {
      throw std::invalid_argument("incomplete profile: missing k=" + std::to_string(k));
    }
  }
}

ProfileStats profile_stats(const QuantProfile& profile) {
  ProfileStats stats;
  int n = 0;
  for (int k = 1; k <= kNumVariables; ++k) {
    if (!profile.has(k)) continue;
    stats.avg_integral += profile.at(k).p();
    stats.avg_fractional += profile.at(k).q();
    ++n;
  }
  if (n == 0) throw std::invalid_argument("empty profile");
  stats.avg_integral /= n;
  stats.avg_fractional /= n;
  return stats;
}

ProfileStats reduction_percent(const QuantProfile& candidate,
                               const QuantProfile& baseline) {
  const ProfileStats c = profile_stats(candidate);
  const ProfileStats b = profile_stats(baseline);
  auto pct = [](double cand, double base) {
    return base == 0.0 ? 0.0 : 100.0 * (base - cand) / base;
  };
  return {pct(c.avg_integral, b.avg_integral), pct(c.avg_fractional, b.avg_fractional)};
}

}  // namespace ahpq::fxp
