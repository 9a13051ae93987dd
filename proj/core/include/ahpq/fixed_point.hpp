#pragma once

// Linear 1-p-q fixed-point quantization and per-variable bit allocations.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ahpq::fxp {

/// Sign bit + p integral bits + q fractional bits. Range [-2^p, 2^p - 2^-q],
/// step 2^-q. Values are carried as doubles; every grid point is exact as
/// long as p + q <= 52.
class QuantScheme {
 public:
  QuantScheme() = default;  // 1-0-0
  QuantScheme(int p, int q);

  int p() const { return p_; }
  int q() const { return q_; }
  double min() const { return min_; }
  double max() const { return max_; }
  double step() const { return step_; }

  /// round(clip(v, min, max) / step) * step, rounding half away from zero.
  /// Infinite inputs saturate.
  double quantize(double v) const {
    const double scaled = (v < min_ ? min_ : (v > max_ ? max_ : v)) * scale_;
    if (scaled != scaled) return scaled;  // NaN passes through
    // |scaled| <= 2^52, so the truncation is exact and so is the remainder.
    auto i = static_cast<std::int64_t>(scaled);
    const double frac = scaled - static_cast<double>(i);
    i += static_cast<std::int64_t>(frac >= 0.5) - static_cast<std::int64_t>(frac <= -0.5);
    return static_cast<double>(i) * step_;
  }

  friend bool operator==(const QuantScheme&, const QuantScheme&) = default;

 private:
  int p_ = 0;
  int q_ = 0;
  double scale_ = 1.0;
  double step_ = 1.0;
  double min_ = -1.0;
  double max_ = 0.0;
};

inline double quantize(double v, const QuantScheme& s) { return s.quantize(v); }

void quantize_vector(std::span<const double> in, std::span<double> out,
                     const QuantScheme& s);
std::vector<double> quantize_vector(std::span<const double> in,
                                    const QuantScheme& s);

/// Detector variables that carry their own bit allocation, numbered 1..21.
enum class Var : int {
  kMatchedFilter = 1,  // b_i
  kGram,               // g_ij
  kNoiseVar,           // sigma_n^2
  kProb,               // rho_i(omega_m)
  kOmegaProb,          // omega_m rho_i(omega_m)
  kMean,               // x_hat_i
  kMeanSq,             // x_hat_i^2
  kOmegaSqProb,        // omega_m^2 rho_i(omega_m)
  kSecondMoment,       // sum_m omega_m^2 rho_i(omega_m)
  kVariance,           // xi_i
  kVarianceSum,        // xi_bar
  kBetaVariance,       // beta xi_bar
  kTau,                // tau
  kInvTau,             // 1 / tau
  kResidual,           // d_i
  kSoftInput,          // z_i
  kGramProduct,        // g_ij x_hat_j
  kGramRowSum,         // sum_j g_ij x_hat_j
  kOnsager,            // beta xi_bar / tau
  kChi,                // z_i / tau
  kDelta,              // Delta_i
};

inline constexpr int kNumVariables = 21;

inline constexpr int index(Var v) { return static_cast<int>(v); }

/// Canonical variable name for k in 1..21 (e.g. "b_i" for k = 1).
std::string_view variable_name(int k);

/// Variables that survive node compression in the hardware-friendly
/// detector.
inline constexpr std::array<int, 14> kHfAmpVariables = {1,  2,  3,  4,  5,  6,  13,
                                                        14, 15, 16, 17, 18, 20, 21};

enum class ProfileOrigin { kUq, kAhpq, kCustom };
/// Which variable set a profile must cover.
enum class ProfileScope { kNnaAmp, kHfAmp };

std::string_view to_string(ProfileOrigin o);
std::string_view to_string(ProfileScope s);

class QuantProfile {
 public:
  QuantProfile() = default;
  explicit QuantProfile(ProfileScope scope, ProfileOrigin origin = ProfileOrigin::kCustom)
      : origin_(origin), scope_(scope) {}

  /// Every variable of the scope set to 1-p-q.
  static QuantProfile uniform(int p, int q, ProfileScope scope = ProfileScope::kNnaAmp);

  void set(int k, QuantScheme s);
  bool has(int k) const { return entries_.at(k - 1).has_value(); }
  /// Throws std::out_of_range for a variable without an allocation.
  const QuantScheme& at(int k) const;
  const QuantScheme& at(Var v) const { return at(index(v)); }

  ProfileOrigin origin() const { return origin_; }
  void set_origin(ProfileOrigin o) { origin_ = o; }
  ProfileScope scope() const { return scope_; }
  std::string id;  // free-form label used in reports

  /// Variable indices required by the scope.
  std::vector<int> required() const;
  bool complete() const;
  /// Throws std::invalid_argument("incomplete profile: ...") if a required
  /// variable is missing.
  void validate() const;

  friend bool operator==(const QuantProfile& a, const QuantProfile& b) {
    return a.entries_ == b.entries_ && a.origin_ == b.origin_ && a.scope_ == b.scope_;
  }

 private:
  std::array<std::optional<QuantScheme>, kNumVariables> entries_{};
  ProfileOrigin origin_ = ProfileOrigin::kCustom;
  ProfileScope scope_ = ProfileScope::kNnaAmp;
};

struct ProfileStats {
  double avg_integral = 0.0;
  double avg_fractional = 0.0;
};

/// Arithmetic means over the entries the profile defines.
ProfileStats profile_stats(const QuantProfile& profile);

/// Relative bitwidth reduction of `candidate` against `baseline`, in percent.
ProfileStats reduction_percent(const QuantProfile& candidate,
                               const QuantProfile& baseline);

// JSON profile files: {"version":1, "origin":"AHPQ", "scope":"nna-amp",
// "variables":[{"k":1,"name":"b_i","p":3,"q":6}, ...]}. "scope" is optional
// and defaults to "nna-amp".
QuantProfile profile_from_json(std::string_view text);
std::string profile_to_json(const QuantProfile& profile);
QuantProfile load_profile(const std::string& path);
void save_profile(const QuantProfile& profile, const std::string& path);

/// Path of a profile shipped under core/assets/profiles.
std::string bundled_profile_path(std::string_view file_name);

}  // namespace ahpq::fxp
