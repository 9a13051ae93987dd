#pragma once

// Narrow-band i.i.d. Rayleigh MIMO link with square QAM, in both its complex
// form and the equivalent real-valued model used by the detectors.

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ahpq::sim {

using Rng = std::mt19937_64;

/// How snr_db maps onto the complex noise variance.
enum class SnrConvention {
  /// Total received signal power over noise power per receive antenna:
  /// noise_var = n_t * Es / (n_r * 10^(snr/10)).
  kReceivedPower,
  /// Per-symbol Es/N0 at the transmitter: noise_var = Es / 10^(snr/10).
  kPerSymbol,
};

std::string_view to_string(SnrConvention c);
SnrConvention parse_snr_convention(std::string_view name);

struct SystemConfig {
  int n_t = 8;
  int n_r = 128;
  int modulation = 16;
  double snr_db = 6.0;
  SnrConvention snr_convention = SnrConvention::kReceivedPower;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument when the antenna counts or QAM order are
  /// unusable.
  void validate() const;
  double beta() const { return static_cast<double>(n_t) / n_r; }
};

/// One real dimension of a square QAM constellation on the odd-integer grid
/// {-(M-1), ..., -1, 1, ..., M-1}, M = sqrt(Q), with a binary-reflected Gray
/// labelling of the ascending levels (16-QAM: 00->-3, 01->-1, 11->1, 10->3).
class Constellation {
 public:
  explicit Constellation(int qam_order = 16);

  int order() const { return order_; }
  int size() const { return static_cast<int>(levels_.size()); }
  int bits_per_dim() const { return bits_per_dim_; }
  std::span<const double> levels() const { return levels_; }
  double level(int index) const { return levels_[index]; }

  /// Mean energy per real dimension (5 for 16-QAM).
  double es_real() const { return es_real_; }
  /// Mean energy per complex symbol (10 for 16-QAM).
  double es_complex() const { return 2.0 * es_real_; }

  int label_of(int level_index) const { return gray_[level_index]; }
  int index_of_label(int label) const { return inverse_gray_[label]; }

  /// Nearest level index. Exact midpoints go to the smaller level.
  int nearest_index(double v) const;

 private:
  int order_;
  int bits_per_dim_;
  double es_real_;
  std::vector<double> levels_;
  std::vector<int> gray_;
  std::vector<int> inverse_gray_;
};

struct MimoInstance {
  Eigen::MatrixXd h_real;  // 2n_r x 2n_t
  Eigen::VectorXd x;       // 2n_t, [Re; Im]
  std::vector<std::uint8_t> bits;
  Eigen::VectorXd y;  // 2n_r
  Eigen::VectorXd b;  // H^T y
  Eigen::MatrixXd g;  // H^T H
  double sigma2_real = 0.0;
};

struct BitErrorCount {
  std::uint64_t errors = 0;
  std::uint64_t total = 0;
};

/// Complex n_r x n_t channel with CN(0, 1/n_r) entries.
Eigen::MatrixXcd generate_channel(const SystemConfig& cfg, Rng& rng);

/// [[Re H, -Im H], [Im H, Re H]].
Eigen::MatrixXd to_real(const Eigen::MatrixXcd& h);
/// [Re v; Im v].
Eigen::VectorXd to_real(const Eigen::VectorXcd& v);

/// Maps bits_per_dim() Gray-coded bits (MSB first) per real dimension.
/// Throws std::invalid_argument if the bit count is not a multiple of it.
Eigen::VectorXd modulate(std::span<const std::uint8_t> bits,
                         const Constellation& constellation);

/// Hard decision followed by Gray demapping.
std::vector<std::uint8_t> demodulate(std::span<const double> x,
                                     const Constellation& constellation);

/// Complex-model noise variance sigma_bar^2; the real-model variance is half
/// of it.
double snr_to_noise_var(const SystemConfig& cfg,
                        const Constellation& constellation);

MimoInstance simulate_frame(const SystemConfig& cfg,
                            const Constellation& constellation, Rng& rng);

BitErrorCount count_bit_errors(std::span<const double> x_hat,
                               std::span<const std::uint8_t> bits,
                               const Constellation& constellation);

/// SplitMix64 finaliser.
std::uint64_t mix64(std::uint64_t v);

/// Independent stream for work item `index` of logical stream `stream`:
/// seeded with mix64(master ^ mix64(stream * 0x9E3779B97F4A7C15 + index)).
/// Frame i of a sweep always uses stream_for(seed, 0, i) so results do not
/// depend on how frames are scheduled across threads.
Rng stream_for(std::uint64_t master, std::uint64_t stream, std::uint64_t index);

}  // namespace ahpq::sim
