#include "ahpq/mimo_sim.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include <boost/random/normal_distribution.hpp>

namespace ahpq::sim {

std::string_view to_string(SnrConvention c) {
  switch (c) {
    case SnrConvention::kReceivedPower:
      return "rx_power";
    case SnrConvention::kPerSymbol:
      return "per_symbol";
  }
  return "unknown";
}

SnrConvention parse_snr_convention(std::string_view name) {
  if (name == "rx_power") return SnrConvention::kReceivedPower;
  if (name == "per_symbol") return SnrConvention::kPerSymbol;
  throw std::invalid_argument("unknown SNR convention: " + std::string(name));
}

void SystemConfig::validate() const {
  if (n_t < 1) throw std::invalid_argument("n_t must be >= 1");
  if (n_r < n_t) throw std::invalid_argument("n_r must be >= n_t");
  const int side = static_cast<int>(std::lround(std::sqrt(modulation)));
  if (modulation < 4 || side * side != modulation ||
      !std::has_single_bit(static_cast<unsigned>(modulation)) ||
      std::countr_zero(static_cast<unsigned>(modulation)) % 2 != 0) {
    throw std::invalid_argument("modulation must be a power of 4 (>= 4)");
  }
  if (!std::isfinite(snr_db)) throw std::invalid_argument("snr_db must be finite");
}

Constellation::Constellation(int qam_order) : order_(qam_order) {
  SystemConfig probe;
  probe.modulation = qam_order;
  probe.validate();
  const int side = static_cast<int>(std::lround(std::sqrt(qam_order)));
  bits_per_dim_ = std::countr_zero(static_cast<unsigned>(side));
  levels_.resize(side);
  gray_.resize(side);
  inverse_gray_.resize(side);
  double energy = 0.0;
  for (int i = 0; i < side; ++i) {
    levels_[i] = 2.0 * i - (side - 1);
    energy += levels_[i] * levels_[i];
    gray_[i] = i ^ (i >> 1);
    inverse_gray_[gray_[i]] = i;
  }
  es_real_ = energy / side;
}

int Constellation::nearest_index(double v) const {
  // Decision thresholds sit at the even integers between the odd levels.
  const int side = size();
  const double pos = (v + (side - 1)) / 2.0;  // level i sits at pos == i
  // Round half down so the midpoint goes to the smaller level.
  int idx = static_cast<int>(std::ceil(pos - 0.5));
  if (idx < 0) idx = 0;
  if (idx > side - 1) idx = side - 1;
  return idx;
}

Eigen::MatrixXcd generate_channel(const SystemConfig& cfg, Rng& rng) {
  boost::random::normal_distribution<double> normal(
      0.0, std::sqrt(0.5 / cfg.n_r));
  Eigen::MatrixXcd h(cfg.n_r, cfg.n_t);
  for (Eigen::Index c = 0; c < h.cols(); ++c) {
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
      const double re = normal(rng);
      const double im = normal(rng);
      h(r, c) = {re, im};
    }
  }
  return h;
}

Eigen::MatrixXd to_real(const Eigen::MatrixXcd& h) {
  const Eigen::Index rows = h.rows();
  const Eigen::Index cols = h.cols();
  Eigen::MatrixXd out(2 * rows, 2 * cols);
  out.topLeftCorner(rows, cols) = h.real();
  out.topRightCorner(rows, cols) = -h.imag();
  out.bottomLeftCorner(rows, cols) = h.imag();
  out.bottomRightCorner(rows, cols) = h.real();
  return out;
}

Eigen::VectorXd to_real(const Eigen::VectorXcd& v) {
  Eigen::VectorXd out(2 * v.size());
  out.head(v.size()) = v.real();
  out.tail(v.size()) = v.imag();
  return out;
}

Eigen::VectorXd modulate(std::span<const std::uint8_t> bits,
                         const Constellation& constellation) {
  const int bpd = constellation.bits_per_dim();
  if (bits.size() % bpd != 0) {
    throw std::invalid_argument("bit count " + std::to_string(bits.size()) +
                                " is not a multiple of " + std::to_string(bpd));
  }
  Eigen::VectorXd x(static_cast<Eigen::Index>(bits.size() / bpd));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    int label = 0;
    for (int k = 0; k < bpd; ++k) label = (label << 1) | (bits[i * bpd + k] & 1);
    x[i] = constellation.level(constellation.index_of_label(label));
  }
  return x;
}

std::vector<std::uint8_t> demodulate(std::span<const double> x,
                                     const Constellation& constellation) {
  const int bpd = constellation.bits_per_dim();
  std::vector<std::uint8_t> bits(x.size() * bpd);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int label = constellation.label_of(constellation.nearest_index(x[i]));
    for (int k = 0; k < bpd; ++k) {
      bits[i * bpd + k] = static_cast<std::uint8_t>((label >> (bpd - 1 - k)) & 1);
    }
  }
  return bits;
}

double snr_to_noise_var(const SystemConfig& cfg,
                        const Constellation& constellation) {
  const double snr = std::pow(10.0, cfg.snr_db / 10.0);
  switch (cfg.snr_convention) {
    case SnrConvention::kReceivedPower:
      return cfg.n_t * constellation.es_complex() / (cfg.n_r * snr);
    case SnrConvention::kPerSymbol:
      return constellation.es_complex() / snr;
  }
  throw std::logic_error("unhandled SNR convention");
}

MimoInstance simulate_frame(const SystemConfig& cfg,
                            const Constellation& constellation, Rng& rng) {
  const int n_bits = 2 * cfg.n_t * constellation.bits_per_dim();
  MimoInstance frame;
  frame.bits.resize(n_bits);
  std::uint64_t word = 0;
  for (int i = 0; i < n_bits; ++i) {
    if (i % 64 == 0) word = rng();
    frame.bits[i] = static_cast<std::uint8_t>((word >> (i % 64)) & 1u);
  }
  frame.x = modulate(frame.bits, constellation);
  frame.h_real = to_real(generate_channel(cfg, rng));

  frame.sigma2_real = snr_to_noise_var(cfg, constellation) / 2.0;
  frame.y = frame.h_real * frame.x;
  if (frame.sigma2_real > 0.0) {
    boost::random::normal_distribution<double> normal(
        0.0, std::sqrt(frame.sigma2_real));
    for (Eigen::Index i = 0; i < frame.y.size(); ++i) frame.y[i] += normal(rng);
  }
  frame.b.noalias() = frame.h_real.transpose() * frame.y;
  frame.g.noalias() = frame.h_real.transpose() * frame.h_real;
  return frame;
}

BitErrorCount count_bit_errors(std::span<const double> x_hat,
                               std::span<const std::uint8_t> bits,
                               const Constellation& constellation) {
  const int bpd = constellation.bits_per_dim();
  if (x_hat.size() * bpd != bits.size()) {
    throw std::invalid_argument("estimate/bit length mismatch");
  }
  BitErrorCount count;
  count.total = bits.size();
  for (std::size_t i = 0; i < x_hat.size(); ++i) {
    const int label =
        constellation.label_of(constellation.nearest_index(x_hat[i]));
    for (int k = 0; k < bpd; ++k) {
      const int bit = (label >> (bpd - 1 - k)) & 1;
      count.errors += static_cast<std::uint64_t>(bit != bits[i * bpd + k]);
    }
  }
  return count;
}

std::uint64_t mix64(std::uint64_t v) {
  v += 0x9E3779B97F4A7C15ull;
  v = (v ^ (v >> 30)) * 0xBF58476D1CE4E5B9ull;
  v = (v ^ (v >> 27)) * 0x94D049BB133111EBull;
  return v ^ (v >> 31);
}

Rng stream_for(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
  return Rng(mix64(master ^ mix64(stream * 0x9E3779B97F4A7C15ull + index)));
}

}  // namespace ahpq::sim
