#include "ahpq/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ahpq::harness {

void SweepConfig::validate() const {
  system.validate();
  if (snr_db.empty()) throw std::invalid_argument("sweep needs at least one SNR point");
  if (detectors.empty()) throw std::invalid_argument("sweep needs at least one detector");
  if (stop.max_frames == 0 || stop.batch_frames == 0) {
    throw std::invalid_argument("frames per point must be > 0");
  }
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
}

namespace {

// errors[detector][iteration-1]
using Counts = std::vector<std::vector<std::uint64_t>>;

Counts run_batch(const SweepConfig& cfg, const sim::Constellation& constellation,
                 const sim::SystemConfig& system,
                 const std::vector<det::DetectorConfig>& detectors, std::uint64_t first,
                 std::uint64_t count) {
  Counts counts(detectors.size());
  for (std::size_t d = 0; d < detectors.size(); ++d) {
    counts[d].assign(static_cast<std::size_t>(detectors[d].iterations), 0);
  }
  for (std::uint64_t f = first; f < first + count; ++f) {
    sim::Rng rng = sim::stream_for(system.seed, 0, f);
    const sim::MimoInstance frame = sim::simulate_frame(system, constellation, rng);
    const std::span<const double> b(frame.b.data(), static_cast<std::size_t>(frame.b.size()));
    for (std::size_t d = 0; d < detectors.size(); ++d) {
      std::vector<std::uint64_t>& per_iter = counts[d];
      if (cfg.per_iteration) {
        const det::IterationObserver observer = [&](int l, std::span<const double> x) {
          per_iter[l - 1] += sim::count_bit_errors(x, frame.bits, constellation).errors;
        };
        det::detect(b, frame.g, detectors[d], {.observer = &observer});
      } else {
        const auto x = det::detect(b, frame.g, detectors[d]);
        per_iter.back() += sim::count_bit_errors(x, frame.bits, constellation).errors;
      }
    }
  }
  return counts;
}

std::string profile_label(const det::DetectorConfig& c) {
  if (!c.profile) return "float";
  return c.profile->id.empty() ? std::string(fxp::to_string(c.profile->origin())) : c.profile->id;
}

}  // namespace

std::vector<BerRecord> ber_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const sim::Constellation constellation(cfg.system.modulation);
  const int bits_per_frame = 2 * cfg.system.n_t * constellation.bits_per_dim();
  std::vector<BerRecord> records;

  for (const double snr : cfg.snr_db) {
    sim::SystemConfig system = cfg.system;
    system.snr_db = snr;
    const double sigma2 = sim::snr_to_noise_var(system, constellation) / 2.0;
    std::vector<det::DetectorConfig> detectors;
    for (const DetectorSpec& spec : cfg.detectors) {
      det::DetectorConfig c = spec.config;
      c.sigma2 = sigma2;
      c.beta = system.beta();
      c.constellation = constellation;
      c.validate();
      detectors.push_back(std::move(c));
    }

    Counts total(detectors.size());
    for (std::size_t d = 0; d < detectors.size(); ++d) {
      total[d].assign(static_cast<std::size_t>(detectors[d].iterations), 0);
    }
    std::uint64_t frames = 0;
    std::uint64_t next_batch = 0;
    auto done = [&] {
      if (frames >= cfg.stop.max_frames) return true;
      if (frames < cfg.stop.min_frames) return false;
      return std::all_of(total.begin(), total.end(), [&](const auto& c) {
        return c.back() >= cfg.stop.min_error_events;
      });
    };
    while (!done()) {
      // Launch up to `threads` consecutive batches, then fold them in order
      // so the stopping point matches a sequential run.
      std::vector<std::future<Counts>> pending;
      std::vector<std::uint64_t> sizes;
      std::uint64_t planned = frames;
      for (int t = 0; t < cfg.threads && planned < cfg.stop.max_frames; ++t) {
        const std::uint64_t first = next_batch * cfg.stop.batch_frames;
        const std::uint64_t count =
            std::min(cfg.stop.batch_frames, cfg.stop.max_frames - planned);
        planned += count;
        ++next_batch;
        sizes.push_back(count);
        if (cfg.threads == 1) {
          std::promise<Counts> p;
          p.set_value(run_batch(cfg, constellation, system, detectors, first, count));
          pending.push_back(p.get_future());
        } else {
          pending.push_back(std::async(std::launch::async, run_batch, std::cref(cfg),
                                       std::cref(constellation), std::cref(system),
                                       std::cref(detectors), first, count));
        }
      }
      for (std::size_t p = 0; p < pending.size(); ++p) {
        Counts c = pending[p].get();
        if (done()) continue;  // drain remaining futures without counting
        for (std::size_t d = 0; d < total.size(); ++d) {
          for (std::size_t l = 0; l < total[d].size(); ++l) total[d][l] += c[d][l];
        }
        frames += sizes[p];
      }
    }

    const std::uint64_t bits = frames * static_cast<std::uint64_t>(bits_per_frame);
    for (std::size_t d = 0; d < detectors.size(); ++d) {
      const int iters = detectors[d].iterations;
      for (int l = 1; l <= iters; ++l) {
        if (!cfg.per_iteration && l != iters) continue;
        BerRecord r;
        r.snr_db = snr;
        r.detector = cfg.per_iteration
                         ? cfg.detectors[d].label + "@L" + std::to_string(l)
                         : cfg.detectors[d].label;
        r.profile = profile_label(detectors[d]);
        r.bits = bits;
        r.errors = total[d][l - 1];
        r.ber = bits == 0 ? 0.0 : static_cast<double>(r.errors) / static_cast<double>(bits);
        r.seed = cfg.system.seed;
        r.convention = std::string(sim::to_string(cfg.system.snr_convention));
        records.push_back(std::move(r));
      }
    }
  }
  return records;
}

void write_csv(std::ostream& out, const std::vector<BerRecord>& records) {
  out << kCsvHeader << '\n';
  for (const BerRecord& r : records) {
    std::ostringstream snr;
    snr << std::setprecision(6) << r.snr_db;
    std::ostringstream ber;
    ber << std::setprecision(10) << r.ber;
    out << snr.str() << ',' << r.detector << ',' << r.profile << ',' << r.bits << ','
        << r.errors << ',' << ber.str() << ',' << r.seed << ',' << r.convention << '\n';
  }
}

void write_csv(const std::string& path, const std::vector<BerRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_csv(out, records);
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<BerRecord> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line != kCsvHeader) throw std::runtime_error("unexpected CSV header in " + path);
  std::vector<BerRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() != 8) throw std::runtime_error("malformed CSV row: " + line);
    BerRecord r;
    r.snr_db = std::stod(cols[0]);
    r.detector = cols[1];
    r.profile = cols[2];
    r.bits = std::stoull(cols[3]);
    r.errors = std::stoull(cols[4]);
    r.ber = std::stod(cols[5]);
    r.seed = std::stoull(cols[6]);
    r.convention = cols[7];
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::pair<double, double>> curve(const std::vector<BerRecord>& records,
                                             const std::string& label) {
  std::vector<std::pair<double, double>> out;
  for (const BerRecord& r : records) {
    if (r.detector == label) out.emplace_back(r.snr_db, r.ber);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<double> snr_at_ber(const std::vector<std::pair<double, double>>& pts,
                                 double target_ber) {
  if (!(target_ber > 0.0)) throw std::invalid_argument("target BER must be > 0");
  const double target = std::log10(target_ber);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto [s0, b0] = pts[i];
    const auto [s1, b1] = pts[i + 1];
    if (b0 <= 0.0 || b1 <= 0.0) continue;
    const double l0 = std::log10(b0);
    const double l1 = std::log10(b1);
    if (l0 == target) return s0;
    if ((l0 > target && l1 <= target) || (l0 < target && l1 >= target)) {
      return s0 + (target - l0) * (s1 - s0) / (l1 - l0);
    }
  }
  if (!pts.empty() && pts.back().second == target_ber) return pts.back().first;
  return std::nullopt;
}

std::optional<double> snr_loss(const std::vector<std::pair<double, double>>& candidate,
                               const std::vector<std::pair<double, double>>& reference,
                               double target_ber) {
  const auto c = snr_at_ber(candidate, target_ber);
  const auto r = snr_at_ber(reference, target_ber);
  if (!c || !r) return std::nullopt;
  return *c - *r;
}

std::vector<double> parse_snr_range(const std::string& spec) {
  std::vector<double> parts;
  std::stringstream ss(spec);
  std::string cell;
  while (std::getline(ss, cell, ':')) {
    try {
      parts.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad SNR range '" + spec + "'");
    }
  }
  if (parts.size() == 1) return parts;
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
    throw std::invalid_argument("SNR range must be A:B:STEP with STEP > 0 and B >= A");
  }
  std::vector<double> out;
  const auto n = static_cast<int>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9));
  for (int i = 0; i <= n; ++i) out.push_back(parts[0] + i * parts[2]);
  return out;
}

ProfileComparison compare_profiles(const fxp::QuantProfile& a, const fxp::QuantProfile& b,
                                   const ComparisonConfig& cfg) {
  ProfileComparison out;
  out.a = a;
  out.b = b;
  out.stats_a = fxp::profile_stats(a);
  out.stats_b = fxp::profile_stats(b);
  out.reduction = fxp::reduction_percent(a, b);
  if (!cfg.simulate) return out;

  SweepConfig sweep;
  sweep.system = cfg.system;
  sweep.snr_db = cfg.snr_db;
  sweep.stop = cfg.stop;
  sweep.threads = cfg.threads;
  det::DetectorConfig base = cfg.detector;
  base.profile.reset();
  sweep.detectors.push_back({"float", base});
  base.profile = a;
  sweep.detectors.push_back({"a", base});
  base.profile = b;
  sweep.detectors.push_back({"b", base});
  out.records = ber_sweep(sweep);

  const auto fl = curve(out.records, "float");
  const auto ca = curve(out.records, "a");
  const auto cb = curve(out.records, "b");
  out.loss_a = snr_loss(ca, fl, cfg.target_ber);
  out.loss_b = snr_loss(cb, fl, cfg.target_ber);
  out.loss_a_vs_b = snr_loss(ca, cb, cfg.target_ber);
  return out;
}

std::string format_comparison(const ProfileComparison& c, double target_ber) {
  std::ostringstream out;
  auto name = [](const fxp::QuantProfile& p) {
    return p.id.empty() ? std::string(fxp::to_string(p.origin())) : p.id;
  };
  out << "k  variable              a(p-q)  b(p-q)\n";
  for (int k = 1; k <= fxp::kNumVariables; ++k) {
    auto cell = [k](const fxp::QuantProfile& p) {
      if (!p.has(k)) return std::string("   -  ");
      return "1-" + std::to_string(p.at(k).p()) + "-" + std::to_string(p.at(k).q());
    };
    out << std::left << std::setw(3) << k << std::setw(22) << fxp::variable_name(k)
        << std::setw(8) << cell(c.a) << cell(c.b) << '\n';
  }
  out << std::fixed << std::setprecision(3);
  out << "a = " << name(c.a) << ": avg integral " << c.stats_a.avg_integral
      << ", avg fractional " << c.stats_a.avg_fractional << '\n';
  out << "b = " << name(c.b) << ": avg integral " << c.stats_b.avg_integral
      << ", avg fractional " << c.stats_b.avg_fractional << '\n';
  out << std::setprecision(1) << "reduction of a vs b: integral " << c.reduction.avg_integral
      << "%, fractional " << c.reduction.avg_fractional << "%\n";
  auto loss = [](const std::optional<double>& v) {
    if (!v) return std::string("n/a (target not bracketed)");
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << *v << " dB";
    return s.str();
  };
  if (!c.records.empty()) {
    out << std::scientific << std::setprecision(0) << "SNR loss at BER " << target_ber
        << " vs floating point: a " << loss(c.loss_a) << ", b " << loss(c.loss_b)
        << "; a vs b " << loss(c.loss_a_vs_b) << '\n';
  }
  return out.str();
}

fxp::QuantProfile run_ipq_job(const ipq::IpqConfig& cfg, const fxp::QuantProfile& fractional) {
  return ipq::run_ipq(cfg, fractional);
}

FpqJobResult run_fpq_training(const FpqJobConfig& cfg) {
  FpqJobResult out;
  fpq::FpqEnv env(cfg.env);
  out.p_b = env.p_b();
  std::ofstream log;
  if (!cfg.episode_log.empty()) {
    log.open(cfg.episode_log);
    if (!log) throw std::runtime_error("cannot write " + cfg.episode_log);
    env.set_log(&log);
  }
  rl::TrainConfig train = cfg.train;
  train.max_timestep = cfg.env.max_timestep;
  out.training = rl::train(env, train);
  out.widths = rl::estimate_bitwidths(out.training.model.policy, env.config(), train.test_steps,
                                      train.seed);
  out.fractional = fpq::widths_profile(out.widths, cfg.env.p_init);
  out.fractional.id = "FPQ seed " + std::to_string(train.seed);
  return out;
}

void select_integral_bits(const FpqJobConfig& cfg, FpqJobResult& result) {
  ipq::IpqConfig icfg = cfg.ipq;
  icfg.system = cfg.env.system;
  icfg.detector = cfg.env.detector;
  icfg.p_init = cfg.env.p_init;
  result.profile = ipq::run_ipq(icfg, result.fractional);
  result.profile.id = "AHPQ seed " + std::to_string(cfg.train.seed);
}

FpqJobResult run_fpq_job(const FpqJobConfig& cfg) {
  FpqJobResult out = run_fpq_training(cfg);
  select_integral_bits(cfg, out);
  return out;
}

}  // namespace ahpq::harness
