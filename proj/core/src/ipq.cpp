#include "ahpq/ipq.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>
#include <string>

namespace ahpq::ipq {

namespace {

std::uint64_t sample_hash(double v) {
  // Normalise -0.0 so that equal values hash equally.
  if (v == 0.0) v = 0.0;
  return sim::mix64(std::bit_cast<std::uint64_t>(v));
}

bool heap_less(const std::pair<std::uint64_t, double>& a,
               const std::pair<std::uint64_t, double>& b) {
  return a.first != b.first ? a.first < b.first : a.second < b.second;
}

}  // namespace

VariableTrace::VariableTrace(int k, int q, int p_cap, std::size_t reservoir)
    : k_(k),
      q_(q),
      p_cap_(p_cap),
      reservoir_cap_(reservoir),
      min_(std::numeric_limits<double>::infinity()),
      max_(-std::numeric_limits<double>::infinity()),
      below_(static_cast<std::size_t>(p_cap + 1), 0),
      above_(static_cast<std::size_t>(p_cap + 1), 0) {
  if (q < 0 || p_cap < 0) throw std::invalid_argument("trace widths must be >= 0");
}

void VariableTrace::add(double v) {
  ++count_;
  min_ = std::min(min_, v);
  max_ = std::max(max_, v);
  const double step = std::ldexp(1.0, -q_);
  for (int p = 0; p <= p_cap_; ++p) {
    const double hi = std::ldexp(1.0, p);
    if (v < -hi) {
      ++below_[p];
    } else if (v > hi - step) {
      ++above_[p];
    } else {
      break;  // inside for p, hence inside for every larger p
    }
  }
  if (reservoir_cap_ == 0) return;
  const std::pair<std::uint64_t, double> item{sample_hash(v), v};
  if (reservoir_.size() < reservoir_cap_) {
    reservoir_.push_back(item);
    std::push_heap(reservoir_.begin(), reservoir_.end(), heap_less);
  } else if (heap_less(item, reservoir_.front())) {
    std::pop_heap(reservoir_.begin(), reservoir_.end(), heap_less);
    reservoir_.back() = item;
    std::push_heap(reservoir_.begin(), reservoir_.end(), heap_less);
  }
}

void VariableTrace::merge(const VariableTrace& other) {
  if (other.k_ != k_ || other.q_ != q_ || other.p_cap_ != p_cap_) {
    throw std::invalid_argument("cannot merge traces of different variables or widths");
  }
  count_ += other.count_;
  min_ = std::min(min_, other.min_);
  max_ = std::max(max_, other.max_);
  for (std::size_t p = 0; p < below_.size(); ++p) {
    below_[p] += other.below_[p];
    above_[p] += other.above_[p];
  }
  std::vector<std::pair<std::uint64_t, double>> all = reservoir_;
  all.insert(all.end(), other.reservoir_.begin(), other.reservoir_.end());
  std::sort(all.begin(), all.end(), heap_less);
  if (all.size() > reservoir_cap_) all.resize(reservoir_cap_);
  std::make_heap(all.begin(), all.end(), heap_less);
  reservoir_ = std::move(all);
}

std::uint64_t VariableTrace::exceedances(int p) const {
  if (p < 0 || p > p_cap_) throw std::out_of_range("p outside the traced range");
  return below_[p] + above_[p];
}

double VariableTrace::exceedance_fraction(int p) const {
  if (count_ == 0) return 0.0;
  return static_cast<double>(exceedances(p)) / static_cast<double>(count_);
}

std::vector<double> VariableTrace::samples() const {
  std::vector<std::pair<std::uint64_t, double>> sorted = reservoir_;
  std::sort(sorted.begin(), sorted.end(), heap_less);
  std::vector<double> out;
  out.reserve(sorted.size());
  for (const auto& item : sorted) out.push_back(item.second);
  return out;
}

int integral_bits(const VariableTrace& trace, double eps1) {
  if (!(eps1 >= 0.0 && eps1 < 1.0)) throw std::invalid_argument("eps1 must be in [0, 1)");
  if (trace.count() == 0) throw std::invalid_argument("empty trace");
  const auto n = static_cast<long double>(trace.count());
  for (int p = 0; p <= trace.p_cap(); ++p) {
    // Compare counts rather than fractions to stay exact at the boundary.
    if (static_cast<long double>(trace.exceedances(p)) <= static_cast<long double>(eps1) * n) {
      return p;
    }
  }
  throw std::runtime_error("unbounded variable k=" + std::to_string(trace.k()) +
                           ": exceeds the 1-" + std::to_string(trace.p_cap()) + "-q range");
}

int integral_bits(std::span<const double> samples, int q, double eps1, int p_cap) {
  VariableTrace trace(0, q, p_cap, 0);
  for (const double v : samples) trace.add(v);
  return integral_bits(trace, eps1);
}

void IpqConfig::validate() const {
  system.validate();
  if (n_frames == 0) throw std::invalid_argument("n_frames must be > 0");
  if (!(eps1 >= 0.0 && eps1 < 1.0)) throw std::invalid_argument("eps1 must be in [0, 1)");
  if (p_init < 0 || p_floor < 0 || p_floor > p_init) {
    throw std::invalid_argument("need 0 <= p_floor <= p_init");
  }
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (detector.variant == det::Variant::kAmp) {
    throw std::invalid_argument("the floating-point AMP detector has no quantized variables");
  }
}

namespace {

TraceSet empty_traces(const IpqConfig& cfg, const fxp::QuantProfile& fractional) {
  TraceSet traces;
  for (int k = 1; k <= fxp::kNumVariables; ++k) {
    const int q = fractional.has(k) ? fractional.at(k).q() : 0;
    traces[k - 1] = VariableTrace(k, q, cfg.p_init, cfg.reservoir);
  }
  return traces;
}

void merge_into(TraceSet& into, const TraceSet& from) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i].merge(from[i]);
}

TraceSet collect_range(const IpqConfig& cfg, const fxp::QuantProfile& fractional,
                       const sim::SystemConfig& system, const det::DetectorConfig& detector,
                       std::uint64_t first, std::uint64_t count, std::uint64_t stream) {
  const sim::Constellation constellation(system.modulation);
  TraceSet traces = empty_traces(cfg, fractional);
  TraceCollector sink(traces);
  for (std::uint64_t f = first; f < first + count; ++f) {
    sim::Rng rng = sim::stream_for(system.seed, stream, f);
    const sim::MimoInstance frame = sim::simulate_frame(system, constellation, rng);
    const std::span<const double> b(frame.b.data(), static_cast<std::size_t>(frame.b.size()));
    det::detect(b, frame.g, detector, {.trace = &sink});
  }
  return traces;
}

}  // namespace

TraceSet collect_traces(const IpqConfig& cfg, const fxp::QuantProfile& fractional) {
  cfg.validate();
  fractional.validate();

  fxp::QuantProfile wide(fractional.scope(), fractional.origin());
  for (const int k : fractional.required()) {
    wide.set(k, fxp::QuantScheme(cfg.p_init, fractional.at(k).q()));
  }

  const std::vector<double> snrs =
      cfg.pooled_snr_db.empty() ? std::vector<double>{cfg.system.snr_db} : cfg.pooled_snr_db;
  const sim::Constellation constellation(cfg.system.modulation);
  TraceSet total = empty_traces(cfg, fractional);

  for (std::size_t s = 0; s < snrs.size(); ++s) {
    sim::SystemConfig system = cfg.system;
    system.snr_db = snrs[s];
    det::DetectorConfig detector = cfg.detector;
    detector.sigma2 = sim::snr_to_noise_var(system, constellation) / 2.0;
    detector.beta = system.beta();
    detector.constellation = constellation;
    detector.profile = wide;
    detector.validate();

    // Stream 1 keeps trace frames disjoint from BER sweep frames (stream 0).
    const std::uint64_t stream = 1;
    const auto threads = static_cast<std::uint64_t>(cfg.threads);
    if (threads == 1) {
      merge_into(total, collect_range(cfg, fractional, system, detector, 0, cfg.n_frames, stream));
      continue;
    }
    std::vector<std::future<TraceSet>> parts;
    const std::uint64_t chunk = (cfg.n_frames + threads - 1) / threads;
    for (std::uint64_t first = 0; first < cfg.n_frames; first += chunk) {
      const std::uint64_t count = std::min(chunk, cfg.n_frames - first);
      parts.push_back(std::async(std::launch::async, [&, system, detector, first, count] {
        return collect_range(cfg, fractional, system, detector, first, count, stream);
      }));
    }
    for (auto& part : parts) merge_into(total, part.get());
  }
  return total;
}

fxp::QuantProfile assemble_profile(const TraceSet& traces, const fxp::QuantProfile& fractional,
                                   double eps1, int p_floor) {
  fxp::QuantProfile out(fractional.scope(), fxp::ProfileOrigin::kAhpq);
  out.id = fractional.id;
  for (const int k : fractional.required()) {
    const int p = std::max(p_floor, integral_bits(traces[k - 1], eps1));
    out.set(k, fxp::QuantScheme(p, fractional.at(k).q()));
  }
  return out;
}

fxp::QuantProfile run_ipq(const IpqConfig& cfg, const fxp::QuantProfile& fractional) {
  const TraceSet traces = collect_traces(cfg, fractional);
  return assemble_profile(traces, fractional, cfg.eps1, cfg.p_floor);
}

}  // namespace ahpq::ipq
