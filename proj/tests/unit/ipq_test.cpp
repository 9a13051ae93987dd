#include "ahpq/ipq.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

namespace ahpq::ipq {
namespace {

// Linear scan using the full-sample exceedance count.
int brute_force_p(const std::vector<double>& s, int q, double eps1, int p_cap) {
  for (int p = 0; p <= p_cap; ++p) {
    const fxp::QuantScheme scheme(p, q);
    std::size_t out = 0;
    for (const double v : s) out += (v < scheme.min() || v > scheme.max()) ? 1 : 0;
    if (static_cast<double>(out) <= eps1 * static_cast<double>(s.size())) return p;
  }
  return -1;
}

TEST(IntegralBits, WorkedExamples) {
  const std::vector<double> s = {0.4, 1.6, 3.2};
  EXPECT_EQ(integral_bits(s, 2, 0.0), 2);
  EXPECT_EQ(integral_bits(s, 2, 0.34), 1);
}

TEST(IntegralBits, AllZeroVariableNeedsNoIntegralBits) {
  const std::vector<double> zeros(100, 0.0);
  EXPECT_EQ(integral_bits(zeros, 6, 1e-4), 0);
}

TEST(IntegralBits, GaussianMatchesLinearScan) {
  std::mt19937_64 rng(17);
  for (const double sd : {0.3, 1.0, 5.0, 40.0}) {
    std::normal_distribution<double> n(0.0, sd);
    std::vector<double> s(200000);
    for (auto& v : s) v = n(rng);
    for (const int q : {0, 3, 6}) {
      EXPECT_EQ(integral_bits(s, q, 1e-4), brute_force_p(s, q, 1e-4, 12)) << "sd=" << sd;
    }
  }
}

TEST(IntegralBits, UpperEdgeDependsOnQ) {
  // 1-0-3 tops out at 0.875.
  const std::vector<double> s = {0.9};
  EXPECT_EQ(integral_bits(s, 3, 0.0), 1);
  // 0.875 is exactly the 1-0-3 maximum.
  const std::vector<double> edge = {0.875};
  EXPECT_EQ(integral_bits(edge, 3, 0.0), 0);
  EXPECT_EQ(integral_bits(edge, 2, 0.0), 1);
  // -1 is exactly the 1-0-q minimum.
  const std::vector<double> neg = {-1.0};
  EXPECT_EQ(integral_bits(neg, 5, 0.0), 0);
}

TEST(IntegralBits, Errors) {
  const std::vector<double> empty;
  EXPECT_THROW(integral_bits(empty, 2, 0.1), std::invalid_argument);
  const std::vector<double> s = {1.0};
  EXPECT_THROW(integral_bits(s, 2, 1.0), std::invalid_argument);
  EXPECT_THROW(integral_bits(s, 2, -0.1), std::invalid_argument);
  const std::vector<double> huge = {1e9};
  try {
    integral_bits(huge, 2, 0.0);
    FAIL() << "expected throw";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("unbounded variable"), std::string::npos);
  }
}

TEST(VariableTrace, ExceedanceIsNonIncreasingInP) {
  std::mt19937_64 rng(5);
  std::cauchy_distribution<double> c(0.0, 2.0);
  VariableTrace t(7, 4);
  for (int i = 0; i < 50000; ++i) t.add(c(rng));
  for (int p = 1; p <= t.p_cap(); ++p) EXPECT_LE(t.exceedances(p), t.exceedances(p - 1));
  EXPECT_EQ(t.count(), 50000U);
}

TEST(VariableTrace, MergeIsAssociativeAndCommutative) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 3.0);
  VariableTrace a(5, 3, 12, 64), b(5, 3, 12, 64), c(5, 3, 12, 64), all(5, 3, 12, 64);
  for (int i = 0; i < 3000; ++i) {
    const double v = n(rng);
    (i % 3 == 0 ? a : (i % 3 == 1 ? b : c)).add(v);
    all.add(v);
  }
  VariableTrace ab_c = a;
  ab_c.merge(b);
  ab_c.merge(c);
  VariableTrace c_ba = c;
  VariableTrace ba = b;
  ba.merge(a);
  c_ba.merge(ba);
  for (int p = 0; p <= 12; ++p) {
    EXPECT_EQ(ab_c.exceedances(p), all.exceedances(p));
    EXPECT_EQ(c_ba.exceedances(p), all.exceedances(p));
  }
  EXPECT_EQ(ab_c.count(), all.count());
  EXPECT_EQ(ab_c.min(), all.min());
  EXPECT_EQ(ab_c.max(), all.max());
  auto sa = ab_c.samples(), sb = c_ba.samples(), sall = all.samples();
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  std::sort(sall.begin(), sall.end());
  EXPECT_EQ(sa, sall);
  EXPECT_EQ(sb, sall);
  EXPECT_EQ(sa.size(), 64U);
}

TEST(VariableTrace, MergeRejectsMismatch) {
  VariableTrace a(1, 3), b(2, 3), c(1, 4);
  EXPECT_THROW(a.merge(b), std::invalid_argument);
  EXPECT_THROW(a.merge(c), std::invalid_argument);
}

IpqConfig tiny_config() {
  IpqConfig cfg;
  cfg.system.snr_db = 4.0;
  cfg.n_frames = 40;
  return cfg;
}

TEST(CollectTraces, CountsMatchDataflowMultiplicity) {
  const IpqConfig cfg = tiny_config();
  const TraceSet t = collect_traces(cfg, fxp::QuantProfile::uniform(6, 6));
  const std::uint64_t frames = cfg.n_frames;
  const std::uint64_t n = 2 * cfg.system.n_t;
  const std::uint64_t l = 4;
  EXPECT_EQ(t[0].count(), frames * n);                 // b_i
  EXPECT_EQ(t[1].count(), frames * n * n);             // g_ij
  EXPECT_EQ(t[2].count(), frames);                     // sigma_n^2
  EXPECT_EQ(t[15].count(), frames * n * l);            // z_i
  EXPECT_EQ(t[16].count(), frames * n * n * l);        // g_ij x_hat_j
  EXPECT_EQ(t[10].count(), frames * l);                // xi_bar
}

TEST(CollectTraces, ValueRanges) {
  const IpqConfig cfg = tiny_config();
  const TraceSet t = collect_traces(cfg, fxp::QuantProfile::uniform(6, 6));
  EXPECT_EQ(t[2].min(), t[2].max());  // one noise variance per SNR
  EXPECT_GE(t[3].min(), 0.0);         // rho
  EXPECT_LE(t[3].max(), 1.0);
}

TEST(RunIpq, NoiseVarianceGetsOneIntegralBitAndIsReproducible) {
  IpqConfig cfg = tiny_config();
  cfg.pooled_snr_db = {0.0, 2.0, 4.0, 6.0};
  const fxp::QuantProfile a = run_ipq(cfg, fxp::QuantProfile::uniform(6, 6));
  const fxp::QuantProfile b = run_ipq(cfg, fxp::QuantProfile::uniform(6, 6));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.at(fxp::Var::kNoiseVar).p(), 1);
  EXPECT_EQ(a.origin(), fxp::ProfileOrigin::kAhpq);
  for (int k = 1; k <= 21; ++k) {
    EXPECT_EQ(a.at(k).q(), 6);
    EXPECT_GE(a.at(k).p(), cfg.p_floor);
  }
}

TEST(RunIpq, ZeroTauSaturatesInverseAndReportsChi) {
  // q = 0 rounds sigma_n^2 and tau to zero, so 1/tau saturates.
  IpqConfig cfg = tiny_config();
  fxp::QuantProfile fractional = fxp::QuantProfile::uniform(6, 6);
  fractional.set(fxp::index(fxp::Var::kNoiseVar), fxp::QuantScheme(6, 0));
  fractional.set(fxp::index(fxp::Var::kTau), fxp::QuantScheme(6, 0));
  const TraceSet t = collect_traces(cfg, fractional);
  EXPECT_TRUE(std::isfinite(t[13].max()));
  EXPECT_EQ(t[13].max(), fxp::QuantScheme(cfg.p_init, 6).max());
  // chi = z / tau then leaves every 1-p-q range, which IPQ reports.
  EXPECT_THROW(run_ipq(cfg, fractional), std::runtime_error);
}

TEST(RunIpq, ThreadCountDoesNotChangeResult) {
  IpqConfig cfg = tiny_config();
  const fxp::QuantProfile one = run_ipq(cfg, fxp::QuantProfile::uniform(5, 5));
  cfg.threads = 3;
  EXPECT_EQ(run_ipq(cfg, fxp::QuantProfile::uniform(5, 5)), one);
}

TEST(RunIpq, HfScopeOnlyCoversItsVariables) {
  IpqConfig cfg = tiny_config();
  cfg.detector.variant = det::Variant::kHfAmp;
  const fxp::QuantProfile p =
      run_ipq(cfg, fxp::QuantProfile::uniform(4, 6, fxp::ProfileScope::kHfAmp));
  EXPECT_EQ(p.scope(), fxp::ProfileScope::kHfAmp);
  EXPECT_TRUE(p.complete());
  EXPECT_FALSE(p.has(11));
}

TEST(IpqConfig, Validation) {
  IpqConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.eps1 = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = IpqConfig{};
  cfg.n_frames = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = IpqConfig{};
  cfg.detector.variant = det::Variant::kAmp;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace ahpq::ipq
