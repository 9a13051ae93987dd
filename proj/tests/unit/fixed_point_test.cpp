#include "ahpq/fixed_point.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include <gtest/gtest.h>

namespace ahpq::fxp {
namespace {

// Scalar reference: clip, divide, std::round (half away from zero), multiply.
double reference_quantize(double v, int p, int q) {
  const double c = std::ldexp(1.0, -q);
  const double lo = -std::ldexp(1.0, p);
  const double hi = std::ldexp(1.0, p) - c;
  return std::round(std::clamp(v, lo, hi) / c) * c;
}

TEST(QuantScheme, DerivedBounds) {
  const QuantScheme s(2, 3);
  EXPECT_EQ(s.min(), -4.0);
  EXPECT_EQ(s.max(), 3.875);
  EXPECT_EQ(s.step(), 0.125);
  const QuantScheme z;
  EXPECT_EQ(z.p(), 0);
  EXPECT_EQ(z.q(), 0);
  EXPECT_EQ(z.min(), -1.0);
  EXPECT_EQ(z.max(), 0.0);
  EXPECT_EQ(z, QuantScheme(0, 0));
}

TEST(QuantScheme, RejectsBadWidths) {
  EXPECT_THROW(QuantScheme(-1, 0), std::invalid_argument);
  EXPECT_THROW(QuantScheme(0, -1), std::invalid_argument);
  EXPECT_THROW(QuantScheme(30, 30), std::invalid_argument);
}

TEST(Quantize, WorkedExamples) {
  EXPECT_EQ(quantize(5.0, QuantScheme(2, 3)), 3.875);
  EXPECT_EQ(quantize(-10.0, QuantScheme(2, 3)), -4.0);
  EXPECT_EQ(quantize(0.3, QuantScheme(1, 2)), 0.25);
  EXPECT_EQ(quantize(0.0785, QuantScheme(1, 3)), 0.125);
}

TEST(Quantize, HalfwayRoundsAwayFromZero) {
  const QuantScheme s(3, 2);
  EXPECT_EQ(s.quantize(0.125), 0.25);
  EXPECT_EQ(s.quantize(-0.125), -0.25);
  EXPECT_EQ(s.quantize(0.375), 0.5);
  EXPECT_EQ(s.quantize(-0.375), -0.5);
  EXPECT_EQ(QuantScheme(3, 0).quantize(2.5), 3.0);
  EXPECT_EQ(QuantScheme(3, 0).quantize(-2.5), -3.0);
  // Just below the midpoint stays down.
  EXPECT_EQ(s.quantize(std::nextafter(0.125, 0.0)), 0.0);
}

TEST(Quantize, ClipHappensBeforeRounding) {
  // 3.99 / 0.125 rounds to 32 = 2^(p+q), but the clip to 3.875 comes first.
  EXPECT_EQ(QuantScheme(2, 3).quantize(3.99), 3.875);
  EXPECT_EQ(QuantScheme(2, 3).quantize(3.9), 3.875);
}

TEST(Quantize, InfinitiesSaturate) {
  const QuantScheme s(4, 4);
  EXPECT_EQ(s.quantize(std::numeric_limits<double>::infinity()), s.max());
  EXPECT_EQ(s.quantize(-std::numeric_limits<double>::infinity()), s.min());
}

TEST(Quantize, ZeroIsFixedForAllSchemes) {
  for (int p = 0; p <= 12; ++p) {
    for (int q = 0; q <= 12; ++q) {
      EXPECT_EQ(QuantScheme(p, q).quantize(0.0), 0.0);
      EXPECT_EQ(QuantScheme(p, q).quantize(-0.0), 0.0);
    }
  }
}

class QuantizeProperties : public ::testing::TestWithParam<std::pair<int, int>> {};

TEST_P(QuantizeProperties, MillionProbes) {
  const auto [p, q] = GetParam();
  const QuantScheme s(p, q);
  std::mt19937_64 rng(static_cast<std::uint64_t>(p * 100 + q));
  const double span = std::ldexp(1.0, p) * 1.5;
  std::uniform_real_distribution<double> u(-span, span);
  std::uniform_int_distribution<std::int64_t> grid(-(std::int64_t{1} << (p + q + 1)),
                                                   std::int64_t{1} << (p + q + 1));
  const double lo_n = -std::ldexp(1.0, p + q);
  const double hi_n = std::ldexp(1.0, p + q) - 1.0;
  double prev_v = -span;
  double prev_out = s.quantize(prev_v);
  std::vector<double> sorted;
  for (int i = 0; i < 1000000; ++i) {
    // Mix uniform draws with exact half-grid points, where rounding matters.
    const double v = (i % 4 == 0) ? static_cast<double>(grid(rng)) * s.step() * 0.5 : u(rng);
    const double out = s.quantize(v);
    ASSERT_EQ(out, reference_quantize(v, p, q)) << "v=" << v;
    ASSERT_EQ(s.quantize(out), out) << "idempotence at v=" << v;
    const double n = std::ldexp(out, q);
    ASSERT_EQ(n, std::trunc(n));
    ASSERT_GE(n, lo_n);
    ASSERT_LE(n, hi_n);
    if (i < 20000) sorted.push_back(v);
  }
  std::sort(sorted.begin(), sorted.end());
  for (const double v : sorted) {
    const double out = s.quantize(v);
    ASSERT_LE(prev_out, out) << "monotonicity between " << prev_v << " and " << v;
    prev_v = v;
    prev_out = out;
  }
}

INSTANTIATE_TEST_SUITE_P(Schemes, QuantizeProperties,
                         ::testing::Values(std::pair{0, 0}, std::pair{1, 2}, std::pair{2, 3},
                                           std::pair{3, 6}, std::pair{6, 6}, std::pair{12, 12},
                                           std::pair{0, 10}, std::pair{10, 0}));

TEST(QuantizeVector, MatchesScalarLoop) {
  const QuantScheme s(2, 4);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 3.0);
  std::vector<double> v(1000);
  for (auto& x : v) x = n(rng);
  const std::vector<double> out = quantize_vector(v, s);
  ASSERT_EQ(out.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(out[i], s.quantize(v[i]));
}

TEST(QuantizeVector, ZerosAndSaturation) {
  const QuantScheme s(1, 2);
  EXPECT_EQ(quantize_vector(std::vector<double>(5, 0.0), s), std::vector<double>(5, 0.0));
  EXPECT_EQ(quantize_vector(std::vector<double>(5, s.max() + 1.0), s),
            std::vector<double>(5, s.max()));
  std::vector<double> in(3, 1.0), out(2);
  EXPECT_THROW(quantize_vector(in, out, s), std::invalid_argument);
}

TEST(Registry, NamesAndHfSubset) {
  EXPECT_EQ(variable_name(1), "b_i");
  EXPECT_EQ(variable_name(21), "delta_i");
  EXPECT_THROW(variable_name(0), std::out_of_range);
  EXPECT_THROW(variable_name(22), std::out_of_range);
  EXPECT_EQ(index(Var::kDelta), 21);
  EXPECT_EQ(index(Var::kTau), 13);
  EXPECT_EQ(kHfAmpVariables.size(), 14U);
}

TEST(Profile, UniformCoversScope) {
  const QuantProfile u = QuantProfile::uniform(6, 6);
  EXPECT_TRUE(u.complete());
  EXPECT_EQ(u.required().size(), 21U);
  const ProfileStats st = profile_stats(u);
  EXPECT_EQ(st.avg_integral, 6.0);
  EXPECT_EQ(st.avg_fractional, 6.0);

  const QuantProfile hf = QuantProfile::uniform(3, 4, ProfileScope::kHfAmp);
  EXPECT_EQ(hf.required().size(), 14U);
  EXPECT_TRUE(hf.complete());
  EXPECT_FALSE(hf.has(7));
}

TEST(Profile, MissingVariableIsIncomplete) {
  QuantProfile p(ProfileScope::kNnaAmp);
  for (int k = 1; k <= 20; ++k) p.set(k, QuantScheme(1, 1));
  EXPECT_FALSE(p.complete());
  try {
    p.validate();
    FAIL() << "expected throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("incomplete profile"), std::string::npos);
  }
  EXPECT_THROW(p.at(21), std::out_of_range);
  EXPECT_THROW(p.set(0, QuantScheme()), std::out_of_range);
}

TEST(Profile, StatsAndReductionMatchDirectMeans) {
  QuantProfile p(ProfileScope::kNnaAmp);
  double sp = 0.0, sq = 0.0;
  for (int k = 1; k <= 21; ++k) {
    p.set(k, QuantScheme(k % 5, (k * 3) % 7));
    sp += k % 5;
    sq += (k * 3) % 7;
  }
  const ProfileStats st = profile_stats(p);
  EXPECT_DOUBLE_EQ(st.avg_integral, sp / 21.0);
  EXPECT_DOUBLE_EQ(st.avg_fractional, sq / 21.0);
  const ProfileStats red = reduction_percent(p, QuantProfile::uniform(6, 6));
  EXPECT_DOUBLE_EQ(red.avg_integral, 100.0 * (1.0 - sp / 21.0 / 6.0));
  EXPECT_DOUBLE_EQ(red.avg_fractional, 100.0 * (1.0 - sq / 21.0 / 6.0));
}

TEST(ProfileIo, JsonRoundTrip) {
  QuantProfile p(ProfileScope::kNnaAmp, ProfileOrigin::kAhpq);
  for (int k = 1; k <= 21; ++k) p.set(k, QuantScheme(k % 4, 9 - k % 9));
  const QuantProfile back = profile_from_json(profile_to_json(p));
  EXPECT_EQ(back, p);

  const auto path = std::filesystem::temp_directory_path() / "ahpq_profile_roundtrip.json";
  save_profile(p, path.string());
  EXPECT_EQ(load_profile(path.string()), p);
  std::filesystem::remove(path);
}

TEST(ProfileIo, HfScopeRoundTrip) {
  const QuantProfile p = QuantProfile::uniform(2, 5, ProfileScope::kHfAmp);
  const QuantProfile back = profile_from_json(profile_to_json(p));
  EXPECT_EQ(back, p);
  EXPECT_EQ(back.scope(), ProfileScope::kHfAmp);
}

TEST(ProfileIo, RejectsMalformedInput) {
  EXPECT_THROW(profile_from_json("{not json"), std::invalid_argument);
  EXPECT_THROW(profile_from_json(R"({"version":2,"origin":"UQ","variables":[]})"),
               std::invalid_argument);

  std::string missing = R"({"version":1,"origin":"UQ","variables":[)";
  for (int k = 1; k <= 20; ++k) {
    missing += R"({"k":)" + std::to_string(k) + R"(,"name":")" +
               std::string(variable_name(k)) + R"(","p":6,"q":6})";
    if (k < 20) missing += ",";
  }
  missing += "]}";
  try {
    profile_from_json(missing);
    FAIL() << "expected throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("incomplete profile"), std::string::npos);
  }

  const std::string duplicate =
      R"({"version":1,"origin":"UQ","variables":[{"k":1,"name":"b_i","p":6,"q":6},)"
      R"({"k":1,"name":"b_i","p":6,"q":6}]})";
  EXPECT_THROW(profile_from_json(duplicate), std::invalid_argument);

  const std::string wrong_name =
      R"({"version":1,"origin":"UQ","variables":[{"k":1,"name":"g_ij","p":6,"q":6}]})";
  EXPECT_THROW(profile_from_json(wrong_name), std::invalid_argument);

  EXPECT_THROW(load_profile("/nonexistent/profile.json"), std::runtime_error);
}

TEST(BundledProfiles, Table4Values) {
  const QuantProfile t4 = load_profile(bundled_profile_path("table4_ahpq.json"));
  EXPECT_TRUE(t4.complete());
  EXPECT_EQ(t4.origin(), ProfileOrigin::kAhpq);
  EXPECT_EQ(t4.at(Var::kMatchedFilter), QuantScheme(3, 6));
  const QuantProfile uq = load_profile(bundled_profile_path("uq_166.json"));
  EXPECT_EQ(uq, [] {
    QuantProfile p = QuantProfile::uniform(6, 6);
    p.set_origin(ProfileOrigin::kUq);
    return p;
  }());
}

TEST(BundledProfiles, HfAmpScheme) {
  const QuantProfile hf = load_profile(bundled_profile_path("hfamp_ahpq.json"));
  EXPECT_EQ(hf.scope(), ProfileScope::kHfAmp);
  EXPECT_TRUE(hf.complete());
  for (const int k : kHfAmpVariables) EXPECT_TRUE(hf.has(k));
  EXPECT_FALSE(hf.has(index(Var::kVarianceSum)));
}

}  // namespace
}  // namespace ahpq::fxp
