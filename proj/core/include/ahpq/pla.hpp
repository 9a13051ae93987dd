#pragma once

#include <vector>

#include "ahpq/fixed_point.hpp"

namespace ahpq::det {

enum class PlaTarget {
  /// x -> 1 / (1 + exp(x)), the nearest-neighbour probability.
  kLogisticRecip,
  /// x -> 1 / x.
  kReciprocal,
};

double pla_target_value(PlaTarget target, double x);

/// Quantizers applied to each segment's slope and intercept.
struct PlaCoefficientSchemes {
  fxp::QuantScheme slope;
  fxp::QuantScheme intercept;
};

/// Clipped piecewise-linear approximation over [lo, hi] with uniform
/// segments. Each segment is the chord of the target through the segment's
/// endpoints, with slope and (global) intercept quantized afterwards.
struct PlaFunction {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> slopes;
  std::vector<double> intercepts;

  int segments() const { return static_cast<int>(slopes.size()); }
};

/// Throws std::invalid_argument if lo >= hi, segments < 1 or the target is
/// undefined somewhere on [lo, hi].
PlaFunction pla_build(PlaTarget target, double lo, double hi, int segments,
                      const PlaCoefficientSchemes& schemes);

/// Clip x into [lo, hi], pick its segment, evaluate the line.
double pla_eval(const PlaFunction& f, double x);

/// f1(-4, 0, 1) with 1-1-3 coefficients: slope -0.125, intercept 0.5.
PlaFunction default_probability_pla();
/// f2(1/8, 15/8, 1) with a 1-3-2 slope and 1-4-1 intercept: -4.25 and 8.5.
PlaFunction default_reciprocal_pla();

}  // namespace ahpq::det
