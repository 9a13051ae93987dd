#include "ahpq/pla.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ahpq::det {

double pla_target_value(PlaTarget target, double x) {
  switch (target) {
    case PlaTarget::kLogisticRecip:
      return 1.0 / (1.0 + std::exp(x));
    case PlaTarget::kReciprocal:
      return 1.0 / x;
  }
  throw std::logic_error("unhandled PLA target");
}

PlaFunction pla_build(PlaTarget target, double lo, double hi, int segments,
                      const PlaCoefficientSchemes& schemes) {
  if (!(lo < hi)) throw std::invalid_argument("PLA interval must satisfy lo < hi");
  if (segments < 1) throw std::invalid_argument("PLA needs at least one segment");
  if (target == PlaTarget::kReciprocal && lo <= 0.0 && hi >= 0.0) {
    throw std::invalid_argument("reciprocal is undefined on an interval containing 0");
  }
  PlaFunction f;
  f.lo = lo;
  f.hi = hi;
  f.slopes.resize(segments);
  f.intercepts.resize(segments);
  const double width = (hi - lo) / segments;
  for (int s = 0; s < segments; ++s) {
    const double x0 = lo + s * width;
    const double x1 = s + 1 == segments ? hi : x0 + width;
    const double y0 = pla_target_value(target, x0);
    const double y1 = pla_target_value(target, x1);
    const double slope = (y1 - y0) / (x1 - x0);
    const double intercept = y0 - slope * x0;
    f.slopes[s] = schemes.slope.quantize(slope);
    f.intercepts[s] = schemes.intercept.quantize(intercept);
  }
  return f;
}

double pla_eval(const PlaFunction& f, double x) {
  const double clipped = std::clamp(x, f.lo, f.hi);
  const int n = f.segments();
  int seg = static_cast<int>(std::floor((clipped - f.lo) / (f.hi - f.lo) * n));
  seg = std::clamp(seg, 0, n - 1);
  return f.slopes[seg] * clipped + f.intercepts[seg];
}

PlaFunction default_probability_pla() {
  return pla_build(PlaTarget::kLogisticRecip, -4.0, 0.0, 1,
                   {fxp::QuantScheme(1, 3), fxp::QuantScheme(1, 3)});
}

PlaFunction default_reciprocal_pla() {
  return pla_build(PlaTarget::kReciprocal, 1.0 / 8.0, 15.0 / 8.0, 1,
                   {fxp::QuantScheme(3, 2), fxp::QuantScheme(4, 1)});
}

}  // namespace ahpq::det
