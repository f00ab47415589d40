#include "binoculars/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace binoculars {

double log_sum_exp(std::span<const double> log_values) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : log_values) hi = std::max(hi, v);
  if (!std::isfinite(hi)) return hi;  // all -inf (or a stray +inf/nan)
  KahanSum sum;
  for (double v : log_values) sum.add(std::exp(v - hi));
  return hi + std::log(sum.value());
}

}  // namespace binoculars
