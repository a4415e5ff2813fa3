#pragma once

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>

#include "rlab/error.hpp"

namespace rlab {

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) noexcept {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

/// Two-sided standard normal critical value for a central confidence level.
inline double normal_critical_value(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw DomainError("confidence must lie in (0,1)");
  }
  const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, 0.5 + confidence / 2.0);
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double confidence) {
  if (trials == 0) return {0.0, 1.0};
  const double z = normal_critical_value(confidence);
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

}  // namespace rlab
