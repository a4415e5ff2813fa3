#pragma once

// Closed-form anti-concentration bounds and the reports pairing each bound
// with the quantity it should dominate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "rlab/error.hpp"

namespace rlab::bounds {

inline constexpr std::uint64_t kExactBinomialLimit = 1000;

/// C(n, k) / 2^n. Exact rational arithmetic up to n = 1000, log-gamma above.
inline double binomial_half_pmf(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0.0;
  if (n <= kExactBinomialLimit) {
    namespace mp = boost::multiprecision;
    mp::cpp_int c = 1;
    const std::uint64_t kk = std::min(k, n - k);
    for (std::uint64_t i = 1; i <= kk; ++i) c = c * (n - kk + i) / i;
    const mp::cpp_rational q(c, mp::cpp_int(1) << static_cast<unsigned>(n));
    return q.convert_to<double>();
  }
  const long double nn = static_cast<long double>(n);
  const long double kk = static_cast<long double>(k);
  const long double lg = std::lgamma(nn + 1.0L) - std::lgamma(kk + 1.0L) - std::lgamma(nn - kk + 1.0L) -
                         nn * std::numbers::ln2_v<long double>;
  return static_cast<double>(std::exp(lg));
}

/// C(n, floor(n/2)) 2^-n.
inline double elo_bound(std::uint64_t n) {
  if (n == 0) throw DomainError("elo_bound: n must be positive");
  return binomial_half_pmf(n, n / 2);
}

/// 1/m + sqrt(2/(pi n)) for odd m, 2/m + sqrt(2/(pi n)) for even m.
inline double modular_elo_bound(std::int64_t m, std::uint64_t n) {
  if (m < 2) throw DomainError("modular_elo_bound: m must be at least 2");
  if (n == 0) throw DomainError("modular_elo_bound: n must be positive");
  const double lead = (m % 2 == 0 ? 2.0 : 1.0) / static_cast<double>(m);
  return lead + std::sqrt(2.0 / (std::numbers::pi * static_cast<double>(n)));
}

/// (1/m) sum_lambda prod_i |cos(2 pi b_i lambda / m)|.
inline double cosine_product_bound(std::int64_t m, std::span<const std::int64_t> steps) {
  if (m < 2) throw DomainError("cosine_product_bound: m must be at least 2");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] <= 0 || std::gcd(steps[i], m) != 1) {
      throw DomainError("cosine_product_bound: step " + std::to_string(i + 1) + " (" +
                        std::to_string(steps[i]) + ") is not coprime to " + std::to_string(m));
    }
  }
  double total = 0.0;
  for (std::int64_t lambda = 0; lambda < m; ++lambda) {
    double prod = 1.0;
    for (std::int64_t b : steps) {
      const std::int64_t phase = ((b % m) * lambda) % m;
      prod *= std::fabs(std::cos(2.0 * std::numbers::pi * static_cast<double>(phase) / static_cast<double>(m)));
      if (prod == 0.0) break;
    }
    total += prod;
  }
  return total / static_cast<double>(m);
}

/// The all-ones assignment, which maximizes the cosine product for n steps.
inline double cosine_product_bound_maximized(std::int64_t m, std::uint64_t n) {
  if (m < 2) throw DomainError("cosine_product_bound: m must be at least 2");
  double total = 0.0;
  for (std::int64_t lambda = 0; lambda < m; ++lambda) {
    const double c = std::fabs(std::cos(2.0 * std::numbers::pi * static_cast<double>(lambda) / static_cast<double>(m)));
    total += std::pow(c, static_cast<double>(n));
  }
  return total / static_cast<double>(m);
}

enum class Branch { small_delta, large_delta };

inline const char* branch_name(Branch b) noexcept {
  return b == Branch::small_delta ? "small_delta" : "large_delta";
}

struct ExponentQuery {
  double alpha = 1.0;
  double delta = 0.0;
  double gamma = 0.01;
  double f_value = 0.0;
  double exponent = 0.0;
  Branch branch = Branch::small_delta;
};

inline double delta_star(double alpha) { return (std::sqrt(alpha * alpha + 1.0) - alpha) / 2.0; }

inline double f_small_delta(double a, double d) {
  return a * a / ((a + d) * (a + 2.0 * d + 2.0 * std::sqrt(d * d + a * d)));
}

inline double f_large_delta(double a, double d) {
  return a * a / ((a + d) * (1.0 + 2.0 * d) * (a + 0.5 + d));
}

inline ExponentQuery anti_exponent_f(ExponentQuery q) {
  if (!(q.alpha > 0.0)) throw DomainError("anti_exponent_f: alpha must be positive");
  if (!(q.delta >= 0.0)) throw DomainError("anti_exponent_f: delta must be non-negative");
  if (!(q.gamma > 0.0)) throw DomainError("anti_exponent_f: gamma must be positive");
  if (q.delta <= delta_star(q.alpha)) {
    q.branch = Branch::small_delta;
    q.f_value = f_small_delta(q.alpha, q.delta);
  } else {
    q.branch = Branch::large_delta;
    q.f_value = f_large_delta(q.alpha, q.delta);
  }
  q.exponent = 0.5 + q.alpha * q.f_value - q.gamma;
  return q;
}

/// 3 / (16 ceil(sqrt(variance))).
inline double lower_anti_floor(double variance) {
  if (!(variance > 0.0)) throw DomainError("lower_anti_floor: variance must be positive");
  auto c = static_cast<double>(std::ceil(std::sqrt(variance)));
  while (c > 1.0 && (c - 1.0) * (c - 1.0) >= variance) c -= 1.0;
  while (c * c < variance) c += 1.0;
  return 3.0 / (16.0 * c);
}

/// e^{-t^2/2}, bounding P(X >= t ||a||_2).
inline double hoeffding_tail(double l2_norm, double t) {
  if (!(l2_norm > 0.0)) throw DomainError("hoeffding_tail: l2 norm must be positive");
  if (!(t >= 0.0)) throw DomainError("hoeffding_tail: t must be non-negative");
  return std::exp(-t * t / 2.0);
}

struct LocalClt {
  double approx = 0.0;
  bool parity_ok = true;
};

/// e^{-x^2/2n} / sqrt(pi n / 2) for x of the parity of n.
inline LocalClt local_clt_approx(std::uint64_t n, std::int64_t x) {
  if (n == 0) throw DomainError("local_clt_approx: n must be positive");
  const auto ax = static_cast<std::uint64_t>(x < 0 ? -x : x);
  if (ax % 2 != n % 2) throw DomainError("local_clt_approx: x and n have different parity");
  if (ax > n) throw DomainError("local_clt_approx: |x| exceeds n");
  const double nd = static_cast<double>(n);
  const double xd = static_cast<double>(x);
  return {std::exp(-xd * xd / (2.0 * nd)) / std::sqrt(std::numbers::pi * nd / 2.0), true};
}

/// P(S_n = x) for the simple symmetric walk.
inline double ssrw_point_mass(std::uint64_t n, std::int64_t x) {
  const auto ax = static_cast<std::uint64_t>(x < 0 ? -x : x);
  if (ax > n || ax % 2 != n % 2) return 0.0;
  return binomial_half_pmf(n, (n + ax) / 2);
}

/// P(|A| >= s) + 3 Q_r(A) Q_s(B); unclamped.
inline double combine_scales_rhs(double qr_a, double qs_b, double tail_a_at_s) {
  for (double p : {qr_a, qs_b, tail_a_at_s}) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("combine_scales_rhs: inputs must lie in [0,1]");
  }
  return tail_a_at_s + 3.0 * qr_a * qs_b;
}

struct KochenStone {
  double ratio = 0.0;
  bool zero_mean_warning = false;
};

/// (E Z)^2 / E Z^2.
inline KochenStone kochen_stone_ratio(double mean, double second_moment) {
  if (!(second_moment > 0.0)) throw DomainError("kochen_stone_ratio: second moment must be positive");
  if (second_moment < mean * mean - 1e-12 * std::max(1.0, second_moment)) {
    throw DomainError("kochen_stone_ratio: inconsistent moments (second moment below mean squared)");
  }
  if (mean == 0.0) return {0.0, true};
  return {std::min(1.0, mean * mean / second_moment), false};
}

/// Cumulative sums of (2C + 1) Q_1(X_n).
inline std::vector<double> transience_partial_sum(std::span<const std::pair<std::uint64_t, double>> q1_values,
                                                  double c) {
  if (!(c >= 0.0)) throw DomainError("transience_partial_sum: C must be non-negative");
  std::vector<double> out;
  out.reserve(q1_values.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < q1_values.size(); ++i) {
    if (i > 0 && q1_values[i].first < q1_values[i - 1].first) {
      throw DomainError("transience_partial_sum: values must be sorted by n");
    }
    acc += (2.0 * c + 1.0) * q1_values[i].second;
    out.push_back(acc);
  }
  return out;
}

struct BoundReport {
  std::string bound_name;
  std::vector<std::pair<std::string, double>> params;
  double bound_value = 0.0;
  double clamped_bound = 0.0;
  std::optional<double> compared_value;
  std::optional<bool> satisfied;
  std::optional<double> slack;
};

inline constexpr double kDominationTolerance = 1e-12;

inline BoundReport make_report(std::string name, std::vector<std::pair<std::string, double>> params,
                               double bound, std::optional<double> compared = std::nullopt) {
  BoundReport r{std::move(name), std::move(params), bound, std::clamp(bound, 0.0, 1.0), compared, {}, {}};
  if (compared) {
    r.satisfied = *compared <= bound + kDominationTolerance;
    r.slack = bound - *compared;
  }
  return r;
}

}  // namespace rlab::bounds
