#pragma once

// Exact law of X_n = sum eps_i a_i for integer steps, on Z and on Z/mZ, and
// the concentration function Q_r(A) = sup_x P(x < A <= x + r).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "rlab/error.hpp"
#include "rlab/stats.hpp"

namespace rlab::dist {

inline constexpr std::size_t kDefaultSupportCap = std::size_t{1} << 26;

/// Sparse law on the integers as sorted parallel arrays. `Weight` is double
/// for ordinary use, or std::uint64_t for exact mode where each weight is a
/// count over the denominator 2^denominator_log2.
template <class Weight>
struct BasicPmf {
  std::vector<std::int64_t> support{0};
  std::vector<Weight> probs{Weight{1}};
  std::uint64_t steps_applied = 0;
  unsigned denominator_log2 = 0;  // exact mode only
  std::int64_t lattice_gcd = 0;   // gcd of the non-zero steps applied so far

  static constexpr bool is_exact = std::is_integral_v<Weight>;

  std::size_t size() const noexcept { return support.size(); }

  double probability(std::size_t i) const noexcept {
    if constexpr (is_exact) {
      return std::ldexp(static_cast<double>(probs[i]), -static_cast<int>(denominator_log2));
    } else {
      return probs[i];
    }
  }

  double mass_at(std::int64_t x) const noexcept {
    const auto it = std::lower_bound(support.begin(), support.end(), x);
    if (it == support.end() || *it != x) return 0.0;
    return probability(static_cast<std::size_t>(it - support.begin()));
  }

  /// Convolve with the law of +-a. Zero steps only advance the step count.
  void apply_step(std::int64_t a, std::size_t cap = kDefaultSupportCap) {
    if (a < 0) {
      throw DomainError("step " + std::to_string(steps_applied + 1) + " is negative");
    }
    ++steps_applied;
    if (a == 0) return;
    if constexpr (is_exact) {
      if (denominator_log2 >= 63) {
        throw InfeasibleError("exact mode supports at most 63 non-zero steps (step " +
                              std::to_string(steps_applied) + ")");
      }
    }
    const std::int64_t g = std::gcd(lattice_gcd, a);
    // Atoms sit on a lattice of spacing 2g inside [min - a, max + a].
    const auto span_atoms = static_cast<std::uint64_t>((support.back() - support.front() + 2 * a) / (2 * g)) + 1;
    const std::uint64_t projected = std::min<std::uint64_t>(2 * support.size(), span_atoms);
    if (projected > cap) {
      throw InfeasibleError("support cap exceeded at step " + std::to_string(steps_applied) +
                            ": projected " + std::to_string(projected) + " atoms, cap " +
                            std::to_string(cap));
    }
    std::vector<std::int64_t> ns;
    std::vector<Weight> np;
    ns.reserve(static_cast<std::size_t>(projected));
    np.reserve(static_cast<std::size_t>(projected));
    const std::size_t len = support.size();
    std::size_t i = 0, j = 0;  // i walks support - a, j walks support + a
    auto weight = [&](std::size_t k) {
      if constexpr (is_exact) return probs[k];
      else return 0.5 * probs[k];
    };
    while (i < len || j < len) {
      const std::int64_t lo = i < len ? support[i] - a : INT64_MAX;
      const std::int64_t hi = j < len ? support[j] + a : INT64_MAX;
      if (lo < hi) {
        ns.push_back(lo);
        np.push_back(weight(i++));
      } else if (hi < lo) {
        ns.push_back(hi);
        np.push_back(weight(j++));
      } else {
        ns.push_back(lo);
        np.push_back(weight(i++) + weight(j++));
      }
    }
    support = std::move(ns);
    probs = std::move(np);
    lattice_gcd = g;
    if constexpr (is_exact) ++denominator_log2;
  }

  double total_mass() const {
    if constexpr (is_exact) {
      std::uint64_t s = 0;
      for (auto c : probs) s += c;
      return std::ldexp(static_cast<double>(s), -static_cast<int>(denominator_log2));
    } else {
      return compensated_sum(probs);
    }
  }
};

using ExactPmf = BasicPmf<double>;
using RationalPmf = BasicPmf<std::uint64_t>;

template <class Weight = double>
BasicPmf<Weight> walk_pmf(std::span<const std::int64_t> steps, std::size_t cap = kDefaultSupportCap) {
  BasicPmf<Weight> pmf;
  for (std::int64_t a : steps) pmf.apply_step(a, cap);
  return pmf;
}

/// Reduced fraction "p/q" for an exact-mode atom.
inline std::string rational_string(std::uint64_t count, unsigned log2_den) {
  if (count == 0) return "0";
  while (log2_den > 0 && count % 2 == 0) {
    count /= 2;
    --log2_den;
  }
  if (log2_den == 0) return std::to_string(count);
  return std::to_string(count) + "/" + std::to_string(std::uint64_t{1} << log2_den);
}

struct ConcentrationQuery {
  double r = 1.0;
  double result = 0.0;
  double argmax_x = 0.0;
  // exact mode: result == numerator / 2^denominator_log2
  std::uint64_t numerator = 0;
  unsigned denominator_log2 = 0;
};

/// Exact supremum of P(x < X <= x + r). The supremum is attained with the
/// right end of the window on an atom, so it is enough to slide over atoms.
template <class Weight>
ConcentrationQuery concentration_q(const BasicPmf<Weight>& pmf, double r) {
  if (!(r > 0.0)) throw DomainError("concentration_q: r must be positive");
  ConcentrationQuery q;
  q.r = r;
  q.denominator_log2 = pmf.denominator_log2;
  const auto& s = pmf.support;
  const std::size_t len = s.size();
  using Acc = std::conditional_t<std::is_integral_v<Weight>, std::uint64_t, long double>;
  Acc window = 0, best = 0;
  std::size_t lo = 0;
  bool have = false;
  for (std::size_t hi = 0; hi < len; ++hi) {
    window += pmf.probs[hi];
    while (static_cast<double>(s[hi] - s[lo]) >= r) window -= pmf.probs[lo++];
    if constexpr (!std::is_integral_v<Weight>) {
      // Keep short windows free of add/subtract drift.
      if (hi - lo < 8) {
        window = 0;
        for (std::size_t k = lo; k <= hi; ++k) window += pmf.probs[k];
      }
    }
    if (!have || window > best) {
      best = window;
      q.argmax_x = static_cast<double>(s[hi]) - r;
      have = true;
    }
  }
  if constexpr (std::is_integral_v<Weight>) {
    q.numerator = best;
    q.result = std::ldexp(static_cast<double>(best), -static_cast<int>(pmf.denominator_log2));
  } else {
    q.result = std::min(1.0, static_cast<double>(best));  // rounding can leave a normalized sum at 1 + ulp
  }
  return q;
}

/// P(X >= t).
template <class Weight>
double tail_prob(const BasicPmf<Weight>& pmf, double t) {
  CompensatedSum acc;
  const auto first = std::lower_bound(pmf.support.begin(), pmf.support.end(), t,
                                      [](std::int64_t v, double x) { return static_cast<double>(v) < x; });
  for (auto i = static_cast<std::size_t>(first - pmf.support.begin()); i < pmf.size(); ++i) {
    acc.add(pmf.probability(i));
  }
  return std::min(1.0, acc.value());
}

/// P(|X| >= t).
template <class Weight>
double abs_tail_prob(const BasicPmf<Weight>& pmf, double t) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    if (std::fabs(static_cast<double>(pmf.support[i])) >= t) acc.add(pmf.probability(i));
  }
  return std::min(1.0, acc.value());
}

/// P(|X| <= c).
template <class Weight>
double ball_prob(const BasicPmf<Weight>& pmf, double c) {
  CompensatedSum acc;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    if (std::fabs(static_cast<double>(pmf.support[i])) <= c) acc.add(pmf.probability(i));
  }
  return std::min(1.0, acc.value());
}

struct ModularPmf {
  std::int64_t modulus = 2;
  std::vector<double> probs;

  double max_prob() const { return *std::max_element(probs.begin(), probs.end()); }
};

enum class ModularMethod { direct, spectral };

inline std::int64_t mod_floor(std::int64_t x, std::int64_t m) noexcept {
  const std::int64_t r = x % m;
  return r < 0 ? r + m : r;
}

/// Residue law of X_n. The direct route convolves cyclically, the spectral
/// route multiplies each Fourier coefficient by cos(2 pi a lambda / m).
inline ModularPmf modular_walk_pmf(std::span<const std::int64_t> steps, std::int64_t m,
                                   ModularMethod method = ModularMethod::direct) {
  if (m < 2) throw DomainError("modular_walk_pmf: modulus must be at least 2");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i] < 0) throw DomainError("step " + std::to_string(i + 1) + " is negative");
  }
  const auto mu = static_cast<std::size_t>(m);
  ModularPmf out{m, std::vector<double>(mu, 0.0)};
  if (method == ModularMethod::direct) {
    out.probs[0] = 1.0;
    std::vector<double> next(mu);
    for (std::int64_t a : steps) {
      const auto b = static_cast<std::size_t>(a % m);
      if (b == 0) continue;
      for (std::size_t r = 0; r < mu; ++r) {
        next[r] = 0.5 * (out.probs[(r + mu - b) % mu] + out.probs[(r + b) % mu]);
      }
      out.probs.swap(next);
    }
    return out;
  }
  // The law is symmetric, so every coefficient is real.
  std::vector<double> coef(mu, 1.0);
  for (std::int64_t a : steps) {
    const std::int64_t b = a % m;
    for (std::size_t lambda = 1; lambda < mu; ++lambda) {
      const std::int64_t phase = (b * static_cast<std::int64_t>(lambda)) % m;
      coef[lambda] *= std::cos(2.0 * std::numbers::pi * static_cast<double>(phase) / static_cast<double>(m));
    }
  }
  for (std::size_t r = 0; r < mu; ++r) {
    CompensatedSum acc;
    for (std::size_t lambda = 0; lambda < mu; ++lambda) {
      const auto phase = static_cast<std::int64_t>((lambda * r) % mu);
      acc.add(coef[lambda] * std::cos(2.0 * std::numbers::pi * static_cast<double>(phase) / static_cast<double>(m)));
    }
    out.probs[r] = std::max(0.0, acc.value() / static_cast<double>(m));
  }
  return out;
}

template <class Weight>
ModularPmf reduce_mod(const BasicPmf<Weight>& pmf, std::int64_t m) {
  if (m < 2) throw DomainError("reduce_mod: modulus must be at least 2");
  std::vector<CompensatedSum> acc(static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    acc[static_cast<std::size_t>(mod_floor(pmf.support[i], m))].add(pmf.probability(i));
  }
  ModularPmf out{m, {}};
  for (const auto& a : acc) out.probs.push_back(a.value());
  return out;
}

struct Moments {
  double variance = 0.0;
  double l2_norm = 0.0;
  double total = 0.0;
};

inline Moments summary_moments(std::span<const double> steps) {
  CompensatedSum sq, sum;
  for (double a : steps) {
    sq.add(a * a);
    sum.add(a);
  }
  return {sq.value(), std::sqrt(sq.value()), sum.value()};
}

inline Moments summary_moments(std::span<const std::int64_t> steps) {
  std::vector<double> d(steps.begin(), steps.end());
  return summary_moments(std::span<const double>(d));
}

/// Convolution of two independent integer laws (used by the product sandwich
/// and combine-scales checks).
inline ExactPmf convolve(const ExactPmf& a, const ExactPmf& b) {
  std::vector<std::pair<std::int64_t, double>> atoms;
  atoms.reserve(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      atoms.emplace_back(a.support[i] + b.support[j], a.probs[i] * b.probs[j]);
    }
  }
  std::sort(atoms.begin(), atoms.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  ExactPmf out;
  out.support.clear();
  out.probs.clear();
  for (const auto& [x, p] : atoms) {
    if (!out.support.empty() && out.support.back() == x) {
      out.probs.back() += p;
    } else {
      out.support.push_back(x);
      out.probs.push_back(p);
    }
  }
  out.steps_applied = a.steps_applied + b.steps_applied;
  return out;
}

/// Build a law from arbitrary (value, weight) pairs, normalized to mass one.
inline ExactPmf make_pmf(std::vector<std::pair<std::int64_t, double>> atoms) {
  if (atoms.empty()) throw DomainError("make_pmf: no atoms");
  std::sort(atoms.begin(), atoms.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  double total = 0.0;
  for (const auto& [x, w] : atoms) {
    if (!(w >= 0.0)) throw DomainError("make_pmf: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw DomainError("make_pmf: zero total weight");
  ExactPmf out;
  out.support.clear();
  out.probs.clear();
  for (const auto& [x, w] : atoms) {
    if (!out.support.empty() && out.support.back() == x) {
      out.probs.back() += w / total;
    } else {
      out.support.push_back(x);
      out.probs.push_back(w / total);
    }
  }
  return out;
}

}  // namespace rlab::dist
