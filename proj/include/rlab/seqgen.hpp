#pragma once

// Step-size sequences for one-dimensional Rademacher walks, plus finite-prefix
// checks of the arithmetic side conditions used by the transience criteria.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rlab/error.hpp"
#include "rlab/rng.hpp"
#include "rlab/stats.hpp"

namespace rlab::seq {

enum class Family {
  power,
  log_power,
  sqrt_block,
  fast_block,
  fast_increasing,
  sparse_values,
  geometric,
  constant,
  custom,
};

inline constexpr std::string_view family_name(Family f) noexcept {
  switch (f) {
    case Family::power: return "power";
    case Family::log_power: return "log_power";
    case Family::sqrt_block: return "sqrt_block";
    case Family::fast_block: return "fast_block";
    case Family::fast_increasing: return "fast_increasing";
    case Family::sparse_values: return "sparse_values";
    case Family::geometric: return "geometric";
    case Family::constant: return "constant";
    case Family::custom: return "custom";
  }
  return "unknown";
}

inline Family family_from_name(std::string_view name) {
  for (Family f : {Family::power, Family::log_power, Family::sqrt_block, Family::fast_block,
                   Family::fast_increasing, Family::sparse_values, Family::geometric,
                   Family::constant, Family::custom}) {
    if (family_name(f) == name) return f;
  }
  throw ConfigError("unknown sequence family '" + std::string(name) + "'");
}

/// Non-decreasing growth function f : N -> R, either tabulated or one of a
/// few closed forms. Tables are indexed from n = 1.
struct GrowthFn {
  enum class Kind { table, power, exponential, logarithmic };

  Kind kind = Kind::power;
  std::vector<double> table;
  double coef = 1.0;
  double exponent = 1.0;
  double offset = 0.0;

  double operator()(std::uint64_t n) const {
    const double x = static_cast<double>(n);
    switch (kind) {
      case Kind::table:
        if (n == 0 || n > table.size()) {
          throw ConfigError("growth table covers n <= " + std::to_string(table.size()) +
                            ", requested n = " + std::to_string(n));
        }
        return table[n - 1];
      case Kind::power: return coef * std::pow(x, exponent) + offset;
      case Kind::exponential: return coef * std::exp(exponent * x) + offset;
      case Kind::logarithmic: return coef * std::log(x) + offset;
    }
    return 0.0;
  }

  void validate() const {
    switch (kind) {
      case Kind::table:
        if (table.empty()) throw ConfigError("growth table is empty");
        if (!std::is_sorted(table.begin(), table.end())) {
          throw ConfigError("growth table must be non-decreasing");
        }
        break;
      case Kind::power:
      case Kind::exponential:
      case Kind::logarithmic:
        if (coef < 0.0 || exponent < 0.0) {
          throw ConfigError("growth function coef and exponent must be non-negative");
        }
        break;
    }
  }
};

/// Monte Carlo calibration of block lengths for the fast_block family.
struct CoverCalibration {
  std::uint64_t seed = 0x5EEDC0FFEE123457ULL;
  std::uint32_t samples = 256;
  std::uint64_t step_budget = std::uint64_t{1} << 28;
  double interval_confidence = 0.99;
};

struct StepSequenceSpec {
  Family family = Family::constant;
  std::optional<double> alpha;
  bool floor_values = false;
  std::optional<GrowthFn> growth_fn;
  double cover_confidence = 0.5;
  std::vector<double> custom_values;
  std::optional<double> value;               // constant family
  std::uint64_t first_block_length = 4;      // fast_increasing: n_j = first * 2^(j-1)
  CoverCalibration calibration;              // fast_block
};

namespace detail {

inline const GrowthFn& require_growth(const StepSequenceSpec& spec) {
  if (!spec.growth_fn) {
    throw ConfigError(std::string(family_name(spec.family)) + " requires growth_fn");
  }
  spec.growth_fn->validate();
  return *spec.growth_fn;
}

inline double require_alpha(const StepSequenceSpec& spec) {
  if (!spec.alpha) throw ConfigError(std::string(family_name(spec.family)) + " requires alpha");
  if (!(*spec.alpha >= 0.0) || !std::isfinite(*spec.alpha)) {
    throw ConfigError("alpha must be a finite non-negative number");
  }
  return *spec.alpha;
}

inline void generate_sqrt_block(std::uint64_t n, std::vector<double>& out) {
  for (unsigned k = 1; out.size() < n; ++k) {
    if (k > 31) throw InfeasibleError("sqrt_block: block index exceeds 31");
    const std::uint64_t length = (std::uint64_t{1} << (2 * k)) / 2;
    const double hi = std::ldexp(1.0, static_cast<int>(k)) + 1.0;
    const double lo = hi - 2.0;
    for (std::uint64_t i = 0; i < length && out.size() < n; ++i) out.push_back(i % 2 == 0 ? hi : lo);
  }
}

}  // namespace detail

/// Smallest power of two L (number of paired steps) for which the planar
/// simple random walk started at the origin has covered {(0, y) : |y| <= radius}
/// by time L with probability at least `target`, judged by the lower Wilson
/// bound over the calibration samples. Radius 0 gives L = 1.
inline std::uint64_t calibrate_cover_length(double radius, double target,
                                            const CoverCalibration& cal,
                                            std::uint64_t block_index) {
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("cover_confidence must lie in (0,1)");
  if (radius <= 0.0) return 1;
  if (cal.samples == 0) throw ConfigError("calibration needs at least one sample");
  const std::uint64_t cap = cal.step_budget / cal.samples;
  if (radius > static_cast<double>(cap) || radius > 1e9) {
    throw InfeasibleError("fast_block block " + std::to_string(block_index) +
                          ": cover calibration for radius " + std::to_string(radius) +
                          " exceeds the sample budget");
  }
  const auto m = static_cast<std::int64_t>(radius);
  const std::uint64_t width = static_cast<std::uint64_t>(2 * m + 1);
  std::vector<std::uint64_t> cover_time(cal.samples);
  std::vector<char> seen(width);
  for (std::uint32_t s = 0; s < cal.samples; ++s) {
    StreamEngine eng(cal.seed, (block_index << 32) | s);
    std::fill(seen.begin(), seen.end(), 0);
    std::int64_t x = 0, y = 0;
    seen[static_cast<std::size_t>(m)] = 1;
    std::uint64_t covered = 1, t = 0, bits = 0;
    unsigned left = 0;
    while (covered < width && t < cap) {
      if (left == 0) {
        bits = eng();
        left = 32;
      }
      switch (bits & 3U) {
        case 0: ++x; break;
        case 1: --x; break;
        case 2: ++y; break;
        default: --y; break;
      }
      bits >>= 2;
      --left;
      ++t;
      if (x == 0 && y >= -m && y <= m) {
        auto& cell = seen[static_cast<std::size_t>(y + m)];
        if (!cell) {
          cell = 1;
          ++covered;
        }
      }
    }
    cover_time[s] = covered == width ? t : cap + 1;
  }
  std::sort(cover_time.begin(), cover_time.end());
  for (std::uint64_t length = 1; length <= cap; length *= 2) {
    const auto hits = static_cast<std::uint64_t>(
        std::upper_bound(cover_time.begin(), cover_time.end(), length) - cover_time.begin());
    if (wilson_interval(hits, cal.samples, cal.interval_confidence).lo >= target) return length;
  }
  throw InfeasibleError("fast_block block " + std::to_string(block_index) +
                        ": cover probability never reached the target within the sample budget");
}

/// First n step sizes of the sequence. Deterministic, and generate(spec, n)
/// is always a prefix of generate(spec, n + 1).
inline std::vector<double> generate(const StepSequenceSpec& spec, std::uint64_t n) {
  if (n == 0) throw DomainError("generate: n must be positive");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, std::uint64_t{1} << 24)));

  switch (spec.family) {
    case Family::power: {
      const double alpha = detail::require_alpha(spec);
      for (std::uint64_t i = 1; i <= n; ++i) {
        const double v = std::pow(static_cast<double>(i), alpha);
        out.push_back(spec.floor_values ? std::floor(v) : v);
      }
      break;
    }
    case Family::log_power: {
      const double alpha = detail::require_alpha(spec);
      for (std::uint64_t i = 1; i <= n; ++i) {
        const double v = std::pow(std::log(static_cast<double>(i)), alpha);
        out.push_back(spec.floor_values ? std::floor(v) : v);
      }
      break;
    }
    case Family::sqrt_block:
      detail::generate_sqrt_block(n, out);
      break;
    case Family::fast_block: {
      const GrowthFn& f = detail::require_growth(spec);
      double mass = 0.0;  // sum of all steps chosen so far
      std::uint64_t placed = 0;
      for (std::uint64_t block = 1; out.size() < n; ++block) {
        const std::uint64_t pairs =
            calibrate_cover_length(mass, spec.cover_confidence, spec.calibration, block);
        const double r = std::max(1.0, std::ceil(f(2 * pairs + placed)));
        for (std::uint64_t i = 0; i < 2 * pairs; ++i) {
          const double v = i % 2 == 0 ? r + 1.0 : r;
          if (out.size() < n) out.push_back(v);
          mass += v;
        }
        placed += 2 * pairs;
      }
      break;
    }
    case Family::fast_increasing: {
      const GrowthFn& f = detail::require_growth(spec);
      if (spec.first_block_length == 0) throw ConfigError("first_block_length must be positive");
      CompensatedSum c;  // c_m for the current m, c_1 = 0
      std::vector<double> increments{0.0};
      double previous_last = -1.0;
      std::uint64_t placed = 0;
      for (std::uint64_t block = 1; out.size() < n; ++block) {
        const std::uint64_t len = spec.first_block_length << std::min<std::uint64_t>(block - 1, 40);
        double x = f(placed + len);
        if (block > 1) x = std::max(x, previous_last + 1.0);
        // c_1 .. c_len
        while (increments.size() < len) {
          const double m = static_cast<double>(increments.size());
          c.add(std::pow(m, -1.5) / std::sqrt(1.0 + std::log(m)));
          increments.push_back(c.value());
        }
        for (std::uint64_t i = 0; i < len && out.size() < n; ++i) {
          const double v = x + increments[i];
          if (!out.empty() && !(v > out.back())) {
            throw InfeasibleError("fast_increasing: step values exceed double resolution in block " +
                                  std::to_string(block));
          }
          out.push_back(v);
        }
        previous_last = x + increments[len - 1];
        placed += len;
      }
      break;
    }
    case Family::sparse_values: {
      const GrowthFn& f = detail::require_growth(spec);
      auto p = [](std::uint64_t i) { return static_cast<double>((2 * i + 1) * (2 * i + 1)); };
      // Leading zero steps until f admits the first value p_1 = 9.
      while (out.size() < n && f(out.size() + 1) < p(1)) out.push_back(0.0);
      for (std::uint64_t i = 1; out.size() < n; ++i) {
        const double next = p(i + 1);
        const std::uint64_t start = out.size() + 1;  // first index of block i
        std::uint64_t len = static_cast<std::uint64_t>(next * next);
        // parity: l_{2j} = j + 1 (mod 2), l_{2j+1} = j (mod 2), for j >= 1
        std::optional<std::uint64_t> parity;
        if (i >= 2) parity = (i % 2 == 0) ? (i / 2 + 1) % 2 : ((i - 1) / 2) % 2;
        if (parity && len % 2 != *parity) ++len;
        const std::uint64_t stride = parity ? 2 : 1;
        // Smallest compliant length with f >= p_{i+1} after the block; only
        // resolved as far as the requested prefix needs.
        while (start + len <= n && f(start + len) < next) len += stride;
        for (std::uint64_t k = 0; k < len && out.size() < n; ++k) out.push_back(p(i));
      }
      break;
    }
    case Family::geometric: {
      const GrowthFn& f = detail::require_growth(spec);
      for (std::uint64_t i = 1; i <= n; ++i) {
        const double v = f(i);
        if (!(v >= 1.0)) throw DomainError("geometric family requires f(n) >= 1");
        int e = 0;
        std::frexp(v, &e);
        out.push_back(std::ldexp(1.0, e - 1));
      }
      break;
    }
    case Family::constant: {
      if (!spec.value) throw ConfigError("constant family requires value");
      if (!(*spec.value >= 0.0)) throw DomainError("constant step must be non-negative");
      out.assign(static_cast<std::size_t>(n), *spec.value);
      break;
    }
    case Family::custom: {
      if (spec.custom_values.size() < n) {
        throw ConfigError("custom sequence has " + std::to_string(spec.custom_values.size()) +
                          " values, " + std::to_string(n) + " requested");
      }
      out.assign(spec.custom_values.begin(), spec.custom_values.begin() + static_cast<std::ptrdiff_t>(n));
      break;
    }
  }

  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] >= 0.0) || !std::isfinite(out[i])) {
      throw DomainError("step " + std::to_string(i + 1) + " is negative or not finite");
    }
  }
  return out;
}

/// Block start indices n_k = (4^k + 2) / 6 of the sqrt_block family.
inline std::uint64_t sqrt_block_start(unsigned k) {
  if (k == 0 || k > 31) throw DomainError("sqrt_block_start: k must lie in [1, 31]");
  return ((std::uint64_t{1} << (2 * k)) + 2) / 6;
}

/// True when every step is a non-negative integer representable exactly.
inline bool is_integer_sequence(std::span<const double> steps) noexcept {
  return std::all_of(steps.begin(), steps.end(), [](double v) {
    return v >= 0.0 && v <= 0x1.0p53 && std::floor(v) == v;
  });
}

inline std::vector<std::int64_t> to_integer_steps(std::span<const double> steps) {
  std::vector<std::int64_t> out;
  out.reserve(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double v = steps[i];
    if (!(v >= 0.0)) throw DomainError("step " + std::to_string(i + 1) + " is negative");
    if (std::floor(v) != v || v > 0x1.0p53) {
      throw DomainError("step " + std::to_string(i + 1) + " is not an integer (MC-only sequence)");
    }
    out.push_back(static_cast<std::int64_t>(v));
  }
  return out;
}

struct SequenceCounts {
  std::map<std::int64_t, std::uint64_t> counts;
  std::uint64_t prefix_length = 0;

  std::uint64_t count(std::int64_t value) const {
    const auto it = counts.find(value);
    return it == counts.end() ? 0 : it->second;
  }
};

inline SequenceCounts value_counts(std::span<const double> seq) {
  SequenceCounts out;
  for (std::int64_t v : to_integer_steps(seq)) ++out.counts[v];
  out.prefix_length = seq.size();
  return out;
}

inline std::string to_decimal(u128 v) {
  if (v == 0) return "0";
  std::string s;
  while (v > 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  std::reverse(s.begin(), s.end());
  return s;
}

struct IntsConditionReport {
  std::int64_t n = 0;
  bool assump1_holds = false;
  std::uint64_t assump1_lhs = 0;  // sum of L_i over i <= n, gcd(i, n) = 1
  double assump1_rhs = 0.0;       // 2 n^2
  bool assump2_holds = false;
  u128 assump2_lhs = 0;           // sum of i^2 L_i over i < n
  double assump2_rhs = 0.0;       // 4 n^2 ln^3(n) L_n
  bool complete = false;          // the prefix contains a value larger than n
};

/// Both transience side conditions for a non-decreasing integer sequence at
/// one value n, natural logarithm throughout.
inline IntsConditionReport check_ints_conditions(const SequenceCounts& counts, std::int64_t n) {
  if (n < 2) throw DomainError("check_ints_conditions: n must be at least 2");
  IntsConditionReport r;
  r.n = n;
  const double nd = static_cast<double>(n);
  for (const auto& [value, mult] : counts.counts) {
    if (value < 1) continue;
    if (value <= n && std::gcd(value, n) == 1) r.assump1_lhs += mult;
    if (value < n) r.assump2_lhs += static_cast<u128>(value) * static_cast<u128>(value) * mult;
  }
  r.assump1_rhs = 2.0 * nd * nd;
  r.assump1_holds = static_cast<double>(r.assump1_lhs) >= r.assump1_rhs;
  const double ln = std::log(nd);
  r.assump2_rhs = 4.0 * nd * nd * ln * ln * ln * static_cast<double>(counts.count(n));
  r.assump2_holds = static_cast<long double>(r.assump2_lhs) >= static_cast<long double>(r.assump2_rhs);
  r.complete = !counts.counts.empty() && counts.counts.rbegin()->first > n;
  return r;
}

struct SparseValueCheck {
  std::int64_t value = 0;
  std::uint64_t multiplicity = 0;
  double required = 0.0;  // epsilon * value^2
  std::optional<std::int64_t> witness;
  std::uint64_t witness_multiplicity = 0;
  bool holds = false;
};

struct SparseConditionReport {
  std::vector<SparseValueCheck> values;
  double reciprocal_sum = 0.0;
  bool all_in_valueset = true;
  bool all_hold = false;
};

/// For each positive value s in the prefix, look for a smaller value s' with
/// L_{s'} >= epsilon s^2 (the largest such s' is reported), and accumulate the
/// reciprocal sum over the value set (the observed values if none is given).
inline SparseConditionReport check_sparse_conditions(const SequenceCounts& counts, double epsilon,
                                                     const std::set<std::int64_t>* valueset = nullptr) {
  if (!(epsilon > 0.0)) throw DomainError("check_sparse_conditions: epsilon must be positive");
  SparseConditionReport rep;
  CompensatedSum recip;
  std::vector<std::pair<std::int64_t, std::uint64_t>> seen;
  for (const auto& [value, mult] : counts.counts) {
    if (value < 1) continue;
    SparseValueCheck c;
    c.value = value;
    c.multiplicity = mult;
    c.required = epsilon * static_cast<double>(value) * static_cast<double>(value);
    for (auto it = seen.rbegin(); it != seen.rend(); ++it) {
      if (static_cast<double>(it->second) >= c.required) {
        c.witness = it->first;
        c.witness_multiplicity = it->second;
        break;
      }
    }
    c.holds = c.witness.has_value();
    if (valueset && !valueset->contains(value)) rep.all_in_valueset = false;
    if (!valueset) recip.add(1.0 / static_cast<double>(value));
    rep.values.push_back(c);
    seen.emplace_back(value, mult);
  }
  if (valueset) {
    for (std::int64_t s : *valueset) {
      if (s > 0) recip.add(1.0 / static_cast<double>(s));
    }
  }
  rep.reciprocal_sum = recip.value();
  rep.all_hold = !rep.values.empty() &&
                 std::all_of(rep.values.begin(), rep.values.end(), [](const auto& c) { return c.holds; });
  return rep;
}

}  // namespace rlab::seq
