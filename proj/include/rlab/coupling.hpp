#pragma once

// Coupling game for two walks with the same steps started d apart. Signs of
// X are drawn from a counter stream; X' copies them except at the two
// anti-coupled times of each episode. D = X - X' changes only at those times,
// by 2 eps_j a_j, and the game is won once D lies in [0, epsilon].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rlab/error.hpp"
#include "rlab/rng.hpp"
#include "rlab/seqgen.hpp"

#pragma once

// Coupling game for two walks with the same steps started d apart. Signs of
// X are drawn from a counter stream; X' copies them except at the two
// anti-coupled times of each episode. D = X - X' changes only at those times,
// by 2 eps_j a_j, and the game is won once D lies in [0, epsilon].
//
// Losing episodes push the walks further apart and the next episode needs
// indices roughly ten times larger, so indices are 512-bit integers and
// positions carry 50 significant digits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/expm1.hpp>
#include <boost/math/special_functions/log1p.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "rlab/error.hpp"
#include "rlab/rng.hpp"
#include "rlab/seqgen.hpp"

namespace rlab::coupling {

using index_t = boost::multiprecision::uint512_t;
using real = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<50>, boost::multiprecision::et_off>;

inline constexpr unsigned kDefaultHorizonLog2 = 256;
inline constexpr unsigned kMaxHorizonLog2 = 256;  // sqrt(2^256) = 2^128 leaves ~38 fractional bits

/// Sign of step `index` in the stream; agrees with CounterStream::sign below 2^128.
inline int sign_at(const CounterStream& s, const index_t& index) {
  const index_t k = index - 1;
  const index_t w = k >> 6;
  const auto bit = static_cast<unsigned>(static_cast<std::uint64_t>(k & 63U));
  std::uint64_t word;
  if (w >> 128 == 0) {
    const auto lo = static_cast<std::uint64_t>(w & ~std::uint64_t{0});
    const auto hi = static_cast<std::uint64_t>((w >> 64) & ~std::uint64_t{0});
    word = s.word((static_cast<u128>(hi) << 64) | lo);
  } else {
    index_t rest = w >> 64;
    word = s.word(static_cast<std::uint64_t>(w & ~std::uint64_t{0}));
    for (std::uint64_t limb = 1; rest != 0; ++limb, rest >>= 64) {
      word = mix64(word ^ mix64(static_cast<std::uint64_t>(rest & ~std::uint64_t{0}) * kGolden + limb));
    }
  }
  return ((word >> bit) & 1U) ? 1 : -1;
}

inline index_t horizon_from_log2(unsigned horizon_log2) {
  if (horizon_log2 == 0 || horizon_log2 > kMaxHorizonLog2) {
    throw ConfigError("coupling: horizon_log2 must lie in [1, " + std::to_string(kMaxHorizonLog2) + "]");
  }
  return index_t(1) << horizon_log2;
}

/// Step sizes with vanishing gaps, addressed by 512-bit index. The analytic
/// forms have decreasing gaps, so "first index with gap below t" and "first
/// index reaching a_n + t" can be found by bisection; the tabulated form scans.
class StepSource {
 public:
  enum class Kind { power, log_power, table };

  static StepSource power(real alpha, index_t horizon) {
    if (!(alpha > 0 && alpha < 1)) throw ConfigError("coupling: power steps need 0 < alpha < 1 for vanishing gaps");
    return StepSource(Kind::power, alpha, horizon, {});
  }
  static StepSource log_power(real alpha, index_t horizon) {
    if (!(alpha > 0 && alpha <= 1)) throw ConfigError("coupling: log_power steps need 0 < alpha <= 1");
    return StepSource(Kind::log_power, alpha, horizon, {});
  }
  static StepSource table(std::vector<double> values) {
    if (values.empty()) throw ConfigError("coupling: empty step table");
    const index_t h = values.size();
    return StepSource(Kind::table, 0, h, std::move(values));
  }

  /// Chooses the analytic form for power and log_power specs, otherwise tabulates
  /// `table_length` generated steps.
  static StepSource from_spec(const seq::StepSequenceSpec& spec, unsigned horizon_log2,
                              std::uint64_t table_length) {
    const index_t horizon = horizon_from_log2(horizon_log2);
    if (!spec.floor_values && spec.alpha) {
      if (spec.family == seq::Family::power && *spec.alpha > 0 && *spec.alpha < 1) {
        return power(real(*spec.alpha), horizon);
      }
      if (spec.family == seq::Family::log_power && *spec.alpha > 0 && *spec.alpha <= 1) {
        return log_power(real(*spec.alpha), horizon);
      }
    }
    return table(seq::generate(spec, table_length));
  }

  Kind kind() const noexcept { return kind_; }
  const index_t& horizon() const noexcept { return horizon_; }

  real at(const index_t& n) const {
    switch (kind_) {
      case Kind::power: {
        const real x(n);
        return sqrt_ ? real(sqrt(x)) : real(pow(x, alpha_));
      }
      case Kind::log_power: return pow(log(real(n)), alpha_);
      case Kind::table: return real(table_[static_cast<std::size_t>(n - 1)]);
    }
    return 0;
  }

  /// a_n - a_{n-1}, n >= 2.
  real gap(const index_t& n) const {
    if (kind_ == Kind::power) {
      const real x(n);
      if (sqrt_) return 1 / (sqrt(x) + sqrt(x - 1));
      return -at(n) * boost::math::expm1(alpha_ * boost::math::log1p(real(-1 / x)));
    }
    return at(n) - at(n - 1);
  }

  /// a_m - a_n for m > n.
  real diff(const index_t& n, const index_t& m) const {
    if (kind_ == Kind::power) {
      const real xn(n);
      const real dm(m - n);
      if (sqrt_) return dm / (sqrt(real(m)) + sqrt(xn));
      return at(n) * boost::math::expm1(alpha_ * boost::math::log1p(real(dm / xn)));
    }
    return at(m) - at(n);
  }

  /// First n >= from with |a_k - a_{k-1}| < t for every k >= n on the horizon.
  std::optional<index_t> first_small_gap(index_t from, const real& t) const {
    from = std::max<index_t>(from, 2);
    if (from > horizon_) return std::nullopt;
    if (kind_ != Kind::table) {
      if (gap(horizon_) >= t) return std::nullopt;
      // Gallop to a bracket, then bisect.
      index_t lo = from, hi = from;
      while (gap(hi) >= t) {
        lo = hi + 1;
        hi = hi >= horizon_ / 2 ? horizon_ : hi * 2;
      }
      while (lo < hi) {
        const index_t mid = lo + (hi - lo) / 2;
        if (gap(mid) < t) hi = mid;
        else lo = mid + 1;
      }
      return lo;
    }
    ensure_suffix_max();
    const auto start = static_cast<std::size_t>(from);
    for (std::size_t n = start; n <= table_.size(); ++n) {
      if (suffix_max_gap_[n] < t) return index_t(n);
    }
    return std::nullopt;
  }

  /// First m > n with a_m - a_n in [lo, hi].
  std::optional<index_t> first_reach(const index_t& n, const real& lo, const real& hi) const {
    if (kind_ != Kind::table) {
      if (n >= horizon_ || diff(n, horizon_) < lo) return std::nullopt;
      index_t a = n + 1, b = n + 1;
      while (diff(n, b) < lo) {
        a = b + 1;
        b = b >= horizon_ / 2 ? horizon_ : b * 2;
      }
      while (a < b) {
        const index_t mid = a + (b - a) / 2;
        if (diff(n, mid) >= lo) b = mid;
        else a = mid + 1;
      }
      return diff(n, a) <= hi ? std::optional<index_t>(a) : std::nullopt;
    }
    const real base = at(n);
    for (std::size_t m = static_cast<std::size_t>(n) + 1; m <= table_.size(); ++m) {
      const real d = real(table_[m - 1]) - base;
      if (d >= lo && d <= hi) return index_t(m);
    }
    return std::nullopt;
  }

 private:
  StepSource(Kind k, real alpha, index_t horizon, std::vector<double> table)
      : kind_(k), alpha_(alpha), sqrt_(k == Kind::power && alpha == real(0.5)), horizon_(horizon),
        table_(std::move(table)) {}

  void ensure_suffix_max() const {
    if (!suffix_max_gap_.empty()) return;
    const std::size_t n = table_.size();
    suffix_max_gap_.assign(n + 2, 0.0);
    for (std::size_t k = n; k >= 2; --k) {
      const double g = std::fabs(table_[k - 1] - table_[k - 2]);
      suffix_max_gap_[k] = std::max(g, suffix_max_gap_[k + 1]);
    }
  }

  Kind kind_;
  real alpha_;
  bool sqrt_;
  index_t horizon_;
  std::vector<double> table_;
  mutable std::vector<double> suffix_max_gap_;
};

struct Episode {
  index_t n = 0;            // first anti-coupled time
  index_t m = 0;            // second anti-coupled time
  real delta = 0;
  real x = 0;
  real d_before = 0;
  real d_after = 0;
  int sign_n = 0;        // eps_n of X
  int sign_m = 0;
  bool won = false;
};

struct CoupledPair {
  real offset_d = 0;
  real epsilon_target = 0;
  std::uint64_t episodes_used = 0;
  real final_gap = 0;  // X - X' when the game ended
  bool success = false;
  std::vector<Episode> episodes;
};

inline bool in_target(real d, real eps) { return d >= 0 && d <= eps; }

/// Play the game from time 0 with X_0 - X'_0 = d. Throws InfeasibleError when
/// the horizon ends before an episode can be scheduled.
inline CoupledPair simulate_coupling(const StepSource& steps, real d, real epsilon, std::uint64_t seed,
                                     std::uint64_t stream_id, std::uint64_t max_episodes = 4096) {
  if (!(epsilon > 0)) throw DomainError("simulate_coupling: epsilon must be positive");
  const CounterStream signs(seed, stream_id);
  CoupledPair out;
  out.offset_d = d;
  out.epsilon_target = epsilon;
  real gap = d;
  index_t last = 0;  // m_{i-1}
  while (!in_target(gap, epsilon)) {
    if (out.episodes.size() >= max_episodes) {
      throw InfeasibleError("coupling: no success within " + std::to_string(max_episodes) + " episodes");
    }
    Episode ep;
    ep.d_before = gap;
    ep.delta = std::min(epsilon, real(abs(gap)));
    ep.x = gap > 0 ? gap / 2 : -gap / 2 + ep.delta / 2;
    const auto n = steps.first_small_gap(last + 1, ep.delta / 2);
    if (!n) {
      throw InfeasibleError("coupling: horizon exhausted before gaps fall below delta/2 = " +
                            (ep.delta / 2).str(6));
    }
    const auto m = steps.first_reach(*n, ep.x - ep.delta / 2, ep.x);
    if (!m) {
      throw InfeasibleError("coupling: steps on the horizon never reach the target for delta = " +
                            ep.delta.str(6));
    }
    ep.n = *n;
    ep.m = *m;
    ep.sign_n = sign_at(signs, ep.n);
    gap += 2 * ep.sign_n * steps.at(ep.n);
    if (in_target(gap, epsilon)) {
      ep.won = true;
    } else {
      ep.sign_m = sign_at(signs, ep.m);
      gap += 2 * ep.sign_m * steps.at(ep.m);
      ep.won = in_target(gap, epsilon);
    }
    ep.d_after = gap;
    last = ep.won && ep.sign_m == 0 ? ep.n : ep.m;
    out.episodes.push_back(ep);
  }
  out.episodes_used = out.episodes.size();
  out.final_gap = gap;
  out.success = true;
  return out;
}

/// Recompute X - X' from the offset and the anti-coupled times alone, with
/// signs drawn again from the stream; equal-coupled steps add exactly zero.
inline real replay_gap(const StepSource& steps, const CoupledPair& run, std::uint64_t seed, std::uint64_t stream_id) {
  const CounterStream signs(seed, stream_id);
  real gap = run.offset_d;
  for (const auto& ep : run.episodes) {
    gap += 2 * sign_at(signs, ep.n) * steps.at(ep.n);
    if (ep.sign_m != 0) gap += 2 * sign_at(signs, ep.m) * steps.at(ep.m);
  }
  return gap;
}

}  // namespace rlab::coupling
