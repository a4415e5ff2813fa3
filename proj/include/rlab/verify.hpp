#pragma once

// Randomized and exhaustive checks of the inequalities, run by `rlab verify`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rlab/bounds.hpp"
#include "rlab/exactdist.hpp"
#include "rlab/mc.hpp"
#include "rlab/oracle.hpp"

namespace rlab::verify {

struct VerifySuiteResult {
  explicit VerifySuiteResult(std::string name = {}) : suite(std::move(name)) {}

  std::string suite;
  std::uint64_t cases_run = 0;
  std::vector<std::string> failures;
  std::map<std::string, double> empirical_constants;

  bool passed() const noexcept { return failures.empty(); }
};

struct VerifyOptions {
  std::uint64_t max_n = 18;
  std::uint64_t cases_per_n = 10;
  std::uint64_t seed = 1;
  std::int64_t max_step = 30;
  std::int64_t max_modulus = 64;
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"elo",    "modular_elo", "hoeffding", "paley_zygmund",
                                              "combine_scales", "prefix", "local_clt", "exponent_fit"};
  return names;
}

namespace detail {

inline std::vector<std::int64_t> random_steps(std::mt19937_64& rng, std::uint64_t n, std::int64_t lo,
                                              std::int64_t hi) {
  std::uniform_int_distribution<std::int64_t> pick(lo, hi);
  std::vector<std::int64_t> s(n);
  for (auto& v : s) v = pick(rng);
  return s;
}

inline std::string describe(const std::vector<std::int64_t>& steps) {
  std::string s = "[";
  for (std::size_t i = 0; i < steps.size(); ++i) s += (i ? "," : "") + std::to_string(steps[i]);
  return s + "]";
}

inline std::int64_t sum_squares(const std::vector<std::int64_t>& steps) {
  std::int64_t v = 0;
  for (auto a : steps) v += a * a;
  return v;
}

/// Walk law checked atom by atom against enumeration, in exact mode.
inline bool matches_oracle(const std::vector<std::int64_t>& steps, const dist::RationalPmf& pmf) {
  const auto counts = oracle::enumerate_walk(steps);
  std::vector<std::pair<std::int64_t, std::uint64_t>> nz;
  // The exact engine skips zero steps, so its denominator is 2^(non-zero steps).
  const std::size_t zeros = static_cast<std::size_t>(std::count(steps.begin(), steps.end(), 0));
  for (const auto& [x, c] : counts) nz.emplace_back(x, c >> zeros);
  if (nz.size() != pmf.size()) return false;
  for (std::size_t i = 0; i < nz.size(); ++i) {
    if (nz[i].first != pmf.support[i] || nz[i].second != pmf.probs[i]) return false;
  }
  return true;
}

}  // namespace detail

inline VerifySuiteResult run_elo(const VerifyOptions& o) {
  VerifySuiteResult r{"elo"};
  std::mt19937_64 rng(o.seed);
  double worst = 0.0;
  for (std::uint64_t n = 1; n <= o.max_n; ++n) {
    for (std::uint64_t c = 0; c < o.cases_per_n; ++c) {
      const auto steps = detail::random_steps(rng, n, 1, o.max_step);
      const auto pmf = dist::walk_pmf<std::uint64_t>(steps);
      ++r.cases_run;
      if (!detail::matches_oracle(steps, pmf)) {
        r.failures.push_back("oracle mismatch for " + detail::describe(steps));
        continue;
      }
      const std::int64_t cmin = *std::min_element(steps.begin(), steps.end());
      const double q = dist::concentration_q(pmf, 2.0 * static_cast<double>(cmin)).result;
      const double bound = bounds::elo_bound(n);
      worst = std::max(worst, q / bound);
      if (q > bound + bounds::kDominationTolerance) {
        r.failures.push_back("Q_2c above ELO bound for " + detail::describe(steps));
      }
    }
  }
  r.empirical_constants["max_q_over_bound"] = worst;
  return r;
}

inline VerifySuiteResult run_modular_elo(const VerifyOptions& o) {
  VerifySuiteResult r{"modular_elo"};
  std::mt19937_64 rng(o.seed);
  double worst = 0.0, spectral_gap = 0.0;
  for (std::int64_t m = 3; m <= o.max_modulus; ++m) {
    std::vector<std::int64_t> units;
    for (std::int64_t b = 1; b <= 4 * m; ++b) {
      if (std::gcd(b, m) == 1) units.push_back(b);
    }
    std::uniform_int_distribution<std::size_t> pick(0, units.size() - 1);
    for (std::uint64_t n : {std::uint64_t{10}, std::uint64_t{100}}) {
      for (std::uint64_t c = 0; c < o.cases_per_n; ++c) {
        std::vector<std::int64_t> steps(n);
        for (auto& v : steps) v = units[pick(rng)];
        ++r.cases_run;
        const auto direct = dist::modular_walk_pmf(steps, m);
        const auto spectral = dist::modular_walk_pmf(steps, m, dist::ModularMethod::spectral);
        for (std::size_t i = 0; i < direct.probs.size(); ++i) {
          spectral_gap = std::max(spectral_gap, std::fabs(direct.probs[i] - spectral.probs[i]));
        }
        const double top = direct.max_prob();
        const double cosine = bounds::cosine_product_bound(m, steps);
        const double elo = bounds::modular_elo_bound(m, n);
        worst = std::max(worst, cosine / elo);
        if (top > cosine + 1e-10 || cosine > elo + 1e-10) {
          r.failures.push_back("m=" + std::to_string(m) + " n=" + std::to_string(n) + ": max " +
                               std::to_string(top) + ", cosine " + std::to_string(cosine) + ", bound " +
                               std::to_string(elo));
        }
      }
    }
  }
  if (spectral_gap > 1e-10) r.failures.push_back("direct and spectral residue laws disagree");
  r.empirical_constants["max_cosine_over_bound"] = worst;
  r.empirical_constants["max_direct_spectral_gap"] = spectral_gap;
  return r;
}

inline VerifySuiteResult run_hoeffding(const VerifyOptions& o) {
  VerifySuiteResult r{"hoeffding"};
  std::mt19937_64 rng(o.seed);
  double worst = 0.0;
  for (std::uint64_t n = 1; n <= o.max_n; ++n) {
    for (std::uint64_t c = 0; c < o.cases_per_n; ++c) {
      const auto steps = detail::random_steps(rng, n, 1, o.max_step);
      const auto pmf = dist::walk_pmf<std::uint64_t>(steps);
      const std::int64_t var = detail::sum_squares(steps);
      ++r.cases_run;
      // X >= t ||a|| with t = k/2 is 4 X^2 >= k^2 var for X >= 0.
      for (std::int64_t k : {0, 1, 2, 4, 6}) {
        std::uint64_t hits = 0;
        for (std::size_t i = 0; i < pmf.size(); ++i) {
          const std::int64_t x = pmf.support[i];
          if (x >= 0 && 4 * static_cast<__int128>(x) * x >= static_cast<__int128>(k) * k * var) hits += pmf.probs[i];
        }
        const double tail = std::ldexp(static_cast<double>(hits), -static_cast<int>(pmf.denominator_log2));
        const double t = static_cast<double>(k) / 2.0;
        const double bound = bounds::hoeffding_tail(std::sqrt(static_cast<double>(var)), t);
        worst = std::max(worst, tail / bound);
        if (tail > bound + bounds::kDominationTolerance) {
          r.failures.push_back("tail above e^{-t^2/2} at t=" + std::to_string(t) + " for " + detail::describe(steps));
        }
      }
    }
  }
  r.empirical_constants["max_tail_over_bound"] = worst;
  return r;
}

inline VerifySuiteResult run_paley_zygmund(const VerifyOptions& o) {
  VerifySuiteResult r{"paley_zygmund"};
  std::mt19937_64 rng(o.seed);
  double lowest = 1.0;
  for (std::uint64_t n = 1; n <= o.max_n; ++n) {
    for (std::uint64_t c = 0; c < o.cases_per_n; ++c) {
      const auto steps = detail::random_steps(rng, n, 1, o.max_step);
      const auto pmf = dist::walk_pmf<std::uint64_t>(steps);
      const std::int64_t var = detail::sum_squares(steps);
      ++r.cases_run;
      std::uint64_t hits = 0;
      for (std::size_t i = 0; i < pmf.size(); ++i) {
        const std::int64_t x = pmf.support[i];
        if (4 * static_cast<__int128>(x) * x >= var) hits += pmf.probs[i];
      }
      const double p = std::ldexp(static_cast<double>(hits), -static_cast<int>(pmf.denominator_log2));
      lowest = std::min(lowest, p);
      if (p < 3.0 / 16.0 - bounds::kDominationTolerance) {
        r.failures.push_back("P(|X| >= ||a||/2) below 3/16 for " + detail::describe(steps));
      }
    }
  }
  r.empirical_constants["min_probability"] = lowest;
  return r;
}

inline VerifySuiteResult run_combine_scales(const VerifyOptions& o) {
  VerifySuiteResult r{"combine_scales"};
  std::mt19937_64 rng(o.seed);
  std::uniform_int_distribution<int> atoms(1, 8);
  std::uniform_int_distribution<std::int64_t> where(-20, 20);
  std::uniform_real_distribution<double> weight(0.05, 1.0);
  const std::vector<double> scales{0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0};
  double worst = 0.0;
  for (std::uint64_t c = 0; c < o.cases_per_n * o.max_n; ++c) {
    auto random_pmf = [&] {
      std::vector<std::pair<std::int64_t, double>> v;
      const int k = atoms(rng);
      for (int i = 0; i < k; ++i) v.emplace_back(where(rng), weight(rng));
      return dist::make_pmf(std::move(v));
    };
    const auto a = random_pmf();
    const auto b = random_pmf();
    const auto sum = dist::convolve(a, b);
    for (double rr : scales) {
      for (double s : scales) {
        if (!(rr < s)) continue;
        ++r.cases_run;
        const double lhs = dist::concentration_q(sum, rr).result;
        const double rhs = bounds::combine_scales_rhs(dist::concentration_q(a, rr).result,
                                                      dist::concentration_q(b, s).result,
                                                      dist::abs_tail_prob(a, s));
        worst = std::max(worst, lhs / rhs);
        if (lhs > rhs + 1e-12) {
          r.failures.push_back("combine scales violated at r=" + std::to_string(rr) + " s=" + std::to_string(s));
        }
      }
    }
  }
  r.empirical_constants["max_lhs_over_rhs"] = worst;
  return r;
}

inline VerifySuiteResult run_prefix(const VerifyOptions& o) {
  VerifySuiteResult r{"prefix"};
  std::mt19937_64 rng(o.seed);
  std::uniform_int_distribution<std::uint64_t> prefix_len(1, 6);
  std::uniform_int_distribution<int> width(1, 6);
  for (std::uint64_t n = 1; n <= o.max_n; ++n) {
    for (std::uint64_t c = 0; c < o.cases_per_n; ++c) {
      auto s = detail::random_steps(rng, n, 0, o.max_step);
      auto t = s;
      const std::uint64_t m = std::min<std::uint64_t>(prefix_len(rng), n);
      auto head = detail::random_steps(rng, m, 0, o.max_step);
      std::copy(head.begin(), head.end(), t.begin());
      const double rr = width(rng);
      const double qs = dist::concentration_q(dist::walk_pmf(s), rr).result;
      const double qt = dist::concentration_q(dist::walk_pmf(t), rr).result;
      const double factor = std::ldexp(1.0, static_cast<int>(m + 1));
      ++r.cases_run;
      if (qs < qt / factor - 1e-12 || qs > qt * factor + 1e-12) {
        r.failures.push_back("prefix sandwich violated for " + detail::describe(s) + " vs " + detail::describe(t));
      }
      // Product sandwich with A the first m steps and B the rest.
      const std::vector<std::int64_t> sa(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(m));
      const std::vector<std::int64_t> sb(s.begin() + static_cast<std::ptrdiff_t>(m), s.end());
      const double qa = dist::concentration_q(dist::walk_pmf(sa), rr).result;
      const double qb = dist::concentration_q(dist::walk_pmf(sb), rr).result;
      ++r.cases_run;
      if (qs < qa * qb / 2.0 - 1e-12 || qs > std::min(qa, qb) + 1e-12) {
        r.failures.push_back("product sandwich violated for " + detail::describe(s));
      }
    }
  }
  return r;
}

/// n |P(S_n = 0) - 1/sqrt(pi n / 2)| over even n.
inline std::vector<std::pair<std::uint64_t, double>> local_clt_errors(std::uint64_t max_n) {
  std::vector<std::pair<std::uint64_t, double>> out;
  dist::ExactPmf pmf;
  for (std::uint64_t n = 1; n <= max_n; ++n) {
    pmf.apply_step(1);
    if (n % 2 != 0) continue;
    const double exact = pmf.mass_at(0);
    const double approx = bounds::local_clt_approx(n, 0).approx;
    out.emplace_back(n, static_cast<double>(n) * std::fabs(exact - approx));
  }
  return out;
}

inline VerifySuiteResult run_local_clt(const VerifyOptions& o) {
  VerifySuiteResult r{"local_clt"};
  const auto errs = local_clt_errors(std::max<std::uint64_t>(o.max_n, 2));
  double top = 0.0, top_n = 0.0;
  std::vector<double> vals;
  for (const auto& [n, e] : errs) {
    ++r.cases_run;
    vals.push_back(e);
    if (!std::isfinite(e)) r.failures.push_back("non-finite error at n=" + std::to_string(n));
    if (e > top) {
      top = e;
      top_n = static_cast<double>(n);
    }
  }
  std::sort(vals.begin(), vals.end());
  r.empirical_constants["max_scaled_error"] = top;
  r.empirical_constants["argmax_n"] = top_n;
  r.empirical_constants["median_scaled_error"] = vals.empty() ? 0.0 : vals[vals.size() / 2];
  return r;
}

/// Exact Q_1(X_n) for n in [from, to] along the prefix `steps`.
inline std::vector<std::pair<double, double>> exact_q1_series(const std::vector<std::int64_t>& steps,
                                                             std::uint64_t from, std::uint64_t to,
                                                             std::size_t cap = dist::kDefaultSupportCap) {
  std::vector<std::pair<double, double>> out;
  dist::ExactPmf pmf;
  for (std::uint64_t n = 1; n <= to; ++n) {
    pmf.apply_step(steps.at(n - 1), cap);
    if (n >= from) out.emplace_back(static_cast<double>(n), dist::concentration_q(pmf, 1.0).result);
  }
  return out;
}

inline VerifySuiteResult run_exponent_fit(const VerifyOptions&) {
  VerifySuiteResult r{"exponent_fit"};
  std::vector<std::int64_t> linear(200), ones(1000, 1);
  std::iota(linear.begin(), linear.end(), 1);
  const auto fit_linear = mc::fit_exponent(exact_q1_series(linear, 50, 200));
  ++r.cases_run;
  if (fit_linear.slope < -1.65 || fit_linear.slope > -1.35) {
    r.failures.push_back("a_n = n slope " + std::to_string(fit_linear.slope) + " outside [-1.65, -1.35]");
  }
  const auto fit_ones = mc::fit_exponent(exact_q1_series(ones, 100, 1000));
  ++r.cases_run;
  if (fit_ones.slope < -0.6 || fit_ones.slope > -0.4) {
    r.failures.push_back("a_n = 1 slope " + std::to_string(fit_ones.slope) + " outside [-0.6, -0.4]");
  }
  r.empirical_constants["slope_linear"] = fit_linear.slope;
  r.empirical_constants["slope_constant"] = fit_ones.slope;
  return r;
}

inline VerifySuiteResult run_suite(const std::string& name, const VerifyOptions& o) {
  static const std::map<std::string, std::function<VerifySuiteResult(const VerifyOptions&)>> table{
      {"elo", run_elo},
      {"modular_elo", run_modular_elo},
      {"hoeffding", run_hoeffding},
      {"paley_zygmund", run_paley_zygmund},
      {"combine_scales", run_combine_scales},
      {"prefix", run_prefix},
      {"local_clt", run_local_clt},
      {"exponent_fit", run_exponent_fit},
  };
  const auto it = table.find(name);
  if (it == table.end()) throw ConfigError("unknown verify suite '" + name + "'");
  return it->second(o);
}

}  // namespace rlab::verify
