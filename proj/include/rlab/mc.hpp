#pragma once

// Seeded Monte Carlo for Rademacher walks. Replicate i always draws its signs
// from CounterStream(master_seed, i), and aggregation only adds integer
// counts, so results do not depend on thread count or scheduling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rlab/bounds.hpp"
#include "rlab/error.hpp"
#include "rlab/rng.hpp"
#include "rlab/seqgen.hpp"
#include "rlab/stats.hpp"

namespace rlab::mc {

enum class Experiment { interval_hits, q1_estimate, embed2d, coupling };

inline constexpr std::string_view experiment_name(Experiment e) noexcept {
  switch (e) {
    case Experiment::interval_hits: return "interval_hits";
    case Experiment::q1_estimate: return "q1_estimate";
    case Experiment::embed2d: return "embed2d";
    case Experiment::coupling: return "coupling";
  }
  return "unknown";
}

inline Experiment experiment_from_name(std::string_view name) {
  for (Experiment e : {Experiment::interval_hits, Experiment::q1_estimate, Experiment::embed2d,
                       Experiment::coupling}) {
    if (experiment_name(e) == name) return e;
  }
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

struct McRunManifest {
  std::uint64_t master_seed = 0;
  std::uint64_t replicates = 1;
  std::uint64_t horizon = 1;
  seq::StepSequenceSpec spec;
  Experiment experiment = Experiment::interval_hits;
};

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1U, std::thread::hardware_concurrency());
}

/// Run body(begin, end, shard) over contiguous replicate ranges. Shards are
/// fixed by (replicates, threads) only.
template <class Body>
void for_each_shard(std::uint64_t replicates, unsigned threads, Body&& body) {
  threads = static_cast<unsigned>(std::min<std::uint64_t>(resolve_threads(threads), std::max<std::uint64_t>(replicates, 1)));
  if (threads <= 1) {
    body(std::uint64_t{0}, replicates, 0U);
    return;
  }
  std::vector<std::thread> pool;
  const std::uint64_t chunk = (replicates + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::uint64_t b = std::min(replicates, chunk * t);
    const std::uint64_t e = std::min(replicates, b + chunk);
    pool.emplace_back([&body, b, e, t] { body(b, e, t); });
  }
  for (auto& th : pool) th.join();
}

/// Walk over a fixed prefix of steps, sign i of replicate r being bit i of the
/// counter stream (master_seed, r).
class WalkSimulator {
 public:
  WalkSimulator(std::vector<double> steps, std::uint64_t master_seed)
      : steps_(std::move(steps)), seed_(master_seed) {}

  const std::vector<double>& steps() const noexcept { return steps_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Visit X_0 .. X_upto; visit(i, x) returns false to stop early.
  template <class Visit>
  void walk(std::uint64_t replicate, std::uint64_t upto, Visit&& visit) const {
    if (upto > steps_.size()) {
      throw ConfigError("horizon " + std::to_string(upto) + " exceeds the generated sequence length " +
                        std::to_string(steps_.size()));
    }
    const CounterStream stream(seed_, replicate);
    double x = 0.0;
    if (!visit(std::uint64_t{0}, x)) return;
    std::uint64_t word = 0;
    for (std::uint64_t i = 1; i <= upto; ++i) {
      const std::uint64_t bit = (i - 1) & 63U;
      if (bit == 0) word = stream.word((i - 1) >> 6);
      x += ((word >> bit) & 1U) ? steps_[i - 1] : -steps_[i - 1];
      if (!visit(i, x)) return;
    }
  }

  std::vector<double> trace(std::uint64_t replicate, std::uint64_t upto) const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(upto + 1));
    walk(replicate, upto, [&](std::uint64_t, double x) {
      out.push_back(x);
      return true;
    });
    return out;
  }

 private:
  std::vector<double> steps_;
  std::uint64_t seed_;
};

/// Positions X_0 .. X_horizon of one replicate.
inline std::vector<double> simulate_walk(const McRunManifest& manifest, std::uint64_t replicate) {
  if (replicate >= manifest.replicates) {
    throw ConfigError("replicate " + std::to_string(replicate) + " out of range");
  }
  WalkSimulator sim(seq::generate(manifest.spec, manifest.horizon), manifest.master_seed);
  return sim.trace(replicate, manifest.horizon);
}

struct EventStats {
  std::uint64_t hits = 0;
  std::uint64_t replicates = 0;
  double p_hat = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 1.0;
};

struct Window {
  std::uint64_t start = 0;  // time indices, inclusive
  std::uint64_t end = 0;
};

struct RecurrenceStats {
  std::vector<Window> windows;
  std::map<int, EventStats> per_event;                   // keyed 1..K in window order
  std::map<std::pair<int, int>, std::uint64_t> joint;    // j < k
  std::uint64_t replicates = 0;
  double confidence = 0.99;
};

inline EventStats make_event(std::uint64_t hits, std::uint64_t replicates, double confidence) {
  EventStats e{hits, replicates, replicates ? static_cast<double>(hits) / static_cast<double>(replicates) : 0.0};
  const Interval w = wilson_interval(hits, replicates, confidence);
  e.wilson_lo = w.lo;
  e.wilson_hi = w.hi;
  return e;
}

/// Per-window probability that |X_i| <= c for some i in the window, with all
/// pairwise joint counts.
inline RecurrenceStats estimate_interval_hits(const WalkSimulator& sim, std::uint64_t replicates, double c,
                                              std::vector<Window> windows, unsigned threads = 0,
                                              double confidence = 0.99) {
  if (windows.empty()) throw ConfigError("estimate_interval_hits: no windows");
  if (!(c >= 0.0)) throw ConfigError("estimate_interval_hits: C must be non-negative");
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return windows[a].start < windows[b].start; });
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const Window& w = windows[order[i]];
    if (w.start > w.end) throw ConfigError("window start after end");
    if (w.end > sim.steps().size()) throw ConfigError("window end beyond the horizon");
    if (i > 0 && windows[order[i - 1]].end >= w.start) throw ConfigError("windows overlap");
  }
  std::uint64_t last = 0;
  for (const auto& w : windows) last = std::max(last, w.end);
  const std::size_t k = windows.size();
  // Map each time index to its window.
  std::vector<int> owner(static_cast<std::size_t>(last + 1), -1);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::uint64_t t = windows[i].start; t <= windows[i].end; ++t) owner[t] = static_cast<int>(i);
  }

  const unsigned nthreads = resolve_threads(threads);
  std::vector<std::vector<std::uint64_t>> event_counts(nthreads, std::vector<std::uint64_t>(k, 0));
  std::vector<std::vector<std::uint64_t>> joint_counts(nthreads, std::vector<std::uint64_t>(k * k, 0));
  for_each_shard(replicates, nthreads, [&](std::uint64_t b, std::uint64_t e, unsigned shard) {
    std::vector<char> hit(k);
    auto& ev = event_counts[shard];
    auto& jt = joint_counts[shard];
    for (std::uint64_t r = b; r < e; ++r) {
      std::fill(hit.begin(), hit.end(), 0);
      sim.walk(r, last, [&](std::uint64_t t, double x) {
        const int o = owner[t];
        if (o >= 0 && std::fabs(x) <= c) hit[static_cast<std::size_t>(o)] = 1;
        return true;
      });
      for (std::size_t i = 0; i < k; ++i) {
        if (!hit[i]) continue;
        ++ev[i];
        for (std::size_t j = i + 1; j < k; ++j) {
          if (hit[j]) ++jt[i * k + j];
        }
      }
    }
  });

  RecurrenceStats out;
  out.windows = std::move(windows);
  out.replicates = replicates;
  out.confidence = confidence;
  for (std::size_t i = 0; i < k; ++i) {
    std::uint64_t hits = 0;
    for (const auto& ev : event_counts) hits += ev[i];
    out.per_event[static_cast<int>(i + 1)] = make_event(hits, replicates, confidence);
    for (std::size_t j = i + 1; j < k; ++j) {
      std::uint64_t both = 0;
      for (const auto& jt : joint_counts) both += jt[i * k + j];
      out.joint[{static_cast<int>(i + 1), static_cast<int>(j + 1)}] = both;
    }
  }
  return out;
}

/// E_k windows of the sqrt_block walk: time indices of block 2k.
inline Window sqrt_block_event_window(unsigned k) {
  return {seq::sqrt_block_start(2 * k), seq::sqrt_block_start(2 * k + 1) - 1};
}

struct Q1Estimate {
  double q1_hat = 0.0;
  double stderr_ = 0.0;
  double window_x = 0.0;  // left end of the best window (x, x + 1]
  std::uint64_t replicates = 0;
  bool integer_anchored = true;
  bool bias_note = false;  // replicates < 100 / q1_hat: the max-frequency estimate is biased upward
};

/// Largest empirical frequency of a half-open unit window containing X_n.
/// Integer walks use windows anchored at integers; real walks use a grid of
/// left ends with spacing 1/16.
inline Q1Estimate estimate_q1(const WalkSimulator& sim, std::uint64_t n, std::uint64_t replicates,
                              unsigned threads = 0) {
  if (n > sim.steps().size()) throw ConfigError("estimate_q1: n beyond the horizon");
  if (replicates == 0) throw ConfigError("estimate_q1: replicates must be positive");
  const bool integral = seq::is_integer_sequence(std::span<const double>(sim.steps().data(), n));
  const unsigned nthreads = resolve_threads(threads);
  std::vector<std::unordered_map<std::int64_t, std::uint64_t>> hist(nthreads);
  for_each_shard(replicates, nthreads, [&](std::uint64_t b, std::uint64_t e, unsigned shard) {
    auto& h = hist[shard];
    for (std::uint64_t r = b; r < e; ++r) {
      double xn = 0.0;
      sim.walk(r, n, [&](std::uint64_t t, double x) {
        if (t == n) xn = x;
        return true;
      });
      // Integer walks: key = x, window (x - 1, x]. Real walks: key = ceil(16 x).
      const auto key = static_cast<std::int64_t>(integral ? xn : std::ceil(16.0 * xn));
      ++h[key];
    }
  });
  std::map<std::int64_t, std::uint64_t> merged;
  for (const auto& h : hist) {
    for (const auto& [key, cnt] : h) merged[key] += cnt;
  }
  Q1Estimate out;
  out.replicates = replicates;
  out.integer_anchored = integral;
  std::uint64_t best = 0;
  if (integral) {
    for (const auto& [key, cnt] : merged) {
      if (cnt > best) {
        best = cnt;
        out.window_x = static_cast<double>(key) - 1.0;
      }
    }
  } else {
    // Window (j/16, j/16 + 1] holds buckets j+1 .. j+16.
    std::vector<std::pair<std::int64_t, std::uint64_t>> cells(merged.begin(), merged.end());
    std::size_t lo = 0;
    std::uint64_t sum = 0;
    for (std::size_t hi = 0; hi < cells.size(); ++hi) {
      sum += cells[hi].second;
      while (cells[hi].first - cells[lo].first >= 16) sum -= cells[lo++].second;
      if (sum > best) {
        best = sum;
        out.window_x = static_cast<double>(cells[hi].first - 16) / 16.0;
      }
    }
  }
  out.q1_hat = static_cast<double>(best) / static_cast<double>(replicates);
  out.stderr_ = std::sqrt(out.q1_hat * (1.0 - out.q1_hat) / static_cast<double>(replicates));
  out.bias_note = out.q1_hat > 0.0 && static_cast<double>(replicates) < 100.0 / out.q1_hat;
  return out;
}

struct LatticePoint {
  std::int64_t a = 0;
  std::int64_t b = 0;
  bool operator==(const LatticePoint&) const = default;
};

struct TwoDEmbedding {
  std::vector<LatticePoint> path;
  std::int64_t line_a = 0;  // line {(a, b) : line_a * a + line_b * b + line_c = 0}
  std::int64_t line_b = 2;
  std::int64_t line_c = 0;
  std::uint64_t visits_to_line = 0;
};

/// Paired increments of block 2k, +-2^(2k+1) -> (+-1, 0) and +-2 -> (0, +-1),
/// with the line through the starting position y0 = Y_{m0}.
inline TwoDEmbedding embed_2d(std::span<const std::int64_t> increments, unsigned k, std::int64_t y0) {
  if (k == 0 || k > 30) throw DomainError("embed_2d: block index k must lie in [1, 30]");
  const std::int64_t big = std::int64_t{1} << (2 * k + 1);
  TwoDEmbedding out;
  out.line_a = big;
  out.line_b = 2;
  out.line_c = y0;
  LatticePoint p;
  out.path.push_back(p);
  for (std::size_t i = 0; i < increments.size(); ++i) {
    const std::int64_t d = increments[i];
    if (d == big) ++p.a;
    else if (d == -big) --p.a;
    else if (d == 2) ++p.b;
    else if (d == -2) --p.b;
    else throw DomainError("embed_2d: increment " + std::to_string(i + 1) + " (" + std::to_string(d) +
                           ") is not one of +-" + std::to_string(big) + ", +-2");
    out.path.push_back(p);
  }
  for (const auto& q : out.path) {
    if (out.line_a * q.a + out.line_b * q.b + out.line_c == 0) ++out.visits_to_line;
  }
  return out;
}

struct BlockPairs {
  std::int64_t y0 = 0;                   // X at time n_{2k} - 1
  std::vector<std::int64_t> increments;  // X_{t+2} - X_t over the block's step pairs
  std::vector<std::int64_t> positions;   // X at times n_{2k} - 1 + 2j, j = 0 .. pairs
};

/// Pair the steps of block 2k of a sqrt_block trace (positions X_0 .. X_N).
inline BlockPairs sqrt_block_pairs(std::span<const double> trace, unsigned k) {
  const std::uint64_t first = seq::sqrt_block_start(2 * k);
  const std::uint64_t last = seq::sqrt_block_start(2 * k + 1) - 1;
  if (trace.size() <= last) throw ConfigError("trace does not cover block " + std::to_string(2 * k));
  BlockPairs out;
  out.y0 = static_cast<std::int64_t>(trace[first - 1]);
  out.positions.push_back(out.y0);
  for (std::uint64_t t = first - 1; t + 2 <= last; t += 2) {
    out.increments.push_back(static_cast<std::int64_t>(trace[t + 2] - trace[t]));
    out.positions.push_back(static_cast<std::int64_t>(trace[t + 2]));
  }
  return out;
}

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Ordinary least squares of log(value) on log(n).
inline ExponentFit fit_exponent(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3) throw DomainError("fit_exponent: at least 3 points are required");
  std::vector<double> xs, ys;
  for (const auto& [n, v] : points) {
    if (!(n > 0.0)) throw DomainError("fit_exponent: n must be positive");
    if (!(v > 0.0)) throw DomainError("fit_exponent: values must be positive");
    xs.push_back(std::log(n));
    ys.push_back(std::log(v));
  }
  const double m = static_cast<double>(xs.size());
  const double mx = compensated_sum(xs) / m;
  const double my = compensated_sum(ys) / m;
  CompensatedSum sxx, sxy, syy;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx.add((xs[i] - mx) * (xs[i] - mx));
    sxy.add((xs[i] - mx) * (ys[i] - my));
    syy.add((ys[i] - my) * (ys[i] - my));
  }
  if (!(sxx.value() > 0.0)) throw DomainError("fit_exponent: all n are equal");
  ExponentFit f;
  f.slope = sxy.value() / sxx.value();
  f.intercept = my - f.slope * mx;
  f.r_squared = syy.value() > 0.0 ? (sxy.value() * sxy.value()) / (sxx.value() * syy.value()) : 1.0;
  return f;
}

struct KochenStoneEstimate {
  double z_mean = 0.0;
  double z_second_moment = 0.0;
  double ratio = 0.0;
  bool zero_mean_warning = false;
};

/// Plug-in moments of Z = sum_{k <= up_to_k} 1(E_k):
/// E Z = sum p_k and E Z^2 = sum p_k + 2 sum_{j<k} p_jk.
inline KochenStoneEstimate kochen_stone_estimate(const RecurrenceStats& stats, int up_to_k) {
  if (stats.replicates == 0) throw DomainError("kochen_stone_estimate: zero replicates");
  const double reps = static_cast<double>(stats.replicates);
  double hits = 0.0, pairs = 0.0;
  for (int k = 1; k <= up_to_k; ++k) {
    const auto it = stats.per_event.find(k);
    if (it == stats.per_event.end()) throw DomainError("kochen_stone_estimate: event " + std::to_string(k) + " missing");
    hits += static_cast<double>(it->second.hits);
  }
  for (const auto& [jk, both] : stats.joint) {
    if (jk.first <= up_to_k && jk.second <= up_to_k) pairs += static_cast<double>(both);
  }
  KochenStoneEstimate out;
  out.z_mean = hits / reps;
  out.z_second_moment = (hits + 2.0 * pairs) / reps;
  if (out.z_second_moment > 0.0) {
    const auto ks = bounds::kochen_stone_ratio(out.z_mean, out.z_second_moment);
    out.ratio = ks.ratio;
    out.zero_mean_warning = ks.zero_mean_warning;
  } else {
    out.zero_mean_warning = true;
  }
  return out;
}

}  // namespace rlab::mc
