// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rlab/cli.hpp"
#include "rlab/rlab.hpp"

using namespace rlab;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void line(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %2d %-28s %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Shared corpus for criteria 1, 2 and 8.
std::vector<std::vector<std::int64_t>> corpus() {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<std::uint64_t> len(1, 18);
  std::vector<std::vector<std::int64_t>> out;
  for (int i = 0; i < 200; ++i) out.push_back(verify::detail::random_steps(rng, len(rng), 1, 40));
  return out;
}

std::vector<std::int64_t> integer_prefix(const seq::StepSequenceSpec& spec, std::uint64_t n) {
  return seq::to_integer_steps(seq::generate(spec, n));
}

void criterion_1(const std::vector<std::vector<std::int64_t>>& cases) {
  Timer t;
  int bad = 0;
  for (const auto& s : cases) {
    const auto pmf = dist::walk_pmf<std::uint64_t>(s);
    const auto brute = oracle::enumerate_walk(s);
    std::size_t atoms = 0;
    for (std::size_t i = 0; i < pmf.support.size(); ++i) {
      if (pmf.probs[i] == 0) continue;
      ++atoms;
      const auto it = brute.find(pmf.support[i]);
      // Same denominator 2^n on both sides, so counts compare directly.
      const unsigned shift = static_cast<unsigned>(s.size()) - pmf.denominator_log2;
      if (it == brute.end() || (pmf.probs[i] << shift) != it->second) ++bad;
    }
    if (atoms != brute.size()) ++bad;
  }
  const double secs = t.seconds();
  line(1, "exact-oracle equivalence", bad == 0 && secs < 60.0,
       fmt("cases=%zu mismatches=%d time=%.2fs (limit 60s)", cases.size(), bad, secs));
}

void criterion_2(const std::vector<std::vector<std::int64_t>>& cases) {
  int violations = 0;
  double worst = 0.0;
  for (const auto& s : cases) {
    const auto c = *std::min_element(s.begin(), s.end());
    const auto pmf = dist::walk_pmf<double>(s);
    const double q = dist::concentration_q(pmf, 2.0 * static_cast<double>(c)).result;
    const double b = bounds::elo_bound(s.size());
    worst = std::max(worst, q / b);
    if (q > b + bounds::kDominationTolerance) ++violations;
  }
  line(2, "ELO domination", violations == 0,
       fmt("cases=%zu violations=%d max Q/bound=%.6f", cases.size(), violations, worst));
}

void criterion_3() {
  Timer t;
  std::mt19937_64 rng(3);
  int violations = 0, cases = 0;
  double worst_gap = -1.0;
  for (std::int64_t m = 3; m <= 64; ++m) {
    std::vector<std::int64_t> units;
    for (std::int64_t b = 1; b < 10 * m; ++b) {
      if (std::gcd(b, m) == 1) units.push_back(b);
    }
    std::uniform_int_distribution<std::size_t> pick(0, units.size() - 1);
    for (int rep = 0; rep < 20; ++rep) {
      for (std::uint64_t n : {10U, 100U, 1000U}) {
        std::vector<std::int64_t> s(n);
        for (auto& v : s) v = units[pick(rng)];
        const double mx = dist::modular_walk_pmf(s, m).max_prob();
        const double cp = bounds::cosine_product_bound(m, s);
        const double elo = bounds::modular_elo_bound(m, n);
        ++cases;
        if (mx > cp + 1e-12 || cp > elo + 1e-10) ++violations;
        worst_gap = std::max(worst_gap, cp - elo);
      }
    }
  }
  const double secs = t.seconds();
  line(3, "modular ELO", violations == 0 && secs < 300.0,
       fmt("cases=%d violations=%d max(cos-elo)=%.3g time=%.2fs (limit 300s)", cases, violations, worst_gap,
           secs));
}

void criterion_4() {
  Timer t;
  seq::StepSequenceSpec spec;
  spec.family = seq::Family::power;
  spec.alpha = 1.0;
  const auto pts = verify::exact_q1_series(integer_prefix(spec, 400), 50, 400);
  const auto fit = mc::fit_exponent(pts);
  const double scaled = std::pow(400.0, 1.5) * pts.back().second;
  const double target = std::sqrt(6.0 / std::numbers::pi);
  const double ratio = scaled / target;
  const double secs = t.seconds();
  const bool pass = fit.slope >= -1.65 && fit.slope <= -1.35 && ratio <= 1.5 && ratio >= 1.0 / 1.5 && secs < 600.0;
  line(4, "a_n=n Q1 rate", pass,
       fmt("slope=%.5f (want [-1.65,-1.35]) n^1.5*Q1(400)=%.5f vs %.5f ratio=%.4f time=%.2fs", fit.slope, scaled,
           target, ratio, secs));
}

void criterion_5() {
  seq::StepSequenceSpec spec;
  spec.family = seq::Family::constant;
  spec.value = 1.0;
  const auto pts = verify::exact_q1_series(integer_prefix(spec, 2000), 100, 2000);
  const auto fit = mc::fit_exponent(pts);
  const double scaled = std::sqrt(std::numbers::pi * 2000.0 / 2.0) * pts.back().second;
  const bool pass = fit.slope >= -0.55 && fit.slope <= -0.45 && std::fabs(scaled - 1.0) <= 0.02;
  line(5, "SSRW Q1 rate", pass,
       fmt("slope=%.5f (want [-0.55,-0.45]) sqrt(pi n/2)*Q1(2000)=%.6f", fit.slope, scaled));
}

void criterion_6() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> a(0.01, 10.0);
  int zero_bad = 0;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    bounds::ExponentQuery q;
    q.alpha = a(rng);
    q.delta = 0.0;
    q.gamma = 1.0;
    if (bounds::anti_exponent_f(q).f_value != 1.0) ++zero_bad;
  }
  for (int i = 0; i < 100; ++i) {
    const double al = a(rng);
    const double ds = bounds::delta_star(al);
    worst = std::max(worst, std::fabs(bounds::f_small_delta(al, ds) - bounds::f_large_delta(al, ds)));
  }
  line(6, "f(alpha,delta) formula", zero_bad == 0 && worst <= 1e-9,
       fmt("f(alpha,0)!=1: %d/100, max branch gap at delta*=%.3g", zero_bad, worst));
}

void criterion_7() {
  int violations = 0, checked = 0;
  double tightest = 1e300;
  auto run = [&](const std::vector<std::int64_t>& steps) {
    dist::ExactPmf pmf;
    double var = 0.0;
    for (std::size_t n = 1; n <= steps.size(); ++n) {
      pmf.apply_step(steps[n - 1]);
      var += static_cast<double>(steps[n - 1]) * static_cast<double>(steps[n - 1]);
      const double q = dist::concentration_q(pmf, 1.0).result;
      const double floor = bounds::lower_anti_floor(var);
      ++checked;
      tightest = std::min(tightest, q / floor);
      if (q < floor - bounds::kDominationTolerance) ++violations;
    }
  };
  for (double alpha : {1.0, 2.0}) {
    seq::StepSequenceSpec s;
    s.family = seq::Family::power;
    s.alpha = alpha;
    run(integer_prefix(s, 200));
  }
  seq::StepSequenceSpec proxy;
  proxy.family = seq::Family::sqrt_block;
  run(integer_prefix(proxy, 200));
  line(7, "lower-anti floor", violations == 0,
       fmt("checked=%d violations=%d min Q1/floor=%.4f", checked, violations, tightest));
}

void criterion_8(const std::vector<std::vector<std::int64_t>>& cases) {
  int hoeff_bad = 0, pz_bad = 0, checks = 0;
  for (const auto& s : cases) {
    const auto pmf = dist::walk_pmf<double>(s);
    const auto ss = verify::detail::sum_squares(s);
    for (std::int64_t twice_t : {0, 1, 2, 4, 6}) {
      // X >= t ||a||  <=>  X >= 0 and 4 X^2 >= (2t)^2 sum a^2, in integers.
      double p = 0.0;
      for (std::size_t i = 0; i < pmf.support.size(); ++i) {
        const std::int64_t x = pmf.support[i];
        if (x >= 0 && 4 * x * x >= twice_t * twice_t * ss) p += pmf.probs[i];
      }
      const double t = static_cast<double>(twice_t) / 2.0;
      ++checks;
      if (p > std::exp(-t * t / 2.0) + bounds::kDominationTolerance) ++hoeff_bad;
    }
    double p = 0.0;
    for (std::size_t i = 0; i < pmf.support.size(); ++i) {
      const std::int64_t x = pmf.support[i];
      if (4 * x * x >= ss) p += pmf.probs[i];
    }
    if (p < 3.0 / 16.0 - bounds::kDominationTolerance) ++pz_bad;
  }
  line(8, "Hoeffding + Paley-Zygmund", hoeff_bad == 0 && pz_bad == 0,
       fmt("tail checks=%d violations=%d, PZ cases=%zu violations=%d", checks, hoeff_bad, cases.size(), pz_bad));
}

void criterion_9() {
  const auto errs = verify::local_clt_errors(10000);
  double top = 0.0;
  std::uint64_t top_n = 0;
  bool finite = true;
  std::vector<double> vals;
  for (const auto& [n, e] : errs) {
    finite = finite && std::isfinite(e);
    vals.push_back(e);
    if (e > top) {
      top = e;
      top_n = n;
    }
  }
  std::vector<double> sorted = vals;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  std::size_t over = 0;
  for (double v : vals) over += v > 10.0 * median;
  line(9, "local CLT error", finite && over == 0,
       fmt("max n*|err|=%.6f at n=%llu, median=%.6f, terms above 10x median=%zu of %zu, tail n=10000 value=%.6f",
           top, static_cast<unsigned long long>(top_n), median, over, vals.size(), vals.back()));
}

void criterion_10() {
  Timer t;
  seq::StepSequenceSpec spec;
  spec.family = seq::Family::sqrt_block;
  std::vector<mc::Window> windows;
  for (unsigned k = 1; k <= 3; ++k) windows.push_back(mc::sqrt_block_event_window(k));
  const std::uint64_t reps = 100000;
  const mc::WalkSimulator sim(seq::generate(spec, windows.back().end), 0x5EC7105);
  const auto stats = mc::estimate_interval_hits(sim, reps, 0.0, windows);
  bool pass = true;
  double lo = 1e300, hi = 0.0, max_corr = 0.0;
  std::string detail;
  for (int k = 1; k <= 3; ++k) {
    const double p = stats.per_event.at(k).p_hat;
    pass = pass && p >= 0.01;
    lo = std::min(lo, k * p);
    hi = std::max(hi, k * p);
    detail += fmt("p(E%d)=%.4f ", k, p);
  }
  for (const auto& [jk, both] : stats.joint) {
    const double pj = stats.per_event.at(jk.first).p_hat, pk = stats.per_event.at(jk.second).p_hat;
    max_corr = std::max(max_corr, static_cast<double>(both) / static_cast<double>(reps) / (pj * pk));
  }
  pass = pass && hi / lo <= 5.0 && max_corr <= 10.0;
  const auto small = mc::estimate_interval_hits(sim, reps, 0.0, {{1, 4}});
  const double ps = small.per_event.at(1).p_hat;
  const double sigma = std::sqrt(0.125 * 0.875 / static_cast<double>(reps));
  const double z = std::fabs(ps - 0.125) / sigma;
  const double secs = t.seconds();
  pass = pass && z <= 4.0 && secs < 600.0;
  line(10, "recurrence events", pass,
       detail + fmt("k*p max/min=%.3f max joint/product=%.3f small-window p=%.5f (z=%.2f) time=%.2fs", hi / lo,
                    max_corr, ps, z, secs));
}

void criterion_11() {
  seq::StepSequenceSpec spec;
  spec.family = seq::Family::sqrt_block;
  const unsigned kmax = 3;
  const std::uint64_t last = seq::sqrt_block_start(2 * kmax + 1) - 1;
  const mc::WalkSimulator sim(seq::generate(spec, last), 0xE3BED);
  std::uint64_t mismatches = 0, visits = 0;
  const std::uint64_t traces = 10000;
  for (std::uint64_t r = 0; r < traces; ++r) {
    const auto trace = sim.trace(r, last);
    for (unsigned k = 1; k <= kmax; ++k) {
      const auto pairs = mc::sqrt_block_pairs(trace, k);
      const auto emb = mc::embed_2d(pairs.increments, k, pairs.y0);
      std::uint64_t zeros = 0;
      const std::uint64_t end = seq::sqrt_block_start(2 * k + 1) - 1;
      for (std::uint64_t t = seq::sqrt_block_start(2 * k) - 1; t <= end; t += 2) zeros += trace[t] == 0.0;
      mismatches += emb.visits_to_line != zeros;
      visits += emb.visits_to_line;
    }
  }
  line(11, "2D embedding fidelity", mismatches == 0,
       fmt("traces=%llu blocks/trace=%u mismatches=%llu total visits=%llu", static_cast<unsigned long long>(traces),
           kmax, static_cast<unsigned long long>(mismatches), static_cast<unsigned long long>(visits)));
}

void criterion_12() {
  const auto steps = coupling::StepSource::power(0.5L, coupling::horizon_from_log2(coupling::kDefaultHorizonLog2));
  const std::uint64_t runs = 10000;
  std::uint64_t ok = 0, episodes = 0, wins = 0, errors = 0, replay_bad = 0;
  for (std::uint64_t r = 0; r < runs; ++r) {
    try {
      const auto run = coupling::simulate_coupling(steps, 1.0L, 0.1L, 0xC0FFEE, r);
      if (run.success && run.final_gap >= 0 && run.final_gap <= 0.1L) ++ok;
      if (coupling::replay_gap(steps, run, 0xC0FFEE, r) != run.final_gap) ++replay_bad;
      episodes += run.episodes_used;
      for (const auto& ep : run.episodes) wins += ep.won;
    } catch (const std::exception&) {
      ++errors;
    }
  }
  const double rate = static_cast<double>(wins) / static_cast<double>(episodes);
  const double sigma = std::sqrt(0.25 * 0.75 / static_cast<double>(episodes));
  const bool pass = ok == runs && replay_bad == 0 && rate >= 0.25 - 3.0 * sigma;
  line(12, "coupling game", pass,
       fmt("runs=%llu ok=%llu errors=%llu replay mismatches=%llu episodes=%llu per-episode success=%.4f (floor %.4f)",
           static_cast<unsigned long long>(runs), static_cast<unsigned long long>(ok),
           static_cast<unsigned long long>(errors), static_cast<unsigned long long>(replay_bad),
           static_cast<unsigned long long>(episodes), rate,
           0.25 - 3.0 * sigma));
}

void criterion_13() {
  seq::StepSequenceSpec spec;
  spec.family = seq::Family::log_power;
  spec.alpha = 2.0;
  spec.floor_values = true;
  const auto counts = seq::value_counts(seq::generate(spec, 1000000));
  int checked = 0, fail1 = 0, fail2 = 0, last_fail1 = 0, last_fail2 = 0;
  bool monotone = true;
  double prev_rhs1 = 0.0, prev_scale2 = 0.0;
  u128 prev_lhs2 = 0;
  for (std::int64_t n = 20;; ++n) {
    const auto r = seq::check_ints_conditions(counts, n);
    if (!r.complete) break;
    ++checked;
    if (!r.assump1_holds) {
      ++fail1;
      last_fail1 = static_cast<int>(n);
    }
    if (!r.assump2_holds) {
      ++fail2;
      last_fail2 = static_cast<int>(n);
    }
    // 2n^2 grows, sum i^2 L_i never drops, and 4 n^2 ln^3 n = rhs2 / L_n grows.
    monotone = monotone && r.assump1_rhs > prev_rhs1 && r.assump2_lhs >= prev_lhs2;
    const auto ln = counts.counts.find(n);
    if (ln != counts.counts.end() && ln->second > 0) {
      const double scale2 = r.assump2_rhs / static_cast<double>(ln->second);
      monotone = monotone && scale2 > prev_scale2;
      prev_scale2 = scale2;
    }
    prev_rhs1 = r.assump1_rhs;
    prev_lhs2 = r.assump2_lhs;
  }
  line(13, "ints conditions, floor(ln^2 n)", checked > 0 && fail1 == 0 && fail2 == 0 && monotone,
       fmt("checked n=20..%d: assump1 fails %d (last n=%d), assump2 fails %d (last n=%d), monotone=%s", 19 + checked,
           fail1, last_fail1, fail2, last_fail2, monotone ? "yes" : "no"));
}

std::string run_capture(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return std::to_string(code) + "\n" + out.str();
}

void criterion_14() {
  ::setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  const fs::path dir = fs::temp_directory_path() / ("rlab-accept-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    const auto p = (dir / name).string();
    std::ofstream(p) << text;
    return p;
  };
  const auto seq = write("seq.json", R"({"family": "power", "alpha": 1})");
  const auto manifest = write("mc.json", R"({"master_seed": 99, "replicates": 20000, "horizon": 170,
    "spec": {"family": "sqrt_block"}, "experiment": "interval_hits", "params": {"sqrt_block_events": 2}})");
  struct Case {
    std::string name;
    std::vector<std::string> a, b;
  };
  const std::vector<Case> cases{
      {"dist", {"dist", "--seq", seq, "--n", "40", "--q", "1", "--exact"},
       {"dist", "--seq", seq, "--n", "40", "--q", "1", "--exact"}},
      {"mc", {"mc", "--manifest", manifest, "--threads", "1"}, {"mc", "--manifest", manifest, "--threads", "5"}},
      {"verify", {"verify", "--suite", "all", "--max-n", "12", "--cases", "4"},
       {"verify", "--suite", "all", "--max-n", "12", "--cases", "4", "--threads", "3"}},
  };
  std::string detail;
  bool pass = true;
  for (const auto& c : cases) {
    const auto first = run_capture(c.a);
    const auto again = run_capture(c.a);
    // Thread count is a runtime knob: it must not change the report.
    auto b_out = run_capture(c.b);
    const auto strip = [](std::string s) {
      auto pos = s.find("\"argv\"");
      auto end = s.find(']', pos);
      if (pos != std::string::npos && end != std::string::npos) s.erase(pos, end - pos);
      return s;
    };
    const bool same = first == again && strip(first) == strip(b_out) && first.rfind("0\n", 0) == 0;
    pass = pass && same;
    detail += c.name + (same ? "=identical " : "=DIFFERS ");
  }
  fs::remove_all(dir);
  line(14, "determinism", pass, detail);
}

}  // namespace

int main() {
  const auto cases = corpus();
  criterion_1(cases);
  criterion_2(cases);
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8(cases);
  criterion_9();
  criterion_10();
  criterion_11();
  criterion_12();
  criterion_13();
  criterion_14();
  std::printf("%d of 14 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
