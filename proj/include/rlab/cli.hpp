#pragma once

// Command-line front end: gen, dist, bounds, mc, fit, verify, replay.
// Exit codes: 0 ok, 1 verification failure, 2 configuration or input error,
// 3 infeasible computation.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rlab/bounds.hpp"
#include "rlab/coupling.hpp"
#include "rlab/error.hpp"
#include "rlab/exactdist.hpp"
#include "rlab/json_io.hpp"
#include "rlab/mc.hpp"
#include "rlab/seqgen.hpp"
#include "rlab/verify.hpp"

namespace rlab::cli {

inline constexpr const char* kToolVersion = "rlab 0.1.0";

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kConfig = 2, kInfeasible = 3 };

using io::json;

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string csv_text(const Table& t) {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
    out += "\n";
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  return out;
}

/// Write via a temporary file in the same directory, then rename.
inline void write_atomic(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
    out << text;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw ConfigError("write to '" + tmp.string() + "' failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ConfigError("cannot move report into '" + path + "'");
  }
}

inline std::string timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* pinned = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      t = static_cast<std::time_t>(std::stoll(pinned));
    } catch (const std::exception&) {
      throw ConfigError("SOURCE_DATE_EPOCH is not an integer");
    }
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::size_t support_cap() {
  if (const char* v = std::getenv("RLAB_SUPPORT_CAP")) {
    try {
      const auto cap = std::stoull(v);
      if (cap == 0) throw ConfigError("RLAB_SUPPORT_CAP must be positive");
      return static_cast<std::size_t>(cap);
    } catch (const std::logic_error&) {
      throw ConfigError("RLAB_SUPPORT_CAP is not a positive integer");
    }
  }
  return dist::kDefaultSupportCap;
}

/// A sequence file: either a JSON spec or newline-delimited values.
struct SequenceSource {
  std::optional<seq::StepSequenceSpec> spec;
  std::vector<double> values;
  std::string path;

  std::vector<double> steps(std::optional<std::uint64_t> n) const {
    if (spec) {
      if (!n) throw ConfigError("--n is required with a sequence spec");
      return seq::generate(*spec, *n);
    }
    if (!n) return values;
    if (*n > values.size()) {
      throw ConfigError("'" + path + "' holds " + std::to_string(values.size()) + " values, " +
                        std::to_string(*n) + " requested");
    }
    return {values.begin(), values.begin() + static_cast<std::ptrdiff_t>(*n)};
  }

  json describe() const {
    if (spec) return json{{"path", path}, {"spec", io::to_json(*spec)}};
    return json{{"path", path}, {"values", values.size()}};
  }
};

inline SequenceSource load_sequence(const std::string& path) {
  SequenceSource src;
  src.path = path;
  const std::string text = io::read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    src.spec = io::spec_from_json(io::parse_json(text, path));
    return src;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    const std::string tok = line.substr(b, e - b + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size()) throw ConfigError(path + ":" + std::to_string(lineno) + ": not a number");
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw DomainError(path + ":" + std::to_string(lineno) + ": step sizes must be non-negative");
    }
    src.values.push_back(v);
  }
  return src;
}

struct Globals {
  std::string out;
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;
  bool exact = false;
  std::string format = "json";
};

struct Result {
  json payload;
  std::optional<Table> table;
  std::optional<std::string> text;  // plain text rendering (gen --format txt)
  int exit_code = kOk;
};

inline std::string format_value(double v) {
  if (std::floor(v) == v && std::fabs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::string spec_path;
  std::string family;
  std::optional<double> alpha;
  std::optional<double> value;
  bool floor_values = false;
  std::uint64_t n = 0;
  std::vector<std::int64_t> check_ints;
  std::optional<std::int64_t> check_ints_from;
  std::optional<double> sparse_epsilon;
};

inline json ints_json(const seq::IntsConditionReport& r) {
  return json{{"n", r.n},
              {"assump1_holds", r.assump1_holds},
              {"assump1_lhs", r.assump1_lhs},
              {"assump1_rhs", r.assump1_rhs},
              {"assump2_holds", r.assump2_holds},
              {"assump2_lhs", seq::to_decimal(r.assump2_lhs)},
              {"assump2_rhs", r.assump2_rhs},
              {"complete", r.complete}};
}

inline Result cmd_gen(const GenArgs& a, const Globals& g) {
  seq::StepSequenceSpec spec;
  if (!a.spec_path.empty()) {
    const auto src = load_sequence(a.spec_path);
    if (!src.spec) throw ConfigError("--spec must name a JSON sequence spec");
    spec = *src.spec;
  } else if (!a.family.empty()) {
    spec.family = seq::family_from_name(a.family);
    spec.alpha = a.alpha;
    spec.value = a.value;
    spec.floor_values = a.floor_values;
  } else {
    throw ConfigError("gen needs --spec or --family");
  }
  const auto values = seq::generate(spec, a.n);
  Result r;
  r.payload = json{{"spec", io::to_json(spec)}, {"n", a.n}, {"values", values}};
  const bool checks = !a.check_ints.empty() || a.check_ints_from || a.sparse_epsilon;
  if (checks) {
    const auto counts = seq::value_counts(values);
    json cj = json::object();
    for (const auto& [v, c] : counts.counts) cj[std::to_string(v)] = c;
    r.payload["counts"] = cj;
    std::vector<std::int64_t> targets = a.check_ints;
    if (a.check_ints_from && !counts.counts.empty()) {
      for (std::int64_t n = *a.check_ints_from; n <= counts.counts.rbegin()->first; ++n) targets.push_back(n);
    }
    json ints = json::array();
    bool all = true;
    for (std::int64_t n : targets) {
      const auto rep = seq::check_ints_conditions(counts, n);
      all = all && rep.assump1_holds && rep.assump2_holds;
      ints.push_back(ints_json(rep));
    }
    if (!targets.empty()) {
      r.payload["ints_conditions"] = ints;
      r.payload["ints_all_hold"] = all;
    }
    if (a.sparse_epsilon) {
      const auto rep = seq::check_sparse_conditions(counts, *a.sparse_epsilon);
      json vals = json::array();
      for (const auto& c : rep.values) {
        vals.push_back(json{{"value", c.value},
                            {"multiplicity", c.multiplicity},
                            {"required", c.required},
                            {"witness", c.witness ? json(*c.witness) : json(nullptr)},
                            {"witness_multiplicity", c.witness_multiplicity},
                            {"holds", c.holds}});
      }
      r.payload["sparse_conditions"] = json{{"epsilon", *a.sparse_epsilon}, {"values", vals},
                                            {"reciprocal_sum", rep.reciprocal_sum}, {"all_hold", rep.all_hold}};
    }
  }
  Table t{{"index", "value"}, {}};
  std::string text;
  for (std::size_t i = 0; i < values.size(); ++i) {
    t.rows.push_back({std::to_string(i + 1), num(values[i])});
    text += format_value(values[i]) + "\n";
  }
  r.table = t;
  r.text = text;
  (void)g;
  return r;
}

// ---------------------------------------------------------------- dist

struct DistArgs {
  std::string seq_path;
  std::optional<std::uint64_t> n;
  double q = 1.0;
  std::optional<std::int64_t> mod;
  std::string method = "direct";
};

template <class Weight>
Result dist_payload(const dist::BasicPmf<Weight>& pmf, double r) {
  Result res;
  const auto q = dist::concentration_q(pmf, r);
  json probs = json::array();
  Table t{{"value", "prob"}, {}};
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    if constexpr (dist::BasicPmf<Weight>::is_exact) {
      probs.push_back(dist::rational_string(pmf.probs[i], pmf.denominator_log2));
    } else {
      probs.push_back(pmf.probs[i]);
    }
    t.rows.push_back({std::to_string(pmf.support[i]), num(pmf.probability(i))});
  }
  json qj{{"r", q.r}, {"value", q.result}, {"argmax_x", q.argmax_x}};
  if constexpr (dist::BasicPmf<Weight>::is_exact) qj["exact"] = dist::rational_string(q.numerator, q.denominator_log2);
  res.payload = json{{"steps_applied", pmf.steps_applied}, {"support", pmf.support}, {"probs", probs}, {"q", qj}};
  res.table = t;
  return res;
}

inline Result cmd_dist(const DistArgs& a, const Globals& g) {
  const auto src = load_sequence(a.seq_path);
  const auto steps = seq::to_integer_steps(src.steps(a.n));
  if (a.mod) {
    dist::ModularMethod method;
    if (a.method == "direct") method = dist::ModularMethod::direct;
    else if (a.method == "spectral") method = dist::ModularMethod::spectral;
    else throw ConfigError("--method must be direct or spectral");
    const auto pmf = dist::modular_walk_pmf(steps, *a.mod, method);
    Result res;
    res.payload = json{{"steps_applied", steps.size()}, {"modulus", pmf.modulus}, {"method", a.method},
                       {"probs", pmf.probs}, {"max_prob", pmf.max_prob()}};
    Table t{{"residue", "prob"}, {}};
    for (std::size_t r = 0; r < pmf.probs.size(); ++r) t.rows.push_back({std::to_string(r), num(pmf.probs[r])});
    res.table = t;
    return res;
  }
  if (g.exact) return dist_payload(dist::walk_pmf<std::uint64_t>(steps, support_cap()), a.q);
  return dist_payload(dist::walk_pmf<double>(steps, support_cap()), a.q);
}

// ---------------------------------------------------------------- bounds

struct BoundsArgs {
  std::string check;
  bool exponent = false;
  std::string seq_path;
  std::string seq_b_path;
  std::optional<std::uint64_t> n;
  std::optional<std::uint64_t> n_b;
  std::optional<std::int64_t> m;
  std::optional<double> t, x, alpha, delta, gamma, mean, second, c, r, s, variance;
};

template <class T>
T need(const std::optional<T>& v, const char* flag) {
  if (!v) throw ConfigError(std::string("missing ") + flag);
  return *v;
}

inline Result report_result(const bounds::BoundReport& rep, json extra = json::object()) {
  Result res;
  res.payload = json{{"report", io::to_json(rep)}};
  for (auto& [k, v] : extra.items()) res.payload[k] = v;
  auto opt = [](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
  res.table = Table{{"bound_name", "bound_value", "compared_value", "satisfied", "slack"},
                    {{rep.bound_name, num(rep.bound_value), opt(rep.compared_value),
                      rep.satisfied ? (*rep.satisfied ? "true" : "false") : "", opt(rep.slack)}}};
  return res;
}

/// Lower bounds are stored with the roles swapped so that `satisfied` keeps
/// meaning "compared <= bound": the bound slot holds the exact value.
inline Result lower_report(const std::string& name, std::vector<std::pair<std::string, double>> params, double floor,
                           double exact) {
  auto rep = bounds::make_report(name, std::move(params), exact, floor);
  return report_result(rep, json{{"direction", "lower"}, {"floor", floor}, {"exact", exact}});
}

inline Result cmd_bounds(const BoundsArgs& a) {
  const std::string check = a.exponent ? "exponent" : a.check;
  auto integer_steps = [&] {
    if (a.seq_path.empty()) throw ConfigError("--seq is required for --check " + check);
    return seq::to_integer_steps(load_sequence(a.seq_path).steps(a.n));
  };
  if (check == "exponent") {
    bounds::ExponentQuery q;
    q.alpha = need(a.alpha, "--alpha");
    q.delta = need(a.delta, "--delta");
    q.gamma = need(a.gamma, "--gamma");
    q = bounds::anti_exponent_f(q);
    Result res;
    res.payload = json{{"alpha", q.alpha},     {"delta", q.delta},       {"gamma", q.gamma},
                       {"f_value", q.f_value}, {"exponent", q.exponent}, {"branch", bounds::branch_name(q.branch)},
                       {"delta_star", bounds::delta_star(q.alpha)}};
    res.table = Table{{"alpha", "delta", "gamma", "f_value", "exponent", "branch"},
                      {{num(q.alpha), num(q.delta), num(q.gamma), num(q.f_value), num(q.exponent),
                        bounds::branch_name(q.branch)}}};
    return res;
  }
  if (check == "elo") {
    if (a.seq_path.empty()) {
      const auto n = need(a.n, "--n");
      return report_result(bounds::make_report("elo", {{"n", static_cast<double>(n)}}, bounds::elo_bound(n)));
    }
    const auto steps = integer_steps();
    if (steps.empty()) throw ConfigError("empty sequence");
    const auto c = *std::min_element(steps.begin(), steps.end());
    if (c <= 0) throw DomainError("elo check needs positive steps");
    const auto pmf = dist::walk_pmf(steps, support_cap());
    const double q = dist::concentration_q(pmf, 2.0 * static_cast<double>(c)).result;
    return report_result(bounds::make_report(
        "elo", {{"n", static_cast<double>(steps.size())}, {"c", static_cast<double>(c)}}, bounds::elo_bound(steps.size()), q));
  }
  if (check == "modular-elo" || check == "cosine-product") {
    const auto m = need(a.m, "--m");
    const auto steps = integer_steps();
    if (steps.empty()) throw ConfigError("empty sequence");
    const auto pmf = dist::modular_walk_pmf(steps, m);
    const double cosine = bounds::cosine_product_bound(m, steps);
    const double elo = bounds::modular_elo_bound(m, steps.size());
    const std::vector<std::pair<std::string, double>> params{{"m", static_cast<double>(m)},
                                                             {"n", static_cast<double>(steps.size())}};
    const json extra{{"cosine_product_bound", cosine},
                     {"cosine_product_bound_maximized", bounds::cosine_product_bound_maximized(m, steps.size())},
                     {"modular_elo_bound", elo},
                     {"max_residue_prob", pmf.max_prob()}};
    if (check == "modular-elo") return report_result(bounds::make_report("modular_elo", params, elo, pmf.max_prob()), extra);
    return report_result(bounds::make_report("cosine_product", params, cosine, pmf.max_prob()), extra);
  }
  if (check == "lower-anti") {
    const auto steps = integer_steps();
    const auto mom = dist::summary_moments(steps);
    const double floor = bounds::lower_anti_floor(mom.variance);
    const double q1 = dist::concentration_q(dist::walk_pmf(steps, support_cap()), 1.0).result;
    return lower_report("lower_anti", {{"variance", mom.variance}}, floor, q1);
  }
  if (check == "hoeffding") {
    const auto steps = integer_steps();
    const double t = need(a.t, "--t");
    const auto mom = dist::summary_moments(steps);
    const double tail = dist::tail_prob(dist::walk_pmf(steps, support_cap()), t * mom.l2_norm);
    return report_result(bounds::make_report("hoeffding", {{"t", t}, {"l2_norm", mom.l2_norm}},
                                             bounds::hoeffding_tail(mom.l2_norm, t), tail));
  }
  if (check == "paley-zygmund") {
    const auto steps = integer_steps();
    const auto mom = dist::summary_moments(steps);
    const double p = dist::abs_tail_prob(dist::walk_pmf(steps, support_cap()), 0.5 * mom.l2_norm);
    return lower_report("paley_zygmund", {{"l2_norm", mom.l2_norm}}, 3.0 / 16.0, p);
  }
  if (check == "local-clt") {
    const auto n = need(a.n, "--n");
    const auto x = static_cast<std::int64_t>(a.x.value_or(0.0));
    const auto approx = bounds::local_clt_approx(n, x).approx;
    const double exact = bounds::ssrw_point_mass(n, x);
    Result res;
    res.payload = json{{"n", n}, {"x", x}, {"approx", approx}, {"exact", exact},
                       {"scaled_error", static_cast<double>(n) * std::fabs(exact - approx)}};
    res.table = Table{{"n", "x", "approx", "exact", "scaled_error"},
                      {{std::to_string(n), std::to_string(x), num(approx), num(exact),
                        num(static_cast<double>(n) * std::fabs(exact - approx))}}};
    return res;
  }
  if (check == "kochen-stone") {
    const auto ks = bounds::kochen_stone_ratio(need(a.mean, "--mean"), need(a.second, "--second"));
    Result res;
    res.payload = json{{"mean", *a.mean}, {"second_moment", *a.second}, {"ratio", ks.ratio},
                       {"zero_mean_warning", ks.zero_mean_warning}};
    res.table = Table{{"mean", "second_moment", "ratio"}, {{num(*a.mean), num(*a.second), num(ks.ratio)}}};
    return res;
  }
  if (check == "lower-anti-floor") {
    const double v = need(a.variance, "--variance");
    return report_result(bounds::make_report("lower_anti_floor", {{"variance", v}}, bounds::lower_anti_floor(v)));
  }
  if (check == "transience") {
    const auto steps = integer_steps();
    const double c = a.c.value_or(0.0);
    std::vector<std::pair<std::uint64_t, double>> q1;
    dist::ExactPmf pmf;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      pmf.apply_step(steps[i], support_cap());
      q1.emplace_back(i + 1, dist::concentration_q(pmf, 1.0).result);
    }
    const auto sums = bounds::transience_partial_sum(q1, c);
    Result res;
    json rows = json::array();
    Table t{{"n", "q1", "partial_sum"}, {}};
    for (std::size_t i = 0; i < q1.size(); ++i) {
      rows.push_back(json{{"n", q1[i].first}, {"q1", q1[i].second}, {"partial_sum", sums[i]}});
      t.rows.push_back({std::to_string(q1[i].first), num(q1[i].second), num(sums[i])});
    }
    res.payload = json{{"C", c}, {"series", rows}};
    res.table = t;
    return res;
  }
  if (check == "combine-scales") {
    if (a.seq_b_path.empty()) throw ConfigError("--seq-b is required for combine-scales");
    const double r = need(a.r, "--r"), s = need(a.s, "--s");
    if (!(r > 0.0 && r < s)) throw ConfigError("combine-scales needs 0 < r < s");
    const auto pa = dist::walk_pmf(integer_steps(), support_cap());
    const auto src_b = load_sequence(a.seq_b_path);
    std::optional<std::uint64_t> n_b = a.n_b;
    if (!n_b && src_b.spec) n_b = a.n;
    const auto pb = dist::walk_pmf(seq::to_integer_steps(src_b.steps(n_b)), support_cap());
    const double rhs = bounds::combine_scales_rhs(dist::concentration_q(pa, r).result,
                                                  dist::concentration_q(pb, s).result, dist::abs_tail_prob(pa, s));
    const double lhs = dist::concentration_q(dist::convolve(pa, pb), r).result;
    return report_result(bounds::make_report("combine_scales", {{"r", r}, {"s", s}}, rhs, lhs));
  }
  throw ConfigError("unknown bound check '" + check + "'");
}

// ---------------------------------------------------------------- mc

inline json coupling_result(const mc::McRunManifest& m, const json& params, unsigned threads) {
  const double d = params.value("d", 1.0);
  const double eps = params.value("epsilon", 0.1);
  const unsigned horizon_log2 = params.value("horizon_log2", coupling::kDefaultHorizonLog2);
  const std::uint64_t table_length = params.value("table_length", m.horizon);
  const std::uint64_t max_episodes = params.value("max_episodes", std::uint64_t{4096});
  const auto source = coupling::StepSource::from_spec(m.spec, horizon_log2, table_length);

  struct RunOutcome {
    bool ok = false;
    std::string error;
    std::uint64_t episodes = 0, won = 0;
    double final_gap = 0;
    bool replay_ok = false;
    bool in_target = false;
    std::string max_index;
  };
  std::vector<RunOutcome> runs(static_cast<std::size_t>(m.replicates));
  mc::for_each_shard(m.replicates, threads, [&](std::uint64_t b, std::uint64_t e, unsigned) {
    for (std::uint64_t i = b; i < e; ++i) {
      RunOutcome& o = runs[static_cast<std::size_t>(i)];
      try {
        const auto pair = coupling::simulate_coupling(source, d, eps, m.master_seed, i, max_episodes);
        o.ok = pair.success;
        o.episodes = pair.episodes_used;
        for (const auto& ep : pair.episodes) o.won += ep.won ? 1 : 0;
        o.final_gap = static_cast<double>(pair.final_gap);
        o.in_target = coupling::in_target(pair.final_gap, coupling::real(eps));
        o.replay_ok = coupling::replay_gap(source, pair, m.master_seed, i) == pair.final_gap;
        coupling::index_t top = 0;
        for (const auto& ep : pair.episodes) top = std::max(top, ep.sign_m == 0 ? ep.n : ep.m);
        o.max_index = top.str();
      } catch (const InfeasibleError& ex) {
        o.error = ex.what();
      }
    }
  });
  std::uint64_t successes = 0, episodes = 0, won = 0, replay_bad = 0, out_of_target = 0, most = 0;
  std::vector<std::string> errors;
  std::map<std::uint64_t, std::uint64_t> hist;
  double widest = 0.0;
  for (const auto& o : runs) {
    if (!o.ok) {
      if (errors.size() < 10) errors.push_back(o.error);
      continue;
    }
    ++successes;
    episodes += o.episodes;
    won += o.won;
    most = std::max(most, o.episodes);
    ++hist[o.episodes];
    if (!o.replay_ok) ++replay_bad;
    if (!o.in_target) ++out_of_target;
    widest = std::max(widest, o.final_gap);
  }
  const double rate = episodes ? static_cast<double>(won) / static_cast<double>(episodes) : 0.0;
  const double sigma = episodes ? std::sqrt(0.25 * 0.75 / static_cast<double>(episodes)) : 0.0;
  json h = json::object();
  for (const auto& [k, v] : hist) h[std::to_string(k)] = v;
  json sample = json::array();
  for (std::size_t i = 0; i < std::min<std::size_t>(runs.size(), 5); ++i) {
    sample.push_back(json{{"run", i}, {"episodes", runs[i].episodes}, {"final_gap", runs[i].final_gap},
                          {"max_index", runs[i].max_index}});
  }
  return json{{"d", d},
              {"epsilon", eps},
              {"horizon_log2", horizon_log2},
              {"step_source", source.kind() == coupling::StepSource::Kind::table ? "table" : "analytic"},
              {"runs", m.replicates},
              {"successes", successes},
              {"infeasible", m.replicates - successes},
              {"errors", errors},
              {"episodes_total", episodes},
              {"episodes_won", won},
              {"per_episode_success_rate", rate},
              {"sigma_at_quarter", sigma},
              {"max_episodes_used", most},
              {"episode_histogram", h},
              {"max_final_gap", widest},
              {"final_gap_out_of_target", out_of_target},
              {"replay_mismatches", replay_bad},
              {"sample_runs", sample}};
}

inline Result cmd_mc(const std::string& manifest_path, const Globals& g) {
  const json raw = io::parse_json(io::read_file(manifest_path), manifest_path);
  auto m = io::manifest_from_json(raw);
  if (g.seed) m.master_seed = *g.seed;
  const json params = raw.value("params", json::object());
  Result res;
  json result{{"experiment", mc::experiment_name(m.experiment)}};
  switch (m.experiment) {
    case mc::Experiment::interval_hits: {
      std::vector<mc::Window> windows;
      if (params.contains("sqrt_block_events")) {
        const int k = params.at("sqrt_block_events").get<int>();
        for (int i = 1; i <= k; ++i) windows.push_back(mc::sqrt_block_event_window(static_cast<unsigned>(i)));
      }
      if (params.contains("windows")) {
        for (const auto& w : params.at("windows")) {
          windows.push_back({w.at(0).get<std::uint64_t>(), w.at(1).get<std::uint64_t>()});
        }
      }
      const double c = params.value("C", 0.0);
      const mc::WalkSimulator sim(seq::generate(m.spec, m.horizon), m.master_seed);
      const auto stats = mc::estimate_interval_hits(sim, m.replicates, c, windows, g.threads);
      result["C"] = c;
      result["stats"] = io::to_json(stats);
      const int k = static_cast<int>(stats.per_event.size());
      const auto ks = mc::kochen_stone_estimate(stats, k);
      result["kochen_stone"] = json{{"up_to_k", k}, {"z_mean", ks.z_mean}, {"z_second_moment", ks.z_second_moment},
                                    {"ratio", ks.ratio}};
      Table t{{"k", "start", "end", "hits", "p_hat", "wilson_lo", "wilson_hi"}, {}};
      for (const auto& [key, e] : stats.per_event) {
        const auto& w = stats.windows[static_cast<std::size_t>(key - 1)];
        t.rows.push_back({std::to_string(key), std::to_string(w.start), std::to_string(w.end), std::to_string(e.hits),
                          num(e.p_hat), num(e.wilson_lo), num(e.wilson_hi)});
      }
      res.table = t;
      break;
    }
    case mc::Experiment::q1_estimate: {
      std::vector<std::uint64_t> ns;
      if (params.contains("n")) {
        const auto& v = params.at("n");
        if (v.is_array()) ns = v.get<std::vector<std::uint64_t>>();
        else ns.push_back(v.get<std::uint64_t>());
      } else {
        ns.push_back(m.horizon);
      }
      const mc::WalkSimulator sim(seq::generate(m.spec, m.horizon), m.master_seed);
      json rows = json::array();
      Table t{{"n", "q1_mc", "stderr"}, {}};
      for (auto n : ns) {
        const auto q = mc::estimate_q1(sim, n, m.replicates, g.threads);
        rows.push_back(json{{"n", n}, {"q1_hat", q.q1_hat}, {"stderr", q.stderr_}, {"window_x", q.window_x},
                            {"integer_anchored", q.integer_anchored}, {"bias_note", q.bias_note}});
        t.rows.push_back({std::to_string(n), num(q.q1_hat), num(q.stderr_)});
      }
      result["estimates"] = rows;
      res.table = t;
      break;
    }
    case mc::Experiment::embed2d: {
      const unsigned k = params.value("k", 1U);
      const std::uint64_t last = seq::sqrt_block_start(2 * k + 1) - 1;
      if (m.horizon < last) throw ConfigError("embed2d: horizon must reach " + std::to_string(last));
      const mc::WalkSimulator sim(seq::generate(m.spec, last), m.master_seed);
      std::vector<std::uint64_t> visits(static_cast<std::size_t>(m.replicates));
      std::vector<char> agree(static_cast<std::size_t>(m.replicates));
      mc::for_each_shard(m.replicates, g.threads, [&](std::uint64_t b, std::uint64_t e, unsigned) {
        for (std::uint64_t r = b; r < e; ++r) {
          const auto trace = sim.trace(r, last);
          const auto pairs = mc::sqrt_block_pairs(trace, k);
          const auto emb = mc::embed_2d(pairs.increments, k, pairs.y0);
          const auto zeros = static_cast<std::uint64_t>(std::count(pairs.positions.begin(), pairs.positions.end(), 0));
          visits[static_cast<std::size_t>(r)] = emb.visits_to_line;
          agree[static_cast<std::size_t>(r)] = emb.visits_to_line == zeros;
        }
      });
      std::uint64_t mismatches = 0, total = 0, with_visit = 0;
      for (std::size_t i = 0; i < visits.size(); ++i) {
        mismatches += agree[i] ? 0 : 1;
        total += visits[i];
        with_visit += visits[i] > 0 ? 1 : 0;
      }
      result["k"] = k;
      result["traces"] = m.replicates;
      result["mismatches"] = mismatches;
      result["total_visits"] = total;
      result["traces_with_visit"] = with_visit;
      res.table = Table{{"k", "traces", "mismatches", "total_visits"},
                        {{std::to_string(k), std::to_string(m.replicates), std::to_string(mismatches),
                          std::to_string(total)}}};
      break;
    }
    case mc::Experiment::coupling: {
      result["coupling"] = coupling_result(m, params, g.threads);
      const auto& c = result["coupling"];
      res.table = Table{{"runs", "successes", "episodes_total", "episodes_won", "per_episode_success_rate"},
                        {{num(c["runs"].get<double>()), num(c["successes"].get<double>()),
                          num(c["episodes_total"].get<double>()), num(c["episodes_won"].get<double>()),
                          num(c["per_episode_success_rate"].get<double>())}}};
      break;
    }
  }
  json embedded = raw;
  if (g.seed) embedded["master_seed"] = *g.seed;
  res.payload = json{{"mc_manifest", embedded}, {"result", result}};
  return res;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string seq_path;
  std::string points_path;
  std::uint64_t from = 1;
  std::uint64_t to = 0;
};

inline Result cmd_fit(const FitArgs& a) {
  std::vector<std::pair<double, double>> pts;
  if (!a.points_path.empty()) {
    std::istringstream in(io::read_file(a.points_path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
      const auto comma = line.find(',');
      if (comma == std::string::npos) throw ConfigError("points file rows must be 'n,value'");
      try {
        pts.emplace_back(std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1)));
      } catch (const std::exception&) {
        throw ConfigError("points file: cannot parse '" + line + "'");
      }
    }
  } else {
    if (a.seq_path.empty()) throw ConfigError("fit needs --seq or --points");
    if (a.to >= a.from && a.to > 0) {
      const auto steps = seq::to_integer_steps(load_sequence(a.seq_path).steps(a.to));
      pts = verify::exact_q1_series(steps, a.from, a.to, support_cap());
    }
  }
  Result res;
  Table t{{"n", "q1", "log_n", "log_q1"}, {}};
  json rows = json::array();
  for (const auto& [n, v] : pts) {
    rows.push_back(json{{"n", n}, {"q1", v}});
    t.rows.push_back({num(n), num(v), num(std::log(n)), num(std::log(v))});
  }
  res.payload = json{{"points", rows}};
  if (!pts.empty()) {
    const auto f = mc::fit_exponent(pts);
    res.payload["slope"] = f.slope;
    res.payload["intercept"] = f.intercept;
    res.payload["r2"] = f.r_squared;
    t.rows.push_back({"slope", num(f.slope)});
    t.rows.push_back({"intercept", num(f.intercept)});
    t.rows.push_back({"r2", num(f.r_squared)});
  }
  res.table = t;
  return res;
}

// ---------------------------------------------------------------- verify

struct VerifyArgs {
  std::vector<std::string> suites{"all"};
  verify::VerifyOptions options;
};

inline Result cmd_verify(const VerifyArgs& a, const Globals& g) {
  auto opts = a.options;
  if (g.seed) opts.seed = *g.seed;
  std::vector<std::string> names;
  for (const auto& s : a.suites) {
    if (s == "all") {
      names.insert(names.end(), verify::suite_names().begin(), verify::suite_names().end());
    } else {
      std::string norm = s;
      std::replace(norm.begin(), norm.end(), '-', '_');
      names.push_back(norm);
    }
  }
  Result res;
  json suites = json::array();
  Table t{{"suite", "cases_run", "failures"}, {}};
  bool ok = true;
  for (const auto& name : names) {
    const auto r = verify::run_suite(name, opts);
    ok = ok && r.passed();
    suites.push_back(io::to_json(r));
    t.rows.push_back({r.suite, std::to_string(r.cases_run), std::to_string(r.failures.size())});
  }
  res.payload = json{{"seed", opts.seed}, {"suites", suites}, {"passed", ok}};
  res.table = t;
  res.exit_code = ok ? kOk : kVerifyFailed;
  return res;
}

// ---------------------------------------------------------------- driver

/// Arguments minus the output path, kept in reports for replay.
inline std::vector<std::string> replay_args(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out") {
      ++i;
      continue;
    }
    if (args[i].rfind("--out=", 0) == 0) continue;
    out.push_back(args[i]);
  }
  return out;
}

inline void emit(const Result& r, const Globals& g, const std::string& command, const std::vector<std::string>& args,
                 std::ostream& out) {
  std::string text;
  if (g.format == "json") {
    json manifest{{"command", command},
                  {"inputs", json{{"argv", replay_args(args)}}},
                  {"output_path", g.out.empty() ? json(nullptr) : json(g.out)},
                  {"created_at", timestamp()},
                  {"tool_version", kToolVersion}};
    json report{{"manifest", manifest},
                {"tool_version", kToolVersion},
                {"generator_version", kGeneratorVersion},
                {"result", r.payload}};
    text = report.dump(2) + "\n";
  } else if (g.format == "csv") {
    text = r.table ? csv_text(*r.table) : std::string();
  } else if (g.format == "txt") {
    if (!r.text) throw ConfigError("--format txt is only available for gen");
    text = *r.text;
  } else {
    throw ConfigError("unknown format '" + g.format + "'");
  }
  if (g.out.empty()) {
    out << text;
  } else {
    write_atomic(g.out, text);
  }
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr);

/// Re-run the command recorded in a JSON report and compare result payloads.
inline int cmd_replay(const std::string& report_path, const std::string& out_path, std::ostream& out,
                      std::ostream& err) {
  const json old = io::parse_json(io::read_file(report_path), report_path);
  std::vector<std::string> argv;
  try {
    argv = old.at("manifest").at("inputs").at("argv").get<std::vector<std::string>>();
  } catch (const json::exception&) {
    throw ConfigError(report_path + ": no replayable manifest");
  }
  namespace fs = std::filesystem;
  const std::string target =
      out_path.empty() ? (fs::temp_directory_path() / ("rlab-replay-" + std::to_string(::getpid()) + ".json")).string()
                       : out_path;
  argv.push_back("--out");
  argv.push_back(target);
  std::ostringstream sink;
  const int code = run(argv, sink, err);
  if (code != kOk && code != kVerifyFailed) return code;
  const json fresh = io::parse_json(io::read_file(target), target);
  if (out_path.empty()) fs::remove(target);
  const bool same = fresh.value("result", json()) == old.value("result", json()) &&
                    fresh.value("tool_version", "") == old.value("tool_version", "");
  out << (same ? "identical" : "differs") << "\n";
  return same ? kOk : kVerifyFailed;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rademacher walk laboratory: exact laws, bounds and Monte Carlo", "rlab"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--out", g.out, "Output file (default: standard output)");
  app.add_option("--threads", g.threads, "Worker threads for Monte Carlo (0 = all cores)");
  app.add_option("--seed", g.seed, "Seed override (verify suites, mc master seed)");
  app.add_flag("--exact", g.exact, "Exact rational probabilities (dist)");
  app.add_option("--format", g.format, "Output format: json, csv (gen also: txt)");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a step sequence; logarithms are natural");
  gen_cmd->add_option("--spec", gen.spec_path, "JSON sequence spec");
  gen_cmd->add_option("--family", gen.family, "Family name instead of a spec file");
  gen_cmd->add_option("--alpha", gen.alpha, "Exponent for power and log_power");
  gen_cmd->add_option("--value", gen.value, "Step for the constant family");
  gen_cmd->add_flag("--floor", gen.floor_values, "Floor the generated values");
  gen_cmd->add_option("--n", gen.n, "Prefix length")->required()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--check-ints", gen.check_ints, "Check the integer transience conditions at these n");
  gen_cmd->add_option("--check-ints-from", gen.check_ints_from, "Check them at every n from here to the largest value");
  gen_cmd->add_option("--sparse-epsilon", gen.sparse_epsilon, "Check the sparse-value witness condition");

  DistArgs dst;
  auto* dist_cmd = app.add_subcommand("dist", "Exact law of X_n and Q_r");
  dist_cmd->add_option("--seq", dst.seq_path, "Sequence file (values or JSON spec)")->required();
  dist_cmd->add_option("--n", dst.n, "Number of steps");
  dist_cmd->add_option("--q", dst.q, "Window width r for Q_r");
  dist_cmd->add_option("--mod", dst.mod, "Residue law modulo m instead");
  dist_cmd->add_option("--method", dst.method, "Residue method: direct or spectral");

  BoundsArgs bnd;
  auto* bounds_cmd = app.add_subcommand("bounds", "Evaluate a bound against the exact quantity");
  bounds_cmd->add_option("--check", bnd.check,
                         "elo, modular-elo, cosine-product, lower-anti, lower-anti-floor, hoeffding, paley-zygmund, "
                         "local-clt, kochen-stone, transience, combine-scales");
  bounds_cmd->add_flag("--exponent", bnd.exponent, "Evaluate f(alpha, delta) and the exponent");
  bounds_cmd->add_option("--seq", bnd.seq_path, "Sequence file");
  bounds_cmd->add_option("--seq-b", bnd.seq_b_path, "Second sequence (combine-scales)");
  bounds_cmd->add_option("--n", bnd.n, "Number of steps");
  bounds_cmd->add_option("--n-b", bnd.n_b, "Steps of the second sequence (default: --n for specs, whole file)");
  bounds_cmd->add_option("--m", bnd.m, "Modulus");
  for (auto [flag, slot] : std::initializer_list<std::pair<const char*, std::optional<double>*>>{
           {"--t", &bnd.t}, {"--x", &bnd.x}, {"--alpha", &bnd.alpha}, {"--delta", &bnd.delta},
           {"--gamma", &bnd.gamma}, {"--mean", &bnd.mean}, {"--second", &bnd.second}, {"--C", &bnd.c},
           {"--r", &bnd.r}, {"--s", &bnd.s}, {"--variance", &bnd.variance}}) {
    bounds_cmd->add_option(flag, *slot);
  }

  std::string manifest_path;
  auto* mc_cmd = app.add_subcommand("mc", "Run a Monte Carlo manifest");
  mc_cmd->add_option("--manifest", manifest_path, "Manifest JSON")->required();

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Log-log fit of exact Q_1 decay");
  fit_cmd->add_option("--seq", fit.seq_path, "Sequence file");
  fit_cmd->add_option("--from", fit.from, "First n");
  fit_cmd->add_option("--to", fit.to, "Last n");
  fit_cmd->add_option("--points", fit.points_path, "CSV of n,value pairs instead");

  VerifyArgs ver;
  auto* verify_cmd = app.add_subcommand("verify", "Run verification suites");
  verify_cmd->add_option("--suite", ver.suites, "Suite name or 'all'");
  verify_cmd->add_option("--max-n", ver.options.max_n, "Largest walk length");
  verify_cmd->add_option("--cases", ver.options.cases_per_n, "Random cases per length");
  verify_cmd->add_option("--max-m", ver.options.max_modulus, "Largest modulus (modular_elo)");

  std::string replay_report;
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a JSON report's command and compare results");
  replay_cmd->add_option("--report", replay_report, "Report to replay")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (g.format != "json" && g.format != "csv" && g.format != "txt") {
      throw ConfigError("unknown format '" + g.format + "'");
    }
    if (replay_cmd->parsed()) return cmd_replay(replay_report, g.out, out, err);
    Result r;
    std::string command;
    if (gen_cmd->parsed()) {
      command = "gen";
      if (g.format == "json" && g.out.size() > 4 && g.out.ends_with(".txt")) g.format = "txt";
      r = cmd_gen(gen, g);
    } else if (dist_cmd->parsed()) {
      command = "dist";
      r = cmd_dist(dst, g);
    } else if (bounds_cmd->parsed()) {
      command = "bounds";
      r = cmd_bounds(bnd);
    } else if (mc_cmd->parsed()) {
      command = "mc";
      r = cmd_mc(manifest_path, g);
    } else if (fit_cmd->parsed()) {
      command = "fit";
      r = cmd_fit(fit);
    } else if (verify_cmd->parsed()) {
      command = "verify";
      r = cmd_verify(ver, g);
    }
    emit(r, g, command, args, out);
    return r.exit_code;
  } catch (const InfeasibleError& e) {
    err << "rlab: infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const ConfigError& e) {
    err << "rlab: " << e.what() << "\n";
    return kConfig;
  } catch (const DomainError& e) {
    err << "rlab: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    err << "rlab: " << e.what() << "\n";
    return kConfig;
  }
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args);
}

}  // namespace rlab::cli
