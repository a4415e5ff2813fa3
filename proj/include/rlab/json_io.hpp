#pragma once

// JSON forms of sequence specs, manifests and reports.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlab/bounds.hpp"
#include "rlab/coupling.hpp"
#include "rlab/error.hpp"
#include "rlab/exactdist.hpp"
#include "rlab/mc.hpp"
#include "rlab/seqgen.hpp"
#include "rlab/verify.hpp"

namespace rlab::io {

using json = nlohmann::ordered_json;

namespace detail {

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": field '" + key + "' is missing or has the wrong type");
  }
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown field '" + key + "'");
  }
}

}  // namespace detail

inline json to_json(const seq::GrowthFn& f) {
  using K = seq::GrowthFn::Kind;
  if (f.kind == K::table) return json{{"kind", "table"}, {"values", f.table}};
  const char* kind = f.kind == K::power ? "power" : f.kind == K::exponential ? "exponential" : "logarithmic";
  return json{{"kind", kind}, {"coef", f.coef}, {"exponent", f.exponent}, {"offset", f.offset}};
}

inline seq::GrowthFn growth_from_json(const json& j) {
  seq::GrowthFn f;
  if (j.is_array()) {
    f.kind = seq::GrowthFn::Kind::table;
    f.table = j.get<std::vector<double>>();
    return f;
  }
  if (!j.is_object()) throw ConfigError("growth_fn must be an object or an array of values");
  detail::reject_unknown(j, {"kind", "values", "coef", "exponent", "offset"}, "growth_fn");
  const auto kind = detail::get<std::string>(j, "kind", "growth_fn");
  if (kind == "table") {
    f.kind = seq::GrowthFn::Kind::table;
    f.table = detail::get<std::vector<double>>(j, "values", "growth_fn");
    return f;
  }
  if (kind == "power") f.kind = seq::GrowthFn::Kind::power;
  else if (kind == "exponential") f.kind = seq::GrowthFn::Kind::exponential;
  else if (kind == "logarithmic") f.kind = seq::GrowthFn::Kind::logarithmic;
  else throw ConfigError("growth_fn: unknown kind '" + kind + "'");
  f.coef = j.value("coef", 1.0);
  f.exponent = j.value("exponent", 1.0);
  f.offset = j.value("offset", 0.0);
  return f;
}

inline json to_json(const seq::StepSequenceSpec& s) {
  json j{{"family", seq::family_name(s.family)}};
  if (s.alpha) j["alpha"] = *s.alpha;
  if (s.floor_values) j["floor_values"] = true;
  if (s.growth_fn) j["growth_fn"] = to_json(*s.growth_fn);
  if (s.family == seq::Family::fast_block) {
    j["cover_confidence"] = s.cover_confidence;
    j["calibration"] = json{{"seed", s.calibration.seed},
                            {"samples", s.calibration.samples},
                            {"step_budget", s.calibration.step_budget}};
  }
  if (s.family == seq::Family::fast_increasing) j["first_block_length"] = s.first_block_length;
  if (s.family == seq::Family::custom) j["custom_values"] = s.custom_values;
  if (s.value) j["value"] = *s.value;
  return j;
}

inline seq::StepSequenceSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("sequence spec must be a JSON object");
  detail::reject_unknown(j,
                         {"family", "alpha", "floor_values", "growth_fn", "cover_confidence", "custom_values",
                          "value", "first_block_length", "calibration"},
                         "sequence spec");
  seq::StepSequenceSpec s;
  s.family = seq::family_from_name(detail::get<std::string>(j, "family", "sequence spec"));
  try {
    if (j.contains("alpha")) s.alpha = j.at("alpha").get<double>();
    s.floor_values = j.value("floor_values", false);
    if (j.contains("growth_fn")) s.growth_fn = growth_from_json(j.at("growth_fn"));
    s.cover_confidence = j.value("cover_confidence", 0.5);
    if (j.contains("custom_values")) s.custom_values = j.at("custom_values").get<std::vector<double>>();
    if (j.contains("value")) s.value = j.at("value").get<double>();
    s.first_block_length = j.value("first_block_length", std::uint64_t{4});
    if (j.contains("calibration")) {
      const json& c = j.at("calibration");
      detail::reject_unknown(c, {"seed", "samples", "step_budget"}, "calibration");
      s.calibration.seed = c.value("seed", s.calibration.seed);
      s.calibration.samples = c.value("samples", s.calibration.samples);
      s.calibration.step_budget = c.value("step_budget", s.calibration.step_budget);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sequence spec: ") + e.what());
  }
  return s;
}

inline json to_json(const mc::McRunManifest& m) {
  return json{{"master_seed", m.master_seed},
              {"replicates", m.replicates},
              {"horizon", m.horizon},
              {"spec", to_json(m.spec)},
              {"experiment", mc::experiment_name(m.experiment)}};
}

inline mc::McRunManifest manifest_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("manifest must be a JSON object");
  detail::reject_unknown(j, {"master_seed", "replicates", "horizon", "spec", "experiment", "params"}, "manifest");
  mc::McRunManifest m;
  m.master_seed = detail::get<std::uint64_t>(j, "master_seed", "manifest");
  m.replicates = detail::get<std::uint64_t>(j, "replicates", "manifest");
  m.horizon = detail::get<std::uint64_t>(j, "horizon", "manifest");
  if (m.replicates == 0) throw ConfigError("manifest: replicates must be positive");
  if (m.horizon == 0) throw ConfigError("manifest: horizon must be positive");
  if (!j.contains("spec")) throw ConfigError("manifest: field 'spec' is missing");
  m.spec = spec_from_json(j.at("spec"));
  m.experiment = mc::experiment_from_name(detail::get<std::string>(j, "experiment", "manifest"));
  return m;
}

inline json to_json(const bounds::BoundReport& r) {
  json params = json::object();
  for (const auto& [k, v] : r.params) params[k] = v;
  json j{{"bound_name", r.bound_name}, {"params", params}, {"bound_value", r.bound_value},
         {"clamped_bound", r.clamped_bound}};
  j["compared_value"] = r.compared_value ? json(*r.compared_value) : json(nullptr);
  j["satisfied"] = r.satisfied ? json(*r.satisfied) : json(nullptr);
  j["slack"] = r.slack ? json(*r.slack) : json(nullptr);
  return j;
}

inline json to_json(const mc::RecurrenceStats& s) {
  json events = json::array();
  for (const auto& [k, e] : s.per_event) {
    events.push_back(json{{"k", k},
                          {"start", s.windows[static_cast<std::size_t>(k - 1)].start},
                          {"end", s.windows[static_cast<std::size_t>(k - 1)].end},
                          {"hits", e.hits},
                          {"replicates", e.replicates},
                          {"p_hat", e.p_hat},
                          {"wilson_lo", e.wilson_lo},
                          {"wilson_hi", e.wilson_hi}});
  }
  json joint = json::array();
  for (const auto& [jk, both] : s.joint) joint.push_back(json{{"j", jk.first}, {"k", jk.second}, {"hits", both}});
  return json{{"replicates", s.replicates}, {"confidence", s.confidence}, {"per_event", events}, {"joint", joint}};
}

inline json to_json(const verify::VerifySuiteResult& r) {
  json constants = json::object();
  for (const auto& [k, v] : r.empirical_constants) constants[k] = v;
  return json{{"suite", r.suite}, {"cases_run", r.cases_run}, {"failures", r.failures},
              {"empirical_constants", constants}};
}

inline json to_json(const coupling::Episode& e) {
  return json{{"n", e.n.str()},
              {"m", e.sign_m == 0 ? json(nullptr) : json(e.m.str())},
              {"delta", static_cast<double>(e.delta)},
              {"x", static_cast<double>(e.x)},
              {"d_before", static_cast<double>(e.d_before)},
              {"d_after", static_cast<double>(e.d_after)},
              {"sign_n", e.sign_n},
              {"sign_m", e.sign_m},
              {"won", e.won}};
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": invalid JSON (" + e.what() + ")");
  }
}

}  // namespace rlab::io
