#pragma once

// Scenario files: one JSON object with optional sections
//   workload, solver, control, affinity, mode, seed
// Every key is optional (defaults apply) but unknown keys are errors.

#include <cstdint>
#include <string>

#include "coord/affinity.hpp"
#include "coord/cp_scheduler.hpp"
#include "coord/instance_io.hpp"
#include "coord/rhc.hpp"
#include "coord/simulator.hpp"

namespace coord {

struct Scenario {
  WorkloadConfig workload;
  SolverConfig solver;
  ControlConfig control;
  AffinityConfig affinity;
  Mode mode = Mode::rhc;
  std::uint64_t seed = 1;

  RunConfig run_config() const {
    RunConfig rc;
    rc.mode = mode;
    rc.affinity = affinity;
    rc.solver = solver;
    rc.control = control;
    return rc;
  }

  WorkloadConfig workload_for_seed() const {
    WorkloadConfig w = workload;
    w.seed = seed;
    return w;
  }
};

namespace io {

template <class T>
void read_opt(const json& obj, const char* key, T& field, const std::string& where) {
  if (obj.contains(key)) field = get<T>(obj, key, where);
}

}  // namespace io

inline Scenario scenario_from_json(const json& j) {
  using namespace io;
  reject_unknown_keys(j, {"workload", "solver", "control", "affinity", "mode", "seed"}, "scenario");
  Scenario s;
  if (j.contains("workload")) {
    const json& w = j.at("workload");
    const std::string where = "scenario.workload";
    reject_unknown_keys(w,
                        {"n_resources", "n_deliverables", "mean_packets_per_deliverable", "effort_low",
                         "effort_high", "dependency_density", "n_roles", "n_locations", "n_skills",
                         "n_optional_values", "span_slots", "arrival_fraction", "slack_factor",
                         "max_priority", "holiday_prob", "effort_noise", "brownout_rate", "brownout_min",
                         "brownout_max", "horizon_slots"},
                        where);
    auto& c = s.workload;
    read_opt(w, "n_resources", c.n_resources, where);
    read_opt(w, "n_deliverables", c.n_deliverables, where);
    read_opt(w, "mean_packets_per_deliverable", c.mean_packets_per_deliverable, where);
    read_opt(w, "effort_low", c.effort_low, where);
    read_opt(w, "effort_high", c.effort_high, where);
    read_opt(w, "dependency_density", c.dependency_density, where);
    read_opt(w, "n_roles", c.n_roles, where);
    read_opt(w, "n_locations", c.n_locations, where);
    read_opt(w, "n_skills", c.n_skills, where);
    read_opt(w, "n_optional_values", c.n_optional_values, where);
    read_opt(w, "span_slots", c.span_slots, where);
    read_opt(w, "arrival_fraction", c.arrival_fraction, where);
    read_opt(w, "slack_factor", c.slack_factor, where);
    read_opt(w, "max_priority", c.max_priority, where);
    read_opt(w, "holiday_prob", c.holiday_prob, where);
    read_opt(w, "effort_noise", c.effort_noise, where);
    read_opt(w, "brownout_rate", c.brownout_rate, where);
    read_opt(w, "brownout_min", c.brownout_min, where);
    read_opt(w, "brownout_max", c.brownout_max, where);
    read_opt(w, "horizon_slots", c.horizon_slots, where);
    if (!c.valid()) throw ParseError(where + ": invalid values");
  }
  if (j.contains("solver")) {
    const json& v = j.at("solver");
    const std::string where = "scenario.solver";
    reject_unknown_keys(v,
                        {"horizon_T", "lambda", "priority_base", "node_limit", "time_limit_ms",
                         "allow_dummy", "stability_window_W"},
                        where);
    auto& c = s.solver;
    read_opt(v, "horizon_T", c.horizon_T, where);
    read_opt(v, "lambda", c.lambda, where);
    read_opt(v, "priority_base", c.priority_base, where);
    read_opt(v, "node_limit", c.node_limit, where);
    read_opt(v, "time_limit_ms", c.time_limit_ms, where);
    read_opt(v, "allow_dummy", c.allow_dummy, where);
    read_opt(v, "stability_window_W", c.stability_window_W, where);
    if (!c.valid()) throw ParseError(where + ": invalid values");
  }
  if (j.contains("control")) {
    const json& v = j.at("control");
    const std::string where = "scenario.control";
    reject_unknown_keys(v, {"checkpoint_period", "lookahead_K", "horizon_T", "epsilon_sigma"}, where);
    auto& c = s.control;
    read_opt(v, "checkpoint_period", c.checkpoint_period, where);
    read_opt(v, "lookahead_K", c.lookahead_K, where);
    read_opt(v, "horizon_T", c.horizon_T, where);
    read_opt(v, "epsilon_sigma", c.epsilon_sigma, where);
    if (!c.valid()) throw ParseError(where + ": invalid values");
  }
  if (j.contains("affinity")) {
    const json& v = j.at("affinity");
    const std::string where = "scenario.affinity";
    reject_unknown_keys(v, {"base_weight", "optional_weights", "dummy_score"}, where);
    auto& c = s.affinity;
    read_opt(v, "base_weight", c.base_weight, where);
    read_opt(v, "dummy_score", c.dummy_score, where);
    if (v.contains("optional_weights")) {
      const json& ow = v.at("optional_weights");
      if (!ow.is_object()) throw ParseError(where + ".optional_weights: expected an object");
      for (const auto& [k, w] : ow.items()) {
        auto kind = parse_attr_kind(k);
        if (!kind || *kind == AttrKind::role || *kind == AttrKind::location)
          throw ParseError(where + ".optional_weights: unknown optional kind '" + k + "'");
        if (!w.is_number()) throw ParseError(where + ".optional_weights." + k + ": expected a number");
        c.optional_weights[*kind] = w.get<double>();
      }
    }
    if (!c.valid()) throw ParseError(where + ": invalid values");
  }
  if (j.contains("mode")) {
    auto m = parse_mode(get<std::string>(j, "mode", "scenario"));
    if (!m) throw ParseError("scenario.mode: expected SINGLE or RHC");
    s.mode = *m;
  }
  read_opt(j, "seed", s.seed, "scenario");
  return s;
}

inline json to_json(const Scenario& s) {
  const auto& w = s.workload;
  json ow = json::object();
  for (const auto& [k, v] : s.affinity.optional_weights) ow[std::string(to_string(k))] = v;
  return {
      {"workload",
       {{"n_resources", w.n_resources},
        {"n_deliverables", w.n_deliverables},
        {"mean_packets_per_deliverable", w.mean_packets_per_deliverable},
        {"effort_low", w.effort_low},
        {"effort_high", w.effort_high},
        {"dependency_density", w.dependency_density},
        {"n_roles", w.n_roles},
        {"n_locations", w.n_locations},
        {"n_skills", w.n_skills},
        {"n_optional_values", w.n_optional_values},
        {"span_slots", w.span_slots},
        {"arrival_fraction", w.arrival_fraction},
        {"slack_factor", w.slack_factor},
        {"max_priority", w.max_priority},
        {"holiday_prob", w.holiday_prob},
        {"effort_noise", w.effort_noise},
        {"brownout_rate", w.brownout_rate},
        {"brownout_min", w.brownout_min},
        {"brownout_max", w.brownout_max},
        {"horizon_slots", w.horizon_slots}}},
      {"solver",
       {{"horizon_T", s.solver.horizon_T},
        {"lambda", s.solver.lambda},
        {"priority_base", s.solver.priority_base},
        {"node_limit", s.solver.node_limit},
        {"time_limit_ms", s.solver.time_limit_ms},
        {"allow_dummy", s.solver.allow_dummy},
        {"stability_window_W", s.solver.stability_window_W}}},
      {"control",
       {{"checkpoint_period", s.control.checkpoint_period},
        {"lookahead_K", s.control.lookahead_K},
        {"horizon_T", s.control.horizon_T},
        {"epsilon_sigma", s.control.epsilon_sigma}}},
      {"affinity",
       {{"base_weight", s.affinity.base_weight},
        {"optional_weights", ow},
        {"dummy_score", s.affinity.dummy_score}}},
      {"mode", std::string(to_string(s.mode))},
      {"seed", s.seed}};
}

inline Scenario load_scenario(const std::string& path) {
  try {
    return scenario_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace coord
