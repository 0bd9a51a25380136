// coordctl: validate instances, run scenarios and sweeps, solve a checkpoint.
//
// Exit codes: 0 success, 1 domain failure (violations, infeasible),
// 2 parse or usage error, 3 internal abort.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "coord/csv.hpp"
#include "coord/instance_io.hpp"
#include "coord/scenario.hpp"
#include "coord/simulator.hpp"

namespace fs = std::filesystem;
using namespace coord;

namespace {

enum Exit { kOk = 0, kDomain = 1, kUsage = 2, kAbort = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Overrides {
  std::string scenario;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<long> node_limit;
  std::optional<long> time_limit_ms;
  std::optional<Slot> checkpoint_period;
  std::optional<double> lambda;
  std::optional<int> load;
};

void add_override_flags(CLI::App* cmd, Overrides& o, bool with_scenario_required) {
  auto* s = cmd->add_option("--scenario", o.scenario, "scenario JSON file");
  if (with_scenario_required) s->required();
  cmd->add_option("--mode", o.mode, "SINGLE or RHC");
  cmd->add_option("--node-limit", o.node_limit, "solver node limit per checkpoint");
  cmd->add_option("--time-limit-ms", o.time_limit_ms, "solver wall-time limit per checkpoint");
  cmd->add_option("--checkpoint-period", o.checkpoint_period, "slots between RHC checkpoints");
  cmd->add_option("--lambda", o.lambda, "weight of the affinity term");
}

Scenario resolve(const Overrides& o) {
  Scenario s = o.scenario.empty() ? Scenario{} : load_scenario(o.scenario);
  if (o.mode) {
    auto m = parse_mode(*o.mode);
    if (!m) throw UsageError("--mode must be SINGLE or RHC");
    s.mode = *m;
  }
  if (o.seed) s.seed = *o.seed;
  if (o.node_limit) s.solver.node_limit = *o.node_limit;
  if (o.time_limit_ms) s.solver.time_limit_ms = *o.time_limit_ms;
  if (o.checkpoint_period) s.control.checkpoint_period = *o.checkpoint_period;
  if (o.lambda) s.solver.lambda = *o.lambda;
  if (o.load) s.workload.n_deliverables = *o.load;
  if (!s.solver.valid() || !s.control.valid() || !s.workload.valid())
    throw UsageError("configuration values out of range");
  return s;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      long long v = std::stoll(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<T>(v));
    } catch (const std::exception&) {
      throw UsageError(std::string("bad ") + what + " entry '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError(std::string("empty ") + what + " list");
  return out;
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

int cmd_validate(const std::string& path) {
  Instance inst = load_instance(path);
  auto violations = validate_instance(inst);
  for (const auto& v : violations)
    std::cout << v.constraint << '\t' << v.entity << (v.detail.empty() ? "" : "\t" + v.detail) << '\n';
  if (violations.empty()) std::cout << "ok\n";
  return violations.empty() ? kOk : kDomain;
}

int cmd_run(const Overrides& o, const std::string& out_dir) {
  Scenario s = resolve(o);
  Workload w = generate_workload(s.workload_for_seed());
  RunResult r = run_scenario(w, s.run_config());
  RunRow row{s.workload.n_deliverables, s.mode, s.seed, r.metrics};
  fs::path out = prepare_out(out_dir);
  csv::write_file_atomic(out / "runs.csv", csv::runs_table({row}));
  csv::write_file_atomic(out / "events.csv", csv::events_table(r.log));
  std::cout << "tardy_pct " << csv::real(r.metrics.tardy_pct) << '\n'
            << "utilization_pct " << csv::real(r.metrics.utilization_pct) << '\n';
  return kOk;
}

int cmd_sweep(const Overrides& o, const std::optional<std::string>& loads,
              const std::optional<std::string>& seeds, const std::string& out_dir, unsigned threads) {
  Scenario s = resolve(o);
  SweepSpec spec;
  spec.workload = s.workload;
  spec.run = s.run_config();
  spec.loads = loads ? parse_list<int>(*loads, "loads") : std::vector<int>{10, 20, 30, 40, 50, 60, 70, 80, 90};
  spec.seeds = seeds ? parse_list<std::uint64_t>(*seeds, "seeds") : std::vector<std::uint64_t>{s.seed};
  if (o.mode) spec.modes = {s.mode};
  spec.threads = threads;
  SweepResult res = compare_experiment(spec);
  fs::path out = prepare_out(out_dir);
  json cfg = to_json(s);
  cfg["loads"] = spec.loads;
  cfg["seeds"] = spec.seeds;
  json modes = json::array();
  for (Mode m : spec.modes) modes.push_back(std::string(to_string(m)));
  cfg["modes"] = modes;
  csv::write_file_atomic(out / "config.json", cfg.dump(2) + "\n");
  csv::write_file_atomic(out / "runs.csv", csv::runs_table(res.runs));
  csv::write_file_atomic(out / "sweep.csv", csv::sweep_table(res.rows));
  std::cout << csv::sweep_table(res.rows);
  return kOk;
}

int cmd_checkpoint(const std::string& path, const Overrides& o, std::optional<Slot> horizon,
                   std::optional<Slot> release, bool allow_dummy, const std::optional<std::string>& out) {
  Scenario s = resolve(o);
  Instance inst = load_instance(path);
  auto violations = validate_instance(inst);
  if (!violations.empty()) {
    for (const auto& v : violations) std::cout << v.constraint << '\t' << v.entity << '\n';
    return kDomain;
  }
  SolverConfig cfg = s.solver;
  if (allow_dummy) cfg.allow_dummy = true;
  if (release) cfg.release_slot = *release;
  if (horizon) {
    cfg.horizon_T = *horizon;
  } else if (!inst.resources.empty()) {
    cfg.horizon_T = 0;
    for (const auto& r : inst.resources) cfg.horizon_T = std::max(cfg.horizon_T, r.calendar.horizon());
  }
  if (!cfg.valid()) throw UsageError("solver configuration out of range");
  auto sigma = build_affinity_matrix(inst.packets, inst.resources, s.affinity);
  CheckpointResult r = solve_checkpoint(inst, sigma, {}, cfg);
  std::cout << "status " << to_string(r.status) << '\n';
  if (r.status == SolveStatus::infeasible) return kDomain;
  std::ostringstream j;
  j << std::setprecision(12) << r.objective;
  std::cout << "objective " << j.str() << '\n' << "dummy_hours_used " << r.dummy_hours_used << '\n';
  json sched = to_json(r.schedule);
  sched["status"] = std::string(to_string(r.status));
  sched["objective"] = r.objective;
  sched["dummy_hours_used"] = r.dummy_hours_used;
  if (out) {
    fs::path p(*out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    csv::write_file_atomic(p, sched.dump(2) + "\n");
  } else {
    std::cout << sched.dump(2) << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Receding-horizon coordination of work packets"};
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "check an instance file");
  validate->add_option("instance", validate_path, "instance JSON")->required();

  Overrides run_o;
  std::string run_out = ".";
  auto* run = app.add_subcommand("run", "simulate one scenario");
  add_override_flags(run, run_o, true);
  run->add_option("--seed", run_o.seed, "workload seed");
  run->add_option("--load", run_o.load, "number of deliverables");
  run->add_option("--out", run_out, "output directory");

  Overrides sweep_o;
  std::string sweep_out = ".";
  std::optional<std::string> loads, seeds;
  unsigned threads = 0;
  auto* sweep = app.add_subcommand("sweep", "load x mode x seed experiment");
  add_override_flags(sweep, sweep_o, true);
  sweep->add_option("--loads", loads, "comma-separated deliverable counts");
  sweep->add_option("--seeds", seeds, "comma-separated seeds");
  sweep->add_option("--seed", sweep_o.seed, "single seed when --seeds is absent");
  sweep->add_option("--out", sweep_out, "output directory");
  sweep->add_option("--threads", threads, "worker threads (0: all cores)");

  Overrides cp_o;
  std::string cp_path;
  std::optional<Slot> horizon, release;
  std::optional<std::string> cp_out;
  bool allow_dummy = false;
  auto* checkpoint = app.add_subcommand("checkpoint", "solve one scheduling checkpoint");
  checkpoint->add_option("instance", cp_path, "instance JSON")->required();
  add_override_flags(checkpoint, cp_o, false);
  checkpoint->add_option("--horizon", horizon, "planning horizon (default: longest calendar)");
  checkpoint->add_option("--release", release, "earliest start slot");
  checkpoint->add_flag("--allow-dummy", allow_dummy, "open dummy resources if needed");
  checkpoint->add_option("--out", cp_out, "write the schedule JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*validate) return cmd_validate(validate_path);
    if (*run) return cmd_run(run_o, run_out);
    if (*sweep) return cmd_sweep(sweep_o, loads, seeds, sweep_out, threads);
    if (*checkpoint) return cmd_checkpoint(cp_path, cp_o, horizon, release, allow_dummy, cp_out);
  } catch (const UsageError& e) {
    std::cerr << "usage: " << e.what() << '\n';
    return kUsage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kUsage;
  } catch (const UnknownIdentifier& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "abort: " << e.what() << '\n';
    return kAbort;
  }
  return kUsage;
}
