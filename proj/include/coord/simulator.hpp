#pragma once

// Event-driven simulation of a work system under SINGLE or RHC coordination.
//
// The world steps one slot at a time. At slot t it delivers every event due
// at t to the controller, lets the controller start packets, then executes
// one hour of work on every busy resource that is available at t. Completion
// and estimate-revision events produced by that hour are due at t + 1.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <future>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "coord/affinity.hpp"
#include "coord/cp_scheduler.hpp"
#include "coord/domain.hpp"
#include "coord/rhc.hpp"

namespace coord {

struct WorkloadConfig {
  int n_resources = 25;
  int n_deliverables = 30;
  double mean_packets_per_deliverable = 12;  // counts drawn from [mean/2, 3*mean/2]
  int effort_low = 4;
  int effort_high = 40;
  double dependency_density = 0.5;  // P(consecutive packets linked finish-to-start)
  int n_roles = 3;
  int n_locations = 2;
  int n_skills = 6;
  int n_optional_values = 4;  // catalog size per project/application/tool/account kind
  Slot span_slots = 1000;
  double arrival_fraction = 0.25;
  double slack_factor = 1.5;
  int max_priority = 3;
  double holiday_prob = 0.02;  // per resource and 8-slot day
  double effort_noise = 0.0;   // lognormal sigma of actual/estimated effort
  double brownout_rate = 0.0;  // expected brownouts per resource within the span
  Slot brownout_min = 8;
  Slot brownout_max = 40;
  Slot horizon_slots = 0;  // 0: derived from span and total effort
  std::uint64_t seed = 1;

  bool valid() const {
    return n_resources > 0 && n_deliverables >= 0 && mean_packets_per_deliverable >= 1 &&
           effort_low >= 1 && effort_high >= effort_low && dependency_density >= 0 &&
           dependency_density <= 1 && n_roles > 0 && n_locations > 0 && n_skills > 0 &&
           n_optional_values > 0 && span_slots > 0 && arrival_fraction >= 0 && arrival_fraction <= 1 &&
           slack_factor >= 1 && max_priority >= 1 && holiday_prob >= 0 && holiday_prob < 1 &&
           effort_noise >= 0 && brownout_rate >= 0 && brownout_min >= 1 &&
           brownout_max >= brownout_min && horizon_slots >= 0;
  }
};

struct Workload {
  Instance instance;
  std::vector<Event> events;         // arrivals and brownouts, sorted
  std::vector<Slot> preferred_end;   // per deliverable
  std::vector<int> actual_effort;    // per packet
  Slot span = 0;                     // measurement window for utilization
  Slot horizon = 0;
};

inline constexpr Slot kSlotsPerDay = 8;

namespace detail {

inline std::string padded(const char* prefix, int n, int width) {
  std::string s = std::to_string(n);
  if (static_cast<int>(s.size()) < width) s.insert(0, width - s.size(), '0');
  return prefix + s;
}

inline int digits(int n) { return n < 10 ? 1 : 1 + digits(n / 10); }

}  // namespace detail

// Longest effort-weighted chain per deliverable using estimates.
inline std::vector<Slot> critical_path_effort(const Instance& inst) {
  InstanceIndex idx(inst);
  std::vector<Slot> longest(inst.packets.size(), -1);
  std::function<Slot(int)> visit = [&](int i) -> Slot {
    if (longest[i] >= 0) return longest[i];
    Slot best = 0;
    for (const auto& e : idx.preds(i)) best = std::max(best, visit(e.packet));
    return longest[i] = best + inst.packets[i].effort_hours;
  };
  std::vector<Slot> out(inst.deliverables.size(), 0);
  for (std::size_t i = 0; i < inst.packets.size(); ++i) {
    int k = idx.deliverable_of(static_cast<int>(i));
    out[k] = std::max(out[k], visit(static_cast<int>(i)));
  }
  return out;
}

inline Workload generate_workload(const WorkloadConfig& cfg) {
  if (!cfg.valid()) throw std::invalid_argument("invalid workload config");
  std::mt19937_64 rng(cfg.seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto chance = [&](double p) { return std::bernoulli_distribution(p)(rng); };
  const AttrKind optional_kinds[] = {AttrKind::project, AttrKind::application, AttrKind::tool,
                                     AttrKind::account};
  auto value = [](const char* stem, int v) { return std::string(stem) + std::to_string(v); };

  Workload w;
  Instance& inst = w.instance;
  const int rw = detail::digits(cfg.n_resources);
  for (int j = 0; j < cfg.n_resources; ++j) {
    Resource r;
    r.id = detail::padded("r", j + 1, rw);
    r.attrs.insert({value("role", uniform(1, cfg.n_roles)), AttrKind::role});
    r.attrs.insert({value("site", uniform(1, cfg.n_locations)), AttrKind::location});
    for (int s = 0; s < 2; ++s) r.attrs.insert({value("skill", uniform(1, cfg.n_skills)), AttrKind::skill});
    for (AttrKind k : optional_kinds)
      for (int s = 0; s < 2; ++s)
        r.attrs.insert({std::string(to_string(k)) + std::to_string(uniform(1, cfg.n_optional_values)), k});
    inst.resources.push_back(std::move(r));
  }

  const int lo_count = std::max(1, static_cast<int>(std::lround(cfg.mean_packets_per_deliverable / 2)));
  const int hi_count = std::max(lo_count, static_cast<int>(std::lround(cfg.mean_packets_per_deliverable * 1.5)));
  const Slot ramp = static_cast<Slot>(std::floor(cfg.span_slots * cfg.arrival_fraction));
  const int dw = detail::digits(std::max(cfg.n_deliverables, 1));
  std::lognormal_distribution<double> noise(-cfg.effort_noise * cfg.effort_noise / 2, cfg.effort_noise);
  long total_effort = 0;
  for (int k = 0; k < cfg.n_deliverables; ++k) {
    Deliverable d;
    d.id = detail::padded("d", k + 1, dw);
    d.input_start = ramp > 0 ? std::uniform_int_distribution<Slot>(0, ramp - 1)(rng) : 0;
    d.priority = uniform(1, cfg.max_priority);
    const int count = uniform(lo_count, hi_count);
    for (int m = 0; m < count; ++m) {
      WorkPacket p;
      p.id = d.id + "." + detail::padded("p", m + 1, 2);
      p.deliverable_id = d.id;
      p.effort_hours = uniform(cfg.effort_low, cfg.effort_high);
      p.arrival_slot = d.input_start;
      // Role and location come from a real worker, so someone can always do it.
      const auto& proto = inst.resources[uniform(0, cfg.n_resources - 1)];
      for (const auto& a : proto.attrs)
        if (a.kind == AttrKind::role || a.kind == AttrKind::location) p.mandatory_attrs.insert(a);
      p.optional_attrs.insert({value("skill", uniform(1, cfg.n_skills)), AttrKind::skill});
      for (AttrKind kind : optional_kinds)
        if (chance(0.5))
          p.optional_attrs.insert({std::string(to_string(kind)) + std::to_string(uniform(1, cfg.n_optional_values)), kind});
      if (m > 0 && chance(cfg.dependency_density))
        inst.dependencies.push_back({d.packet_ids.back(), p.id, DependencyKind::finish_to_start});
      const double mult = cfg.effort_noise > 0 ? noise(rng) : 1.0;
      w.actual_effort.push_back(std::max(1, static_cast<int>(std::lround(p.effort_hours * mult))));
      total_effort += p.effort_hours;
      d.packet_ids.push_back(p.id);
      inst.packets.push_back(std::move(p));
    }
    w.events.push_back({d.input_start, EventKind::arrival, d.id, 0, 0});
    inst.deliverables.push_back(std::move(d));
  }

  w.span = cfg.span_slots;
  w.horizon = cfg.horizon_slots > 0
                  ? cfg.horizon_slots
                  : 4 * cfg.span_slots + 4 * (total_effort / cfg.n_resources + cfg.effort_high);
  for (auto& r : inst.resources) {
    r.calendar = Calendar(w.horizon);
    for (Slot day = 0; day * kSlotsPerDay < w.horizon; ++day)
      if (cfg.holiday_prob > 0 && chance(cfg.holiday_prob))
        r.calendar.block(day * kSlotsPerDay, std::min(w.horizon, (day + 1) * kSlotsPerDay));
  }
  if (cfg.brownout_rate > 0) {
    std::poisson_distribution<int> count(cfg.brownout_rate);
    for (const auto& r : inst.resources) {
      for (int b = count(rng); b > 0; --b) {
        Slot at = std::uniform_int_distribution<Slot>(1, cfg.span_slots - 1)(rng);
        Slot len = std::uniform_int_distribution<Slot>(cfg.brownout_min, cfg.brownout_max)(rng);
        w.events.push_back({at, EventKind::brownout, r.id, 0, std::min(w.horizon, at + len)});
      }
    }
  }
  std::sort(w.events.begin(), w.events.end());

  const auto cp = critical_path_effort(inst);
  for (std::size_t k = 0; k < inst.deliverables.size(); ++k)
    w.preferred_end.push_back(inst.deliverables[k].input_start +
                              static_cast<Slot>(std::ceil(cfg.slack_factor * static_cast<double>(cp[k]))));
  return w;
}

struct RunMetrics {
  double tardy_pct = 0;
  double utilization_pct = 0;
  double long_run_avg_cost = 0;
  long dummy_hours = 0;
  double max_resource_util_pct = 0;
  bool saturated = false;  // some resource above 95% utilization
  Slot makespan = 0;
};

struct RunConfig {
  Mode mode = Mode::rhc;
  AffinityConfig affinity;
  SolverConfig solver;
  ControlConfig control;
  bool check_invariants = false;  // audit plans after every epoch
};

struct RunTrace {
  std::vector<Segment> history;
  std::vector<Assignment> starts;  // every dispatch, in order
  std::vector<CheckpointRecord> checkpoints;
  std::vector<long> busy_slots;    // per resource and whole run, counted by the world
  std::vector<std::string> audit;  // invariant breaches found when auditing
  std::size_t solves = 0;
};

struct RunResult {
  RunMetrics metrics;
  std::vector<LogRecord> log;
  RunTrace trace;
  Instance final_instance;  // calendars with brownouts applied
};

class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Utilization counts busy and available slots within [0, span); tardiness
// and makespan use the whole history.
inline RunMetrics compute_metrics(const Instance& inst, const std::vector<Segment>& history,
                                  const std::vector<Slot>& preferred_end,
                                  const std::vector<LogRecord>& log, Slot span) {
  RunMetrics m;
  InstanceIndex idx(inst);
  std::vector<Slot> finish(inst.deliverables.size(), -1);
  std::vector<long> busy(inst.resources.size(), 0);
  for (const auto& s : history) {
    m.makespan = std::max(m.makespan, s.end);
    int k = idx.deliverable_of(s.packet);
    finish[k] = std::max(finish[k], s.end);
    const auto& r = inst.resources[s.resource];
    if (s.start < span) busy[s.resource] += r.calendar.available_between(s.start, std::min(s.end, span));
    if (r.is_dummy) m.dummy_hours += r.calendar.available_between(s.start, s.end);
  }
  if (!inst.deliverables.empty()) {
    long tardy = 0;
    for (std::size_t k = 0; k < finish.size(); ++k) tardy += finish[k] > preferred_end.at(k);
    m.tardy_pct = 100.0 * static_cast<double>(tardy) / static_cast<double>(finish.size());
  }
  long total_busy = 0, total_avail = 0;
  for (std::size_t j = 0; j < inst.resources.size(); ++j) {
    const auto& r = inst.resources[j];
    if (r.is_dummy) continue;
    long avail = r.calendar.available_between(0, span);
    total_busy += busy[j];
    total_avail += avail;
    if (avail > 0) {
      double u = 100.0 * static_cast<double>(busy[j]) / static_cast<double>(avail);
      m.max_resource_util_pct = std::max(m.max_resource_util_pct, u);
    }
  }
  if (total_avail > 0) m.utilization_pct = 100.0 * static_cast<double>(total_busy) / static_cast<double>(total_avail);
  m.saturated = m.max_resource_util_pct > 95.0;
  m.long_run_avg_cost = log.empty() ? 0.0 : long_run_average_cost(log);
  return m;
}

namespace detail {

inline std::string span_of(const Assignment& a) {
  return a.packet_id + "[" + std::to_string(a.start_slot) + "," + std::to_string(a.end_slot) + ")";
}

inline void audit_epoch(const Controller& ctl, const std::map<std::string, Assignment>& first_start,
                        bool brownouts, std::vector<std::string>& audit) {
  Schedule committed = ctl.committed_plan();
  for (const auto& v : check_schedule(committed, ctl.state().live, CheckOptions{false}))
    audit.push_back("t=" + std::to_string(ctl.state().clock) + " committed plan: " + v.constraint +
                    " " + v.entity + " " + v.detail);
  if (!brownouts) {
    for (const auto& a : committed.assignments) {
      const auto& f = first_start.at(a.packet_id);
      if (f.resource_id != a.resource_id || f.start_slot != a.start_slot)
        audit.push_back("t=" + std::to_string(ctl.state().clock) + " moved running packet " + a.packet_id);
    }
  }
  // Task lists partition the plan.
  std::size_t listed = 0;
  for (const auto& tl : ctl.task_lists()) {
    listed += tl.entries.size();
    for (std::size_t x = 1; x < tl.entries.size(); ++x)
      if (tl.entries[x].start_slot < tl.entries[x - 1].end_slot)
        audit.push_back("t=" + std::to_string(ctl.state().clock) + " overlapping task list " + tl.resource_id +
                        ": " + span_of(tl.entries[x - 1]) + " then " + span_of(tl.entries[x]));
  }
  if (listed != ctl.plan().assignments.size()) audit.push_back("task lists do not cover the plan");
}

}  // namespace detail

inline RunResult run_scenario(const Workload& w, const RunConfig& cfg) {
  SolverConfig solver = cfg.solver;
  ControlConfig control = cfg.control;
  solver.horizon_T = w.horizon;
  control.horizon_T = w.horizon;
  Controller ctl(w.instance, cfg.mode, cfg.affinity, solver, control);
  RunResult out;
  RunTrace& trace = out.trace;
  ctl.set_solve_hook([&](const Instance& snap, const std::vector<Assignment>&, const CheckpointResult& r) {
    ++trace.solves;
    if (!cfg.check_invariants || r.status == SolveStatus::infeasible) return;
    for (const auto& v : check_schedule(r.schedule, snap, CheckOptions{true}))
      trace.audit.push_back("solver output: " + v.constraint + " " + v.entity + " " + v.detail);
  });

  const std::size_t n = w.instance.packets.size();
  std::vector<int> seg_actual(w.actual_effort), progress(n, 0), reveal_at(n, 0);
  trace.busy_slots.assign(w.instance.resources.size(), 0);
  std::multiset<Event> queue(w.events.begin(), w.events.end());
  bool brownouts = std::any_of(w.events.begin(), w.events.end(),
                               [](const Event& e) { return e.kind == EventKind::brownout; });
  if (cfg.mode == Mode::rhc) queue.insert({control.checkpoint_period, EventKind::checkpoint, "", 0, 0});
  std::map<std::string, Assignment> first_start;
  const InstanceIndex& idx = ctl.index();

  for (Slot t = 0;; ++t) {
    if (ctl.all_done()) break;
    if (t >= w.horizon) throw SimulationError("work not finished by slot " + std::to_string(w.horizon));
    while (!queue.empty() && queue.begin()->time == t) {
      Event ev = *queue.begin();
      queue.erase(queue.begin());
      auto outcome = ctl.on_event(ev);
      for (const auto& a : outcome.actions) {
        if (a.kind != Action::Kind::interrupt) continue;
        int i = idx.packet(a.assignment.packet_id);
        seg_actual[i] = std::max(1, seg_actual[i] - progress[i]);
        progress[i] = 0;
      }
      if (ev.kind == EventKind::checkpoint && !ctl.all_done())
        queue.insert({t + control.checkpoint_period, EventKind::checkpoint, "", 0, 0});
      if (cfg.check_invariants) detail::audit_epoch(ctl, first_start, brownouts, trace.audit);
    }
    for (const auto& a : ctl.dispatch(t)) {
      int i = idx.packet(a.packet_id);
      progress[i] = 0;
      const int est = ctl.state().live.packets[i].effort_hours;
      reveal_at[i] = seg_actual[i] == est ? 0 : std::max(1, std::min(seg_actual[i], est) / 2);
      if (reveal_at[i] >= seg_actual[i]) reveal_at[i] = 0;
      first_start.emplace(a.packet_id, a);
      trace.starts.push_back(a);
    }
    if (cfg.check_invariants) detail::audit_epoch(ctl, first_start, brownouts, trace.audit);
    const auto& st = ctl.state();
    for (std::size_t j = 0; j < st.running.size(); ++j) {
      if (!st.running[j] || !st.live.resources[j].calendar.available(t)) continue;
      int i = *st.running[j];
      ++progress[i];
      ++trace.busy_slots[j];
      const std::string& id = st.live.packets[i].id;
      if (progress[i] == seg_actual[i]) {
        queue.insert({t + 1, EventKind::completion, id, 0, 0});
      } else if (progress[i] == reveal_at[i]) {
        queue.insert({t + 1, EventKind::estimate_update, id, seg_actual[i], 0});
      }
    }
  }

  const auto& st = ctl.state();
  trace.history = st.history;
  trace.checkpoints = ctl.checkpoints();
  out.log = st.log;
  out.final_instance = st.live;
  out.metrics = compute_metrics(st.live, st.history, w.preferred_end, out.log, w.span);
  return out;
}

// Whole-workflow run: generate, simulate, measure.
inline RunResult run_generated(const WorkloadConfig& wc, const RunConfig& rc) {
  return run_scenario(generate_workload(wc), rc);
}

struct SweepSpec {
  WorkloadConfig workload;
  RunConfig run;
  std::vector<int> loads;  // n_deliverables values
  std::vector<std::uint64_t> seeds;
  std::vector<Mode> modes{Mode::single, Mode::rhc};
  unsigned threads = 0;  // 0: hardware concurrency
};

struct RunRow {
  int load = 0;
  Mode mode = Mode::rhc;
  std::uint64_t seed = 0;
  RunMetrics metrics;
};

struct Summary {
  double mean = 0, sd = 0;
};

inline Summary summarize(const std::vector<double>& xs) {
  Summary s;
  if (xs.empty()) return s;
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double acc = 0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(acc / static_cast<double>(xs.size() - 1));
  }
  return s;
}

struct SweepRow {
  int load = 0;
  Mode mode = Mode::rhc;
  std::size_t runs = 0;
  Summary tardy_pct, utilization_pct, long_run_avg_cost, max_resource_util_pct, dummy_hours;
  double saturated_fraction = 0;
  std::vector<std::uint64_t> seeds;
};

struct SweepResult {
  std::vector<RunRow> runs;   // ordered by (load, mode, seed) as given
  std::vector<SweepRow> rows;  // ordered by (load, mode)
};

inline SweepResult compare_experiment(const SweepSpec& spec) {
  if (spec.loads.empty()) throw std::invalid_argument("sweep needs at least one load");
  if (spec.seeds.empty()) throw std::invalid_argument("sweep needs at least one seed");
  SweepResult res;
  for (int load : spec.loads)
    for (Mode m : spec.modes)
      for (auto seed : spec.seeds) res.runs.push_back({load, m, seed, {}});

  std::atomic<std::size_t> next{0};
  std::vector<std::string> errors(res.runs.size());
  auto worker = [&] {
    for (std::size_t x = next++; x < res.runs.size(); x = next++) {
      auto& row = res.runs[x];
      WorkloadConfig wc = spec.workload;
      wc.n_deliverables = row.load;
      wc.seed = row.seed;
      RunConfig rc = spec.run;
      rc.mode = row.mode;
      try {
        row.metrics = run_generated(wc, rc).metrics;
      } catch (const std::exception& e) {
        errors[x] = "load " + std::to_string(row.load) + " " + std::string(to_string(row.mode)) +
                    " seed " + std::to_string(row.seed) + ": " + e.what();
      }
    }
  };
  unsigned threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(res.runs.size()));
  std::vector<std::future<void>> pool;
  for (unsigned k = 1; k < threads; ++k) pool.push_back(std::async(std::launch::async, worker));
  worker();
  for (auto& f : pool) f.get();
  for (const auto& e : errors)
    if (!e.empty()) throw SimulationError(e);

  for (int load : spec.loads) {
    for (Mode m : spec.modes) {
      SweepRow row;
      row.load = load;
      row.mode = m;
      std::vector<double> tardy, util, cost, maxu, dummy;
      std::size_t sat = 0;
      for (const auto& r : res.runs) {
        if (r.load != load || r.mode != m) continue;
        tardy.push_back(r.metrics.tardy_pct);
        util.push_back(r.metrics.utilization_pct);
        cost.push_back(r.metrics.long_run_avg_cost);
        maxu.push_back(r.metrics.max_resource_util_pct);
        dummy.push_back(static_cast<double>(r.metrics.dummy_hours));
        sat += r.metrics.saturated;
        row.seeds.push_back(r.seed);
      }
      row.runs = tardy.size();
      row.tardy_pct = summarize(tardy);
      row.utilization_pct = summarize(util);
      row.long_run_avg_cost = summarize(cost);
      row.max_resource_util_pct = summarize(maxu);
      row.dummy_hours = summarize(dummy);
      row.saturated_fraction = row.runs ? static_cast<double>(sat) / static_cast<double>(row.runs) : 0.0;
      res.rows.push_back(std::move(row));
    }
  }
  return res;
}

}  // namespace coord
