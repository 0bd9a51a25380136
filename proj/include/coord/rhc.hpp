#pragma once

// Perception-action loop. A Controller consumes timestamped events one at a
// time and keeps the work-system plan: running packets (committed, never
// moved except by a brownout), tentative placements, and the global demand
// queue of packets waiting for a worker.
//
// RHC mode:
//   arrival / completion / estimate update -> myopic matching of ready queued
//     packets onto free or soon-free workers (Hungarian per decision epoch)
//   checkpoint -> solve_checkpoint over all open work, freezing running
//     packets and tentative ones starting within the stability window
//   tentative task lists are pulled forward whenever a worker frees up
//
// SINGLE mode (manual planning baseline):
//   each arriving deliverable is planned once with everything else frozen;
//   planned start dates are never moved earlier, only pushed back when a
//   predecessor or the worker runs late.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "coord/affinity.hpp"
#include "coord/cp_scheduler.hpp"
#include "coord/domain.hpp"
#include "coord/matching.hpp"

namespace coord {

// Tie order for simultaneous events is the declaration order.
enum class EventKind { completion, estimate_update, arrival, brownout, checkpoint };

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::completion: return "completion";
    case EventKind::estimate_update: return "estimate_update";
    case EventKind::arrival: return "arrival";
    case EventKind::brownout: return "brownout";
    case EventKind::checkpoint: return "checkpoint";
  }
  return "?";
}

struct Event {
  Slot time = 0;
  EventKind kind = EventKind::arrival;
  std::string subject;   // packet, deliverable or resource id
  int new_estimate = 0;  // estimate_update: revised effort of the running segment
  Slot until = 0;        // brownout: first slot the resource is back

  auto key() const { return std::tie(time, kind, subject); }
  bool operator<(const Event& o) const { return key() < o.key(); }
  bool operator==(const Event& o) const = default;
};

enum class Mode { single, rhc };

inline std::string_view to_string(Mode m) { return m == Mode::single ? "SINGLE" : "RHC"; }

inline std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "SINGLE" || s == "single") return Mode::single;
  if (s == "RHC" || s == "rhc") return Mode::rhc;
  return std::nullopt;
}

struct ControlConfig {
  Slot checkpoint_period = 160;
  int lookahead_K = 3;
  Slot horizon_T = 2000;
  double epsilon_sigma = 1e-3;

  bool valid() const {
    return checkpoint_period > 0 && lookahead_K > 0 && horizon_T > 0 && epsilon_sigma > 0;
  }
};

struct TaskList {
  std::string resource_id;
  std::vector<Assignment> entries;  // chronological
};

struct LogRecord {
  Slot time = 0;
  std::string kind;
  std::string subject;
  std::string actions;
  std::optional<double> objective;
  std::optional<double> matching_cost;
  std::optional<double> commit_cost;
};

struct Action {
  enum class Kind { assign, start, release, interrupt } kind;
  Assignment assignment;
};

struct EpochOutcome {
  std::vector<Action> actions;
  std::set<std::string> task_list_deltas;  // resources whose task list changed
  std::optional<double> objective;
  std::optional<double> matching_cost;
};

class StaleEvent : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ControllerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// c_ij(t): time to complete inflated by poor match; INFEASIBLE when the
// hard constraints fail or the worker is not free at the candidate start.
inline Cost epoch_cost(int effort, double sigma, bool busy, double epsilon_sigma) {
  if (sigma <= 0 || busy) return kInfeasible;
  return static_cast<double>(effort) / std::max(sigma, epsilon_sigma);
}

// Long-run average of committed assignment costs per elapsed slot. The log
// is assumed to start at slot 0.
inline double long_run_average_cost(const std::vector<LogRecord>& log) {
  if (log.empty()) throw std::invalid_argument("empty event log");
  double total = 0.0;
  Slot last = 0;
  for (const auto& r : log) {
    if (r.commit_cost) total += *r.commit_cost;
    last = std::max(last, r.time);
  }
  return total / static_cast<double>(std::max<Slot>(last, 1));
}

enum class PacketStatus { unreleased, pending, planned, running, done };

struct PlanEntry {
  int resource = -1;
  Slot start = 0;
  Slot end = 0;
};

struct Segment {
  int packet;
  int resource;
  Slot start;
  Slot end;
};

struct CheckpointRecord {
  Slot time = 0;
  Schedule before;  // running + tentative plan just before the solve
  Schedule after;
  std::vector<Assignment> frozen;
  SolveStatus status = SolveStatus::infeasible;
  double objective = 0.0;
};

struct SystemState {
  Slot clock = 0;
  Instance live;  // current effort estimates and calendars
  std::vector<PacketStatus> status;
  std::vector<std::optional<PlanEntry>> entry;  // running or tentative placement
  std::vector<Slot> baseline_start;             // start when first planned
  std::vector<Slot> started_at;
  std::vector<Slot> finished_at;
  std::vector<std::optional<int>> running;  // per resource
  std::set<std::tuple<int, Slot, int>> pending;  // (-priority, arrival, packet)
  std::vector<Segment> history;                  // worked segments, completed or interrupted
  std::vector<LogRecord> log;

  std::optional<Slot> busy_until(int resource) const {
    if (!running[resource]) return std::nullopt;
    return entry[*running[resource]]->end;
  }
};

class Controller {
 public:
  using SolveHook = std::function<void(const Instance&, const std::vector<Assignment>& frozen,
                                       const CheckpointResult&)>;

  Controller(Instance base, Mode mode, AffinityConfig affinity, SolverConfig solver,
             ControlConfig control)
      : mode_(mode), affinity_cfg_(std::move(affinity)), solver_(solver), control_(control) {
    if (!control_.valid()) throw std::invalid_argument("invalid control config");
    st_.live = std::move(base);
    idx_.emplace(st_.live);
    sigma_ = build_affinity_matrix(st_.live.packets, st_.live.resources, affinity_cfg_);
    const std::size_t n = st_.live.packets.size();
    st_.status.assign(n, PacketStatus::unreleased);
    st_.entry.assign(n, std::nullopt);
    st_.baseline_start.assign(n, 0);
    st_.started_at.assign(n, -1);
    st_.finished_at.assign(n, -1);
    st_.running.assign(st_.live.resources.size(), std::nullopt);
  }

  Controller(const Controller&) = delete;
  Controller& operator=(const Controller&) = delete;

  Mode mode() const { return mode_; }
  const SystemState& state() const { return st_; }
  const InstanceIndex& index() const { return *idx_; }
  const AffinityMatrix& affinity() const { return sigma_; }
  const std::vector<CheckpointRecord>& checkpoints() const { return checkpoints_; }
  void set_solve_hook(SolveHook h) { solve_hook_ = std::move(h); }

  EpochOutcome on_event(const Event& ev) {
    if (ev.time < st_.clock)
      throw StaleEvent("event at " + std::to_string(ev.time) + " before clock " +
                       std::to_string(st_.clock));
    st_.clock = ev.time;
    EpochOutcome out;
    switch (ev.kind) {
      case EventKind::arrival: handle_arrival(ev, out); break;
      case EventKind::completion: handle_completion(ev, out); break;
      case EventKind::estimate_update: handle_estimate(ev, out); break;
      case EventKind::brownout:
        brownout_reassign(index().resource(ev.subject), ev.until, out);
        break;
      case EventKind::checkpoint:
        if (mode_ == Mode::rhc) run_checkpoint(out);
        break;
    }
    retime_if_dirty();
    log_epoch(ev, out);
    return out;
  }

  // Starts every packet whose turn has come at slot t (the first control
  // action of the plan). Returns the started assignments.
  std::vector<Assignment> dispatch(Slot t) {
    if (t < st_.clock) throw StaleEvent("dispatch before clock");
    st_.clock = t;
    retime_if_dirty();
    std::vector<Assignment> started;
    auto lists = tentative_by_resource();
    for (std::size_t j = 0; j < st_.running.size(); ++j) {
      if (st_.running[j] || lists[j].empty()) continue;
      if (!st_.live.resources[j].calendar.available(t)) continue;
      // SINGLE keeps its list order; RHC lets a ready packet overtake a
      // head that is still waiting for a predecessor.
      int i = lists[j].front();
      if (mode_ == Mode::rhc) {
        auto it = std::find_if(lists[j].begin(), lists[j].end(), [&](int x) { return ready(x, t); });
        if (it == lists[j].end()) continue;
        i = *it;
      }
      auto& e = *st_.entry[i];
      if ((mode_ == Mode::single && e.start > t) || !ready(i, t)) continue;
      if (e.start != t) {
        e.start = t;
        e.end = end_after(static_cast<int>(j), t, effort(i));
      }
      st_.status[i] = PacketStatus::running;
      st_.running[j] = i;
      st_.started_at[i] = t;
      dirty_ = true;
      Assignment a = to_assignment(i);
      double c = epoch_cost(effort(i), sigma_(i, j), false, control_.epsilon_sigma).value_or(0.0);
      st_.log.push_back({t, "dispatch", a.packet_id, describe(a), std::nullopt, std::nullopt, c});
      started.push_back(std::move(a));
    }
    retime_if_dirty();
    return started;
  }

  // Stage-by-stage matching over the next K decision epochs. Stage k offers
  // the workers that become free at the k-th upcoming scheduled completion
  // (stage 0: free now), costed as waiting time plus epoch_cost. Every worker
  // takes at most one packet across all stages; only the stage-0 pairs are
  // committed, later-stage pairs are reservations that are re-decided at the
  // next epoch.
  //
  // Rows are the ready queued packets plus, when a worker is idle, ready
  // tentative packets that are still waiting for their planned slot. Each of
  // those has a private "stay" column priced at its planned wait, so it only
  // moves when an idle worker serves it sooner.
  std::vector<Assignment> myopic_assign(int lookahead_K, EpochOutcome* out = nullptr) {
    const Slot t = st_.clock;
    retime_if_dirty();
    std::vector<int> rows;
    for (const auto& [np, arr, i] : st_.pending)
      if (ready(i, t)) rows.push_back(i);

    std::vector<Slot> stage_time{t};
    {
      std::set<Slot> ends;
      for (std::size_t j = 0; j < st_.running.size(); ++j)
        if (auto b = st_.busy_until(static_cast<int>(j)); b && *b > t) ends.insert(*b);
      for (Slot e : ends) {
        if (static_cast<int>(stage_time.size()) >= lookahead_K) break;
        stage_time.push_back(e);
      }
    }
    struct Column {
      int resource;
      int stage;
    };
    std::vector<Column> cols;
    std::size_t idle = 0;
    for (std::size_t j = 0; j < st_.running.size(); ++j) {
      auto b = st_.busy_until(static_cast<int>(j));
      if (!b || *b <= t) {
        cols.push_back({static_cast<int>(j), 0});
        ++idle;
        continue;
      }
      for (std::size_t k = 1; k < stage_time.size(); ++k)
        if (stage_time[k] == *b) cols.push_back({static_cast<int>(j), static_cast<int>(k)});
    }
    if (cols.empty()) return {};

    auto lists = tentative_by_resource();
    auto offer = [&](int i, const Column& col) -> std::optional<std::pair<double, PlanEntry>> {
      if (st_.entry[i] && st_.entry[i]->resource == col.resource) return std::nullopt;
      int j = col.resource;
      // Dummy workers are hires; only a checkpoint may open one.
      if (st_.live.resources[j].is_dummy) return std::nullopt;
      Slot at = stage_time[col.stage];
      auto s = first_available(j, at);
      std::optional<Slot> e;
      if (s) e = st_.live.resources[j].calendar.end_after(*s, effort(i));
      const auto& committed = st_.live.deliverables[index().deliverable_of(i)].committed_end;
      bool busy = !s || !e || *e > control_.horizon_T || (committed && *e > *committed) ||
                  overlaps_tentative(lists[j], *s, *e);
      Cost base = epoch_cost(effort(i), sigma_(i, j), busy, control_.epsilon_sigma);
      if (!base) return std::nullopt;
      return std::pair{*base + static_cast<double>(*s - t), PlanEntry{j, *s, *e}};
    };
    auto stay_cost = [&](int i) {
      const auto& e = *st_.entry[i];
      return static_cast<double>(e.start - t) +
             static_cast<double>(effort(i)) / std::max(sigma_(i, e.resource), control_.epsilon_sigma);
    };

    const std::size_t queued = rows.size();
    if (mode_ == Mode::rhc && idle > 0) {
      std::vector<std::pair<double, int>> movers;
      for (std::size_t i = 0; i < st_.entry.size(); ++i) {
        int ii = static_cast<int>(i);
        if (st_.status[i] != PacketStatus::planned || st_.entry[i]->start <= t || !ready(ii, t)) continue;
        std::optional<double> best;
        for (const auto& col : cols)
          if (col.stage == 0)
            if (auto o = offer(ii, col); o && (!best || o->first < *best)) best = o->first;
        double gain = best ? stay_cost(ii) - *best : 0.0;
        if (gain >= 1.0) movers.emplace_back(-gain, ii);
      }
      std::sort(movers.begin(), movers.end());
      if (movers.size() > idle) movers.resize(idle);
      for (const auto& mv : movers) rows.push_back(mv.second);
    }
    if (rows.empty()) return {};

    CostMatrix costs(rows.size(), cols.size() + rows.size() - queued);
    std::vector<std::vector<std::optional<PlanEntry>>> cand(rows.size(),
                                                            std::vector<std::optional<PlanEntry>>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        if (auto o = offer(rows[r], cols[c])) {
          costs(r, c) = o->first;
          cand[r][c] = o->second;
        }
      }
      if (r >= queued) costs(r, cols.size() + r - queued) = stay_cost(rows[r]);
    }
    MatchResult m = hungarian_min_cost(costs);
    std::vector<Assignment> committed;
    double stage0_cost = 0.0;
    for (auto [r, c] : m.pairs) {
      if (c >= cols.size() || cols[c].stage != 0) continue;
      int i = rows[r];
      stage0_cost += *costs(r, c);
      if (out && r >= queued) out->task_list_deltas.insert(st_.live.resources[st_.entry[i]->resource].id);
      place_tentative(i, *cand[r][c]);
      committed.push_back(to_assignment(i));
      if (out) {
        out->actions.push_back({Action::Kind::assign, committed.back()});
        out->task_list_deltas.insert(committed.back().resource_id);
      }
    }
    if (out && !committed.empty()) out->matching_cost = stage0_cost;
    return committed;
  }

  // Takes a worker out from the current slot until `until`; its running and
  // tentative packets return to the queue (the running one with the effort
  // it has left) and are re-assigned at once.
  void brownout_reassign(int j, Slot until, EpochOutcome& out) {
    const Slot t = st_.clock;
    auto& cal = st_.live.resources[j].calendar;
    std::vector<int> moved;
    if (auto i = st_.running[j]) {
      Slot done = cal.available_between(st_.started_at[*i], t);
      st_.history.push_back({*i, j, st_.started_at[*i], t});
      auto& p = st_.live.packets[*i];
      p.effort_hours = std::max<int>(1, p.effort_hours - static_cast<int>(done));
      out.actions.push_back({Action::Kind::interrupt, to_assignment(*i)});
      st_.running[j].reset();
      st_.started_at[*i] = -1;
      unplan(*i);
      moved.push_back(*i);
    }
    cal.block(t, until);
    const auto lists = tentative_by_resource();
    for (int i : lists[j]) {
      out.actions.push_back({Action::Kind::release, to_assignment(i)});
      unplan(i);
      moved.push_back(i);
    }
    if (!moved.empty()) out.task_list_deltas.insert(st_.live.resources[j].id);
    dirty_ = true;
    if (moved.empty()) return;
    if (mode_ == Mode::rhc)
      myopic_assign(control_.lookahead_K, &out);
    else
      plan_once(moved, out);
  }

  std::vector<TaskList> task_lists() const {
    std::vector<TaskList> out(st_.live.resources.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j].resource_id = st_.live.resources[j].id;
    for (std::size_t i = 0; i < st_.entry.size(); ++i)
      if (st_.entry[i]) out[st_.entry[i]->resource].entries.push_back(to_assignment(static_cast<int>(i)));
    for (auto& tl : out)
      std::sort(tl.entries.begin(), tl.entries.end(), [](const Assignment& a, const Assignment& b) {
        return std::tie(a.start_slot, a.packet_id) < std::tie(b.start_slot, b.packet_id);
      });
    return out;
  }

  // Running plus tentative placements.
  Schedule plan() const {
    Schedule s;
    for (std::size_t i = 0; i < st_.entry.size(); ++i)
      if (st_.entry[i]) s.assignments.push_back(to_assignment(static_cast<int>(i)));
    return s;
  }

  Schedule committed_plan() const {
    Schedule s;
    for (std::size_t i = 0; i < st_.entry.size(); ++i)
      if (st_.status[i] == PacketStatus::running) s.assignments.push_back(to_assignment(static_cast<int>(i)));
    return s;
  }

  bool all_done() const {
    return std::all_of(st_.status.begin(), st_.status.end(),
                       [](PacketStatus s) { return s == PacketStatus::done; });
  }

 private:
  int effort(int i) const { return st_.live.packets[i].effort_hours; }

  Assignment to_assignment(int i) const {
    const auto& e = *st_.entry[i];
    return {st_.live.packets[i].id, st_.live.resources[e.resource].id, e.start, e.end};
  }

  static std::string describe(const Assignment& a) {
    return a.packet_id + ">" + a.resource_id + "@" + std::to_string(a.start_slot);
  }

  std::optional<Slot> first_available(int j, Slot from) const {
    const auto& cal = st_.live.resources[j].calendar;
    for (Slot t = from; t < cal.horizon(); ++t)
      if (cal.available(t)) return t;
    return std::nullopt;
  }

  Slot end_after(int j, Slot start, int eff) const {
    auto e = st_.live.resources[j].calendar.end_after(start, eff);
    if (!e) throw ControllerError("work for " + st_.live.resources[j].id + " runs past the horizon");
    return *e;
  }

  bool ready(int i, Slot t) const {
    if (st_.status[i] != PacketStatus::pending && st_.status[i] != PacketStatus::planned) return false;
    for (const auto& e : index().preds(i)) {
      auto s = st_.status[e.packet];
      if (e.kind == DependencyKind::finish_to_start) {
        if (s != PacketStatus::done || st_.finished_at[e.packet] > t) return false;
      } else if (s != PacketStatus::running && s != PacketStatus::done) {
        return false;
      }
    }
    return true;
  }

  // Tentative packets per resource in plan order.
  std::vector<std::vector<int>> tentative_by_resource() const {
    std::vector<std::vector<int>> out(st_.running.size());
    for (std::size_t i = 0; i < st_.entry.size(); ++i)
      if (st_.status[i] == PacketStatus::planned) out[st_.entry[i]->resource].push_back(static_cast<int>(i));
    for (auto& l : out)
      std::sort(l.begin(), l.end(), [&](int a, int b) {
        return std::tie(st_.entry[a]->start, a) < std::tie(st_.entry[b]->start, b);
      });
    return out;
  }

  bool overlaps_tentative(const std::vector<int>& list, Slot s, Slot e) const {
    for (int i : list) {
      const auto& p = *st_.entry[i];
      if (p.start < e && s < p.end) return true;
    }
    return false;
  }

  void place_tentative(int i, const PlanEntry& p) {
    st_.pending.erase(queue_key(i));
    st_.entry[i] = p;
    st_.status[i] = PacketStatus::planned;
    st_.baseline_start[i] = p.start;
    dirty_ = true;
  }

  void unplan(int i) {
    st_.entry[i].reset();
    st_.status[i] = PacketStatus::pending;
    st_.pending.insert(queue_key(i));
  }

  std::tuple<int, Slot, int> queue_key(int i) const {
    const auto& d = st_.live.deliverables[index().deliverable_of(i)];
    return {-d.priority, st_.live.packets[i].arrival_slot, i};
  }

  void retime_if_dirty() {
    if (!dirty_) return;
    dirty_ = false;
    retime(st_.clock);
  }

  // Recomputes tentative dates after anything moved. Each resource keeps its
  // task-list order; a packet starts no earlier than its worker's previous
  // task, its predecessors, and (SINGLE) its original planned date.
  // Start-based precedences (FS, SS) order the pass; end-based ones (FF, SF)
  // only raise the end floor, so the pass repeats until dates settle.
  void retime(Slot t) {
    const std::size_t n = st_.entry.size();
    auto lists = tentative_by_resource();
    std::vector<int> indeg0(n, 0);
    std::vector<std::vector<int>> next(n);
    for (const auto& l : lists)
      for (std::size_t x = 1; x < l.size(); ++x) {
        next[l[x - 1]].push_back(l[x]);
        ++indeg0[l[x]];
      }
    bool end_based = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (st_.status[i] != PacketStatus::planned) continue;
      for (const auto& e : index().preds(static_cast<int>(i))) {
        if (st_.status[e.packet] != PacketStatus::planned) continue;
        if (e.kind == DependencyKind::finish_to_start || e.kind == DependencyKind::start_to_start) {
          next[e.packet].push_back(static_cast<int>(i));
          ++indeg0[i];
        } else {
          end_based = true;
        }
      }
    }
    for (int pass = 0; pass < 32; ++pass) {
      if (!retime_pass(t, next, indeg0) || !end_based) return;
    }
  }

  // One topological pass; returns whether any date changed.
  bool retime_pass(Slot t, const std::vector<std::vector<int>>& next, std::vector<int> indeg) {
    const std::size_t n = st_.entry.size();
    using Item = std::tuple<Slot, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> q;
    std::size_t planned = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (st_.status[i] != PacketStatus::planned) continue;
      ++planned;
      if (indeg[i] == 0) q.emplace(st_.entry[i]->start, static_cast<int>(i));
    }
    std::vector<Slot> frontier(st_.running.size(), t);
    for (std::size_t j = 0; j < st_.running.size(); ++j)
      if (auto b = st_.busy_until(static_cast<int>(j))) frontier[j] = std::max(t, *b);
    std::size_t seen = 0;
    bool changed = false;
    while (!q.empty()) {
      auto [_, i] = q.top();
      q.pop();
      ++seen;
      auto& e = *st_.entry[i];
      Slot lo = std::max(t, frontier[e.resource]);
      if (mode_ == Mode::single) lo = std::max(lo, st_.baseline_start[i]);
      Slot end_floor = 0;
      for (const auto& d : index().preds(i)) {
        auto s = st_.status[d.packet];
        Slot ps, pe;
        if (s == PacketStatus::done) {
          ps = st_.finished_at[d.packet];
          pe = st_.finished_at[d.packet];
        } else if (st_.entry[d.packet]) {
          ps = st_.entry[d.packet]->start;
          pe = st_.entry[d.packet]->end;
        } else {
          continue;  // queued predecessor: readiness holds the packet back
        }
        switch (d.kind) {
          case DependencyKind::finish_to_start: lo = std::max(lo, pe); break;
          case DependencyKind::start_to_start: lo = std::max(lo, ps); break;
          case DependencyKind::finish_to_finish: end_floor = std::max(end_floor, pe); break;
          case DependencyKind::start_to_finish: end_floor = std::max(end_floor, ps); break;
        }
      }
      auto s = first_available(e.resource, lo);
      if (!s) throw ControllerError("plan runs past the horizon");
      Slot en = end_after(e.resource, *s, effort(i));
      while (en < end_floor) {
        s = first_available(e.resource, *s + 1);
        if (!s) throw ControllerError("plan runs past the horizon");
        en = end_after(e.resource, *s, effort(i));
      }
      changed = changed || e.start != *s || e.end != en;
      e.start = *s;
      e.end = en;
      frontier[e.resource] = en;
      for (int v : next[i])
        if (--indeg[v] == 0) q.emplace(st_.entry[v]->start, v);
    }
    if (seen != planned) throw ControllerError("task lists contradict dependencies");
    return changed;
  }

  void handle_arrival(const Event& ev, EpochOutcome& out) {
    int k = index().deliverable(ev.subject);
    std::vector<int> arrived;
    for (const auto& pid : st_.live.deliverables[k].packet_ids) {
      int i = index().packet(pid);
      if (st_.status[i] != PacketStatus::unreleased) continue;
      st_.status[i] = PacketStatus::pending;
      st_.pending.insert(queue_key(i));
      arrived.push_back(i);
    }
    if (mode_ == Mode::rhc)
      myopic_assign(control_.lookahead_K, &out);
    else
      plan_once(arrived, out);
  }

  void handle_completion(const Event& ev, EpochOutcome& out) {
    int i = index().packet(ev.subject);
    if (st_.status[i] != PacketStatus::running) throw ControllerError("completion of idle packet " + ev.subject);
    const auto& e = *st_.entry[i];
    st_.history.push_back({i, e.resource, st_.started_at[i], ev.time});
    st_.running[e.resource].reset();
    st_.status[i] = PacketStatus::done;
    st_.finished_at[i] = ev.time;
    st_.entry[i].reset();
    dirty_ = true;
    if (mode_ == Mode::rhc) myopic_assign(control_.lookahead_K, &out);
  }

  void handle_estimate(const Event& ev, EpochOutcome& out) {
    int i = index().packet(ev.subject);
    if (ev.new_estimate < 1) throw std::invalid_argument("estimate must be positive");
    if (st_.status[i] == PacketStatus::done) return;
    st_.live.packets[i].effort_hours = ev.new_estimate;
    if (st_.entry[i]) {
      auto& e = *st_.entry[i];
      e.end = end_after(e.resource, e.start, ev.new_estimate);
    }
    dirty_ = true;
    if (mode_ == Mode::rhc) myopic_assign(control_.lookahead_K, &out);
  }

  struct Snapshot {
    Instance inst;
    std::vector<int> packet_of;  // snapshot packet -> controller packet
  };

  // Open work (arrived, not done) plus `extra` as a standalone instance.
  Snapshot snapshot() const {
    Snapshot s;
    s.inst.resources = st_.live.resources;
    std::vector<int> local(st_.status.size(), -1);
    for (std::size_t i = 0; i < st_.status.size(); ++i) {
      auto x = st_.status[i];
      if (x == PacketStatus::unreleased || x == PacketStatus::done) continue;
      local[i] = static_cast<int>(s.packet_of.size());
      s.packet_of.push_back(static_cast<int>(i));
      s.inst.packets.push_back(st_.live.packets[i]);
    }
    std::map<int, int> deliv;
    for (int i : s.packet_of) {
      int k = index().deliverable_of(i);
      auto [it, fresh] = deliv.emplace(k, static_cast<int>(s.inst.deliverables.size()));
      if (fresh) {
        Deliverable d = st_.live.deliverables[k];
        d.packet_ids.clear();
        s.inst.deliverables.push_back(std::move(d));
      }
      s.inst.deliverables[it->second].packet_ids.push_back(st_.live.packets[i].id);
    }
    for (const auto& d : st_.live.dependencies) {
      int a = index().packet(d.from_packet), b = index().packet(d.to_packet);
      if (local[a] >= 0 && local[b] >= 0) s.inst.dependencies.push_back(d);
    }
    return s;
  }

  // A committed date that frozen work already misses cannot bind the re-plan.
  static void relax_missed_commitments(Snapshot& snap, const std::vector<Assignment>& frozen) {
    InstanceIndex sidx(snap.inst);
    for (const auto& a : frozen) {
      auto& d = snap.inst.deliverables[sidx.deliverable_of(sidx.packet(a.packet_id))];
      if (d.committed_end && a.end_slot > *d.committed_end) d.committed_end.reset();
    }
  }

  CheckpointResult solve(Snapshot& snap, const std::vector<Assignment>& frozen) {
    SolverConfig cfg = solver_;
    cfg.release_slot = st_.clock;
    cfg.horizon_T = control_.horizon_T;
    relax_missed_commitments(snap, frozen);
    AffinityMatrix sig = build_affinity_matrix(snap.inst.packets, snap.inst.resources, affinity_cfg_);
    CheckpointResult r = solve_checkpoint(snap.inst, sig, frozen, cfg);
    if (solve_hook_) solve_hook_(snap.inst, frozen, r);
    if (r.status == SolveStatus::infeasible) {
      // Unreachable commitments: plan for the earliest finish instead.
      bool relaxed = false;
      for (auto& d : snap.inst.deliverables) relaxed = std::exchange(d.committed_end, std::nullopt) || relaxed;
      if (relaxed) {
        r = solve_checkpoint(snap.inst, sig, frozen, cfg);
        if (solve_hook_) solve_hook_(snap.inst, frozen, r);
        st_.log.push_back({st_.clock, "relax_commitments", "", "", std::nullopt, std::nullopt, std::nullopt});
      }
    }
    if (r.status == SolveStatus::infeasible)
      throw ControllerError("checkpoint at " + std::to_string(st_.clock) + " found no schedule");
    return r;
  }

  void apply_solution(const Snapshot& snap, const CheckpointResult& r, const std::set<int>& targets,
                      EpochOutcome& out) {
    InstanceIndex sidx(snap.inst);
    for (const auto& a : r.schedule.assignments) {
      int i = snap.packet_of[sidx.packet(a.packet_id)];
      if (!targets.contains(i)) continue;
      place_tentative(i, PlanEntry{index().resource(a.resource_id), a.start_slot, a.end_slot});
      out.actions.push_back({Action::Kind::assign, a});
      out.task_list_deltas.insert(a.resource_id);
    }
    out.objective = r.objective;
  }

  // SINGLE: plan the given packets once, freezing the rest of the plan.
  // Successors already planned against the old dates are re-planned with them.
  void plan_once(const std::vector<int>& packets, EpochOutcome& out) {
    if (packets.empty()) return;
    std::set<int> replan(packets.begin(), packets.end());
    std::vector<int> frontier = packets;
    while (!frontier.empty()) {
      int u = frontier.back();
      frontier.pop_back();
      for (const auto& e : index().succs(u)) {
        if (st_.status[e.packet] == PacketStatus::planned && replan.insert(e.packet).second) {
          out.actions.push_back({Action::Kind::release, to_assignment(e.packet)});
          unplan(e.packet);
          frontier.push_back(e.packet);
        }
      }
    }
    retime_if_dirty();
    Snapshot snap = snapshot();
    std::vector<Assignment> frozen;
    for (std::size_t i = 0; i < st_.entry.size(); ++i)
      if (st_.entry[i]) frozen.push_back(to_assignment(static_cast<int>(i)));
    auto r = solve(snap, frozen);
    apply_solution(snap, r, replan, out);
  }

  void run_checkpoint(EpochOutcome& out) {
    const Slot t = st_.clock;
    retime_if_dirty();
    CheckpointRecord rec;
    rec.time = t;
    rec.before = plan();
    // Freeze running work and the near-term task lists whose predecessors
    // are settled.
    std::vector<char> frozen(st_.entry.size(), 0);
    std::vector<int> order;
    for (std::size_t i = 0; i < st_.entry.size(); ++i) {
      if (st_.status[i] == PacketStatus::running) frozen[i] = 1;
      else if (st_.status[i] == PacketStatus::planned) order.push_back(static_cast<int>(i));
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return std::tie(st_.entry[a]->start, a) < std::tie(st_.entry[b]->start, b);
    });
    for (int i : order) {
      if (st_.entry[i]->start >= t + solver_.stability_window_W) continue;
      bool settled = true;
      for (const auto& e : index().preds(i))
        settled = settled && (st_.status[e.packet] == PacketStatus::done || frozen[e.packet]);
      if (settled) frozen[i] = 1;
    }
    Snapshot snap = snapshot();
    std::set<int> targets;
    for (int i : snap.packet_of)
      if (!frozen[i]) targets.insert(i);
    for (int i : targets)
      if (st_.status[i] == PacketStatus::planned) unplan(i);
    for (std::size_t i = 0; i < st_.entry.size(); ++i)
      if (frozen[i]) rec.frozen.push_back(to_assignment(static_cast<int>(i)));
    auto r = solve(snap, rec.frozen);
    apply_solution(snap, r, targets, out);
    dirty_ = false;  // the solver's dates are already consistent
    rec.after = plan();
    rec.status = r.status;
    rec.objective = r.objective;
    checkpoints_.push_back(std::move(rec));
  }

  void log_epoch(const Event& ev, const EpochOutcome& out) {
    std::string actions;
    if (ev.kind == EventKind::checkpoint) {
      actions = "planned=" + std::to_string(out.actions.size());
    } else {
      for (const auto& a : out.actions) {
        if (!actions.empty()) actions += ';';
        switch (a.kind) {
          case Action::Kind::assign: break;
          case Action::Kind::start: actions += "start:"; break;
          case Action::Kind::release: actions += "release:"; break;
          case Action::Kind::interrupt: actions += "interrupt:"; break;
        }
        actions += describe(a.assignment);
      }
    }
    st_.log.push_back({ev.time, std::string(to_string(ev.kind)), ev.subject, actions, out.objective,
                       out.matching_cost, std::nullopt});
  }

  Mode mode_;
  AffinityConfig affinity_cfg_;
  SolverConfig solver_;
  ControlConfig control_;
  SystemState st_;
  std::optional<InstanceIndex> idx_;
  AffinityMatrix sigma_;
  bool dirty_ = false;
  std::vector<CheckpointRecord> checkpoints_;
  SolveHook solve_hook_;
};

}  // namespace coord
