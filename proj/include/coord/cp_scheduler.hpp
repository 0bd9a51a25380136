#pragma once

// Scheduling checkpoints: a full plan over the horizon minimising
//
//   J = sum_k pi(p_k) * (E_k - St_k)  -  lambda * sum_ij sigma_ij x_ij
//
// with pi(p) = priority_base^p, subject to eligibility, one resource per
// packet, calendar-aware effort, one packet at a time per resource,
// dependencies, start after the deliverable's input start, and committed end
// dates.
//
// Search is depth-first branch-and-bound with chronological backtracking.
// Packets are branched in order (priority desc, input start asc), each child
// being a (resource, start) pair. Children are tried in increasing order of
// pi * end - lambda * sigma; for a fixed resource the lower bound is
// monotone in the start slot, so a resource is dropped from a node as soon as
// one of its starts is bounded out. The search stops at node or wall-time
// limits and returns the best incumbent.
//
// A candidate start is always a calendar-available slot, except for packets
// that have start-to-start or start-to-finish successors, for which any slot
// is tried. For finish-based dependencies starting inside a holiday is
// dominated by starting at the next available slot.
//
// With allow_dummy, dummy resources are only opened when the real workforce
// admits no schedule within limits; dummy_hours_used then reports their load.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "coord/affinity.hpp"
#include "coord/domain.hpp"

namespace coord {

struct SolverConfig {
  Slot horizon_T = 2000;
  double lambda = 1.0;
  double priority_base = 2.0;
  long node_limit = 100000;
  long time_limit_ms = 5000;
  bool allow_dummy = false;
  Slot stability_window_W = 40;
  // Earliest start for packets that are not frozen (the checkpoint time).
  Slot release_slot = 0;

  bool valid() const {
    return horizon_T > 0 && lambda >= 0 && priority_base > 1 && node_limit > 0 &&
           time_limit_ms > 0 && stability_window_W >= 0;
  }

  double priority_penalty(int priority) const { return std::pow(priority_base, priority); }
};

enum class SolveStatus { optimal, feasible_incumbent, infeasible };

inline std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "OPTIMAL";
    case SolveStatus::feasible_incumbent: return "FEASIBLE_INCUMBENT";
    case SolveStatus::infeasible: return "INFEASIBLE";
  }
  return "?";
}

struct CheckpointResult {
  Schedule schedule;
  double objective = 0.0;
  SolveStatus status = SolveStatus::infeasible;
  long dummy_hours_used = 0;
  long nodes = 0;
};

class FrozenConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InfeasibleSchedule : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double objective_value(const Schedule& s, const Instance& inst, const AffinityMatrix& sigma,
                              const SolverConfig& cfg) {
  auto violations = check_schedule(s, inst);
  if (!violations.empty())
    throw InfeasibleSchedule("objective of infeasible schedule: " + violations.front().entity +
                             " violates " + violations.front().constraint);
  InstanceIndex idx(inst);
  auto windows = deliverable_windows(s, inst);
  double lateness = 0.0;
  for (std::size_t k = 0; k < inst.deliverables.size(); ++k) {
    if (!windows[k]) continue;
    const auto& d = inst.deliverables[k];
    lateness += cfg.priority_penalty(d.priority) * static_cast<double>(windows[k]->end - d.input_start);
  }
  double match = 0.0;
  for (const auto& a : s.assignments)
    match += sigma(static_cast<std::size_t>(idx.packet(a.packet_id)),
                   static_cast<std::size_t>(idx.resource(a.resource_id)));
  return lateness - cfg.lambda * match;
}

namespace detail {

inline constexpr Slot kNever = std::numeric_limits<Slot>::max() / 4;

// Prefix counts over one resource calendar truncated to the horizon.
class CalIndex {
 public:
  CalIndex(const Calendar& cal, Slot horizon) {
    h_ = std::min(horizon, cal.horizon());
    if (h_ < 0) h_ = 0;
    cum_.assign(static_cast<std::size_t>(h_) + 1, 0);
    for (Slot t = 0; t < h_; ++t) {
      bool a = cal.available(t);
      cum_[t + 1] = cum_[t] + (a ? 1 : 0);
      if (a) pos_.push_back(t);
    }
  }

  Slot horizon() const { return h_; }
  bool available(Slot t) const { return t >= 0 && t < h_ && cum_[t + 1] != cum_[t]; }

  Slot first_available(Slot s) const {
    if (s < 0) s = 0;
    if (s >= h_) return kNever;
    auto k = static_cast<std::size_t>(cum_[s]);
    return k < pos_.size() ? pos_[k] : kNever;
  }

  // End (exclusive) of `effort` available slots worked from `s`.
  Slot end_from(Slot s, Slot effort) const {
    if (s < 0) s = 0;
    if (s >= h_) return kNever;
    auto k = static_cast<std::size_t>(cum_[s] + effort - 1);
    return k < pos_.size() ? pos_[k] + 1 : kNever;
  }

  // Smallest start whose end_from is >= min_end (a lower bound on starts).
  Slot start_for_end_at_least(Slot min_end, Slot effort) const {
    if (min_end <= 0) return 0;
    Slot before = cum_[std::min(min_end - 1, h_)];  // available slots in [0, min_end - 1)
    Slot m = before - effort + 1;
    if (m <= 0) return 0;
    return static_cast<std::size_t>(m) < pos_.size() ? pos_[m] : kNever;
  }

 private:
  Slot h_ = 0;
  std::vector<Slot> cum_;
  std::vector<Slot> pos_;
};

struct Placement {
  int resource = -1;
  Slot start = 0;
  Slot end = 0;
};

// Flattened, index-based view of one checkpoint problem.
class CheckpointModel {
 public:
  struct PacketInfo {
    int deliverable = -1;
    Slot effort = 1;
    double penalty = 0.0;
    Slot input_start = 0;
    Slot release = 0;       // earliest start
    Slot latest_end = 0;    // min(horizon, committed end)
    int priority = 1;
    std::vector<int> eligible;  // sigma desc, then index
    double max_sigma = 0.0;
    bool any_start = false;     // has SS/SF successors
  };

  CheckpointModel(const Instance& inst, const AffinityMatrix& sigma, const SolverConfig& cfg,
                  bool use_dummies)
      : inst_(inst), idx_(inst), sigma_(sigma), cfg_(cfg) {
    if (sigma.rows() != inst.packets.size() || sigma.cols() != inst.resources.size())
      throw std::invalid_argument("affinity matrix does not match instance");
    for (const auto& r : inst.resources) cal_.emplace_back(r.calendar, cfg.horizon_T);
    packets_.resize(inst.packets.size());
    for (std::size_t i = 0; i < inst.packets.size(); ++i) {
      auto& p = packets_[i];
      const auto& wp = inst.packets[i];
      p.deliverable = idx_.deliverable_of(static_cast<int>(i));
      if (p.deliverable < 0) throw UnknownIdentifier("packet " + wp.id + " has no deliverable");
      const auto& d = inst.deliverables[p.deliverable];
      p.effort = wp.effort_hours;
      p.priority = d.priority;
      p.penalty = cfg.priority_penalty(d.priority);
      p.input_start = d.input_start;
      p.release = std::max(d.input_start, cfg.release_slot);
      p.latest_end = cfg.horizon_T;
      if (d.committed_end) p.latest_end = std::min(p.latest_end, *d.committed_end);
      for (std::size_t j = 0; j < inst.resources.size(); ++j) {
        if (inst.resources[j].is_dummy && !use_dummies) continue;
        if (sigma(i, j) > 0) p.eligible.push_back(static_cast<int>(j));
      }
      std::stable_sort(p.eligible.begin(), p.eligible.end(),
                       [&](int a, int b) { return sigma(i, a) > sigma(i, b); });
      for (int j : p.eligible) p.max_sigma = std::max(p.max_sigma, sigma(i, j));
      for (const auto& e : idx_.succs(static_cast<int>(i)))
        p.any_start = p.any_start || e.kind == DependencyKind::start_to_start ||
                      e.kind == DependencyKind::start_to_finish;
    }
    members_.resize(inst.deliverables.size());
    for (int i : topological_order()) members_[packets_[i].deliverable].push_back(i);
  }

  const Instance& instance() const { return inst_; }
  const InstanceIndex& index() const { return idx_; }
  const SolverConfig& config() const { return cfg_; }
  const PacketInfo& packet(int i) const { return packets_[i]; }
  std::size_t packet_count() const { return packets_.size(); }
  const CalIndex& calendar(int j) const { return cal_[j]; }
  double sigma(int i, int j) const { return sigma_(i, j); }
  const std::vector<int>& members(int k) const { return members_[k]; }
  std::size_t deliverable_count() const { return members_.size(); }

 private:
  std::vector<int> topological_order() const {
    const std::size_t n = packets_.size();
    std::vector<int> indeg(n, 0), order;
    for (std::size_t i = 0; i < n; ++i) indeg[i] = static_cast<int>(idx_.preds(static_cast<int>(i)).size());
    std::vector<int> stack;
    for (std::size_t i = n; i-- > 0;)
      if (indeg[i] == 0) stack.push_back(static_cast<int>(i));
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      order.push_back(u);
      for (const auto& e : idx_.succs(u))
        if (--indeg[e.packet] == 0) stack.push_back(e.packet);
    }
    if (order.size() != n) throw std::invalid_argument("dependency cycle in checkpoint instance");
    return order;
  }

  const Instance& inst_;
  InstanceIndex idx_;
  const AffinityMatrix& sigma_;
  SolverConfig cfg_;
  std::vector<CalIndex> cal_;
  std::vector<PacketInfo> packets_;
  std::vector<std::vector<int>> members_;
};

// Mutable search state with an undo trail.
class PartialSchedule {
 public:
  explicit PartialSchedule(const CheckpointModel& m)
      : m_(m),
        place_(m.packet_count()),
        placed_(m.packet_count(), 0),
        es_(m.packet_count(), 0),
        ee_(m.packet_count(), 0),
        contrib_(m.deliverable_count(), 0.0),
        occ_(m.instance().resources.size()) {
    for (std::size_t i = 0; i < m.packet_count(); ++i) sigma_rest_ += m.packet(static_cast<int>(i)).max_sigma;
  }

  bool placed(int i) const { return placed_[i] != 0; }
  const Placement& placement(int i) const { return place_[i]; }
  Slot earliest_start(int i) const { return es_[i]; }
  Slot earliest_end(int i) const { return ee_[i]; }
  const std::vector<std::pair<Slot, Slot>>& occupied(int j) const { return occ_[j]; }

  double lower_bound() const {
    return contrib_sum_ - m_.config().lambda * (sigma_placed_ + sigma_rest_);
  }

  std::size_t mark() const { return trail_.size(); }

  void place(int i, const Placement& p) {
    trail_.push_back({Undo::Kind::place, i, 0, 0, 0.0});
    place_[i] = p;
    placed_[i] = 1;
    auto& o = occ_[p.resource];
    auto it = std::lower_bound(o.begin(), o.end(), std::make_pair(p.start, p.end));
    o.insert(it, {p.start, p.end});
    sigma_placed_ += m_.sigma(i, p.resource);
    sigma_rest_ -= m_.packet(i).max_sigma;
  }

  // Recomputes earliest start/end bounds and the lateness contribution of
  // deliverable k. Returns false when some member cannot be completed.
  bool refresh(int k) {
    const auto& members = m_.members(k);
    const auto& idx = m_.index();
    bool ok = true;
    Slot e_max = 0;
    bool any = false;
    for (int i : members) {
      if (placed(i)) {
        e_max = any ? std::max(e_max, place_[i].end) : place_[i].end;
        any = true;
        continue;
      }
      const auto& pi = m_.packet(i);
      Slot es = pi.release, end_floor = 0;
      for (const auto& e : idx.preds(i)) {
        Slot ps = placed(e.packet) ? place_[e.packet].start : es_[e.packet];
        Slot pe = placed(e.packet) ? place_[e.packet].end : ee_[e.packet];
        switch (e.kind) {
          case DependencyKind::finish_to_start: es = std::max(es, pe); break;
          case DependencyKind::start_to_start: es = std::max(es, ps); break;
          case DependencyKind::finish_to_finish: end_floor = std::max(end_floor, pe); break;
          case DependencyKind::start_to_finish: end_floor = std::max(end_floor, ps); break;
        }
      }
      Slot ee = kNever;
      for (int j : pi.eligible) ee = std::min(ee, m_.calendar(j).end_from(es, pi.effort));
      if (ee != kNever) ee = std::max(ee, end_floor);
      Slot latest = pi.latest_end;
      for (const auto& e : idx.succs(i)) {
        if (!placed(e.packet)) continue;
        const auto& sp = place_[e.packet];
        switch (e.kind) {
          case DependencyKind::finish_to_start: latest = std::min(latest, sp.start); break;
          case DependencyKind::finish_to_finish: latest = std::min(latest, sp.end); break;
          case DependencyKind::start_to_start: if (es > sp.start) ok = false; break;
          case DependencyKind::start_to_finish: if (es > sp.end) ok = false; break;
        }
      }
      if (ee == kNever || ee > latest) ok = false;
      if (es_[i] != es || ee_[i] != ee) {
        trail_.push_back({Undo::Kind::bound, i, es_[i], ee_[i], 0.0});
        es_[i] = es;
        ee_[i] = ee;
      }
      if (ee != kNever) {
        e_max = any ? std::max(e_max, ee) : ee;
        any = true;
      }
    }
    double c = 0.0;
    if (any && ok) {
      const auto& d = m_.instance().deliverables[k];
      c = m_.config().priority_penalty(d.priority) * static_cast<double>(e_max - d.input_start);
    }
    if (c != contrib_[k]) {
      trail_.push_back({Undo::Kind::contrib, k, 0, 0, contrib_[k]});
      contrib_sum_ += c - contrib_[k];
      contrib_[k] = c;
    }
    return ok;
  }

  void undo_to(std::size_t mark) {
    while (trail_.size() > mark) {
      Undo u = trail_.back();
      trail_.pop_back();
      switch (u.kind) {
        case Undo::Kind::place: {
          const auto& p = place_[u.id];
          auto& o = occ_[p.resource];
          auto it = std::lower_bound(o.begin(), o.end(), std::make_pair(p.start, p.end));
          o.erase(it);
          sigma_placed_ -= m_.sigma(u.id, p.resource);
          sigma_rest_ += m_.packet(u.id).max_sigma;
          placed_[u.id] = 0;
          break;
        }
        case Undo::Kind::bound:
          es_[u.id] = u.a;
          ee_[u.id] = u.b;
          break;
        case Undo::Kind::contrib:
          contrib_sum_ += u.value - contrib_[u.id];
          contrib_[u.id] = u.value;
          break;
      }
    }
  }

 private:
  struct Undo {
    enum class Kind { place, bound, contrib } kind;
    int id;
    Slot a, b;
    double value;
  };

  const CheckpointModel& m_;
  std::vector<Placement> place_;
  std::vector<char> placed_;
  std::vector<Slot> es_, ee_;
  std::vector<double> contrib_;
  double contrib_sum_ = 0.0;
  double sigma_placed_ = 0.0;
  double sigma_rest_ = 0.0;
  std::vector<std::vector<std::pair<Slot, Slot>>> occ_;
  std::vector<Undo> trail_;
};

// Bounds on the start of packet i given its placed neighbours.
struct StartWindow {
  Slot lo = 0;          // earliest start
  Slot end_floor = 0;   // end must be >= this
  Slot latest_end = 0;  // end must be <= this
  Slot start_cap = kNever;  // start must be <= this
};

inline StartWindow start_window(const CheckpointModel& m, const PartialSchedule& ps, int i) {
  const auto& pi = m.packet(i);
  StartWindow w{pi.release, 0, pi.latest_end, kNever};
  for (const auto& e : m.index().preds(i)) {
    Slot s = ps.placed(e.packet) ? ps.placement(e.packet).start : ps.earliest_start(e.packet);
    Slot f = ps.placed(e.packet) ? ps.placement(e.packet).end : ps.earliest_end(e.packet);
    switch (e.kind) {
      case DependencyKind::finish_to_start: w.lo = std::max(w.lo, f); break;
      case DependencyKind::start_to_start: w.lo = std::max(w.lo, s); break;
      case DependencyKind::finish_to_finish: w.end_floor = std::max(w.end_floor, f); break;
      case DependencyKind::start_to_finish: w.end_floor = std::max(w.end_floor, s); break;
    }
  }
  for (const auto& e : m.index().succs(i)) {
    if (!ps.placed(e.packet)) continue;
    const auto& sp = ps.placement(e.packet);
    switch (e.kind) {
      case DependencyKind::finish_to_start: w.latest_end = std::min(w.latest_end, sp.start); break;
      case DependencyKind::finish_to_finish: w.latest_end = std::min(w.latest_end, sp.end); break;
      case DependencyKind::start_to_start: w.start_cap = std::min(w.start_cap, sp.start); break;
      case DependencyKind::start_to_finish: w.start_cap = std::min(w.start_cap, sp.end); break;
    }
  }
  return w;
}

// Ascending feasible starts of packet i on resource j.
class StartStream {
 public:
  StartStream(const CheckpointModel& m, const PartialSchedule& ps, int i, int j, const StartWindow& w)
      : cal_(m.calendar(j)), occ_(ps.occupied(j)), w_(w), effort_(m.packet(i).effort),
        any_start_(m.packet(i).any_start), next_(w.lo) {
    if (w.end_floor > 0) next_ = std::max(next_, cal_.start_for_end_at_least(w.end_floor, effort_));
  }

  // Next (start, end) or nullopt when exhausted.
  std::optional<std::pair<Slot, Slot>> next() {
    Slot s = next_;
    while (true) {
      if (!any_start_) s = cal_.first_available(s);
      if (s >= kNever || s > w_.start_cap || s >= cal_.horizon()) return std::nullopt;
      Slot e = cal_.end_from(s, effort_);
      if (e == kNever || e > w_.latest_end) return std::nullopt;
      if (e < w_.end_floor) {
        ++s;
        continue;
      }
      // first occupied interval ending after s
      auto it = std::upper_bound(occ_.begin(), occ_.end(), s,
                                 [](Slot v, const std::pair<Slot, Slot>& iv) { return v < iv.second; });
      if (it != occ_.end() && it->first < e) {
        s = it->second;
        continue;
      }
      next_ = s + 1;
      return std::make_pair(s, e);
    }
  }

 private:
  const CalIndex& cal_;
  const std::vector<std::pair<Slot, Slot>>& occ_;
  StartWindow w_;
  Slot effort_;
  bool any_start_;
  Slot next_;
};

class CheckpointSearch {
 public:
  CheckpointSearch(const CheckpointModel& m, const std::vector<std::pair<int, Placement>>& frozen)
      : m_(m), ps_(m) {
    const std::size_t n = m.packet_count();
    pending_preds_.assign(n, 0);
    for (const auto& [i, p] : frozen) ps_.place(i, p);
    for (std::size_t i = 0; i < n; ++i) {
      if (ps_.placed(static_cast<int>(i))) continue;
      ++free_count_;
      for (const auto& e : m.index().preds(static_cast<int>(i)))
        if (!ps_.placed(e.packet)) ++pending_preds_[i];
      if (pending_preds_[i] == 0) ready_.insert(key(static_cast<int>(i)));
    }
    root_ok_ = true;
    for (std::size_t k = 0; k < m.deliverable_count(); ++k)
      root_ok_ = ps_.refresh(static_cast<int>(k)) && root_ok_;
  }

  void run(long node_limit, long time_limit_ms) {
    node_limit_ = node_limit;
    deadline_ = std::chrono::steady_clock::now() + std::chrono::milliseconds(time_limit_ms);
    if (root_ok_) dfs();
  }

  bool exhausted() const { return !stopped_; }
  bool has_incumbent() const { return !best_.empty() || (free_count_ == 0 && root_ok_); }
  double best_objective() const { return best_obj_; }
  long nodes() const { return nodes_; }
  const std::vector<Placement>& best() const { return best_; }

 private:
  using Key = std::tuple<int, Slot, int>;  // (-priority, input start, index)

  Key key(int i) const { return {-m_.packet(i).priority, m_.packet(i).input_start, i}; }

  bool out_of_budget() {
    if (stopped_) return true;
    if (nodes_ >= node_limit_) stopped_ = true;
    else if ((nodes_ & 255) == 0 && std::chrono::steady_clock::now() > deadline_) stopped_ = true;
    return stopped_;
  }

  void record_leaf() {
    double j = ps_.lower_bound();
    if (j < best_obj_ - 1e-9) {
      best_obj_ = j;
      best_.assign(m_.packet_count(), Placement{});
      for (std::size_t i = 0; i < m_.packet_count(); ++i) best_[i] = ps_.placement(static_cast<int>(i));
    }
  }

  bool bounded_out() const { return ps_.lower_bound() >= best_obj_ - 1e-9; }

  void dfs() {
    if (ready_.empty()) {
      if (placed_count_ == free_count_) record_leaf();
      return;
    }
    const int i = std::get<2>(*ready_.begin());
    const auto& pi = m_.packet(i);
    const StartWindow w = start_window(m_, ps_, i);
    const double lambda = m_.config().lambda;

    struct Head {
      double key;
      double neg_sigma;
      std::size_t rank;
      Slot start, end;
      bool operator>(const Head& o) const {
        return std::tie(key, neg_sigma, rank, start) > std::tie(o.key, o.neg_sigma, o.rank, o.start);
      }
    };
    std::vector<StartStream> streams;
    streams.reserve(pi.eligible.size());
    std::priority_queue<Head, std::vector<Head>, std::greater<Head>> heap;
    auto push_next = [&](std::size_t r) {
      if (auto c = streams[r].next()) {
        double sig = m_.sigma(i, pi.eligible[r]);
        heap.push({pi.penalty * static_cast<double>(c->second) - lambda * sig, -sig, r, c->first, c->second});
      }
    };
    for (std::size_t r = 0; r < pi.eligible.size(); ++r) {
      streams.emplace_back(m_, ps_, i, pi.eligible[r], w);
      push_next(r);
    }

    ready_.erase(ready_.begin());
    std::vector<int> newly_ready;
    for (const auto& e : m_.index().succs(i))
      if (!ps_.placed(e.packet) && --pending_preds_[e.packet] == 0) newly_ready.push_back(e.packet);
    for (int s : newly_ready) ready_.insert(key(s));

    std::vector<int> touched{pi.deliverable};
    for (const auto& e : m_.index().succs(i)) {
      int k = m_.packet(e.packet).deliverable;
      if (std::find(touched.begin(), touched.end(), k) == touched.end()) touched.push_back(k);
    }

    while (!heap.empty() && !out_of_budget()) {
      Head h = heap.top();
      heap.pop();
      const int j = pi.eligible[h.rank];
      const auto mark = ps_.mark();
      ps_.place(i, Placement{j, h.start, h.end});
      ++nodes_;
      bool ok = true;
      for (int k : touched) ok = ps_.refresh(k) && ok;
      if (!ok || bounded_out()) {
        // later starts on this resource can only be worse
        ps_.undo_to(mark);
        continue;
      }
      ++placed_count_;
      dfs();
      --placed_count_;
      ps_.undo_to(mark);
      push_next(h.rank);
    }

    for (int s : newly_ready) ready_.erase(key(s));
    for (const auto& e : m_.index().succs(i))
      if (!ps_.placed(e.packet)) ++pending_preds_[e.packet];
    ready_.insert(key(i));
  }

  const CheckpointModel& m_;
  PartialSchedule ps_;
  std::set<Key> ready_;
  std::vector<int> pending_preds_;
  std::size_t free_count_ = 0;
  std::size_t placed_count_ = 0;
  bool root_ok_ = false;
  long node_limit_ = 0;
  long nodes_ = 0;
  bool stopped_ = false;
  std::chrono::steady_clock::time_point deadline_;
  double best_obj_ = std::numeric_limits<double>::infinity();
  std::vector<Placement> best_;
};

inline std::vector<std::pair<int, Placement>> index_frozen(const Instance& inst,
                                                           const std::vector<Assignment>& frozen) {
  Schedule fs{frozen};
  std::vector<Violation> v;
  try {
    v = check_schedule(fs, inst, CheckOptions{false});
  } catch (const UnknownIdentifier& e) {
    throw FrozenConflict(std::string("frozen assignment: ") + e.what());
  }
  if (!v.empty())
    throw FrozenConflict("frozen assignments conflict: " + v.front().entity + " violates " +
                         v.front().constraint);
  InstanceIndex idx(inst);
  std::vector<std::pair<int, Placement>> out;
  for (const auto& a : frozen)
    out.emplace_back(idx.packet(a.packet_id),
                     Placement{idx.resource(a.resource_id), a.start_slot, a.end_slot});
  return out;
}

}  // namespace detail

inline CheckpointResult solve_checkpoint(const Instance& inst, const AffinityMatrix& sigma,
                                         const std::vector<Assignment>& frozen,
                                         const SolverConfig& cfg) {
  if (!cfg.valid()) throw std::invalid_argument("invalid solver config");
  auto frozen_idx = detail::index_frozen(inst, frozen);

  auto attempt = [&](bool use_dummies) {
    detail::CheckpointModel model(inst, sigma, cfg, use_dummies);
    detail::CheckpointSearch search(model, frozen_idx);
    search.run(cfg.node_limit, cfg.time_limit_ms);
    CheckpointResult r;
    r.nodes = search.nodes();
    if (!search.has_incumbent()) {
      r.status = SolveStatus::infeasible;
      return r;
    }
    r.status = search.exhausted() ? SolveStatus::optimal : SolveStatus::feasible_incumbent;
    std::vector<detail::Placement> place(inst.packets.size());
    if (!search.best().empty()) place = search.best();
    for (const auto& [i, p] : frozen_idx) place[i] = p;
    for (std::size_t i = 0; i < inst.packets.size(); ++i) {
      const auto& p = place[i];
      r.schedule.assignments.push_back(
          {inst.packets[i].id, inst.resources[p.resource].id, p.start, p.end});
      if (inst.resources[p.resource].is_dummy) r.dummy_hours_used += inst.packets[i].effort_hours;
    }
    r.objective = objective_value(r.schedule, inst, sigma, cfg);
    return r;
  };

  bool have_dummies = std::any_of(inst.resources.begin(), inst.resources.end(),
                                  [](const Resource& r) { return r.is_dummy; });
  CheckpointResult r = attempt(false);
  if (r.status == SolveStatus::infeasible && cfg.allow_dummy && have_dummies) {
    long spent = r.nodes;
    r = attempt(true);
    r.nodes += spent;
  }
  return r;
}

struct PropagationResult {
  bool contradiction = false;
  // Feasible start slots of every unscheduled packet, ascending.
  std::map<std::string, std::vector<Slot>> domains;
};

// Start-time domains of the packets not yet in `partial`, given dependency,
// calendar, committed-date, horizon and non-overlap constraints. Unscheduled
// predecessors contribute their earliest start/end bounds.
inline PropagationResult propagate(const Schedule& partial, const Instance& inst,
                                   const AffinityMatrix& sigma, const SolverConfig& cfg) {
  detail::CheckpointModel model(inst, sigma, cfg, cfg.allow_dummy);
  detail::PartialSchedule ps(model);
  InstanceIndex idx(inst);
  for (const auto& a : partial.assignments)
    ps.place(idx.packet(a.packet_id),
             detail::Placement{idx.resource(a.resource_id), a.start_slot, a.end_slot});
  PropagationResult out;
  for (std::size_t k = 0; k < inst.deliverables.size(); ++k)
    out.contradiction = !ps.refresh(static_cast<int>(k)) || out.contradiction;
  for (std::size_t i = 0; i < inst.packets.size(); ++i) {
    int ii = static_cast<int>(i);
    if (ps.placed(ii)) continue;
    std::set<Slot> starts;
    auto w = detail::start_window(model, ps, ii);
    for (int j : model.packet(ii).eligible) {
      detail::StartStream stream(model, ps, ii, j, w);
      while (auto c = stream.next()) starts.insert(c->first);
    }
    if (starts.empty()) out.contradiction = true;
    out.domains[inst.packets[i].id] = std::vector<Slot>(starts.begin(), starts.end());
  }
  return out;
}

}  // namespace coord
