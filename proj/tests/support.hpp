#pragma once

// Fixture builders and brute-force oracles shared by the test binaries.
// Oracles deliberately avoid the library's own checkers.

#include <cmath>
#include <functional>
#include <map>
#include <ostream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "coord/affinity.hpp"
#include "coord/cp_scheduler.hpp"
#include "coord/domain.hpp"
#include "coord/matching.hpp"

namespace coord {

inline void PrintTo(const Assignment& a, std::ostream* os) {
  *os << a.packet_id << ">" << a.resource_id << "[" << a.start_slot << "," << a.end_slot << ")";
}

}  // namespace coord

namespace coord::testing {

inline Skill role(const std::string& n) { return {n, AttrKind::role}; }
inline Skill loc(const std::string& n) { return {n, AttrKind::location}; }
inline Skill skill(const std::string& n) { return {n, AttrKind::skill}; }
inline Skill project(const std::string& n) { return {n, AttrKind::project}; }
inline Skill tool(const std::string& n) { return {n, AttrKind::tool}; }

inline Resource make_resource(const std::string& id, AttrSet attrs, Slot horizon = 100) {
  Resource r;
  r.id = id;
  r.attrs = std::move(attrs);
  r.calendar = Calendar(horizon);
  return r;
}

inline WorkPacket make_packet(const std::string& id, const std::string& deliverable, int effort,
                              AttrSet mandatory = {role("dev"), loc("us")}, AttrSet optional = {}) {
  WorkPacket p;
  p.id = id;
  p.deliverable_id = deliverable;
  p.effort_hours = effort;
  p.mandatory_attrs = std::move(mandatory);
  p.optional_attrs = std::move(optional);
  return p;
}

inline Deliverable make_deliverable(const std::string& id, std::vector<std::string> packets, Slot start = 0,
                                    int priority = 1, std::optional<Slot> committed = std::nullopt) {
  Deliverable d;
  d.id = id;
  d.packet_ids = std::move(packets);
  d.input_start = start;
  d.priority = priority;
  d.committed_end = committed;
  return d;
}

// One deliverable, one packet of `effort` hours, one always-available
// eligible worker.
inline Instance single_packet_instance(int effort, Slot horizon = 50, Slot start = 0) {
  Instance inst;
  inst.resources.push_back(make_resource("r1", {role("dev"), loc("us")}, horizon));
  inst.packets.push_back(make_packet("p1", "d1", effort));
  inst.deliverables.push_back(make_deliverable("d1", {"p1"}, start));
  return inst;
}

struct TinyConfig {
  int max_packets = 4;
  int max_resources = 3;
  Slot min_horizon = 8;
  Slot max_horizon = 30;
  int max_effort = 6;
  bool all_dependency_kinds = true;
  double committed_prob = 0.3;
  double holiday_prob = 0.15;
  double dummy_prob = 0.0;
};

// Random valid instance. Two roles and one location; packets carry a few
// optional attributes so affinity varies across resources.
inline Instance random_tiny_instance(std::mt19937_64& rng, const TinyConfig& cfg = {}) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto coin = [&](double p) { return std::bernoulli_distribution(p)(rng); };
  const Slot T = pick(static_cast<int>(cfg.min_horizon), static_cast<int>(cfg.max_horizon));
  const char* roles[] = {"dev", "qa"};
  Instance inst;
  const int nr = pick(1, cfg.max_resources);
  for (int j = 0; j < nr; ++j) {
    AttrSet attrs{role(roles[pick(0, 1)]), loc("us")};
    if (coin(0.5)) attrs.insert(skill("java"));
    if (coin(0.5)) attrs.insert(project("apollo"));
    Resource r = make_resource("r" + std::to_string(j + 1), attrs, T);
    r.is_dummy = coin(cfg.dummy_prob);
    if (!r.is_dummy)
      for (Slot t = 0; t < T; ++t)
        if (coin(cfg.holiday_prob)) r.calendar.set(t, false);
    inst.resources.push_back(std::move(r));
  }
  const int np = pick(0, cfg.max_packets);
  const int nd = np == 0 ? 0 : pick(1, std::min(2, np));
  for (int k = 0; k < nd; ++k) {
    Slot st = pick(0, static_cast<int>(T / 3));
    std::optional<Slot> committed;
    if (coin(cfg.committed_prob)) committed = st + pick(2, static_cast<int>(T));
    inst.deliverables.push_back(make_deliverable("d" + std::to_string(k + 1), {}, st, pick(1, 3), committed));
  }
  for (int i = 0; i < np; ++i) {
    auto& d = inst.deliverables[i < nd ? i : pick(0, nd - 1)];
    // Mandatory attributes copied from a real resource keep most packets schedulable.
    const auto& proto = inst.resources[pick(0, nr - 1)];
    AttrSet mand;
    for (const auto& a : proto.attrs)
      if (a.kind == AttrKind::role || a.kind == AttrKind::location) mand.insert(a);
    AttrSet opt;
    if (coin(0.6)) opt.insert(skill("java"));
    if (coin(0.4)) opt.insert(project("apollo"));
    std::string id = "p" + std::to_string(i + 1);
    inst.packets.push_back(make_packet(id, d.id, pick(1, cfg.max_effort), mand, opt));
    inst.packets.back().arrival_slot = d.input_start;
    d.packet_ids.push_back(id);
  }
  // Edges only from lower to higher index keep the graph acyclic.
  for (int a = 0; a < np; ++a)
    for (int b = a + 1; b < np; ++b)
      if (coin(0.25)) {
        DependencyKind kind = DependencyKind::finish_to_start;
        if (cfg.all_dependency_kinds) kind = static_cast<DependencyKind>(pick(0, 3));
        inst.dependencies.push_back({inst.packets[a].id, inst.packets[b].id, kind});
      }
  return inst;
}

struct OracleResult {
  std::optional<double> best;  // nullopt: no feasible schedule
  std::vector<Assignment> argmin;
  long leaves = 0;
};

inline bool oracle_dependency_ok(DependencyKind k, Slot fs, Slot fe, Slot ts, Slot te) {
  switch (k) {
    case DependencyKind::finish_to_start: return fe <= ts;
    case DependencyKind::start_to_start: return fs <= ts;
    case DependencyKind::finish_to_finish: return fe <= te;
    case DependencyKind::start_to_finish: return fs <= te;
  }
  return false;
}

// Exhaustive minimum of J over every (resource, start slot) choice per
// packet, with the end placed after `effort` available slots. Pruning is
// limited to pairwise constraints between already placed packets, so the
// search visits every feasible complete schedule.
inline OracleResult enumerate_optimum(const Instance& inst, const AffinityMatrix& sigma, const SolverConfig& cfg,
                                      const std::vector<Assignment>& frozen = {}) {
  const std::size_t n = inst.packets.size();
  std::vector<int> deliv(n, -1);
  for (std::size_t k = 0; k < inst.deliverables.size(); ++k)
    for (const auto& pid : inst.deliverables[k].packet_ids)
      for (std::size_t i = 0; i < n; ++i)
        if (inst.packets[i].id == pid) deliv[i] = static_cast<int>(k);
  auto packet_index = [&](const std::string& id) {
    for (std::size_t i = 0; i < n; ++i)
      if (inst.packets[i].id == id) return static_cast<int>(i);
    return -1;
  };
  auto resource_index = [&](const std::string& id) {
    for (std::size_t j = 0; j < inst.resources.size(); ++j)
      if (inst.resources[j].id == id) return static_cast<int>(j);
    return -1;
  };
  struct Choice {
    int r;
    Slot s, e;
  };
  std::vector<std::vector<Choice>> options(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = inst.packets[i];
    const auto& d = inst.deliverables[deliv[i]];
    for (std::size_t j = 0; j < inst.resources.size(); ++j) {
      const auto& r = inst.resources[j];
      if (r.is_dummy && !cfg.allow_dummy) continue;
      bool eligible = true;
      for (const auto& a : p.mandatory_attrs) eligible = eligible && r.attrs.count(a) > 0;
      if (!eligible) continue;
      for (Slot s = 0; s < cfg.horizon_T; ++s) {
        if (s < d.input_start || s < cfg.release_slot) continue;
        Slot left = p.effort_hours, e = -1;
        for (Slot t = s; t < std::min(cfg.horizon_T, r.calendar.horizon()); ++t)
          if (r.calendar.available(t) && --left == 0) {
            e = t + 1;
            break;
          }
        if (e < 0) continue;
        if (d.committed_end && e > *d.committed_end) continue;
        options[i].push_back({static_cast<int>(j), s, e});
      }
    }
  }
  for (const auto& a : frozen) {
    int i = packet_index(a.packet_id);
    options[i] = {{resource_index(a.resource_id), a.start_slot, a.end_slot}};
  }
  struct Dep {
    int from, to;
    DependencyKind kind;
  };
  std::vector<Dep> deps;
  for (const auto& d : inst.dependencies) deps.push_back({packet_index(d.from_packet), packet_index(d.to_packet), d.kind});

  OracleResult res;
  std::vector<Choice> cur(n);
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == n) {
      ++res.leaves;
      std::vector<Slot> end(inst.deliverables.size(), std::numeric_limits<Slot>::min());
      double match = 0;
      for (std::size_t x = 0; x < n; ++x) {
        end[deliv[x]] = std::max(end[deliv[x]], cur[x].e);
        match += sigma(x, cur[x].r);
      }
      double J = 0;
      for (std::size_t k = 0; k < inst.deliverables.size(); ++k)
        if (end[k] != std::numeric_limits<Slot>::min())
          J += std::pow(cfg.priority_base, inst.deliverables[k].priority) *
               static_cast<double>(end[k] - inst.deliverables[k].input_start);
      J -= cfg.lambda * match;
      if (!res.best || J < *res.best - 1e-12) {
        res.best = J;
        res.argmin.clear();
        for (std::size_t x = 0; x < n; ++x)
          res.argmin.push_back({inst.packets[x].id, inst.resources[cur[x].r].id, cur[x].s, cur[x].e});
      }
      return;
    }
    for (const auto& c : options[i]) {
      bool ok = true;
      for (std::size_t x = 0; x < i && ok; ++x)
        if (cur[x].r == c.r && cur[x].s < c.e && c.s < cur[x].e) ok = false;
      for (const auto& d : deps) {
        if (!ok) break;
        if (d.to == static_cast<int>(i) && d.from < d.to)
          ok = oracle_dependency_ok(d.kind, cur[d.from].s, cur[d.from].e, c.s, c.e);
        else if (d.from == static_cast<int>(i) && d.to < d.from)
          ok = oracle_dependency_ok(d.kind, c.s, c.e, cur[d.to].s, cur[d.to].e);
      }
      if (!ok) continue;
      cur[i] = c;
      rec(i + 1);
    }
  };
  rec(0);
  return res;
}

// Slot-by-slot verification of a complete schedule, independent of
// check_schedule. Returns true when every invariant holds.
inline bool slot_verifier(const Schedule& s, const Instance& inst) {
  std::map<std::string, int> count;
  for (const auto& a : s.assignments) ++count[a.packet_id];
  for (const auto& p : inst.packets)
    if (count[p.id] != 1) return false;
  if (s.assignments.size() != inst.packets.size()) return false;
  std::map<std::pair<std::string, Slot>, int> busy;
  std::map<std::string, const Assignment*> by_packet;
  for (const auto& a : s.assignments) {
    by_packet[a.packet_id] = &a;
    const WorkPacket* p = nullptr;
    for (const auto& x : inst.packets)
      if (x.id == a.packet_id) p = &x;
    const Resource* r = nullptr;
    for (const auto& x : inst.resources)
      if (x.id == a.resource_id) r = &x;
    if (!p || !r) return false;
    for (const auto& m : p->mandatory_attrs)
      if (!r->attrs.count(m)) return false;
    if (a.end_slot <= a.start_slot) return false;
    int worked = 0;
    for (Slot t = a.start_slot; t < a.end_slot; ++t)
      if (r->calendar.available(t)) {
        ++worked;
        if (++busy[{r->id, t}] > 1) return false;
      }
    if (worked < p->effort_hours) return false;
    for (const auto& d : inst.deliverables) {
      if (d.id != p->deliverable_id) continue;
      if (a.start_slot < d.input_start) return false;
      if (d.committed_end && a.end_slot > *d.committed_end) return false;
    }
  }
  for (const auto& d : inst.dependencies) {
    const auto* f = by_packet[d.from_packet];
    const auto* t = by_packet[d.to_packet];
    if (!oracle_dependency_ok(d.kind, f->start_slot, f->end_slot, t->start_slot, t->end_slot)) return false;
  }
  return true;
}

}  // namespace coord::testing
