#pragma once

// Core data model: work packets, deliverables, resources, schedules.
//
// Time is measured in integer slots of one hour. All intervals are half-open
// [start, end). An assignment consumes only the calendar-available slots of
// its resource, so a holiday inside [start, end) stretches the end slot.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

namespace coord {

using Slot = std::int64_t;

enum class AttrKind { role, location, skill, project, application, tool, account };

inline constexpr AttrKind kAllAttrKinds[] = {
    AttrKind::role,    AttrKind::location,    AttrKind::skill, AttrKind::project,
    AttrKind::application, AttrKind::tool, AttrKind::account};

inline std::string_view to_string(AttrKind k) {
  switch (k) {
    case AttrKind::role: return "role";
    case AttrKind::location: return "location";
    case AttrKind::skill: return "skill";
    case AttrKind::project: return "project";
    case AttrKind::application: return "application";
    case AttrKind::tool: return "tool";
    case AttrKind::account: return "account";
  }
  return "?";
}

inline std::optional<AttrKind> parse_attr_kind(std::string_view s) {
  for (AttrKind k : kAllAttrKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct Skill {
  std::string name;
  AttrKind kind = AttrKind::skill;

  auto operator<=>(const Skill&) const = default;
};

using AttrSet = std::set<Skill>;

// Availability bitmap over [0, horizon). Slots at or past the horizon are
// unavailable.
class Calendar {
 public:
  Calendar() = default;
  explicit Calendar(Slot horizon, bool available = true)
      : bits_(static_cast<std::size_t>(std::max<Slot>(horizon, 0)), available ? 1 : 0) {}

  static Calendar always(Slot horizon) { return Calendar(horizon, true); }

  Slot horizon() const { return static_cast<Slot>(bits_.size()); }

  bool available(Slot t) const {
    return t >= 0 && t < horizon() && bits_[static_cast<std::size_t>(t)] != 0;
  }

  void set(Slot t, bool available) {
    if (t < 0 || t >= horizon()) throw std::out_of_range("calendar slot out of range");
    bits_[static_cast<std::size_t>(t)] = available ? 1 : 0;
  }

  // Marks [from, to) unavailable, clipped to the horizon.
  void block(Slot from, Slot to) {
    for (Slot t = std::max<Slot>(from, 0); t < std::min(to, horizon()); ++t)
      bits_[static_cast<std::size_t>(t)] = 0;
  }

  // Number of available slots in [from, to).
  Slot available_between(Slot from, Slot to) const {
    Slot n = 0;
    for (Slot t = std::max<Slot>(from, 0); t < std::min(to, horizon()); ++t)
      n += bits_[static_cast<std::size_t>(t)];
    return n;
  }

  bool all_available() const {
    return std::all_of(bits_.begin(), bits_.end(), [](auto b) { return b != 0; });
  }

  // Maximal runs of unavailable slots as half-open intervals.
  std::vector<std::pair<Slot, Slot>> unavailable_ranges() const {
    std::vector<std::pair<Slot, Slot>> out;
    Slot t = 0;
    while (t < horizon()) {
      if (bits_[static_cast<std::size_t>(t)] == 0) {
        Slot s = t;
        while (t < horizon() && bits_[static_cast<std::size_t>(t)] == 0) ++t;
        out.emplace_back(s, t);
      } else {
        ++t;
      }
    }
    return out;
  }

  // End slot (exclusive) after consuming `effort` available slots starting at
  // `start`, or nullopt if the horizon is reached first.
  std::optional<Slot> end_after(Slot start, Slot effort) const {
    Slot left = effort;
    for (Slot t = std::max<Slot>(start, 0); t < horizon(); ++t) {
      if (bits_[static_cast<std::size_t>(t)] != 0 && --left == 0) return t + 1;
    }
    return std::nullopt;
  }

  bool operator==(const Calendar&) const = default;

 private:
  std::vector<std::uint8_t> bits_;
};

struct WorkPacket {
  std::string id;
  std::string deliverable_id;
  int effort_hours = 1;
  AttrSet mandatory_attrs;
  AttrSet optional_attrs;
  Slot arrival_slot = 0;

  bool operator==(const WorkPacket&) const = default;
};

enum class DependencyKind { finish_to_start, start_to_start, finish_to_finish, start_to_finish };

inline std::string_view to_string(DependencyKind k) {
  switch (k) {
    case DependencyKind::finish_to_start: return "finish_to_start";
    case DependencyKind::start_to_start: return "start_to_start";
    case DependencyKind::finish_to_finish: return "finish_to_finish";
    case DependencyKind::start_to_finish: return "start_to_finish";
  }
  return "?";
}

inline std::optional<DependencyKind> parse_dependency_kind(std::string_view s) {
  for (auto k : {DependencyKind::finish_to_start, DependencyKind::start_to_start,
                 DependencyKind::finish_to_finish, DependencyKind::start_to_finish})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

struct Dependency {
  std::string from_packet;
  std::string to_packet;
  DependencyKind kind = DependencyKind::finish_to_start;

  bool operator==(const Dependency&) const = default;
};

// Whether (start/end of `from`, start/end of `to`) satisfy the dependency.
inline bool dependency_satisfied(DependencyKind kind, Slot from_start, Slot from_end,
                                 Slot to_start, Slot to_end) {
  switch (kind) {
    case DependencyKind::finish_to_start: return from_end <= to_start;
    case DependencyKind::start_to_start: return from_start <= to_start;
    case DependencyKind::finish_to_finish: return from_end <= to_end;
    case DependencyKind::start_to_finish: return from_start <= to_end;
  }
  return false;
}

struct Deliverable {
  std::string id;
  std::vector<std::string> packet_ids;
  Slot input_start = 0;
  std::optional<Slot> committed_end;
  int priority = 1;

  bool operator==(const Deliverable&) const = default;
};

struct Resource {
  std::string id;
  AttrSet attrs;
  Calendar calendar;
  bool is_dummy = false;
  std::optional<Slot> busy_until;

  bool operator==(const Resource&) const = default;
};

struct Instance {
  std::vector<Resource> resources;
  std::vector<Deliverable> deliverables;
  std::vector<WorkPacket> packets;
  std::vector<Dependency> dependencies;

  bool operator==(const Instance&) const = default;
};

struct Assignment {
  std::string packet_id;
  std::string resource_id;
  Slot start_slot = 0;
  Slot end_slot = 0;

  bool operator==(const Assignment&) const = default;
  auto operator<=>(const Assignment&) const = default;
};

// The work-system plan. Stored as a list so that malformed plans (a packet
// placed twice) remain representable and can be reported by check_schedule.
struct Schedule {
  std::vector<Assignment> assignments;

  const Assignment* find(std::string_view packet_id) const {
    for (const auto& a : assignments)
      if (a.packet_id == packet_id) return &a;
    return nullptr;
  }

  bool operator==(const Schedule&) const = default;
};

struct Violation {
  std::string entity;
  std::string constraint;
  std::string detail;

  auto operator<=>(const Violation&) const = default;
};

class UnknownIdentifier : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Id lookups and adjacency over an instance. Holds a reference: the instance
// must outlive the index.
class InstanceIndex {
 public:
  struct Edge {
    int packet;
    DependencyKind kind;
  };

  explicit InstanceIndex(const Instance& inst) : inst_(&inst) {
    for (std::size_t i = 0; i < inst.packets.size(); ++i)
      packet_.emplace(inst.packets[i].id, static_cast<int>(i));
    for (std::size_t j = 0; j < inst.resources.size(); ++j)
      resource_.emplace(inst.resources[j].id, static_cast<int>(j));
    for (std::size_t k = 0; k < inst.deliverables.size(); ++k)
      deliverable_.emplace(inst.deliverables[k].id, static_cast<int>(k));
    deliverable_of_.assign(inst.packets.size(), -1);
    for (std::size_t i = 0; i < inst.packets.size(); ++i) {
      auto it = deliverable_.find(inst.packets[i].deliverable_id);
      if (it != deliverable_.end()) deliverable_of_[i] = it->second;
    }
    preds_.resize(inst.packets.size());
    succs_.resize(inst.packets.size());
    for (const auto& d : inst.dependencies) {
      auto f = packet_.find(d.from_packet);
      auto t = packet_.find(d.to_packet);
      if (f == packet_.end() || t == packet_.end() || f->second == t->second) continue;
      preds_[t->second].push_back({f->second, d.kind});
      succs_[f->second].push_back({t->second, d.kind});
    }
  }

  const Instance& instance() const { return *inst_; }

  std::optional<int> find_packet(std::string_view id) const { return lookup(packet_, id); }
  std::optional<int> find_resource(std::string_view id) const { return lookup(resource_, id); }
  std::optional<int> find_deliverable(std::string_view id) const {
    return lookup(deliverable_, id);
  }

  int packet(std::string_view id) const { return require(packet_, id, "packet"); }
  int resource(std::string_view id) const { return require(resource_, id, "resource"); }
  int deliverable(std::string_view id) const {
    return require(deliverable_, id, "deliverable");
  }

  // -1 when the packet names a missing deliverable.
  int deliverable_of(int packet) const { return deliverable_of_[packet]; }
  const std::vector<Edge>& preds(int packet) const { return preds_[packet]; }
  const std::vector<Edge>& succs(int packet) const { return succs_[packet]; }

 private:
  using Map = std::unordered_map<std::string, int>;

  static std::optional<int> lookup(const Map& m, std::string_view id) {
    auto it = m.find(std::string(id));
    if (it == m.end()) return std::nullopt;
    return it->second;
  }
  static int require(const Map& m, std::string_view id, const char* what) {
    auto r = lookup(m, id);
    if (!r) throw UnknownIdentifier(std::string("unknown ") + what + " '" + std::string(id) + "'");
    return *r;
  }

  const Instance* inst_;
  Map packet_, resource_, deliverable_;
  std::vector<int> deliverable_of_;
  std::vector<std::vector<Edge>> preds_, succs_;
};

inline bool is_eligible(const WorkPacket& p, const Resource& r) {
  return std::includes(r.attrs.begin(), r.attrs.end(), p.mandatory_attrs.begin(),
                       p.mandatory_attrs.end());
}

struct ValidationOptions {
  int max_priority = 3;
  Slot now = 0;
};

namespace detail {

inline void add(std::vector<Violation>& out, std::string entity, std::string constraint,
                std::string detail = {}) {
  out.push_back({std::move(entity), std::move(constraint), std::move(detail)});
}

template <class T>
void check_unique_ids(const std::vector<T>& items, const char* what, std::vector<Violation>& out) {
  std::set<std::string> seen;
  for (const auto& x : items)
    if (!seen.insert(x.id).second) add(out, std::string(what) + " " + x.id, "unique-id");
}

// Packets on a dependency cycle, found by iterative three-colour DFS.
inline std::set<int> packets_on_cycles(const InstanceIndex& idx, std::size_t n) {
  std::set<int> bad;
  std::vector<int> color(n, 0);
  std::vector<int> parent(n, -1);
  for (std::size_t root = 0; root < n; ++root) {
    if (color[root] != 0) continue;
    std::vector<std::pair<int, std::size_t>> stack{{static_cast<int>(root), 0}};
    color[root] = 1;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      const auto& out = idx.succs(u);
      if (next < out.size()) {
        int v = out[next++].packet;
        if (color[v] == 0) {
          color[v] = 1;
          parent[v] = u;
          stack.emplace_back(v, 0);
        } else if (color[v] == 1) {
          for (int w = u; w != -1 && w != v; w = parent[w]) bad.insert(w);
          bad.insert(v);
        }
      } else {
        color[u] = 2;
        stack.pop_back();
      }
    }
  }
  return bad;
}

}  // namespace detail

// Structural validity of an instance. Violations are returned sorted so the
// output is independent of input ordering.
inline std::vector<Violation> validate_instance(const Instance& inst,
                                                const ValidationOptions& opt = {}) {
  using detail::add;
  std::vector<Violation> out;
  detail::check_unique_ids(inst.packets, "packet", out);
  detail::check_unique_ids(inst.resources, "resource", out);
  detail::check_unique_ids(inst.deliverables, "deliverable", out);

  InstanceIndex idx(inst);

  for (std::size_t i = 0; i < inst.packets.size(); ++i) {
    const auto& p = inst.packets[i];
    const std::string ent = "packet " + p.id;
    if (p.effort_hours < 1) add(out, ent, "effort-positivity", std::to_string(p.effort_hours));
    if (idx.deliverable_of(static_cast<int>(i)) < 0)
      add(out, ent, "deliverable-reference", p.deliverable_id);
    int roles = 0, locations = 0;
    for (const auto& a : p.mandatory_attrs) {
      roles += a.kind == AttrKind::role;
      locations += a.kind == AttrKind::location;
    }
    if (roles != 1 || locations != 1) add(out, ent, "mandatory-role-location");
    if (p.arrival_slot < 0) add(out, ent, "slot-nonnegative");
  }

  for (const auto& d : inst.dependencies) {
    const std::string ent = "dependency " + d.from_packet + "->" + d.to_packet;
    if (d.from_packet == d.to_packet) add(out, ent, "dependency-distinct");
    if (!idx.find_packet(d.from_packet) || !idx.find_packet(d.to_packet))
      add(out, ent, "dependency-reference");
  }
  for (int i : detail::packets_on_cycles(idx, inst.packets.size()))
    add(out, "packet " + inst.packets[i].id, "acyclicity");

  for (const auto& d : inst.deliverables) {
    const std::string ent = "deliverable " + d.id;
    if (d.packet_ids.empty()) add(out, ent, "deliverable-nonempty");
    std::set<std::string> seen;
    for (const auto& pid : d.packet_ids) {
      if (!seen.insert(pid).second) add(out, ent, "deliverable-membership", "duplicate " + pid);
      auto pi = idx.find_packet(pid);
      if (!pi) {
        add(out, ent, "deliverable-membership", "unknown " + pid);
      } else if (inst.packets[*pi].deliverable_id != d.id) {
        add(out, ent, "deliverable-membership", pid + " belongs elsewhere");
      }
    }
    if (d.committed_end && *d.committed_end <= d.input_start)
      add(out, ent, "committed-after-start");
    if (d.priority < 1 || d.priority > opt.max_priority) add(out, ent, "priority-range");
    if (d.input_start < 0) add(out, ent, "slot-nonnegative");
  }
  // Every packet must be listed by its own deliverable.
  for (std::size_t i = 0; i < inst.packets.size(); ++i) {
    int k = idx.deliverable_of(static_cast<int>(i));
    if (k < 0) continue;
    const auto& ids = inst.deliverables[k].packet_ids;
    if (std::find(ids.begin(), ids.end(), inst.packets[i].id) == ids.end())
      add(out, "packet " + inst.packets[i].id, "deliverable-membership", "not listed");
  }

  for (const auto& r : inst.resources) {
    const std::string ent = "resource " + r.id;
    if (r.is_dummy && !r.calendar.all_available()) add(out, ent, "dummy-calendar");
    if (r.busy_until && *r.busy_until < opt.now) add(out, ent, "busy-until-current");
  }

  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct CheckOptions {
  // When false, packets absent from the schedule are not reported and
  // dependencies with an unscheduled endpoint are skipped.
  bool require_complete = true;
};

// Checks a schedule against every constraint of the checkpoint program.
// Throws UnknownIdentifier when the schedule references entities absent from
// the instance.
inline std::vector<Violation> check_schedule(const Schedule& s, const Instance& inst,
                                             const CheckOptions& opt = {}) {
  using detail::add;
  InstanceIndex idx(inst);
  std::vector<Violation> out;

  std::vector<std::vector<const Assignment*>> by_packet(inst.packets.size());
  std::vector<std::vector<const Assignment*>> by_resource(inst.resources.size());
  for (const auto& a : s.assignments) {
    int i = idx.packet(a.packet_id);
    int j = idx.resource(a.resource_id);
    by_packet[i].push_back(&a);
    by_resource[j].push_back(&a);
  }

  for (std::size_t i = 0; i < inst.packets.size(); ++i) {
    const auto& p = inst.packets[i];
    const std::string ent = "packet " + p.id;
    const auto& as = by_packet[i];
    if (as.size() > 1) add(out, ent, "one-packet-to-one-resource", "assigned more than once");
    if (as.empty() && opt.require_complete)
      add(out, ent, "one-packet-to-one-resource", "unassigned");
    for (const Assignment* a : as) {
      const auto& r = inst.resources[idx.resource(a->resource_id)];
      if (!is_eligible(p, r)) add(out, ent, "matching-location-and-role", r.id);
      if (a->end_slot <= a->start_slot ||
          r.calendar.available_between(a->start_slot, a->end_slot) < p.effort_hours)
        add(out, ent, "planned-end-accounts-for-effort");
      int k = idx.deliverable_of(static_cast<int>(i));
      if (k >= 0) {
        const auto& d = inst.deliverables[k];
        if (a->start_slot < d.input_start) add(out, ent, "planned-start-after-input-start");
        if (d.committed_end && a->end_slot > *d.committed_end)
          add(out, ent, "end-obeys-committed-date");
      }
    }
  }

  for (std::size_t j = 0; j < inst.resources.size(); ++j) {
    auto as = by_resource[j];
    std::sort(as.begin(), as.end(), [](auto* a, auto* b) {
      return std::tie(a->start_slot, a->end_slot) < std::tie(b->start_slot, b->end_slot);
    });
    for (std::size_t x = 1; x < as.size(); ++x) {
      if (as[x]->start_slot < as[x - 1]->end_slot)
        add(out, "resource " + inst.resources[j].id, "one-packet-at-a-time",
            as[x - 1]->packet_id + "/" + as[x]->packet_id);
    }
  }

  for (const auto& d : inst.dependencies) {
    auto fi = idx.find_packet(d.from_packet);
    auto ti = idx.find_packet(d.to_packet);
    if (!fi || !ti) continue;
    const auto& fa = by_packet[*fi];
    const auto& ta = by_packet[*ti];
    if (fa.empty() || ta.empty()) continue;
    for (auto* a : fa)
      for (auto* b : ta)
        if (!dependency_satisfied(d.kind, a->start_slot, a->end_slot, b->start_slot, b->end_slot))
          add(out, "dependency " + d.from_packet + "->" + d.to_packet, "sequential-dependency",
              std::string(to_string(d.kind)));
  }

  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// S_k = min start and E_k = max end over the scheduled members of each
// deliverable; nullopt for deliverables with no scheduled member.
struct DeliverableWindow {
  Slot start;
  Slot end;
};

inline std::vector<std::optional<DeliverableWindow>> deliverable_windows(const Schedule& s,
                                                                         const Instance& inst) {
  InstanceIndex idx(inst);
  std::vector<std::optional<DeliverableWindow>> w(inst.deliverables.size());
  for (const auto& a : s.assignments) {
    int k = idx.deliverable_of(idx.packet(a.packet_id));
    if (k < 0) continue;
    if (!w[k]) {
      w[k] = DeliverableWindow{a.start_slot, a.end_slot};
    } else {
      w[k]->start = std::min(w[k]->start, a.start_slot);
      w[k]->end = std::max(w[k]->end, a.end_slot);
    }
  }
  return w;
}

// Per-resource map slot -> packet id for the working slots of each
// assignment (the available slots inside [start, end)).
inline std::map<std::pair<std::string, Slot>, std::string> occupancy(const Schedule& s,
                                                                     const Instance& inst) {
  InstanceIndex idx(inst);
  std::map<std::pair<std::string, Slot>, std::string> occ;
  for (const auto& a : s.assignments) {
    const auto& cal = inst.resources[idx.resource(a.resource_id)].calendar;
    for (Slot t = a.start_slot; t < a.end_slot; ++t)
      if (cal.available(t)) occ[{a.resource_id, t}] = a.packet_id;
  }
  return occ;
}

}  // namespace coord
