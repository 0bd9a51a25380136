#pragma once

// JSON encoding of instances and schedules. See docs/instance-format.md.

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>

#include "coord/domain.hpp"
#include "json.hpp"

namespace coord {

using nlohmann::json;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

inline void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> known,
                                const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) throw ParseError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T get(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ParseError(where + ": missing key '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(where + "." + key + ": " + e.what());
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  return get<T>(obj, key, where);
}

inline std::string encode_attr(const Skill& s) {
  return std::string(to_string(s.kind)) + ":" + s.name;
}

inline Skill decode_attr(const std::string& s, const std::string& where) {
  auto colon = s.find(':');
  if (colon == std::string::npos) throw ParseError(where + ": attribute '" + s + "' lacks kind");
  auto kind = parse_attr_kind(std::string_view(s).substr(0, colon));
  if (!kind) throw ParseError(where + ": unknown attribute kind in '" + s + "'");
  return Skill{s.substr(colon + 1), *kind};
}

inline json encode_attrs(const AttrSet& attrs) {
  json a = json::array();
  for (const auto& s : attrs) a.push_back(encode_attr(s));
  return a;
}

inline AttrSet decode_attrs(const json& obj, const char* key, const std::string& where) {
  AttrSet out;
  for (const auto& s : get_or<std::vector<std::string>>(obj, key, {}, where))
    out.insert(decode_attr(s, where));
  return out;
}

inline json encode_calendar(const Calendar& c) {
  json blocks = json::array();
  for (auto [a, b] : c.unavailable_ranges()) blocks.push_back({a, b});
  return {{"horizon", c.horizon()}, {"unavailable", blocks}};
}

inline Calendar decode_calendar(const json& j, const std::string& where) {
  reject_unknown_keys(j, {"horizon", "unavailable"}, where);
  Slot horizon = get<Slot>(j, "horizon", where);
  if (horizon < 0) throw ParseError(where + ": negative horizon");
  Calendar c(horizon);
  for (const auto& r : get_or<std::vector<std::pair<Slot, Slot>>>(j, "unavailable", {}, where)) {
    if (r.first > r.second) throw ParseError(where + ": reversed unavailable range");
    c.block(r.first, r.second);
  }
  return c;
}

}  // namespace io

inline json to_json(const Instance& inst) {
  json res = json::array();
  for (const auto& r : inst.resources) {
    res.push_back({{"id", r.id},
                   {"attrs", io::encode_attrs(r.attrs)},
                   {"calendar", io::encode_calendar(r.calendar)},
                   {"is_dummy", r.is_dummy},
                   {"busy_until", r.busy_until ? json(*r.busy_until) : json(nullptr)}});
  }
  json dels = json::array();
  for (const auto& d : inst.deliverables) {
    dels.push_back({{"id", d.id},
                    {"packet_ids", d.packet_ids},
                    {"input_start", d.input_start},
                    {"committed_end", d.committed_end ? json(*d.committed_end) : json(nullptr)},
                    {"priority", d.priority}});
  }
  json pks = json::array();
  for (const auto& p : inst.packets) {
    pks.push_back({{"id", p.id},
                   {"deliverable_id", p.deliverable_id},
                   {"effort_hours", p.effort_hours},
                   {"mandatory_attrs", io::encode_attrs(p.mandatory_attrs)},
                   {"optional_attrs", io::encode_attrs(p.optional_attrs)},
                   {"arrival_slot", p.arrival_slot}});
  }
  json deps = json::array();
  for (const auto& d : inst.dependencies)
    deps.push_back({{"from", d.from_packet}, {"to", d.to_packet}, {"kind", to_string(d.kind)}});
  return {{"resources", res}, {"deliverables", dels}, {"packets", pks}, {"dependencies", deps}};
}

inline Instance instance_from_json(const json& j) {
  using namespace io;
  reject_unknown_keys(j, {"resources", "deliverables", "packets", "dependencies"}, "instance");
  Instance inst;
  for (const auto& r : j.value("resources", json::array())) {
    const std::string w = "resource";
    reject_unknown_keys(r, {"id", "attrs", "calendar", "is_dummy", "busy_until"}, w);
    Resource out;
    out.id = get<std::string>(r, "id", w);
    out.attrs = decode_attrs(r, "attrs", w + " " + out.id);
    out.calendar = decode_calendar(r.at("calendar"), w + " " + out.id + ".calendar");
    out.is_dummy = get_or<bool>(r, "is_dummy", false, w);
    if (r.contains("busy_until") && !r.at("busy_until").is_null())
      out.busy_until = get<Slot>(r, "busy_until", w);
    inst.resources.push_back(std::move(out));
  }
  for (const auto& d : j.value("deliverables", json::array())) {
    const std::string w = "deliverable";
    reject_unknown_keys(d, {"id", "packet_ids", "input_start", "committed_end", "priority"}, w);
    Deliverable out;
    out.id = get<std::string>(d, "id", w);
    out.packet_ids = get<std::vector<std::string>>(d, "packet_ids", w);
    out.input_start = get<Slot>(d, "input_start", w);
    if (d.contains("committed_end") && !d.at("committed_end").is_null())
      out.committed_end = get<Slot>(d, "committed_end", w);
    out.priority = get<int>(d, "priority", w);
    inst.deliverables.push_back(std::move(out));
  }
  for (const auto& p : j.value("packets", json::array())) {
    const std::string w = "packet";
    reject_unknown_keys(p, {"id", "deliverable_id", "effort_hours", "mandatory_attrs",
                            "optional_attrs", "arrival_slot"},
                        w);
    WorkPacket out;
    out.id = get<std::string>(p, "id", w);
    out.deliverable_id = get<std::string>(p, "deliverable_id", w);
    out.effort_hours = get<int>(p, "effort_hours", w);
    out.mandatory_attrs = decode_attrs(p, "mandatory_attrs", w + " " + out.id);
    out.optional_attrs = decode_attrs(p, "optional_attrs", w + " " + out.id);
    out.arrival_slot = get_or<Slot>(p, "arrival_slot", 0, w);
    inst.packets.push_back(std::move(out));
  }
  for (const auto& d : j.value("dependencies", json::array())) {
    const std::string w = "dependency";
    reject_unknown_keys(d, {"from", "to", "kind"}, w);
    Dependency out;
    out.from_packet = get<std::string>(d, "from", w);
    out.to_packet = get<std::string>(d, "to", w);
    auto kind = parse_dependency_kind(get_or<std::string>(d, "kind", "finish_to_start", w));
    if (!kind) throw ParseError(w + ": unknown kind");
    out.kind = *kind;
    inst.dependencies.push_back(std::move(out));
  }
  return inst;
}

inline json to_json(const Schedule& s) {
  json a = json::array();
  for (const auto& x : s.assignments)
    a.push_back({{"packet", x.packet_id},
                 {"resource", x.resource_id},
                 {"start", x.start_slot},
                 {"end", x.end_slot}});
  return {{"assignments", a}};
}

inline Schedule schedule_from_json(const json& j) {
  using namespace io;
  reject_unknown_keys(j, {"assignments"}, "schedule");
  Schedule s;
  for (const auto& x : j.value("assignments", json::array())) {
    reject_unknown_keys(x, {"packet", "resource", "start", "end"}, "assignment");
    s.assignments.push_back({get<std::string>(x, "packet", "assignment"),
                             get<std::string>(x, "resource", "assignment"),
                             get<Slot>(x, "start", "assignment"), get<Slot>(x, "end", "assignment")});
  }
  return s;
}

inline json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

inline Instance load_instance(const std::string& path) {
  try {
    return instance_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace coord
