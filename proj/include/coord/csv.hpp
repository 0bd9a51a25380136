#pragma once

// CSV writers for run logs and sweep tables. Numbers are printed with a fixed
// number of decimals so that outputs are byte-stable across runs.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "coord/rhc.hpp"
#include "coord/simulator.hpp"

namespace coord::csv {

inline std::string real(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  std::string s = buf;
  if (s == "-0.0000") s = "0.0000";
  return s;
}

inline std::string real(const std::optional<double>& x) { return x ? real(*x) : std::string(); }

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline const char* const kRunsHeader =
    "load,mode,seed,tardy_pct,utilization_pct,long_run_avg_cost,dummy_hours,"
    "max_resource_util_pct,saturated,makespan\n";

inline const char* const kSweepHeader =
    "load,mode,runs,tardy_pct_mean,tardy_pct_sd,utilization_pct_mean,utilization_pct_sd,"
    "long_run_avg_cost_mean,long_run_avg_cost_sd,max_resource_util_pct_mean,"
    "max_resource_util_pct_sd,dummy_hours_mean,saturated_fraction,seeds\n";

inline const char* const kEventsHeader = "time,kind,subject,actions,objective,matching_cost,commit_cost\n";

inline std::string run_row(const RunRow& r) {
  const auto& m = r.metrics;
  std::ostringstream o;
  o << r.load << ',' << to_string(r.mode) << ',' << r.seed << ',' << real(m.tardy_pct) << ','
    << real(m.utilization_pct) << ',' << real(m.long_run_avg_cost) << ',' << m.dummy_hours << ','
    << real(m.max_resource_util_pct) << ',' << (m.saturated ? 1 : 0) << ',' << m.makespan << '\n';
  return o.str();
}

inline std::string runs_table(const std::vector<RunRow>& rows) {
  std::string out = kRunsHeader;
  for (const auto& r : rows) out += run_row(r);
  return out;
}

inline std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::string out = kSweepHeader;
  for (const auto& r : rows) {
    std::ostringstream o;
    std::string seeds;
    for (auto s : r.seeds) seeds += (seeds.empty() ? "" : ";") + std::to_string(s);
    o << r.load << ',' << to_string(r.mode) << ',' << r.runs << ',' << real(r.tardy_pct.mean) << ','
      << real(r.tardy_pct.sd) << ',' << real(r.utilization_pct.mean) << ',' << real(r.utilization_pct.sd)
      << ',' << real(r.long_run_avg_cost.mean) << ',' << real(r.long_run_avg_cost.sd) << ','
      << real(r.max_resource_util_pct.mean) << ',' << real(r.max_resource_util_pct.sd) << ','
      << real(r.dummy_hours.mean) << ',' << real(r.saturated_fraction) << ',' << seeds << '\n';
    out += o.str();
  }
  return out;
}

inline std::string events_table(const std::vector<LogRecord>& log) {
  std::string out = kEventsHeader;
  for (const auto& r : log) {
    out += std::to_string(r.time) + ',' + quote(r.kind) + ',' + quote(r.subject) + ',' + quote(r.actions) +
           ',' + real(r.objective) + ',' + real(r.matching_cost) + ',' + real(r.commit_cost) + '\n';
  }
  return out;
}

// Writes through a sibling temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << content;
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace coord::csv
