#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "coord/instance_io.hpp"
#include "coord/simulator.hpp"
#include "support.hpp"

using namespace coord;
using namespace coord::testing;

namespace {

WorkloadConfig small_workload(std::uint64_t seed) {
  WorkloadConfig w;
  w.n_resources = 6;
  w.n_deliverables = 8;
  w.mean_packets_per_deliverable = 4;
  w.effort_low = 2;
  w.effort_high = 12;
  w.span_slots = 200;
  w.arrival_fraction = 0.5;
  w.seed = seed;
  return w;
}

RunConfig run_config(Mode mode, bool audit = true) {
  RunConfig rc;
  rc.mode = mode;
  rc.solver.node_limit = 5000;
  rc.control.checkpoint_period = 40;
  rc.check_invariants = audit;
  return rc;
}

// Busy available slots inside [0, span) per resource, counted slot by slot.
std::vector<long> busy_in_window(const Instance& inst, const std::vector<Segment>& history, Slot span) {
  std::vector<long> busy(inst.resources.size(), 0);
  for (const auto& s : history)
    for (Slot t = s.start; t < s.end && t < span; ++t)
      if (inst.resources[s.resource].calendar.available(t)) ++busy[s.resource];
  return busy;
}

}  // namespace

TEST(GenerateWorkload, SameSeedSameBytes) {
  auto cfg = small_workload(42);
  cfg.effort_noise = 0.3;
  cfg.brownout_rate = 0.5;
  auto a = generate_workload(cfg);
  auto b = generate_workload(cfg);
  EXPECT_EQ(to_json(a.instance).dump(), to_json(b.instance).dump());
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t x = 0; x < a.events.size(); ++x) {
    EXPECT_EQ(a.events[x].key(), b.events[x].key());
    EXPECT_EQ(a.events[x].until, b.events[x].until);
  }
  EXPECT_EQ(a.actual_effort, b.actual_effort);
  EXPECT_EQ(a.preferred_end, b.preferred_end);
  cfg.seed = 43;
  EXPECT_NE(to_json(generate_workload(cfg).instance).dump(), to_json(a.instance).dump());
}

TEST(GenerateWorkload, NinetyDeliverablesGiveAboutTenEightyPackets) {
  WorkloadConfig cfg;
  cfg.n_deliverables = 90;
  double total = 0;
  const int seeds = 10;
  for (int s = 1; s <= seeds; ++s) {
    cfg.seed = static_cast<std::uint64_t>(s);
    auto w = generate_workload(cfg);
    EXPECT_NEAR(static_cast<double>(w.instance.packets.size()), 1080.0, 108.0);
    total += static_cast<double>(w.instance.packets.size());
  }
  EXPECT_NEAR(total / seeds, 1080.0, 30.0);
}

TEST(GenerateWorkload, EveryPacketHasAnEligibleWorkerAndInstanceIsValid) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    WorkloadConfig cfg;
    cfg.n_deliverables = 30;
    cfg.seed = seed;
    auto w = generate_workload(cfg);
    EXPECT_TRUE(validate_instance(w.instance).empty());
    for (const auto& p : w.instance.packets) {
      bool any = false;
      for (const auto& r : w.instance.resources)
        any = any || std::includes(r.attrs.begin(), r.attrs.end(), p.mandatory_attrs.begin(), p.mandatory_attrs.end());
      EXPECT_TRUE(any) << p.id;
    }
    // Preferred completion = arrival + ceil(slack * longest chain).
    auto cp = critical_path_effort(w.instance);
    for (std::size_t k = 0; k < w.instance.deliverables.size(); ++k) {
      EXPECT_EQ(w.preferred_end[k],
                w.instance.deliverables[k].input_start + static_cast<Slot>(std::ceil(1.5 * static_cast<double>(cp[k]))));
      EXPECT_LT(w.instance.deliverables[k].input_start, cfg.span_slots / 4 + 1);
    }
  }
}

TEST(CriticalPath, ChainAndParallel) {
  Instance inst;
  inst.packets = {make_packet("a", "d1", 3), make_packet("b", "d1", 4), make_packet("c", "d1", 10),
                  make_packet("x", "d2", 2)};
  inst.deliverables = {make_deliverable("d1", {"a", "b", "c"}), make_deliverable("d2", {"x"})};
  inst.dependencies = {{"a", "b", DependencyKind::finish_to_start}};
  EXPECT_EQ(critical_path_effort(inst), (std::vector<Slot>{10, 2}));
  inst.dependencies.push_back({"b", "c", DependencyKind::finish_to_start});
  EXPECT_EQ(critical_path_effort(inst), (std::vector<Slot>{17, 2}));
}

TEST(RunScenario, NoDeliverables) {
  auto cfg = small_workload(1);
  cfg.n_deliverables = 0;
  for (Mode m : {Mode::single, Mode::rhc}) {
    auto r = run_generated(cfg, run_config(m));
    EXPECT_EQ(r.metrics.tardy_pct, 0.0);
    EXPECT_EQ(r.metrics.utilization_pct, 0.0);
  }
}

TEST(RunScenario, SinglePacketIdenticalUnderBothModes) {
  Workload w;
  w.instance = single_packet_instance(8, 100, 3);
  w.events = {{3, EventKind::arrival, "d1", 0, 0}};
  w.preferred_end = {20};
  w.actual_effort = {8};
  w.span = 40;
  w.horizon = 100;
  auto a = run_scenario(w, run_config(Mode::single));
  auto b = run_scenario(w, run_config(Mode::rhc));
  EXPECT_EQ(a.metrics.tardy_pct, b.metrics.tardy_pct);
  EXPECT_EQ(a.metrics.utilization_pct, b.metrics.utilization_pct);
  EXPECT_EQ(a.metrics.makespan, b.metrics.makespan);
  EXPECT_DOUBLE_EQ(a.metrics.utilization_pct, 100.0 * 8 / 40);
  EXPECT_EQ(a.metrics.makespan, 11);
  EXPECT_TRUE(a.trace.audit.empty());
}

TEST(ComputeMetrics, HandExamples) {
  Instance inst = single_packet_instance(40, 80);
  std::vector<Segment> history{{0, 0, 10, 50}};
  std::vector<LogRecord> log{{10, "dispatch", "p1", "", {}, {}, 40.0}, {50, "completion", "p1", "", {}, {}, {}}};
  auto m = compute_metrics(inst, history, {60}, log, 80);
  EXPECT_DOUBLE_EQ(m.utilization_pct, 50.0);
  EXPECT_EQ(m.tardy_pct, 0.0);
  EXPECT_FALSE(m.saturated);
  EXPECT_DOUBLE_EQ(m.long_run_avg_cost, 40.0 / 50.0);
  auto late = compute_metrics(inst, history, {49}, log, 80);
  EXPECT_EQ(late.tardy_pct, 100.0);
  // Holidays shrink the denominator as well as the busy count.
  inst.resources[0].calendar.block(0, 20);
  auto h = compute_metrics(inst, history, {60}, log, 80);
  EXPECT_DOUBLE_EQ(h.utilization_pct, 100.0 * 30 / 60);
}

TEST(RunScenario, MetricsMatchSlotCountOracle) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    auto cfg = small_workload(seed);
    cfg.holiday_prob = 0.1;
    cfg.effort_noise = 0.4;
    auto w = generate_workload(cfg);
    for (Mode m : {Mode::single, Mode::rhc}) {
      auto r = run_scenario(w, run_config(m));
      auto busy = busy_in_window(r.final_instance, r.trace.history, w.span);
      long b = 0, avail = 0;
      double max_u = 0;
      for (std::size_t j = 0; j < busy.size(); ++j) {
        long a = r.final_instance.resources[j].calendar.available_between(0, w.span);
        b += busy[j];
        avail += a;
        if (a > 0) max_u = std::max(max_u, 100.0 * static_cast<double>(busy[j]) / static_cast<double>(a));
      }
      EXPECT_NEAR(r.metrics.utilization_pct, 100.0 * static_cast<double>(b) / static_cast<double>(avail), 1e-9);
      EXPECT_NEAR(r.metrics.max_resource_util_pct, max_u, 1e-9);
      EXPECT_LE(r.metrics.utilization_pct, 100.0);

      // Tardiness from the raw history.
      std::map<std::string, Slot> finish;
      for (const auto& s : r.trace.history) {
        auto& f = finish[w.instance.packets[s.packet].deliverable_id];
        f = std::max(f, s.end);
      }
      int tardy = 0;
      for (std::size_t k = 0; k < w.instance.deliverables.size(); ++k)
        tardy += finish[w.instance.deliverables[k].id] > w.preferred_end[k];
      EXPECT_NEAR(r.metrics.tardy_pct, 100.0 * tardy / static_cast<double>(w.instance.deliverables.size()), 1e-9);

      // The world's own per-slot busy counter agrees over the whole run.
      auto all = busy_in_window(r.final_instance, r.trace.history, w.horizon);
      EXPECT_EQ(all, r.trace.busy_slots);
      EXPECT_TRUE(r.trace.audit.empty()) << r.trace.audit.front();
    }
  }
}

TEST(RunScenario, ConservationOfWork) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto cfg = small_workload(seed);
    cfg.effort_noise = 0.5;
    cfg.brownout_rate = 0.6;
    auto w = generate_workload(cfg);
    for (Mode m : {Mode::single, Mode::rhc}) {
      auto r = run_scenario(w, run_config(m));
      std::vector<long> worked(w.instance.packets.size(), 0);
      std::vector<int> completed(w.instance.packets.size(), 0);
      for (const auto& s : r.trace.history)
        worked[s.packet] += r.final_instance.resources[s.resource].calendar.available_between(s.start, s.end);
      InstanceIndex idx(w.instance);
      for (const auto& rec : r.log)
        if (rec.kind == "completion") ++completed.at(static_cast<std::size_t>(idx.packet(rec.subject)));
      for (std::size_t i = 0; i < worked.size(); ++i) {
        EXPECT_EQ(worked[i], w.actual_effort[i]) << w.instance.packets[i].id << " seed " << seed;
        EXPECT_EQ(completed[i], 1) << w.instance.packets[i].id;
      }
      EXPECT_TRUE(r.trace.audit.empty()) << r.trace.audit.front();
    }
  }
}

TEST(RunScenario, NoPreemptionWithoutBrownouts) {
  auto cfg = small_workload(11);
  cfg.effort_noise = 0.5;
  auto w = generate_workload(cfg);
  for (Mode m : {Mode::single, Mode::rhc}) {
    auto r = run_scenario(w, run_config(m));
    EXPECT_EQ(r.trace.history.size(), w.instance.packets.size());
    EXPECT_EQ(r.trace.starts.size(), w.instance.packets.size());
    for (const auto& s : r.trace.history) {
      const auto& a = *std::find_if(r.trace.starts.begin(), r.trace.starts.end(), [&](const Assignment& x) {
        return x.packet_id == w.instance.packets[s.packet].id;
      });
      EXPECT_EQ(a.start_slot, s.start);
      EXPECT_EQ(a.resource_id, w.instance.resources[s.resource].id);
    }
  }
}

TEST(RunScenario, DeterministicLogs) {
  auto cfg = small_workload(5);
  cfg.effort_noise = 0.3;
  cfg.brownout_rate = 0.3;
  auto w = generate_workload(cfg);
  for (Mode m : {Mode::single, Mode::rhc}) {
    auto a = run_scenario(w, run_config(m, false));
    auto b = run_scenario(w, run_config(m, false));
    ASSERT_EQ(a.log.size(), b.log.size());
    for (std::size_t x = 0; x < a.log.size(); ++x) {
      EXPECT_EQ(a.log[x].time, b.log[x].time);
      EXPECT_EQ(a.log[x].actions, b.log[x].actions);
    }
    EXPECT_EQ(a.metrics.utilization_pct, b.metrics.utilization_pct);
  }
}

TEST(RunScenario, HorizonTooShortAborts) {
  auto cfg = small_workload(2);
  cfg.horizon_slots = 30;
  EXPECT_THROW(run_generated(cfg, run_config(Mode::rhc, false)), std::runtime_error);
}

TEST(CompareExperiment, CardinalityAndErrors) {
  SweepSpec spec;
  spec.workload = small_workload(1);
  spec.workload.n_resources = 3;
  spec.workload.mean_packets_per_deliverable = 1;
  spec.run = run_config(Mode::rhc, false);
  spec.loads = {1, 2, 3, 4, 5, 6, 7, 8};
  spec.seeds = {3};
  auto res = compare_experiment(spec);
  EXPECT_EQ(res.rows.size(), 16u);
  EXPECT_EQ(res.runs.size(), 16u);
  EXPECT_EQ(res.rows[0].load, 1);
  EXPECT_EQ(res.rows[0].mode, Mode::single);
  EXPECT_EQ(res.rows[1].mode, Mode::rhc);
  spec.loads.clear();
  EXPECT_THROW(compare_experiment(spec), std::invalid_argument);
  spec.loads = {1};
  spec.seeds.clear();
  EXPECT_THROW(compare_experiment(spec), std::invalid_argument);
}

TEST(Summarize, SampleStandardDeviation) {
  auto s = summarize({2, 4, 4, 4, 5, 5, 7, 9});
  EXPECT_DOUBLE_EQ(s.mean, 5.0);
  EXPECT_NEAR(s.sd, std::sqrt(32.0 / 7.0), 1e-12);
  EXPECT_EQ(summarize({3}).sd, 0.0);
}
