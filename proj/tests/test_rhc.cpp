#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "coord/rhc.hpp"
#include "support.hpp"

using namespace coord;
using namespace coord::testing;

namespace {

ControlConfig control(int K = 3, Slot horizon = 200) {
  ControlConfig c;
  c.lookahead_K = K;
  c.horizon_T = horizon;
  return c;
}

SolverConfig solver(Slot horizon = 200) {
  SolverConfig s;
  s.horizon_T = horizon;
  s.node_limit = 200000;
  return s;
}

std::unique_ptr<Controller> make(const Instance& inst, Mode mode, ControlConfig c = control(),
                                 SolverConfig s = solver()) {
  return std::make_unique<Controller>(inst, mode, AffinityConfig{}, s, c);
}

Event arrival(Slot t, const std::string& d) { return {t, EventKind::arrival, d, 0, 0}; }

std::vector<Assignment> assigned(const EpochOutcome& out) {
  std::vector<Assignment> v;
  for (const auto& a : out.actions)
    if (a.kind == Action::Kind::assign) v.push_back(a.assignment);
  return v;
}

}  // namespace

TEST(EpochCost, Examples) {
  EXPECT_EQ(epoch_cost(8, 1.0, false, 1e-3), 8.0);
  EXPECT_EQ(epoch_cost(8, 0.0, false, 1e-3), kInfeasible);
  EXPECT_EQ(epoch_cost(8, 0.5, false, 1e-3), 16.0);
  EXPECT_EQ(epoch_cost(8, 1.0, true, 1e-3), kInfeasible);
  EXPECT_EQ(epoch_cost(2, 1e-6, false, 1e-3), 2.0 / 1e-3);
}

TEST(LongRunAverageCost, Examples) {
  std::vector<LogRecord> one{{0, "dispatch", "p", "", {}, {}, 8.0}, {8, "completion", "p", "", {}, {}, {}}};
  EXPECT_DOUBLE_EQ(long_run_average_cost(one), 1.0);
  std::vector<LogRecord> none{{0, "arrival", "d", "", {}, {}, {}}, {40, "checkpoint", "", "", {}, {}, {}}};
  EXPECT_DOUBLE_EQ(long_run_average_cost(none), 0.0);
  std::vector<LogRecord> many{{0, "dispatch", "a", "", {}, {}, 4.0},
                              {3, "dispatch", "b", "", {}, {}, 10.5},
                              {7, "dispatch", "c", "", {}, {}, 1.5},
                              {20, "completion", "c", "", {}, {}, {}}};
  EXPECT_DOUBLE_EQ(long_run_average_cost(many), (4.0 + 10.5 + 1.5) / 20.0);
  EXPECT_THROW(long_run_average_cost({}), std::invalid_argument);
}

TEST(Events, TieOrderIsKindThenSubject) {
  std::vector<Event> evs{{5, EventKind::checkpoint, "", 0, 0},
                         {5, EventKind::arrival, "d2", 0, 0},
                         {5, EventKind::arrival, "d1", 0, 0},
                         {5, EventKind::completion, "p9", 0, 0},
                         {4, EventKind::brownout, "r1", 0, 9},
                         {5, EventKind::estimate_update, "p1", 3, 0}};
  std::sort(evs.begin(), evs.end());
  std::vector<std::string> order;
  for (const auto& e : evs) order.push_back(std::string(to_string(e.kind)) + ":" + e.subject);
  EXPECT_EQ(order, (std::vector<std::string>{"brownout:r1", "completion:p9", "estimate_update:p1", "arrival:d1",
                                             "arrival:d2", "checkpoint:"}));
}

TEST(OnEvent, ArrivalWithIdleWorkerIsForcedMove) {
  for (Mode mode : {Mode::rhc, Mode::single}) {
    Instance inst = single_packet_instance(5);
    auto ctl = make(inst, mode);
    auto out = ctl->on_event(arrival(0, "d1"));
    auto a = assigned(out);
    ASSERT_EQ(a.size(), 1u) << to_string(mode);
    EXPECT_EQ(a[0], (Assignment{"p1", "r1", 0, 5}));
    auto started = ctl->dispatch(0);
    ASSERT_EQ(started.size(), 1u);
    EXPECT_EQ(ctl->state().status[0], PacketStatus::running);
    EXPECT_EQ(ctl->committed_plan().assignments.size(), 1u);
  }
}

TEST(OnEvent, AllWorkersBusyBeyondHorizonKeepsPacketPending) {
  Instance inst = single_packet_instance(15, 50);
  inst.packets.push_back(make_packet("q1", "d2", 10));
  inst.deliverables.push_back(make_deliverable("d2", {"q1"}, 1));
  auto ctl = make(inst, Mode::rhc, control(3, 20), solver(20));
  ctl->on_event(arrival(0, "d1"));
  ctl->dispatch(0);
  auto out = ctl->on_event(arrival(1, "d2"));
  EXPECT_TRUE(assigned(out).empty());
  EXPECT_EQ(ctl->state().status[1], PacketStatus::pending);
  EXPECT_EQ(ctl->state().pending.size(), 1u);
}

TEST(MyopicAssign, NoPendingPacketsGivesNothing) {
  Instance inst = single_packet_instance(3);
  auto ctl = make(inst, Mode::rhc);
  EXPECT_TRUE(ctl->myopic_assign(3).empty());
}

TEST(OnEvent, CompletionFreesWorkerForCheapestPendingPacket) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    Instance inst;
    inst.resources.push_back(make_resource("r1", {role("dev"), loc("us"), skill("java")}, 300));
    inst.packets.push_back(make_packet("busy", "d0", 5));
    inst.deliverables.push_back(make_deliverable("d0", {"busy"}, 0));
    std::vector<int> eff;
    for (int x = 0; x < 2; ++x) {
      std::string id = "w" + std::to_string(x);
      AttrSet opt;
      if (rng() % 2) opt.insert(skill("java"));
      if (rng() % 2) opt.insert(skill("rust"));
      eff.push_back(1 + static_cast<int>(rng() % 12));
      inst.packets.push_back(make_packet(id, "d1", eff.back(), {role("dev"), loc("us")}, opt));
    }
    inst.deliverables.push_back(make_deliverable("d1", {"w0", "w1"}, 1));
    auto ctl = make(inst, Mode::rhc, control(1));
    ctl->on_event(arrival(0, "d0"));
    ctl->dispatch(0);
    ctl->on_event(arrival(1, "d1"));
    ASSERT_EQ(ctl->state().pending.size(), 2u);
    auto out = ctl->on_event({5, EventKind::completion, "busy", 0, 0});
    auto a = assigned(out);
    ASSERT_EQ(a.size(), 1u);
    // Brute force over the two rows of the 2x1 matrix; ties go to the lower row.
    double best = 1e18;
    std::string want;
    for (int x = 0; x < 2; ++x) {
      double c = *epoch_cost(eff[x], ctl->affinity()(1 + x, 0), false, 1e-3);
      if (c < best - 1e-12) best = c, want = "w" + std::to_string(x);
    }
    EXPECT_EQ(a[0].packet_id, want) << "trial " << trial;
    EXPECT_NEAR(*out.matching_cost, best, 1e-9);
  }
}

TEST(MyopicAssign, SingleStageEqualsOneHungarianMatching) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 60; ++trial) {
    Instance inst;
    const char* skills[] = {"java", "go", "sql"};
    for (int j = 0; j < 3; ++j) {
      AttrSet attrs{role("dev"), loc("us")};
      for (auto* s : skills)
        if (rng() % 2) attrs.insert(skill(s));
      inst.resources.push_back(make_resource("r" + std::to_string(j), attrs, 300));
    }
    std::vector<std::string> ids;
    for (int i = 0; i < 4; ++i) {
      AttrSet opt;
      for (auto* s : skills)
        if (rng() % 2) opt.insert(skill(s));
      ids.push_back("p" + std::to_string(i));
      inst.packets.push_back(make_packet(ids.back(), "d1", 1 + static_cast<int>(rng() % 9), {role("dev"), loc("us")}, opt));
    }
    inst.deliverables.push_back(make_deliverable("d1", ids, 0));
    auto ctl = make(inst, Mode::rhc, control(1));
    auto got = assigned(ctl->on_event(arrival(0, "d1")));
    CostMatrix m(4, 3);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = epoch_cost(inst.packets[i].effort_hours, ctl->affinity()(i, j), false, 1e-3);
    auto ref = hungarian_min_cost(m);
    ASSERT_EQ(got.size(), ref.pairs.size());
    for (auto [i, j] : ref.pairs) {
      auto it = std::find_if(got.begin(), got.end(), [&](const Assignment& a) { return a.packet_id == ids[i]; });
      ASSERT_NE(it, got.end());
      EXPECT_EQ(it->resource_id, inst.resources[j].id);
      EXPECT_EQ(it->start_slot, 0);
    }
  }
}

// One worker is free now, another frees up when its current packet ends.
// The committed stage-0 choice must extend to a cost-minimal two-stage plan.
TEST(MyopicAssign, TwoStageLookaheadMatchesSequenceEnumeration) {
  std::mt19937_64 rng(2718);
  int staggered = 0;
  for (int trial = 0; trial < 300; ++trial) {
    Instance inst;
    AttrSet free_attrs{role("dev"), loc("us")}, busy_attrs{role("dev"), role("ops"), loc("us")};
    if (rng() % 2) free_attrs.insert(skill("java"));
    if (rng() % 2) busy_attrs.insert(skill("java"));
    if (rng() % 2) busy_attrs.insert(skill("go"));
    inst.resources.push_back(make_resource("now", free_attrs, 400));
    inst.resources.push_back(make_resource("soon", busy_attrs, 400));
    const Slot t1 = 1 + static_cast<Slot>(rng() % 12);
    inst.packets.push_back(make_packet("blocker", "d0", static_cast<int>(t1), {role("ops"), loc("us")}));
    inst.deliverables.push_back(make_deliverable("d0", {"blocker"}, 0));
    const int n = 2 + static_cast<int>(rng() % 2);
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
      AttrSet opt;
      if (rng() % 2) opt.insert(skill("java"));
      if (rng() % 2) opt.insert(skill("go"));
      ids.push_back("w" + std::to_string(i));
      inst.packets.push_back(make_packet(ids.back(), "d1", 1 + static_cast<int>(rng() % 15), {role("dev"), loc("us")}, opt));
    }
    inst.deliverables.push_back(make_deliverable("d1", ids, 0));
    auto ctl = make(inst, Mode::rhc, control(2));
    ctl->on_event(arrival(0, "d0"));
    ASSERT_EQ(ctl->dispatch(0).size(), 1u);
    auto got = assigned(ctl->on_event(arrival(0, "d1")));

    // Enumerate every sequence: each packet goes to "now" at 0, "soon" at t1,
    // or waits. A worker serves at most one packet. Prefer more assignments,
    // then lower total cost.
    const auto& sig = ctl->affinity();
    auto cost = [&](int i, int j) {
      double wait = j == 1 ? static_cast<double>(t1) : 0.0;
      Cost c = epoch_cost(inst.packets[1 + i].effort_hours, sig(1 + i, j), false, 1e-3);
      if (c) *c += wait;
      return c;
    };
    struct Best {
      int count = -1;
      double cost = 0;
    };
    auto better = [](int c, double x, const Best& b) { return c > b.count || (c == b.count && x < b.cost - 1e-9); };
    auto enumerate = [&](std::optional<int> forced_now) {
      Best best;
      std::vector<int> choice(n, -1);
      std::function<void(int, bool, bool, int, double)> rec = [&](int i, bool used0, bool used1, int cnt, double c) {
        if (i == n) {
          int now_packet = -1;
          for (int x = 0; x < n; ++x)
            if (choice[x] == 0) now_packet = x;
          if (forced_now && now_packet != *forced_now) return;
          if (better(cnt, c, best)) best = {cnt, c};
          return;
        }
        choice[i] = -1;
        rec(i + 1, used0, used1, cnt, c);
        for (int j = 0; j < 2; ++j) {
          if ((j == 0 && used0) || (j == 1 && used1)) continue;
          auto x = cost(i, j);
          if (!x) continue;
          choice[i] = j;
          rec(i + 1, used0 || j == 0, used1 || j == 1, cnt + 1, c + *x);
          choice[i] = -1;
        }
      };
      rec(0, false, false, 0, 0.0);
      return best;
    };
    Best opt = enumerate(std::nullopt);
    ASSERT_LE(got.size(), 1u);
    int committed = -1;
    if (!got.empty()) {
      EXPECT_EQ(got[0].resource_id, "now");
      EXPECT_EQ(got[0].start_slot, 0);
      committed = static_cast<int>(std::find(ids.begin(), ids.end(), got[0].packet_id) - ids.begin());
    }
    Best consistent = enumerate(committed);
    EXPECT_EQ(consistent.count, opt.count) << "trial " << trial;
    EXPECT_NEAR(consistent.cost, opt.cost, 1e-9) << "trial " << trial;
    // Cheapest-first greedy on "now" would sometimes differ; count those cases.
    int greedy = -1;
    double gbest = 1e18;
    for (int i = 0; i < n; ++i)
      if (auto c = cost(i, 0); c && *c < gbest) gbest = *c, greedy = i;
    staggered += greedy != committed;
  }
  EXPECT_GT(staggered, 0);
}

TEST(Brownout, MidPacketReturnsRemainingEffort) {
  for (bool holiday : {false, true}) {
    Instance inst = single_packet_instance(8, 100);
    inst.resources.push_back(make_resource("r2", {role("dev"), loc("us")}, 100));
    if (holiday) inst.resources[0].calendar.set(2, false);
    auto ctl = make(inst, Mode::rhc);
    ctl->on_event(arrival(0, "d1"));
    ctl->dispatch(0);
    ASSERT_EQ(ctl->plan().find("p1")->resource_id, "r1");
    auto out = ctl->on_event({4, EventKind::brownout, "r1", 0, 60});
    // Occupancy count of worked slots in [0, 4) on r1.
    int worked = 0;
    for (Slot t = 0; t < 4; ++t) worked += inst.resources[0].calendar.available(t);
    EXPECT_EQ(ctl->state().live.packets[0].effort_hours, 8 - worked);
    ASSERT_EQ(ctl->state().history.size(), 1u);
    EXPECT_EQ(ctl->state().history[0].end, 4);
    bool interrupted = std::any_of(out.actions.begin(), out.actions.end(),
                                   [](const Action& a) { return a.kind == Action::Kind::interrupt; });
    EXPECT_TRUE(interrupted);
    auto a = assigned(out);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0], (Assignment{"p1", "r2", 4, 4 + 8 - worked}));
    EXPECT_FALSE(ctl->state().live.resources[0].calendar.available(30));
    EXPECT_TRUE(ctl->state().live.resources[0].calendar.available(60));
  }
}

TEST(Brownout, IdleWorkerMovesNothing) {
  Instance inst = single_packet_instance(4, 100);
  inst.resources.push_back(make_resource("r2", {role("dev"), loc("us")}, 100));
  auto ctl = make(inst, Mode::rhc);
  ctl->on_event(arrival(0, "d1"));
  ctl->dispatch(0);
  Schedule before = ctl->plan();
  auto out = ctl->on_event({1, EventKind::brownout, "r2", 0, 20});
  EXPECT_TRUE(out.actions.empty());
  EXPECT_EQ(ctl->plan(), before);
}

TEST(Brownout, NoAlternativeWaitsForCheckpointDummy) {
  Instance inst = single_packet_instance(8, 100);
  inst.deliverables[0].committed_end = 30;
  Resource hire = make_resource("hire", {role("dev"), loc("us")}, 100);
  hire.is_dummy = true;
  inst.resources.push_back(hire);
  SolverConfig s = solver(100);
  s.allow_dummy = true;
  auto ctl = make(inst, Mode::rhc, control(3, 100), s);
  auto a = assigned(ctl->on_event(arrival(0, "d1")));
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].resource_id, "r1");
  ctl->dispatch(0);
  ctl->on_event({4, EventKind::brownout, "r1", 0, 80});
  EXPECT_EQ(ctl->state().status[0], PacketStatus::pending);
  auto out = ctl->on_event({5, EventKind::checkpoint, "", 0, 0});
  auto placed = assigned(out);
  ASSERT_EQ(placed.size(), 1u);
  EXPECT_EQ(placed[0], (Assignment{"p1", "hire", 5, 9}));
  ASSERT_EQ(ctl->checkpoints().size(), 1u);
  EXPECT_EQ(ctl->dispatch(5).size(), 1u);
}

TEST(OnEvent, StaleEventsAreRejected) {
  Instance inst = single_packet_instance(4);
  auto ctl = make(inst, Mode::rhc);
  ctl->on_event(arrival(3, "d1"));
  EXPECT_THROW(ctl->on_event({2, EventKind::checkpoint, "", 0, 0}), StaleEvent);
  EXPECT_THROW(ctl->dispatch(1), StaleEvent);
}

TEST(OnEvent, EstimateUpdateMovesPlannedEnd) {
  Instance inst = single_packet_instance(4, 100);
  auto ctl = make(inst, Mode::rhc);
  ctl->on_event(arrival(0, "d1"));
  ctl->dispatch(0);
  ctl->on_event({2, EventKind::estimate_update, "p1", 9, 0});
  EXPECT_EQ(ctl->plan().find("p1")->end_slot, 9);
  EXPECT_EQ(ctl->plan().find("p1")->start_slot, 0);
}

TEST(Checkpoint, FreezesRunningAndNearTermWork) {
  Instance inst;
  inst.resources.push_back(make_resource("r1", {role("dev"), loc("us")}, 400));
  std::vector<std::string> ids;
  for (int i = 0; i < 5; ++i) {
    ids.push_back("p" + std::to_string(i));
    inst.packets.push_back(make_packet(ids.back(), "d1", 10));
  }
  inst.deliverables.push_back(make_deliverable("d1", ids, 0));
  SolverConfig s = solver(400);
  s.stability_window_W = 25;
  auto ctl = make(inst, Mode::rhc, control(3, 400), s);
  ctl->on_event(arrival(0, "d1"));
  ctl->dispatch(0);
  ctl->on_event({1, EventKind::checkpoint, "", 0, 0});
  ASSERT_EQ(ctl->checkpoints().size(), 1u);
  const auto& rec = ctl->checkpoints()[0];
  // Running p0 plus the tentative packets starting before 1 + 25.
  for (const auto& f : rec.frozen) {
    EXPECT_LT(f.start_slot, 26);
    EXPECT_NE(std::find(rec.after.assignments.begin(), rec.after.assignments.end(), f), rec.after.assignments.end());
  }
  EXPECT_GE(rec.frozen.size(), 1u);
  EXPECT_EQ(rec.after.assignments.size(), 5u);
  EXPECT_TRUE(check_schedule(rec.after, ctl->state().live).empty());
  EXPECT_EQ(ctl->state().log.back().kind, "checkpoint");
}

TEST(Checkpoint, IgnoredInSingleMode) {
  Instance inst = single_packet_instance(4);
  auto ctl = make(inst, Mode::single);
  ctl->on_event(arrival(0, "d1"));
  auto out = ctl->on_event({1, EventKind::checkpoint, "", 0, 0});
  EXPECT_TRUE(out.actions.empty());
  EXPECT_TRUE(ctl->checkpoints().empty());
}

TEST(TaskLists, PartitionThePlanChronologically) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    TinyConfig tc;
    tc.max_packets = 8;
    tc.max_horizon = 200;
    tc.min_horizon = 200;
    tc.committed_prob = 0;
    tc.holiday_prob = 0.05;
    Instance inst = random_tiny_instance(rng, tc);
    for (Mode mode : {Mode::rhc, Mode::single}) {
      auto ctl = make(inst, mode, control(3, 200), solver(200));
      std::vector<Event> evs;
      for (const auto& d : inst.deliverables) evs.push_back(arrival(d.input_start, d.id));
      std::sort(evs.begin(), evs.end());
      for (const auto& e : evs) {
        ctl->on_event(e);
        ctl->dispatch(e.time);
        Schedule plan = ctl->plan();
        std::vector<Assignment> from_lists;
        for (const auto& tl : ctl->task_lists()) {
          for (std::size_t x = 0; x < tl.entries.size(); ++x) {
            EXPECT_EQ(tl.entries[x].resource_id, tl.resource_id);
            if (x > 0) {
              EXPECT_LE(tl.entries[x - 1].end_slot, tl.entries[x].start_slot);
            }
            from_lists.push_back(tl.entries[x]);
          }
        }
        std::sort(from_lists.begin(), from_lists.end());
        std::sort(plan.assignments.begin(), plan.assignments.end());
        EXPECT_EQ(from_lists, plan.assignments);
        EXPECT_TRUE(check_schedule(ctl->committed_plan(), ctl->state().live, {.require_complete = false}).empty());
      }
    }
  }
}
