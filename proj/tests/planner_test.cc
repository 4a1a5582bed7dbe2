/* Copyright 2026 The Stageplan Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/


#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "stageplan/baselines.h"
#include "stageplan/errors.h"
#include "stageplan/fixtures.h"
#include "stageplan/planner.h"
#include "stageplan/problem.h"
#include "search_oracle.h"
#include "testing.h"

namespace stageplan {
namespace {

using testing::NodeDef;

Problem Fixture(ProblemInputs in) { return Problem::Sampled(std::move(in), 0); }

TEST(Greedy, SixModelWithinFivePercentOfExhaustiveOptimum) {
  const Problem p = Fixture(fig1_fixture());
  const auto ctx = p.ctx();
  testing::SixModelSearch search(ctx);
  const double opt = search.Run(p.workload());
  EXPECT_LE(search.visited(), 100000);
  EXPECT_NEAR(opt, 4.5, 1e-9);  // 18 GPU-seconds of work on 4 GPUs

  const auto g = greedy_search(ctx, p.workload());
  EXPECT_LE(g.total_latency, 1.05 * opt);
  EXPECT_LT(g.total_latency, max_heuristic(ctx, p.workload()).total_latency);
  EXPECT_LE(g.total_latency, min_heuristic(ctx, p.workload()).total_latency);
}

TEST(Greedy, SixModelStartsWideThenGrowsTheSlowModel) {
  const Problem p = Fixture(fig1_fixture());
  const auto g = greedy_search(p.ctx(), p.workload());
  ASSERT_GE(g.stages.size(), 2u);
  const Stage& first = g.stages.front();
  EXPECT_EQ(first.entries.size(), 4u);
  for (const auto& e : first.entries) EXPECT_EQ(e.plan.gpus_required(), 1);
  int m1_first = 0, m1_later = 0;
  if (const auto* e = first.find(0)) m1_first = e->plan.dp;
  for (size_t s = 1; s < g.stages.size(); ++s)
    if (const auto* e = g.stages[s].find(0))
      m1_later = std::max(m1_later, e->plan.dp);
  EXPECT_GT(m1_later, m1_first);
}

TEST(Chatglm, LoadPlusInferenceMatchesTheMeasuredTimes) {
  const Problem p = Fixture(chatglm_fixture());
  const auto ctx = p.ctx();
  for (auto [dp, want] : {std::pair{1, 48.0}, std::pair{8, 32.0}}) {
    EntryStart e;
    e.node = 0;
    e.plan = {dp, 1};
    e.load_time = loading_time(*ctx.table, ctx.model_of(0).id, e.plan);
    const auto r = simulate_stage(ctx, p.workload(), {e}, 0.0);
    EXPECT_NEAR(r.models[0].completion, want, 1e-9) << dp;
  }
}

TEST(Chatglm, NeverTakesEveryGpuWhileTheOtherModelWaits) {
  const Problem p = Fixture(chatglm_fixture());
  const auto g = greedy_search(p.ctx(), p.workload());
  std::vector<int> remaining(2);
  remaining[0] = p.workload().remaining(0);
  remaining[1] = p.workload().remaining(1);
  for (const auto& s : g.stages) {
    const auto* e = s.find(0);
    if (e && remaining[1] > 0) {
      EXPECT_LT(e->plan.dp, 8);
    }
    remaining = s.remaining_after;
  }
}

TEST(Greedy, SingleModelIsOneStage) {
  NodeDef d;
  d.id = "solo";
  d.model = testing::TinyModel("m", 4);
  d.coeffs = testing::ConstantLatency(1.0);
  d.inputs.assign(12, 4);
  d.outputs.assign(12, 3);
  auto app = testing::MakeIndependentApp(4, {d});
  const Problem p(app.inputs, app.drawn);
  const auto g = greedy_search(p.ctx(), p.workload());
  ASSERT_EQ(g.stages.size(), 1u);
  EXPECT_EQ(g.stages[0].entries.size(), 1u);
  EXPECT_EQ(g.stages[0].end_time, g.total_latency);
}

bool SamePlan(const AppPlan& a, const AppPlan& b) {
  if (a.stages.size() != b.stages.size()) return false;
  for (size_t i = 0; i < a.stages.size(); ++i)
    if (a.stages[i].entries != b.stages[i].entries ||
        a.stages[i].end_time != b.stages[i].end_time)
      return false;
  return a.total_latency == b.total_latency;
}

TEST(Greedy, Deterministic) {
  const Problem p = Fixture(router_fixture());
  EXPECT_TRUE(SamePlan(greedy_search(p.ctx(), p.workload()),
                       greedy_search(p.ctx(), p.workload())));
}

TEST(Greedy, ReplayFinishesEveryRequestAtThePlannedTime) {
  for (const auto& name : {"fig1", "chatglm", "router", "chain_summary"}) {
    const Problem p = Fixture(fixture_by_name(name));
    const auto g = greedy_search(p.ctx(), p.workload());
    const auto end = replay_plan(p.ctx(), p.workload(), g);
    EXPECT_TRUE(end.workload.all_finished()) << name;
    EXPECT_NEAR(end.time, g.total_latency, 1e-9) << name;
    for (size_t s = 1; s < g.stages.size(); ++s)
      EXPECT_EQ(g.stages[s].start_time, g.stages[s - 1].end_time) << name;
    for (const auto& s : g.stages)
      EXPECT_LE(s.gpus_used, p.inputs().topo.num_gpus) << name;
  }
}

TEST(Greedy, WithoutPreemptionPlansNeverChangeMidway) {
  for (const auto& name : {"fig1", "router", "ensembling"}) {
    const Problem p = Fixture(fixture_by_name(name));
    PlannerOptions opt;
    opt.allow_preemption = false;
    const auto g = greedy_search(p.ctx(), p.workload(), opt);
    std::map<int, ExecutionPlan> fixed;
    std::set<int> left;
    for (size_t s = 0; s < g.stages.size(); ++s) {
      for (const auto& e : g.stages[s].entries) {
        EXPECT_FALSE(left.count(e.node)) << name;
        auto [it, fresh] = fixed.emplace(e.node, e.plan);
        if (!fresh) {
          EXPECT_EQ(it->second, e.plan) << name;
        }
      }
      // a started model must stay until it finishes
      if (s + 1 < g.stages.size()) {
        for (const auto& e : g.stages[s].entries) {
          if (g.stages[s].remaining_after[e.node] > 0) {
            EXPECT_NE(g.stages[s + 1].find(e.node), nullptr) << name;
          } else {
            left.insert(e.node);
          }
        }
      }
    }
  }
}

TEST(Greedy, NoWorseThanBaselinesOnSmallFixtures) {
  for (const auto& name : {"fig1", "router"}) {
    const Problem p = Fixture(fixture_by_name(name));
    const auto ctx = p.ctx();
    const double g = greedy_search(ctx, p.workload()).total_latency;
    EXPECT_LE(g, max_heuristic(ctx, p.workload()).total_latency) << name;
    EXPECT_LE(g, min_heuristic(ctx, p.workload()).total_latency) << name;
  }
}

TEST(Greedy, EvaluationCountStaysQuadratic) {
  for (int n_gpus : {2, 4, 8}) {
    for (int v = 2; v <= 9; ++v) {
      const Problem p = Fixture(scaling_fixture(v, n_gpus));
      const auto g = greedy_search(p.ctx(), p.workload());
      EXPECT_LE(g.candidate_evaluations, 4LL * v * v * n_gpus * n_gpus)
          << v << " models on " << n_gpus;
      EXPECT_GT(g.candidate_evaluations, 0);
    }
  }
}

TEST(CommitStage, RejectsStagesThatDoNotFit) {
  const Problem p = Fixture(fig1_fixture());
  PlanningState st = initial_state(p.workload());
  EXPECT_THROW(commit_stage(p.ctx(), st, {{0, {3, 1}}, {1, {2, 1}}}),
               InputError);
  EXPECT_EQ(st.time, 0.0);
}

TEST(CommitStage, CarriedEngineKeepsItsProgress) {
  const Problem p = Fixture(fig1_fixture());
  const auto ctx = p.ctx();
  PlanningState st = initial_state(p.workload());
  // m2 finishes at 2 s; m1 has done 4 of 16 requests by then
  const Stage a = commit_stage(ctx, st, {{0, {1, 1}}, {1, {1, 1}}});
  EXPECT_EQ(a.end_time, 2.0);
  EXPECT_EQ(a.planned_first_finisher, 1);
  EXPECT_EQ(st.workload.remaining(0), 12);
  ASSERT_TRUE(st.running.count(0));
  // continuing on one GPU takes the remaining 6 s without reload
  const Stage b = commit_stage(ctx, st, {{0, {1, 1}}});
  EXPECT_EQ(b.end_time, 8.0);
}

}  // namespace
}  // namespace stageplan
