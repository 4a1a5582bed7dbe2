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
#include <vector>

#include <gtest/gtest.h>

#include "stageplan/baselines.h"
#include "stageplan/fixtures.h"
#include "stageplan/planner.h"
#include "stageplan/problem.h"
#include "testing.h"

namespace stageplan {
namespace {

using testing::NodeDef;

// `count` identical models, one request at a time, so throughput is linear
// in dp.
Problem LinearModels(int count, int gpus, int requests = 8) {
  std::vector<NodeDef> defs;
  for (int i = 0; i < count; ++i) {
    NodeDef d;
    d.id = "n" + std::to_string(i);
    d.model = testing::TinyModel("m" + std::to_string(i), 1);
    d.coeffs = testing::ConstantLatency(1.0);
    d.inputs.assign(requests, 4);
    d.outputs.assign(requests, 1);
    defs.push_back(d);
  }
  auto app = testing::MakeIndependentApp(gpus, defs);
  return Problem(app.inputs, app.drawn);
}

std::vector<int> GpuSplit(const Stage& s) {
  std::vector<int> g;
  for (const auto& e : s.entries) g.push_back(e.plan.gpus_required());
  std::sort(g.rbegin(), g.rend());
  return g;
}

TEST(MaxHeuristic, OneModelPerStageInNodeOrder) {
  const Problem p = Problem::Sampled(ensembling_fixture(60), 0);
  const auto plan = max_heuristic(p.ctx(), p.workload());
  ASSERT_EQ(plan.stages.size(), 6u);
  for (int i = 0; i < 6; ++i) {
    ASSERT_EQ(plan.stages[i].entries.size(), 1u);
    EXPECT_EQ(plan.stages[i].entries[0].node, i);
    EXPECT_EQ(plan.stages[i].remaining_after[i], 0);
  }
}

TEST(MaxHeuristic, PicksThePeakNotTheWidestPlan) {
  auto p0 = LinearModels(1, 8, 16);
  ProblemInputs in = p0.inputs();
  // reloading on more than four GPUs is slow enough to erase the gain
  for (int dp = 5; dp <= 8; ++dp) in.table.SetLoadingTime("m0", {dp, 1}, 10.0);
  const Problem p(in, p0.drawn());
  const auto plan = max_heuristic(p.ctx(), p.workload());
  ASSERT_EQ(plan.stages.size(), 1u);
  EXPECT_EQ(plan.stages[0].entries[0].plan, (ExecutionPlan{4, 1}));
  EXPECT_EQ(plan.total_latency, 4.0);
}

TEST(MinHeuristic, EvenSplits) {
  {
    const Problem p = LinearModels(4, 8);
    const auto plan = min_heuristic(p.ctx(), p.workload());
    EXPECT_EQ(GpuSplit(plan.stages[0]), (std::vector<int>{2, 2, 2, 2}));
  }
  {
    const Problem p = LinearModels(3, 8);
    const auto plan = min_heuristic(p.ctx(), p.workload());
    EXPECT_EQ(GpuSplit(plan.stages[0]), (std::vector<int>{3, 3, 2}));
  }
  {
    const Problem p = LinearModels(9, 8);
    const auto plan = min_heuristic(p.ctx(), p.workload());
    const Stage& first = plan.stages[0];
    EXPECT_EQ(GpuSplit(first), std::vector<int>(8, 1));
    EXPECT_EQ(first.find(8), nullptr);  // last-come model waits
    bool later = false;
    for (const auto& s : plan.stages) later |= s.find(8) != nullptr;
    EXPECT_TRUE(later);
  }
}

TEST(MinHeuristic, SharesDifferByAtMostOne) {
  for (const auto& name : {"fig1", "ensembling", "chain_summary"}) {
    const Problem p = Problem::Sampled(fixture_by_name(name), 0);
    const auto plan = min_heuristic(p.ctx(), p.workload());
    for (const auto& s : plan.stages) {
      const auto g = GpuSplit(s);
      EXPECT_LE(g.front() - g.back(), 1) << name;
    }
  }
}

TEST(Baselines, EveryPlanReplaysToCompletion) {
  for (const auto& name : {"fig1", "router", "ensembling", "chain_summary"}) {
    const Problem p = Problem::Sampled(fixture_by_name(name), 0);
    const auto ctx = p.ctx();
    for (const auto& plan :
         {max_heuristic(ctx, p.workload()), min_heuristic(ctx, p.workload())}) {
      const auto end = replay_plan(ctx, p.workload(), plan);
      EXPECT_TRUE(end.workload.all_finished()) << name << plan.algorithm;
      EXPECT_NEAR(end.time, plan.total_latency, 1e-9) << name << plan.algorithm;
    }
  }
}

TEST(MinHeuristic, WithoutPreemptionKeepsRunningModels) {
  const Problem p = Problem::Sampled(ensembling_fixture(60), 0);
  MinHeuristicOptions opt;
  opt.allow_preemption = false;
  const auto plan = min_heuristic(p.ctx(), p.workload(), opt);
  for (size_t s = 0; s + 1 < plan.stages.size(); ++s)
    for (const auto& e : plan.stages[s].entries)
      if (plan.stages[s].remaining_after[e.node] > 0) {
        const auto* next = plan.stages[s + 1].find(e.node);
        ASSERT_NE(next, nullptr);
        EXPECT_EQ(next->plan, e.plan);
      }
}

}  // namespace
}  // namespace stageplan
