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


#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "stageplan/errors.h"
#include "stageplan/inference_simulator.h"
#include "stageplan/problem.h"
#include "sim_cases.h"
#include "testing.h"

namespace stageplan {
namespace {

using testing::Cfg;
using testing::LinearInBatch;
using testing::OneNode;

class HandTrace : public ::testing::TestWithParam<int> {};

TEST_P(HandTrace, MatchesIterationByIteration) {
  const auto cases = testing::HandCases();
  const auto& c = cases.at(GetParam());
  EXPECT_EQ(testing::CheckHandCase(c), "") << c.name;
}

INSTANTIATE_TEST_SUITE_P(Cases, HandTrace, ::testing::Range(0, 5));

TEST(HandTraceDetail, PreemptionBookkeeping) {
  OneNode n(2, testing::ConstantLatency(1.0), {4, 4}, {4, 4});
  const auto r = n.Run({1, 1}, Cfg(2, 12));
  std::vector<int64_t> kv;
  for (const auto& rec : r.iteration_trace) kv.push_back(rec.kv_used);
  EXPECT_EQ(kv, (std::vector<int64_t>{10, 12, 7, 0, 7, 0}));
  EXPECT_EQ(r.engine_state.preemptions, 1);
  // the re-prefill is credited only for the original prompt
  const auto& again = r.iteration_trace.at(4);
  const ModelSpec& m = n.problem.ctx().model_of(0);
  EXPECT_EQ(again.flops,
            flops_prefill(m, {IterationKind::kPrefill, 1, 6, 6}, 1));
  EXPECT_EQ(again.useful_flops,
            flops_prefill(m, {IterationKind::kPrefill, 1, 4, 4}, 1));
}

TEST(HandTraceDetail, ChainLinkGetsFusedOverhead) {
  const Problem p = testing::ChainLinkProblem();
  const auto ctx = p.ctx();
  const auto r = simulate_model(ctx.model_of(0), {1, 1}, 0, p.workload(),
                                *ctx.table, Cfg(4));
  const int b = r.end_state.index_of("b");
  EXPECT_EQ(r.end_state.at(b).input_len, 5 + 2 + 2);
  EXPECT_EQ(r.end_state.at(b).ready_time, 2.5);
}

TEST(Simulate, NoRequests) {
  OneNode n(2, testing::ConstantLatency(1.0), {}, {});
  const auto r = n.Run({1, 1}, Cfg(2));
  EXPECT_EQ(r.total_time, 0.0);
  EXPECT_TRUE(r.iteration_trace.empty());
  EXPECT_TRUE(r.finished);
}

TEST(Simulate, PromptLongerThanKvIsAnError) {
  OneNode n(2, testing::ConstantLatency(1.0), {50}, {2});
  EXPECT_THROW(n.Run({1, 1}, Cfg(2, 20)), InputError);
}

TEST(Simulate, PlateauAtBatchCap) {
  std::vector<int64_t> in(200, 8), out(200);
  for (int i = 0; i < 200; ++i) out[i] = 5 + (i * 37) % 60;
  OneNode n(16, LinearInBatch(), in, out);
  const auto r = n.Run({1, 1}, Cfg(16));
  int at_cap = 0;
  for (const auto& rec : r.iteration_trace)
    if (rec.it.kind == IterationKind::kDecode && rec.it.batch == 16) ++at_cap;
  EXPECT_GT(at_cap, 50);
  EXPECT_LT(r.iteration_trace.back().it.batch, 16);
}

// Two one-at-a-time models sharing a stage: 5 s and 9 s of work.
TEST(Simulate, StageEndsAtFirstCompletion) {
  auto x = OneNode::Def(1, testing::ConstantLatency(1.0),
                        std::vector<int64_t>(5, 4), std::vector<int64_t>(5, 1));
  auto y = OneNode::Def(1, testing::ConstantLatency(1.0),
                        std::vector<int64_t>(9, 4), std::vector<int64_t>(9, 1));
  x.id = "x";
  y.id = "y";
  y.model.id = "m2";
  const auto app = testing::MakeIndependentApp(2, {x, y});
  const Problem p(app.inputs, app.drawn);
  std::vector<EntryStart> entries(2);
  entries[0].node = 0;
  entries[1].node = 1;
  const auto r = simulate_stage(p.ctx(), p.workload(), entries, 0.0);
  EXPECT_EQ(r.models[0].completion, 5.0);
  EXPECT_EQ(r.models[1].completion, 9.0);
  EXPECT_EQ(r.end_time, 5.0);
  EXPECT_EQ(r.first_finisher, 0);
}

TEST(Fuzz, TokenConservationAndKvSafety) {
  EXPECT_EQ(testing::FuzzConservation(1000, 2024), "");
}

TEST(Fuzz, KvPressureStillConserves) {
  int64_t preempting = 0;
  EXPECT_EQ(testing::FuzzConservation(300, 99, &preempting), "");
  EXPECT_GT(preempting, 50);
}

TEST(Truncation, ResumeEqualsStraightThrough) {
  EXPECT_EQ(testing::CheckTruncateResume(20, 31), "");
}

}  // namespace
}  // namespace stageplan
