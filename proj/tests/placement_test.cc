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
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "stageplan/errors.h"
#include "stageplan/placement.h"
#include "placement_oracle.h"
#include "testing.h"

namespace stageplan {
namespace {

using testing::AsSets;
using testing::Connected;
using testing::Cost;
using testing::Sets;

TEST(Placement, MatchesBruteForceOnRandomTransitions) {
  for (int n_gpus : {4, 8}) {
    const auto rep = testing::CheckRandomTransitions(n_gpus, 200, 5 + n_gpus);
    EXPECT_EQ(rep.error, "");
    EXPECT_GT(rep.compared, 150) << n_gpus;
  }
}

TEST(Placement, ConnectivityAgreesWithReference) {
  const GpuTopology topo = GpuTopology::Uniform(8, 80 * testing::kGiB, 2);
  for (int mask = 1; mask < 256; ++mask) {
    std::vector<int> g;
    for (int i = 0; i < 8; ++i)
      if (mask >> i & 1) g.push_back(i);
    EXPECT_EQ(tp_group_is_connected(g, topo), Connected(g, topo)) << mask;
  }
}

TEST(Placement, TensorParallelPairLandsOnALink) {
  const GpuTopology topo = GpuTopology::Uniform(4, 80 * testing::kGiB, 2);
  const auto r = place_stage(PlacementState::Empty(4), {{0, {1, 2}}}, topo,
                             Cost);
  const Sets s = AsSets(r.state.models.at(0).replicas);
  EXPECT_TRUE((s == Sets{{0, 1}} || s == Sets{{2, 3}}));
  EXPECT_EQ(r.reload_cost, Cost(0, {1, 2}));
}

TEST(Placement, SameStageTwiceIsFree) {
  const GpuTopology topo = GpuTopology::Uniform(8, 80 * testing::kGiB, 2);
  const std::vector<StageEntry> entries = {
      {0, {2, 1}}, {1, {1, 2}}, {2, {1, 4}}};
  const auto first = place_stage(PlacementState::Empty(8), entries, topo, Cost);
  const auto again = place_stage(first.state, entries, topo, Cost);
  EXPECT_EQ(again.reload_cost, 0.0);
  EXPECT_TRUE(again.moves.empty());
  EXPECT_EQ(again.state, first.state);
}

TEST(Placement, MovesTheCheaperModel) {
  const GpuTopology topo = GpuTopology::Uniform(4, 80 * testing::kGiB, 2);
  PlacementState prev = PlacementState::Empty(4);
  prev.models[0] = {{1, 1}, {{0}}};
  prev.models[1] = {{1, 1}, {{2}}};
  prev.Rebuild(4);
  auto cost = [](int node, const ExecutionPlan&) {
    return std::vector<double>{10.0, 1.0, 5.0}[node];
  };
  // the new pair needs a whole link, so one of the others must move
  const auto r =
      place_stage(prev, {{0, {1, 1}}, {1, {1, 1}}, {2, {1, 2}}}, topo, cost);
  EXPECT_EQ(r.reload_cost, 6.0);
  EXPECT_EQ(r.state.models.at(0).replicas, (std::vector<std::vector<int>>{{0}}));
  EXPECT_EQ(AsSets(r.state.models.at(2).replicas), (Sets{{2, 3}}));
}

TEST(Placement, TooManyGpusIsInfeasible) {
  const GpuTopology topo = GpuTopology::Uniform(4, 80 * testing::kGiB, 2);
  EXPECT_THROW(place_stage(PlacementState::Empty(4), {{0, {3, 1}}, {1, {1, 2}}},
                           topo, Cost),
               InfeasibleError);
}

TEST(Placement, DoubleBookingIsRejected) {
  PlacementState s = PlacementState::Empty(4);
  s.models[0] = {{1, 1}, {{1}}};
  s.models[1] = {{1, 1}, {{1}}};
  EXPECT_THROW(s.Rebuild(4), InfeasibleError);
}

}  // namespace
}  // namespace stageplan
