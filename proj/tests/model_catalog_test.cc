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


#include <gtest/gtest.h>

#include "stageplan/errors.h"
#include "stageplan/model_catalog.h"
#include "testing.h"

namespace stageplan {
namespace {

using testing::kGiB;

GpuTopology Plain(int n, int64_t mem) {
  GpuTopology t = GpuTopology::Uniform(n, mem);
  t.reserved_fraction = 0.0;
  return t;
}

TEST(PlanValidity, WeightsLargerThanOneGpu) {
  auto topo = Plain(2, 10 * kGiB);
  ModelSpec m = testing::TinyModel("big", 8, {1, 2});
  m.weight_bytes = 20 * kGiB;
  EXPECT_FALSE(plan_is_valid(m, {1, 1}, topo));
  // split over two GPUs the weights fill them exactly; no room for KV
  m.kv_bytes_per_token_per_layer = 16;
  EXPECT_FALSE(plan_is_valid(m, {1, 2}, topo));
  m.weight_bytes = 18 * kGiB;
  EXPECT_TRUE(plan_is_valid(m, {1, 2}, topo));
  EXPECT_FALSE(plan_is_valid(m, {1, 1}, topo));
}

TEST(PlanValidity, ThirteenBOnEightGpus) {
  auto topo = Plain(8, 80LL * 1000 * 1000 * 1000);
  ModelSpec m = testing::TinyModel("13b", 256, {1});
  m.weight_bytes = 26LL * 1000 * 1000 * 1000;
  EXPECT_TRUE(plan_is_valid(m, {8, 1}, topo));
  EXPECT_FALSE(plan_is_valid(m, {9, 1}, topo));
}

TEST(PlanValidity, KvForOneFullSequenceCounts) {
  auto topo = Plain(1, 1000);
  ModelSpec m = testing::TinyModel("m", 1, {1}, 100);
  m.weight_bytes = 600;
  m.kv_bytes_per_token_per_layer = 4;  // 100 * 1 * 4 = 400
  EXPECT_TRUE(plan_is_valid(m, {1, 1}, topo));
  m.kv_bytes_per_token_per_layer = 5;
  EXPECT_FALSE(plan_is_valid(m, {1, 1}, topo));
}

TEST(PlanValidity, ReservedFractionIsSubtracted) {
  auto topo = Plain(1, 1000);
  ModelSpec m = testing::TinyModel("m");
  m.weight_bytes = 950;
  EXPECT_TRUE(plan_is_valid(m, {1, 1}, topo));
  topo.reserved_fraction = 0.1;
  EXPECT_FALSE(plan_is_valid(m, {1, 1}, topo));
}

TEST(PlanValidity, DisallowedTp) {
  auto topo = Plain(4, 80 * kGiB);
  ModelSpec m = testing::TinyModel("m", 8, {1, 4});
  EXPECT_FALSE(plan_is_valid(m, {1, 2}, topo));
  EXPECT_TRUE(plan_is_valid(m, {1, 4}, topo));
}

TEST(EnumeratePlans, TinyModelTwoGpus) {
  auto topo = Plain(2, 80 * kGiB);
  ModelSpec m = testing::TinyModel("m", 8, {1, 2});
  const std::vector<ExecutionPlan> want = {{1, 1}, {2, 1}, {1, 2}};
  EXPECT_EQ(enumerate_valid_plans(m, topo), want);
}

TEST(EnumeratePlans, NeedsTwoWayTp) {
  auto topo = Plain(2, 10 * kGiB);
  ModelSpec m = testing::TinyModel("m", 8, {1, 2});
  m.weight_bytes = 15 * kGiB;
  const std::vector<ExecutionPlan> want = {{1, 2}};
  EXPECT_EQ(enumerate_valid_plans(m, topo), want);
}

TEST(EnumeratePlans, NoGpus) {
  auto topo = Plain(0, 80 * kGiB);
  EXPECT_TRUE(enumerate_valid_plans(testing::TinyModel("m"), topo).empty());
}

TEST(EnumeratePlans, EveryPlanRechecks) {
  auto topo = Plain(8, 40 * kGiB);
  ModelSpec m = testing::TinyModel("m", 8, {1, 2, 4, 8});
  m.weight_bytes = 50 * kGiB;
  m.kv_bytes_per_token_per_layer = 1 << 20;
  const auto plans = enumerate_valid_plans(m, topo);
  ASSERT_FALSE(plans.empty());
  for (size_t i = 0; i < plans.size(); ++i) {
    const auto& p = plans[i];
    EXPECT_LE(p.gpus_required(), 8);
    const double per_gpu =
        static_cast<double>(m.weight_bytes) / p.tp +
        static_cast<double>(m.max_seq_len * m.num_layers *
                            m.kv_bytes_per_token_per_layer) /
            p.tp;
    EXPECT_LE(per_gpu, static_cast<double>(topo.usable_bytes_per_gpu()));
    if (i > 0) {
      EXPECT_TRUE(plans[i - 1] < p);
    }
  }
  EXPECT_EQ(plans.front(), (ExecutionPlan{1, 2}));
}

TEST(ModelSpecValidate, RejectsBadFields) {
  ModelSpec m = testing::TinyModel("m");
  m.allowed_tp = {3};  // h = 8
  EXPECT_THROW(m.Validate(), InputError);
  m = testing::TinyModel("m");
  m.matmul_weight_sum = 0;
  EXPECT_THROW(m.Validate(), InputError);
  m = testing::TinyModel("m");
  m.allowed_tp.clear();
  EXPECT_THROW(m.Validate(), InputError);
}

TEST(GpuTopologyValidate, GroupsMustPartition) {
  GpuTopology t = GpuTopology::Uniform(4, kGiB, 2);
  EXPECT_NO_THROW(t.Validate());
  EXPECT_EQ(t.group_of(3), 1);
  t.nvlink_groups = {{0, 1}, {1, 2, 3}};
  EXPECT_THROW(t.Validate(), InputError);
  t.nvlink_groups = {{0, 1}, {2}};
  EXPECT_THROW(t.Validate(), InputError);
}

TEST(ModelCatalog, LookupAndDuplicates) {
  ModelCatalog c({testing::TinyModel("a"), testing::TinyModel("b")});
  EXPECT_TRUE(c.contains("b"));
  EXPECT_EQ(c.at("a").id, "a");
  EXPECT_THROW(c.at("zz"), InputError);
  EXPECT_THROW(ModelCatalog({testing::TinyModel("a"), testing::TinyModel("a")}),
               InputError);
}

TEST(ExecutionPlan, Format) {
  EXPECT_EQ((ExecutionPlan{2, 4}).ToString(), "dp2tp4");
  EXPECT_EQ((ExecutionPlan{2, 4}).gpus_required(), 8);
}

}  // namespace
}  // namespace stageplan
