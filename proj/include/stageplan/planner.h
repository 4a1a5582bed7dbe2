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

#ifndef STAGEPLAN_PLANNER_H_
#define STAGEPLAN_PLANNER_H_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stageplan/app_graph.h"
#include "stageplan/inference_simulator.h"
#include "stageplan/model_catalog.h"

namespace stageplan {

struct StageEntry {
  int node = -1;
  ExecutionPlan plan;
  friend bool operator==(const StageEntry&, const StageEntry&) = default;
};

struct Stage {
  std::vector<StageEntry> entries;  // ascending node index
  double start_time = 0.0;
  double end_time = 0.0;
  double planned_duration = 0.0;  // t_E
  int planned_first_finisher = -1;
  int gpus_used = 0;
  double flops = 0.0;
  double throughput = 0.0;
  std::vector<int> remaining_after;  // per node, requests left

  const StageEntry* find(int node) const;
};

struct AppPlan {
  std::string algorithm;
  bool allow_preemption = true;
  std::vector<std::string> node_ids;  // graph nodes, by index
  std::vector<Stage> stages;
  double total_latency = 0.0;
  int64_t candidate_evaluations = 0;
};

// Carried between stages: request progress plus the engines still running
// (so a model whose plan is unchanged continues without reloading).
struct PlanningState {
  WorkloadState workload;
  double time = 0.0;
  std::map<int, EngineState> running;  // node -> engine
};

PlanningState initial_state(const WorkloadState& workload);

// Carried engine if the node keeps its plan, else a fresh load.
std::vector<EntryStart> entry_starts(const SimContext& ctx,
                                     const PlanningState& state,
                                     const std::vector<StageEntry>& entries);

struct StageMetrics {
  double t_e = 0.0;        // duration from the stage start
  double end_time = 0.0;   // absolute
  double flops = 0.0;      // FLOPs ending within t_E
  double throughput = 0.0;
  int first_finisher = -1;
};

// Evaluates candidate stages from one planning state. Entries that have no
// producer inside the candidate are simulated once per (node, plan) and
// reused across candidates.
class StageEvaluator {
 public:
  StageEvaluator(const SimContext& ctx, const PlanningState& state);

  StageMetrics Evaluate(const std::vector<StageEntry>& entries);
  int64_t evaluations() const { return evaluations_; }

 private:
  struct Solo {
    double completion = kNever;
    std::vector<std::pair<double, double>> cumulative_flops;
  };
  const Solo& SoloRun(const StageEntry& entry);

  const SimContext& ctx_;
  const PlanningState& state_;
  std::map<std::pair<int, std::pair<int, int>>, Solo> solo_;
  int64_t evaluations_ = 0;
};

// One-off evaluation (no cache).
StageMetrics stage_metrics(const SimContext& ctx, const PlanningState& state,
                           const std::vector<StageEntry>& entries);

// Runs the stage up to its earliest completion and returns the stage record
// and the state the next stage starts from.
Stage commit_stage(const SimContext& ctx, PlanningState& state,
                   std::vector<StageEntry> entries);

struct PlannerOptions {
  bool allow_preemption = true;
  // Guard against runaway loops on malformed inputs.
  int max_stages = 100000;
};

// Greedy stage construction by per-GPU throughput gain. Throws
// InfeasibleError when a ready model cannot be placed in an empty stage.
AppPlan greedy_search(const SimContext& ctx, const WorkloadState& workload,
                      const PlannerOptions& options = {});

// Total GPUs of a list of entries.
int gpus_of(const std::vector<StageEntry>& entries);

// Stage invariants against the fused graph and the workload at stage start.
void check_stage(const SimContext& ctx, const WorkloadState& workload,
                 const Stage& stage);

// Replays a plan stage by stage with the planner's own state transitions.
// Returns the final planning state; throws if a stage is invalid.
PlanningState replay_plan(const SimContext& ctx, const WorkloadState& workload,
                          const AppPlan& plan);

}  // namespace stageplan

#endif  // STAGEPLAN_PLANNER_H_
