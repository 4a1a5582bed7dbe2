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

#ifndef STAGEPLAN_RUNTIME_H_
#define STAGEPLAN_RUNTIME_H_

#include <string>
#include <vector>

#include "stageplan/inference_simulator.h"
#include "stageplan/placement.h"
#include "stageplan/planner.h"

namespace stageplan {

enum class EventKind {
  kModelStarted,
  kModelFinished,
  kStageAdvanced,
  kModelKeptRunning,
  kModelStopped,
  kPlacementMoved,
};

const char* EventKindName(EventKind kind);
EventKind ParseEventKind(const std::string& name);

struct RuntimeEvent {
  double time = 0.0;
  EventKind kind = EventKind::kModelStarted;
  int node = -1;   // -1 for stage events
  int stage = -1;  // stage the event belongs to
  ExecutionPlan plan;
  std::string reason;  // short tag, e.g. "last-stage", "next-stage"
  friend bool operator==(const RuntimeEvent&, const RuntimeEvent&) = default;
};

struct BusyInterval {
  double start = 0.0;
  double end = 0.0;
  int node = -1;
  friend bool operator==(const BusyInterval&, const BusyInterval&) = default;
};

struct PlacementSnapshot {
  double time = 0.0;
  int stage = -1;
  PlacementState placement;
};

struct NodeIteration {
  int node = -1;
  IterationRecord record;
};

struct RuntimeTrace {
  std::vector<RuntimeEvent> events;
  double total_time = 0.0;     // simulated, from oracle lengths
  double planned_total = 0.0;  // from the plan
  std::vector<std::vector<BusyInterval>> gpu_busy;  // per GPU, sorted
  std::vector<PlacementSnapshot> placements;
  int mispredictions = 0;
  double reload_seconds = 0.0;
  int64_t generated_tokens = 0;
  std::vector<NodeIteration> iterations;  // only when requested

  // |planned - actual| / actual
  double error_ratio() const;
};

struct RuntimeOptions {
  bool keep_iterations = false;
};

// Throws MismatchError when the plan does not describe this graph.
void check_plan_matches(const SimContext& ctx, const AppPlan& plan);

// Replays `plan` on a workload whose lengths are the ground truth.
// Stage k+1 begins when any model of stage k finishes; when that model is
// not the planned first finisher the misprediction rules decide which
// running models keep their GPUs.
RuntimeTrace run_with_oracle(const SimContext& ctx, const AppPlan& plan,
                             const WorkloadState& oracle,
                             const RuntimeOptions& options = {});

struct IdleReport {
  double span = 0.0;
  std::vector<double> per_gpu;
  double total = 0.0;
};

IdleReport gpu_idle_report(const RuntimeTrace& trace);

}  // namespace stageplan

#endif  // STAGEPLAN_RUNTIME_H_
