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

#ifndef STAGEPLAN_BASELINES_H_
#define STAGEPLAN_BASELINES_H_

#include <cstdint>

#include "stageplan/planner.h"

namespace stageplan {

// One ready model at a time (lowest node index first), each with the plan
// of highest simulated throughput, load time included.
AppPlan max_heuristic(const SimContext& ctx, const WorkloadState& workload);

struct MinHeuristicOptions {
  bool allow_preemption = true;
  // Upper bound on plan combinations scored per stage.
  int64_t max_combinations = 10000;
};

// Splits the GPUs as evenly as possible over as many ready models as fit
// and keeps the highest-throughput combination of per-model plans.
AppPlan min_heuristic(const SimContext& ctx, const WorkloadState& workload,
                      const MinHeuristicOptions& options = {});

}  // namespace stageplan

#endif  // STAGEPLAN_BASELINES_H_
