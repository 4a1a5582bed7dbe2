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

#ifndef STAGEPLAN_PLACEMENT_H_
#define STAGEPLAN_PLACEMENT_H_

#include <functional>
#include <map>
#include <vector>

#include "stageplan/model_catalog.h"
#include "stageplan/planner.h"

namespace stageplan {

struct GpuOccupant {
  int node = -1;  // -1: free
  int replica = -1;
  int tp_rank = -1;
  friend bool operator==(const GpuOccupant&, const GpuOccupant&) = default;
};

struct ModelPlacement {
  ExecutionPlan plan;
  std::vector<std::vector<int>> replicas;  // GPU ids, ascending per replica
  friend bool operator==(const ModelPlacement&,
                         const ModelPlacement&) = default;
};

struct PlacementState {
  std::vector<GpuOccupant> gpus;
  std::map<int, ModelPlacement> models;  // by node

  static PlacementState Empty(int num_gpus);
  // Rebuilds `gpus` from `models`; throws InfeasibleError on a double
  // booking.
  void Rebuild(int num_gpus);
  int free_gpus() const;
  friend bool operator==(const PlacementState&,
                         const PlacementState&) = default;
};

// A tp group is acceptable when it lies inside one NVLink group or is made
// of whole NVLink groups.
bool tp_group_is_connected(const std::vector<int>& gpus,
                           const GpuTopology& topo);

// Every replica has tp distinct GPUs satisfying the predicate above and no
// GPU is used twice.
bool placement_is_feasible(const PlacementState& state,
                           const GpuTopology& topo);

struct PlacementMove {
  int node = -1;
  ExecutionPlan plan;
  std::vector<std::vector<int>> from;  // empty when newly started
  std::vector<std::vector<int>> to;
  double cost = 0.0;
};

struct PlacementResult {
  PlacementState state;
  double reload_cost = 0.0;
  std::vector<PlacementMove> moves;  // every entry that (re)loads
};

using LoadCost = std::function<double(int node, const ExecutionPlan& plan)>;

// Assigns concrete GPUs to `entries`. An entry that keeps its plan and its
// exact replica GPU sets from `prev` costs nothing; any other entry costs
// its loading time. Exact minimum for up to 8 GPUs, greedy beyond. Throws
// InfeasibleError naming the entries that cannot be placed.
PlacementResult place_stage(const PlacementState& prev,
                            const std::vector<StageEntry>& entries,
                            const GpuTopology& topo, const LoadCost& cost);

LoadCost table_load_cost(const AppGraph& graph, const CostTable& table);

}  // namespace stageplan

#endif  // STAGEPLAN_PLACEMENT_H_
