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

#ifndef STAGEPLAN_INFERENCE_SIMULATOR_H_
#define STAGEPLAN_INFERENCE_SIMULATOR_H_

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stageplan/app_graph.h"
#include "stageplan/cost_model.h"
#include "stageplan/model_catalog.h"

namespace stageplan {

struct EngineConfig {
  int max_num_seqs = 256;          // per replica
  int64_t kv_capacity_tokens = 0;  // per replica
};

// Batch cap from the model spec, KV capacity from the memory left after
// weights on the replica's tp GPUs.
EngineConfig make_engine_config(const ModelSpec& model,
                                const ExecutionPlan& plan,
                                const GpuTopology& topo);

// What a time limit does to an iteration that straddles it.
enum class InFlight {
  kComplete,  // run every iteration that starts before the limit
  kDrop,      // run only iterations that end at or before the limit
};

struct IterationRecord {
  int replica = 0;
  double start = 0.0;
  double latency = 0.0;
  double flops = 0.0;
  // FLOPs that advance the workload: a re-prefill after preemption is
  // credited only for the original prompt.
  double useful_flops = 0.0;
  IterationDescriptor it;
  int preempted = 0;        // victims evicted right before this iteration
  int64_t kv_used = 0;      // replica KV tokens after the iteration
  double end() const { return start + latency; }
};

struct ReplicaState {
  double clock = 0.0;
  std::deque<int> waiting;   // request indices, FCFS
  std::vector<int> running;  // admission order
  int64_t kv_used = 0;
};

// Everything needed to resume an engine exactly where it stopped.
struct EngineState {
  int node = -1;
  ExecutionPlan plan;
  std::vector<ReplicaState> replicas;
  int next_replica = 0;  // round-robin cursor
  // Released but not yet handed to a replica, by (ready_time, index).
  // Arrivals are dealt out only when global time reaches them so that the
  // replica choice never depends on where a run was paused.
  std::set<std::pair<double, int>> pending;
  std::vector<bool> seen;  // by position in the node's request list
  int64_t preemptions = 0;
};

// Continuous-batching FCFS engine for one model under one plan. Requests
// are spread round-robin over dp replicas in ready order; replicas advance
// on independent clocks but are interleaved in global time order so that
// requests released mid-run land on the right replica at the right time.
class ModelEngine {
 public:
  // Fresh engine: all replica clocks start at `start_time`, every ready
  // unfinished request of `node` is queued (partially generated ones will
  // be re-prefilled).
  ModelEngine(const ModelSpec& model, const ModelCoefficients& coeffs,
              EngineConfig cfg, int node, ExecutionPlan plan,
              double start_time, const WorkloadState& workload);
  // Resumed engine.
  ModelEngine(const ModelSpec& model, const ModelCoefficients& coeffs,
              EngineConfig cfg, EngineState state);

  struct RunSummary {
    double flops = 0.0;
    double useful_flops = 0.0;
    int64_t iterations = 0;
  };

  // Advances until no replica has work or the limit is reached. Requests of
  // this node released by `workload` since the last call are queued first.
  RunSummary Run(WorkloadState& workload, double limit, InFlight mode,
                 std::vector<IterationRecord>* trace = nullptr);

  const EngineState& state() const { return state_; }
  int node() const { return state_.node; }
  const ExecutionPlan& plan() const { return state_.plan; }

 private:
  struct Step {
    bool prefill = false;
    int admit = 0;    // prefill: requests taken from the waiting front
    int victims = 0;  // decode: requests preempted from the running back
    IterationDescriptor it;
    IterationDescriptor useful;  // same batch without recomputed prefixes
  };

  void Discover(const WorkloadState& workload);
  void Note(int request, const WorkloadState& workload);
  void Deal(double t);
  double NextAction(const ReplicaState& replica,
                    const WorkloadState& workload) const;
  Step Compose(const ReplicaState& replica, double t,
               const WorkloadState& workload) const;

  const ModelSpec* model_;
  const ModelCoefficients* coeffs_;
  EngineConfig cfg_;
  EngineState state_;
};

struct SimResult {
  double total_time = 0.0;  // completion time, or last iteration end
  bool finished = false;
  double total_flops = 0.0;
  std::vector<IterationRecord> iteration_trace;
  std::map<std::string, double> finish_times;
  EngineState engine_state;
  WorkloadState end_state;
};

// Simulates one node's remaining requests under `plan`. With a time limit
// the run stops at an iteration boundary per `mode` and `engine_state` /
// `end_state` can be fed to resume_model.
SimResult simulate_model(const ModelSpec& model, const ExecutionPlan& plan,
                         int node, const WorkloadState& workload,
                         const CostTable& table, const EngineConfig& cfg,
                         std::optional<double> time_limit = std::nullopt,
                         InFlight mode = InFlight::kComplete,
                         double start_time = 0.0);

SimResult resume_model(const ModelSpec& model, const CostTable& table,
                       const EngineConfig& cfg, const SimResult& previous,
                       std::optional<double> time_limit = std::nullopt,
                       InFlight mode = InFlight::kComplete);

// Shared inputs for stage-level simulation.
struct SimContext {
  const AppGraph* graph = nullptr;  // fused
  const ModelCatalog* catalog = nullptr;
  const GpuTopology* topo = nullptr;
  const CostTable* table = nullptr;

  const ModelSpec& model_of(int node) const;
  EngineConfig engine_config(int node, const ExecutionPlan& plan) const;
};

// How an entry begins a stage: continuing a carried engine, or loading
// fresh (load_time seconds after the stage start).
struct EntryStart {
  int node = -1;
  ExecutionPlan plan;
  std::optional<EngineState> carried;
  double load_time = 0.0;
};

struct ModelStageResult {
  int node = -1;
  ExecutionPlan plan;
  double completion = kNever;  // absolute; kNever if it cannot finish
  double flops = 0.0;          // all iterations this run
  // (end time, cumulative useful FLOPs) per iteration, sorted by end time.
  std::vector<std::pair<double, double>> cumulative_flops;
  std::vector<IterationRecord> trace;  // only when requested

  double FlopsUntil(double t) const;
};

struct StageSimResult {
  std::vector<ModelStageResult> models;  // in entry order
  double start_time = 0.0;
  double end_time = kNever;   // earliest completion (or the limit)
  double flops_within = 0.0;  // useful FLOPs of iterations ending by end_time
  int first_finisher = -1;    // node; ties -> lowest node index
  WorkloadState workload;     // state after the run
  std::vector<EngineState> engines;  // in entry order

  double duration() const { return end_time - start_time; }
  double throughput() const;
};

// New engine state for `node` whose replicas become available at
// `start_time`; ready requests are picked up immediately.
EngineState start_engine(const SimContext& ctx, int node,
                         const ExecutionPlan& plan, double start_time,
                         const WorkloadState& workload);

// Advances existing engines (one per node) in topological node order,
// updating `engines` and `workload` in place. Results are in the same
// order as `engines`.
std::vector<ModelStageResult> advance_engines(
    const SimContext& ctx, WorkloadState& workload,
    std::vector<EngineState>& engines, double limit, InFlight mode,
    bool keep_traces = false);

// Throws InputError if an entry depends on a node that is
// neither finished nor in the stage, or a node appears twice.
void validate_stage(const SimContext& ctx, const WorkloadState& workload,
                    const std::vector<EntryStart>& entries);

// Runs the entries in topological order from `start_time`. Without a
// limit every entry runs to completion and end_time is the earliest
// completion; with a limit every entry stops there (per `mode`).
StageSimResult simulate_stage(const SimContext& ctx,
                              const WorkloadState& workload,
                              const std::vector<EntryStart>& entries,
                              double start_time,
                              std::optional<double> limit = std::nullopt,
                              InFlight mode = InFlight::kDrop,
                              bool keep_traces = false);

}  // namespace stageplan

#endif  // STAGEPLAN_INFERENCE_SIMULATOR_H_
