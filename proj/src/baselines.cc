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

#include "stageplan/baselines.h"

#include <algorithm>
#include <set>

#include "stageplan/errors.h"

namespace stageplan {
namespace {

std::set<int> FinishedNodes(const WorkloadState& w) {
  std::set<int> out;
  for (int n = 0; n < w.num_nodes(); ++n)
    if (w.node_finished(n)) out.insert(n);
  return out;
}

AppPlan EmptyPlan(const SimContext& ctx, const char* algorithm,
                  bool allow_preemption) {
  AppPlan plan;
  plan.algorithm = algorithm;
  plan.allow_preemption = allow_preemption;
  for (const auto& n : ctx.graph->nodes()) plan.node_ids.push_back(n.id);
  return plan;
}

// Valid plans with the largest GPU count not above `share`.
std::vector<ExecutionPlan> WidestWithin(const std::vector<ExecutionPlan>& all,
                                        int share) {
  int widest = 0;
  for (const auto& p : all)
    if (p.gpus_required() <= share)
      widest = std::max(widest, p.gpus_required());
  std::vector<ExecutionPlan> out;
  for (const auto& p : all)
    if (p.gpus_required() == widest) out.push_back(p);
  return out;
}

// Advances `idx` to the next k-combination of {0..n-1}; false at the end.
bool NextCombination(std::vector<int>& idx, int n) {
  const int k = static_cast<int>(idx.size());
  for (int i = k - 1; i >= 0; --i) {
    if (idx[i] < n - k + i) {
      ++idx[i];
      for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

AppPlan max_heuristic(const SimContext& ctx, const WorkloadState& workload) {
  AppPlan plan = EmptyPlan(ctx, "max", true);
  PlanningState state = initial_state(workload);
  while (!state.workload.all_finished()) {
    const auto ready = ready_models(*ctx.graph, FinishedNodes(state.workload),
                                    {});
    if (ready.empty()) throw InfeasibleError("no model is ready to run");
    const int m = ready.front();
    const auto plans = enumerate_valid_plans(ctx.model_of(m), *ctx.topo);
    if (plans.empty())
      throw InfeasibleError("model '" + ctx.graph->node(m).id +
                            "' has no valid plan on this machine");
    StageEvaluator eval(ctx, state);
    std::optional<StageEntry> best;
    double best_t = -1.0;
    for (const auto& p : plans) {  // ascending GPUs, so ties keep fewer
      const double t = eval.Evaluate({{m, p}}).throughput;
      if (t > best_t) {
        best_t = t;
        best = StageEntry{m, p};
      }
    }
    plan.candidate_evaluations += eval.evaluations();
    plan.stages.push_back(commit_stage(ctx, state, {*best}));
  }
  plan.total_latency = state.time;
  return plan;
}

AppPlan min_heuristic(const SimContext& ctx, const WorkloadState& workload,
                      const MinHeuristicOptions& options) {
  AppPlan plan = EmptyPlan(ctx, "min", options.allow_preemption);
  const int n_gpus = ctx.topo->num_gpus;
  std::vector<std::vector<ExecutionPlan>> plans(ctx.graph->size());
  for (int n = 0; n < ctx.graph->size(); ++n)
    plans[n] = enumerate_valid_plans(ctx.model_of(n), *ctx.topo);

  PlanningState state = initial_state(workload);
  while (!state.workload.all_finished()) {
    const auto finished = FinishedNodes(state.workload);
    std::vector<StageEntry> locked;
    std::set<int> selected;
    if (!options.allow_preemption) {
      for (const auto& [node, engine] : state.running) {
        locked.push_back({node, engine.plan});
        selected.insert(node);
      }
    }
    const int free_gpus = n_gpus - gpus_of(locked);

    // FCFS by node index; picking a producer can make its consumer ready.
    std::vector<int> chosen;
    while (static_cast<int>(chosen.size()) < free_gpus) {
      int next = -1;
      for (int m : ready_models(*ctx.graph, finished, selected))
        if (!selected.count(m) && !plans[m].empty()) {
          next = m;
          break;
        }
      if (next < 0) break;
      chosen.push_back(next);
      selected.insert(next);
    }

    StageEvaluator eval(ctx, state);
    std::vector<StageEntry> best_entries;
    while (!chosen.empty()) {
      const int k = static_cast<int>(chosen.size());
      const int base = free_gpus / k;
      const int extra = free_gpus % k;
      double best_t = -1.0;
      int64_t scored = 0;
      // which models get one more GPU
      std::vector<int> plus(extra);
      for (int i = 0; i < extra; ++i) plus[i] = i;
      do {
        std::vector<std::vector<ExecutionPlan>> opts(k);
        bool ok = true;
        for (int i = 0; i < k && ok; ++i) {
          const bool more =
              std::find(plus.begin(), plus.end(), i) != plus.end();
          opts[i] = WidestWithin(plans[chosen[i]], base + (more ? 1 : 0));
          ok = !opts[i].empty() && opts[i].front().gpus_required() > 0;
        }
        if (!ok) continue;
        std::vector<size_t> pick(k, 0);
        while (scored < options.max_combinations) {
          std::vector<StageEntry> entries = locked;
          for (int i = 0; i < k; ++i)
            entries.push_back({chosen[i], opts[i][pick[i]]});
          std::sort(entries.begin(), entries.end(),
                    [](const StageEntry& a, const StageEntry& b) {
                      return a.node < b.node;
                    });
          const double t = eval.Evaluate(entries).throughput;
          ++scored;
          if (t > best_t) {
            best_t = t;
            best_entries = std::move(entries);
          }
          int i = k - 1;
          while (i >= 0 && ++pick[i] == opts[i].size()) pick[i--] = 0;
          if (i < 0) break;
        }
      } while (scored < options.max_combinations && NextCombination(plus, k));
      if (!best_entries.empty()) break;
      chosen.pop_back();  // the last-come model waits
    }
    plan.candidate_evaluations += eval.evaluations();
    if (best_entries.empty()) best_entries = locked;
    if (best_entries.empty())
      throw InfeasibleError("no ready model fits the available GPUs");
    plan.stages.push_back(commit_stage(ctx, state, std::move(best_entries)));
  }
  plan.total_latency = state.time;
  return plan;
}

}  // namespace stageplan
