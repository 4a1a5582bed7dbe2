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

#include "stageplan/planner.h"

#include <algorithm>

#include "stageplan/errors.h"

namespace stageplan {

const StageEntry* Stage::find(int node) const {
  for (const auto& e : entries)
    if (e.node == node) return &e;
  return nullptr;
}

PlanningState initial_state(const WorkloadState& workload) {
  PlanningState state;
  state.workload = workload;
  return state;
}

int gpus_of(const std::vector<StageEntry>& entries) {
  int n = 0;
  for (const auto& e : entries) n += e.plan.gpus_required();
  return n;
}

std::vector<EntryStart> entry_starts(const SimContext& ctx,
                                     const PlanningState& state,
                                     const std::vector<StageEntry>& entries) {
  std::vector<EntryStart> starts;
  starts.reserve(entries.size());
  for (const auto& e : entries) {
    EntryStart s;
    s.node = e.node;
    s.plan = e.plan;
    auto it = state.running.find(e.node);
    if (it != state.running.end() && it->second.plan == e.plan) {
      s.carried = it->second;
    } else {
      s.load_time =
          loading_time(*ctx.table, ctx.graph->node(e.node).model_id, e.plan);
    }
    starts.push_back(std::move(s));
  }
  return starts;
}

namespace {

double FlopsUntil(const std::vector<std::pair<double, double>>& cum,
                  double t) {
  auto it = std::upper_bound(
      cum.begin(), cum.end(), t,
      [](double v, const std::pair<double, double>& p) { return v < p.first; });
  return it == cum.begin() ? 0.0 : std::prev(it)->second;
}

StageMetrics ToMetrics(double start, double end, double flops, int first) {
  StageMetrics m;
  m.end_time = end;
  m.t_e = end - start;
  m.flops = flops;
  m.first_finisher = first;
  if (end == kNever)
    m.throughput = 0.0;
  else if (m.t_e > 0.0)
    m.throughput = flops / m.t_e;
  else
    m.throughput = flops > 0.0 ? kNever : 0.0;
  return m;
}

}  // namespace

StageEvaluator::StageEvaluator(const SimContext& ctx,
                               const PlanningState& state)
    : ctx_(ctx), state_(state) {}

const StageEvaluator::Solo& StageEvaluator::SoloRun(const StageEntry& entry) {
  const auto key =
      std::make_pair(entry.node, std::make_pair(entry.plan.dp, entry.plan.tp));
  auto it = solo_.find(key);
  if (it != solo_.end()) return it->second;
  auto r = simulate_stage(ctx_, state_.workload,
                          entry_starts(ctx_, state_, {entry}), state_.time);
  Solo solo;
  solo.completion = r.models[0].completion;
  solo.cumulative_flops = std::move(r.models[0].cumulative_flops);
  return solo_.emplace(key, std::move(solo)).first->second;
}

StageMetrics StageEvaluator::Evaluate(const std::vector<StageEntry>& entries) {
  ++evaluations_;
  std::set<int> nodes;
  for (const auto& e : entries) nodes.insert(e.node);
  bool independent = true;
  for (const auto& e : entries)
    for (int p : ctx_.graph->predecessors(e.node))
      if (nodes.count(p)) independent = false;

  if (!independent) {
    auto r = simulate_stage(ctx_, state_.workload,
                            entry_starts(ctx_, state_, entries), state_.time);
    return ToMetrics(state_.time, r.end_time, r.flops_within,
                     r.first_finisher);
  }

  double earliest = kNever;
  int first = -1;
  for (const auto& e : entries) {
    const double c = SoloRun(e).completion;
    if (c < earliest || (c == earliest && c < kNever && e.node < first)) {
      earliest = c;
      first = e.node;
    }
  }
  double flops = 0.0;
  if (earliest < kNever)
    for (const auto& e : entries)
      flops += FlopsUntil(SoloRun(e).cumulative_flops, earliest);
  return ToMetrics(state_.time, earliest, flops, first);
}

StageMetrics stage_metrics(const SimContext& ctx, const PlanningState& state,
                           const std::vector<StageEntry>& entries) {
  auto r = simulate_stage(ctx, state.workload, entry_starts(ctx, state, entries),
                          state.time);
  return ToMetrics(state.time, r.end_time, r.flops_within, r.first_finisher);
}

Stage commit_stage(const SimContext& ctx, PlanningState& state,
                   std::vector<StageEntry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const StageEntry& a, const StageEntry& b) {
              return a.node < b.node;
            });
  const auto starts = entry_starts(ctx, state, entries);
  const auto probe = simulate_stage(ctx, state.workload, starts, state.time);
  if (probe.end_time == kNever)
    throw InfeasibleError("no model of the stage can finish");
  // Truncate so nothing from this stage runs past its boundary.
  auto run = simulate_stage(ctx, state.workload, starts, state.time,
                            probe.end_time, InFlight::kDrop);

  Stage stage;
  stage.entries = entries;
  stage.start_time = state.time;
  stage.end_time = probe.end_time;
  stage.planned_duration = probe.end_time - state.time;
  stage.planned_first_finisher = probe.first_finisher;
  stage.gpus_used = gpus_of(entries);
  stage.flops = probe.flops_within;
  stage.throughput = probe.throughput();

  state.workload = std::move(run.workload);
  state.time = probe.end_time;
  state.running.clear();
  for (size_t i = 0; i < entries.size(); ++i)
    if (!state.workload.node_finished(entries[i].node))
      state.running[entries[i].node] = std::move(run.engines[i]);
  stage.remaining_after.resize(ctx.graph->size());
  for (int n = 0; n < ctx.graph->size(); ++n)
    stage.remaining_after[n] = state.workload.remaining(n);
  return stage;
}

void check_stage(const SimContext& ctx, const WorkloadState& workload,
                 const Stage& stage) {
  std::vector<EntryStart> starts;
  for (const auto& e : stage.entries) {
    EntryStart s;
    s.node = e.node;
    s.plan = e.plan;
    starts.push_back(s);
  }
  validate_stage(ctx, workload, starts);
}

namespace {

std::set<int> FinishedNodes(const WorkloadState& w) {
  std::set<int> out;
  for (int n = 0; n < w.num_nodes(); ++n)
    if (w.node_finished(n)) out.insert(n);
  return out;
}

struct Candidate {
  std::vector<StageEntry> entries;
  int gpus = 0;
  int node = -1;
  ExecutionPlan plan;
  double throughput = 0.0;
  double ratio = 0.0;
};

// Higher ratio, then fewer GPUs, then lower node, then smaller plan.
bool Better(const Candidate& a, const Candidate& b) {
  if (a.ratio != b.ratio) return a.ratio > b.ratio;
  if (a.gpus != b.gpus) return a.gpus < b.gpus;
  if (a.node != b.node) return a.node < b.node;
  return a.plan < b.plan;
}

}  // namespace

AppPlan greedy_search(const SimContext& ctx, const WorkloadState& workload,
                      const PlannerOptions& options) {
  AppPlan plan;
  plan.algorithm = "greedy";
  plan.allow_preemption = options.allow_preemption;
  for (const auto& n : ctx.graph->nodes()) plan.node_ids.push_back(n.id);

  const int n_gpus = ctx.topo->num_gpus;
  std::vector<std::vector<ExecutionPlan>> plans(ctx.graph->size());
  for (int n = 0; n < ctx.graph->size(); ++n)
    plans[n] = enumerate_valid_plans(ctx.model_of(n), *ctx.topo);

  PlanningState state = initial_state(workload);
  while (!state.workload.all_finished()) {
    if (static_cast<int>(plan.stages.size()) >= options.max_stages)
      throw InfeasibleError("stage limit reached before all models finished");
    StageEvaluator eval(ctx, state);
    const auto finished = FinishedNodes(state.workload);

    std::vector<StageEntry> current;
    std::set<int> locked;
    if (!options.allow_preemption) {
      for (const auto& [node, engine] : state.running) {
        current.push_back({node, engine.plan});
        locked.insert(node);
      }
    }
    int current_gpus = gpus_of(current);
    double current_t = current.empty() ? 0.0 : eval.Evaluate(current).throughput;

    while (true) {
      std::set<int> selected;
      for (const auto& e : current) selected.insert(e.node);
      std::optional<Candidate> best;
      double max_delta = -kNever;
      for (int m : ready_models(*ctx.graph, finished, selected)) {
        if (locked.count(m)) continue;
        auto pos = std::find_if(current.begin(), current.end(),
                                [m](const StageEntry& e) { return e.node == m; });
        for (const auto& p : plans[m]) {
          Candidate c;
          c.node = m;
          c.plan = p;
          c.entries = current;
          if (pos != current.end()) {
            if (pos->plan == p) continue;
            c.gpus = current_gpus - pos->plan.gpus_required() +
                     p.gpus_required();
            // replacements must strictly grow the stage
            if (c.gpus <= current_gpus || c.gpus > n_gpus) continue;
            c.entries[pos - current.begin()].plan = p;
          } else {
            c.gpus = current_gpus + p.gpus_required();
            if (c.gpus > n_gpus) continue;
            c.entries.push_back({m, p});
          }
          std::sort(c.entries.begin(), c.entries.end(),
                    [](const StageEntry& a, const StageEntry& b) {
                      return a.node < b.node;
                    });
          c.throughput = eval.Evaluate(c.entries).throughput;
          const double delta = c.throughput - current_t;
          c.ratio = delta / (c.gpus - current_gpus);
          max_delta = std::max(max_delta, delta);
          if (!best || Better(c, *best)) best = std::move(c);
        }
      }
      if (!best || max_delta < 0.0) break;
      current = std::move(best->entries);
      current_gpus = best->gpus;
      current_t = best->throughput;
    }
    plan.candidate_evaluations += eval.evaluations();

    if (current.empty()) {
      std::string names;
      for (int m : ready_models(*ctx.graph, finished, {}))
        names += (names.empty() ? "" : ", ") + ctx.graph->node(m).id;
      throw InfeasibleError("no valid plan fits the GPUs for ready models: " +
                            names);
    }
    plan.stages.push_back(commit_stage(ctx, state, std::move(current)));
  }
  plan.total_latency = state.time;
  return plan;
}

PlanningState replay_plan(const SimContext& ctx, const WorkloadState& workload,
                          const AppPlan& plan) {
  PlanningState state = initial_state(workload);
  for (const auto& stage : plan.stages) {
    check_stage(ctx, state.workload, stage);
    commit_stage(ctx, state, stage.entries);
  }
  return state;
}

}  // namespace stageplan
