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

#include "stageplan/runtime.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <set>

#include "stageplan/errors.h"

namespace stageplan {

const char* EventKindName(EventKind kind) {
  switch (kind) {
    case EventKind::kModelStarted: return "model_started";
    case EventKind::kModelFinished: return "model_finished";
    case EventKind::kStageAdvanced: return "stage_advanced";
    case EventKind::kModelKeptRunning: return "model_kept_running";
    case EventKind::kModelStopped: return "model_stopped";
    case EventKind::kPlacementMoved: return "placement_moved";
  }
  return "?";
}

EventKind ParseEventKind(const std::string& name) {
  for (auto k : {EventKind::kModelStarted, EventKind::kModelFinished,
                 EventKind::kStageAdvanced, EventKind::kModelKeptRunning,
                 EventKind::kModelStopped, EventKind::kPlacementMoved})
    if (name == EventKindName(k)) return k;
  throw InputError("unknown event kind '" + name + "'");
}

double RuntimeTrace::error_ratio() const {
  if (total_time == 0.0) return planned_total == 0.0 ? 0.0 : kNever;
  return std::abs(planned_total - total_time) / total_time;
}

void check_plan_matches(const SimContext& ctx, const AppPlan& plan) {
  const auto& g = *ctx.graph;
  if (static_cast<int>(plan.node_ids.size()) != g.size())
    throw MismatchError("plan has " + std::to_string(plan.node_ids.size()) +
                        " nodes, graph has " + std::to_string(g.size()));
  for (int n = 0; n < g.size(); ++n)
    if (plan.node_ids[n] != g.node(n).id)
      throw MismatchError("plan node '" + plan.node_ids[n] +
                          "' does not match graph node '" + g.node(n).id + "'");
  for (size_t s = 0; s < plan.stages.size(); ++s) {
    for (const auto& e : plan.stages[s].entries) {
      if (e.node < 0 || e.node >= g.size())
        throw MismatchError("stage " + std::to_string(s) +
                            " names an unknown node");
      if (!plan_is_valid(ctx.model_of(e.node), e.plan, *ctx.topo))
        throw MismatchError("stage " + std::to_string(s) + " runs '" +
                            g.node(e.node).id + "' with invalid plan " +
                            e.plan.ToString());
    }
    if (gpus_of(plan.stages[s].entries) > ctx.topo->num_gpus)
      throw MismatchError("stage " + std::to_string(s) +
                          " needs more GPUs than the machine has");
  }
}

namespace {

struct Active {
  ExecutionPlan plan;
  EngineState engine;
  int stage = -1;
};

struct PendingPair {
  int stage = -1;
  StageEntry entry;
};

class Replayer {
 public:
  Replayer(const SimContext& ctx, const AppPlan& plan,
           const WorkloadState& oracle, const RuntimeOptions& options)
      : ctx_(ctx),
        plan_(plan),
        options_(options),
        w_(oracle),
        placement_(PlacementState::Empty(ctx.topo->num_gpus)),
        cost_(table_load_cost(*ctx.graph, *ctx.table)) {
    trace_.planned_total = plan.total_latency;
    trace_.gpu_busy.resize(ctx.topo->num_gpus);
  }

  RuntimeTrace Run() {
    check_plan_matches(ctx_, plan_);
    if (w_.all_finished()) return Finish();
    if (plan_.stages.empty())
      throw MismatchError("plan has no stages but work remains");
    Advance(0);
    Schedule({});

    int stalls = 0;
    while (!w_.all_finished()) {
      if (active_.empty()) {
        Schedule({});
        if (active_.empty()) Fallback();
      }
      std::vector<EngineState> engines;
      std::vector<int> nodes;
      for (auto& [node, a] : active_) {
        nodes.push_back(node);
        engines.push_back(a.engine);
      }
      WorkloadState probe_w = w_;
      auto probe_e = engines;
      const auto probe =
          advance_engines(ctx_, probe_w, probe_e, kNever, InFlight::kComplete);
      double t_f = kNever;
      for (const auto& m : probe) t_f = std::min(t_f, m.completion);
      if (t_f == kNever) {
        if (++stalls > 2) throw InfeasibleError("replay cannot make progress");
        Unblock();
        continue;
      }
      stalls = 0;

      const auto committed = advance_engines(ctx_, w_, engines, t_f,
                                             InFlight::kDrop, true);
      for (size_t i = 0; i < nodes.size(); ++i) {
        active_[nodes[i]].engine = std::move(engines[i]);
        const auto& reps = placement_.models.at(nodes[i]).replicas;
        for (const auto& rec : committed[i].trace) {
          for (int g : reps.at(rec.replica))
            AddBusy(g, rec.start, rec.end(), nodes[i]);
          if (options_.keep_iterations)
            trace_.iterations.push_back({nodes[i], rec});
        }
      }
      now_ = t_f;

      std::vector<int> finishers;
      for (size_t i = 0; i < nodes.size(); ++i)
        if (w_.node_finished(nodes[i])) finishers.push_back(nodes[i]);
      bool trigger = false, planned = false;
      for (int f : finishers) {
        Emit(EventKind::kModelFinished, f, active_[f].stage, active_[f].plan,
             "");
        active_.erase(f);
        placement_.models.erase(f);
        if (stage_ < static_cast<int>(plan_.stages.size()) &&
            plan_.stages[stage_].find(f)) {
          trigger = true;
          if (plan_.stages[stage_].planned_first_finisher == f) planned = true;
        }
      }
      placement_.Rebuild(ctx_.topo->num_gpus);
      if (trigger)
        Transition(planned);
      else
        Schedule({});
    }
    return Finish();
  }

 private:
  RuntimeTrace Finish() {
    trace_.total_time = now_;
    trace_.generated_tokens = w_.total_generated();
    for (auto& v : trace_.gpu_busy)
      std::sort(v.begin(), v.end(), [](const BusyInterval& a,
                                       const BusyInterval& b) {
        return a.start < b.start;
      });
    return std::move(trace_);
  }

  void Emit(EventKind kind, int node, int stage, const ExecutionPlan& plan,
            std::string reason) {
    trace_.events.push_back({now_, kind, node, stage, plan, std::move(reason)});
  }

  // Busy means running an iteration. Loading, or holding GPUs while waiting
  // for inputs, counts as idle.
  void AddBusy(int gpu, double start, double end, int node) {
    if (end <= start) return;
    auto& v = trace_.gpu_busy[gpu];
    if (!v.empty() && v.back().node == node && v.back().end >= start) {
      v.back().end = std::max(v.back().end, end);
      return;
    }
    v.push_back({start, end, node});
  }

  void Stop(int node, const char* reason) {
    const auto& a = active_.at(node);
    Emit(EventKind::kModelStopped, node, a.stage, a.plan, reason);
    active_.erase(node);
    placement_.models.erase(node);
  }

  // Enqueues the pairs of stage `k` and makes it current.
  void Advance(int k) {
    stage_ = k;
    if (k >= static_cast<int>(plan_.stages.size())) return;
    Emit(EventKind::kStageAdvanced, -1, k, {}, "");
    for (const auto& e : plan_.stages[k].entries) pending_.push_back({k, e});
  }

  bool AppearsFrom(int node, int stage) const {
    for (size_t s = std::max(stage, 0); s < plan_.stages.size(); ++s)
      if (plan_.stages[s].find(node)) return true;
    return false;
  }

  void Transition(bool planned) {
    if (!planned) ++trace_.mispredictions;
    Advance(stage_ + 1);
    const Stage* next = stage_ < static_cast<int>(plan_.stages.size())
                            ? &plan_.stages[stage_]
                            : nullptr;
    std::vector<int> optional;
    std::vector<int> nodes;
    for (const auto& [node, a] : active_) nodes.push_back(node);
    for (int node : nodes) {
      auto& a = active_.at(node);
      const StageEntry* e = next ? next->find(node) : nullptr;
      if (e && e->plan == a.plan) {
        a.stage = stage_;  // now runs as part of the new stage
        Emit(EventKind::kModelKeptRunning, node, a.stage, a.plan,
             "next-stage");
      } else if (e) {
        Stop(node, "replanned");
      } else if (!AppearsFrom(node, stage_)) {
        Emit(EventKind::kModelKeptRunning, node, a.stage, a.plan,
             "last-stage");
      } else if (planned) {
        Stop(node, "not-in-next-stage");
      } else {
        optional.push_back(node);
      }
    }
    placement_.Rebuild(ctx_.topo->num_gpus);
    Schedule(optional);
  }

  // Starts pending pairs in stage order while GPUs allow, then keeps as many
  // `optional` running models as still fit; the rest are stopped.
  void Schedule(std::vector<int> optional) {
    std::set<int> opt(optional.begin(), optional.end());
    std::vector<bool> drop(pending_.size(), false);
    for (size_t i = 0; i < pending_.size(); ++i) {
      const auto& p = pending_[i];
      if (w_.node_finished(p.entry.node)) {
        drop[i] = true;
        continue;
      }
      auto a = active_.find(p.entry.node);
      if (a != active_.end() && a->second.plan == p.entry.plan) {
        drop[i] = true;  // already running with this plan
        a->second.stage = std::max(a->second.stage, p.stage);
        if (opt.erase(p.entry.node))
          Emit(EventKind::kModelKeptRunning, p.entry.node, a->second.stage,
               a->second.plan, "pending-pair");
      }
    }

    std::vector<StageEntry> base;
    for (const auto& [node, a] : active_)
      if (!opt.count(node)) base.push_back({node, a.plan});
    int used = gpus_of(base);
    const int n_gpus = ctx_.topo->num_gpus;

    std::vector<size_t> selected;
    int blocked = INT32_MAX;
    for (size_t i = 0; i < pending_.size(); ++i) {
      if (drop[i]) continue;
      const auto& p = pending_[i];
      if (p.stage > blocked) break;  // earlier stages go first
      if (active_.count(p.entry.node)) {
        blocked = p.stage;
        continue;
      }
      if (used + p.entry.plan.gpus_required() <= n_gpus) {
        selected.push_back(i);
        used += p.entry.plan.gpus_required();
      } else {
        blocked = p.stage;
      }
    }
    std::vector<int> keep;
    for (int node : opt) {
      const int g = active_.at(node).plan.gpus_required();
      if (used + g <= n_gpus) {
        keep.push_back(node);
        used += g;
      }
    }

    PlacementResult placed;
    while (true) {
      std::vector<StageEntry> desired = base;
      for (size_t i : selected) desired.push_back(pending_[i].entry);
      for (int node : keep) desired.push_back({node, active_.at(node).plan});
      try {
        placed = place_stage(placement_, desired, *ctx_.topo, cost_);
        break;
      } catch (const InfeasibleError&) {
        if (!keep.empty())
          keep.pop_back();
        else if (!selected.empty())
          selected.pop_back();
        else
          throw;
      }
    }

    for (int node : opt)
      if (std::find(keep.begin(), keep.end(), node) == keep.end())
        Stop(node, "no-room");
    for (int node : keep) {
      const auto& a = active_.at(node);
      Emit(EventKind::kModelKeptRunning, node, a.stage, a.plan, "spare-gpus");
    }

    std::map<int, int> stage_of;
    for (size_t i : selected) stage_of[pending_[i].entry.node] = pending_[i].stage;
    placement_ = placed.state;
    for (const auto& mv : placed.moves) {
      const double load = mv.cost;
      trace_.reload_seconds += load;
      auto it = active_.find(mv.node);
      if (it != active_.end()) {
        Emit(EventKind::kPlacementMoved, mv.node, it->second.stage, mv.plan,
             "");
        it->second.engine =
            start_engine(ctx_, mv.node, mv.plan, now_ + load, w_);
      } else {
        Active a;
        a.plan = mv.plan;
        a.stage = stage_of.at(mv.node);
        a.engine = start_engine(ctx_, mv.node, mv.plan, now_ + load, w_);
        active_.emplace(mv.node, std::move(a));
        Emit(EventKind::kModelStarted, mv.node, stage_of.at(mv.node), mv.plan,
             "");
      }
    }

    for (size_t i : selected) drop[i] = true;
    std::deque<PendingPair> rest;
    for (size_t i = 0; i < pending_.size(); ++i)
      if (!drop[i]) rest.push_back(pending_[i]);
    pending_.swap(rest);
    if (!placed.moves.empty() || !selected.empty())
      trace_.placements.push_back({now_, stage_, placement_});
  }

  // Everything running waits on work that is not running: free the GPUs
  // and put those models back in line behind the pending pairs.
  void Unblock() {
    std::vector<int> nodes;
    for (const auto& [node, a] : active_) nodes.push_back(node);
    for (int node : nodes) {
      const auto a = active_.at(node);
      Stop(node, "blocked");
      pending_.push_back({std::max(stage_, a.stage), {node, a.plan}});
    }
    placement_.Rebuild(ctx_.topo->num_gpus);
    Schedule({});
    if (active_.empty()) Fallback();
  }

  // Unfinished models the plan no longer covers run with their last
  // planned plan, in topological order.
  void Fallback() {
    auto order = ctx_.graph->TopologicalOrder();
    std::set<int> queued;
    for (const auto& p : pending_) queued.insert(p.entry.node);
    for (int node : *order) {
      if (w_.node_finished(node) || active_.count(node) || queued.count(node))
        continue;
      std::optional<ExecutionPlan> last;
      for (const auto& s : plan_.stages)
        if (const auto* e = s.find(node)) last = e->plan;
      if (!last) {
        auto plans = enumerate_valid_plans(ctx_.model_of(node), *ctx_.topo);
        if (plans.empty())
          throw InfeasibleError("model '" + ctx_.graph->node(node).id +
                                "' has no valid plan");
        last = plans.front();
      }
      pending_.push_back({std::max(stage_, 0), {node, *last}});
    }
    Schedule({});
    if (active_.empty())
      throw InfeasibleError("no pending model can be started");
  }

  const SimContext& ctx_;
  const AppPlan& plan_;
  RuntimeOptions options_;
  WorkloadState w_;
  PlacementState placement_;
  LoadCost cost_;
  double now_ = 0.0;
  int stage_ = -1;
  std::map<int, Active> active_;
  std::deque<PendingPair> pending_;
  RuntimeTrace trace_;
};

}  // namespace

RuntimeTrace run_with_oracle(const SimContext& ctx, const AppPlan& plan,
                             const WorkloadState& oracle,
                             const RuntimeOptions& options) {
  return Replayer(ctx, plan, oracle, options).Run();
}

IdleReport gpu_idle_report(const RuntimeTrace& trace) {
  IdleReport r;
  r.span = trace.total_time;
  for (const auto& intervals : trace.gpu_busy) {
    double busy = 0.0;
    for (const auto& iv : intervals) busy += iv.end - iv.start;
    r.per_gpu.push_back(std::max(0.0, r.span - busy));
    r.total += r.per_gpu.back();
  }
  return r;
}

}  // namespace stageplan
