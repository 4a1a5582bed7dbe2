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

#include "stageplan/inference_simulator.h"

#include <algorithm>
#include <numeric>

#include "stageplan/errors.h"

namespace stageplan {

EngineConfig make_engine_config(const ModelSpec& model,
                                const ExecutionPlan& plan,
                                const GpuTopology& topo) {
  EngineConfig cfg;
  cfg.max_num_seqs = model.max_num_seqs;
  cfg.kv_capacity_tokens = kv_capacity_tokens(model, plan, topo);
  return cfg;
}

ModelEngine::ModelEngine(const ModelSpec& model,
                         const ModelCoefficients& coeffs, EngineConfig cfg,
                         int node, ExecutionPlan plan, double start_time,
                         const WorkloadState& workload)
    : model_(&model), coeffs_(&coeffs), cfg_(cfg) {
  if (plan.dp < 1 || plan.tp < 1)
    throw InputError("bad plan " + plan.ToString());
  if (cfg_.max_num_seqs < 1) throw InputError("max_num_seqs must be >= 1");
  state_.node = node;
  state_.plan = plan;
  state_.replicas.resize(plan.dp);
  for (auto& r : state_.replicas) r.clock = start_time;
  state_.seen.assign(workload.requests_of(node).size(), false);
  Discover(workload);
}

ModelEngine::ModelEngine(const ModelSpec& model,
                         const ModelCoefficients& coeffs, EngineConfig cfg,
                         EngineState state)
    : model_(&model), coeffs_(&coeffs), cfg_(cfg), state_(std::move(state)) {
  if (static_cast<int>(state_.replicas.size()) != state_.plan.dp)
    throw InputError("engine state does not match its plan");
}

void ModelEngine::Note(int request, const WorkloadState& workload) {
  const int pos = workload.position_in_node(request);
  if (state_.seen[pos]) return;
  const auto& st = workload.at(request);
  if (st.done || !st.ready()) return;
  state_.seen[pos] = true;
  state_.pending.emplace(st.ready_time, request);
}

void ModelEngine::Discover(const WorkloadState& workload) {
  for (int r : workload.requests_of(state_.node)) Note(r, workload);
}

void ModelEngine::Deal(double t) {
  while (!state_.pending.empty() && state_.pending.begin()->first <= t) {
    const int request = state_.pending.begin()->second;
    state_.pending.erase(state_.pending.begin());
    auto& replica = state_.replicas[state_.next_replica];
    state_.next_replica = (state_.next_replica + 1) % state_.plan.dp;
    // arrivals come in nondecreasing ready order, so the tail is right
    replica.waiting.push_back(request);
  }
}

double ModelEngine::NextAction(const ReplicaState& replica,
                               const WorkloadState& workload) const {
  if (!replica.running.empty()) return replica.clock;
  if (!replica.waiting.empty())
    return std::max(replica.clock,
                    workload.at(replica.waiting.front()).ready_time);
  return kNever;
}

ModelEngine::Step ModelEngine::Compose(const ReplicaState& replica, double t,
                                       const WorkloadState& workload) const {
  const int64_t cap = cfg_.kv_capacity_tokens;
  Step step;

  // Prefill whenever the head of the queue fits.
  int64_t kv = replica.kv_used;
  const int slots =
      cfg_.max_num_seqs - static_cast<int>(replica.running.size());
  int64_t s = 0, total = 0, fresh_s = 0, fresh_total = 0;
  for (int request : replica.waiting) {
    const auto& st = workload.at(request);
    if (st.ready_time > t || step.admit >= slots) break;
    const int64_t prompt = st.input_len + st.generated;
    if (kv + prompt + 1 > cap) break;
    kv += prompt + 1;
    ++step.admit;
    s = std::max(s, prompt);
    total += prompt;
    fresh_s = std::max(fresh_s, st.input_len);
    fresh_total += st.input_len;
  }
  if (step.admit > 0) {
    step.prefill = true;
    step.it = {IterationKind::kPrefill, step.admit, s, total};
    // Already generated tokens were paid for by earlier decodes.
    step.useful = {IterationKind::kPrefill, step.admit, fresh_s, fresh_total};
    return step;
  }

  if (replica.running.empty()) {
    const auto& st = workload.at(replica.waiting.front());
    throw InputError("request '" + workload.id(replica.waiting.front()) +
                     "' needs " + std::to_string(st.input_len + st.generated + 1) +
                     " KV tokens but model '" + model_->id + "' under " +
                     state_.plan.ToString() + " holds " + std::to_string(cap));
  }

  // Decode; evict from the most recently admitted end until one more token
  // per request fits.
  int n = static_cast<int>(replica.running.size());
  kv = replica.kv_used;
  while (n > 0 && kv + n > cap) {
    const auto& st = workload.at(replica.running[n - 1]);
    kv -= st.input_len + st.generated;
    --n;
    ++step.victims;
  }
  if (n == 0)
    throw InputError("KV capacity of model '" + model_->id +
                     "' cannot hold a single growing request");
  s = 0;
  total = 0;
  for (int i = 0; i < n; ++i) {
    const auto& st = workload.at(replica.running[i]);
    s = std::max(s, st.input_len + st.generated);
    total += st.input_len + st.generated;
  }
  step.it = {IterationKind::kDecode, n, s, total};
  step.useful = step.it;
  return step;
}

ModelEngine::RunSummary ModelEngine::Run(WorkloadState& workload, double limit,
                                         InFlight mode,
                                         std::vector<IterationRecord>* trace) {
  Discover(workload);
  RunSummary summary;
  const int dp = state_.plan.dp;
  const int tp = state_.plan.tp;
  std::vector<bool> halted(dp, false);

  while (true) {
    int best = -1;
    double bt = kNever;
    for (int r = 0; r < dp; ++r) {
      if (halted[r]) continue;
      const double t = NextAction(state_.replicas[r], workload);
      if (t < bt) {
        bt = t;
        best = r;
      }
    }
    const double pt =
        state_.pending.empty() ? kNever : state_.pending.begin()->first;
    const double t = std::min(bt, pt);
    if (t == kNever) break;
    if (mode == InFlight::kComplete ? t >= limit : t > limit) break;
    if (pt <= bt) {
      Deal(pt);
      continue;
    }

    auto& replica = state_.replicas[best];
    const Step step = Compose(replica, bt, workload);
    const double flops = iteration_flops(*model_, step.it, tp);
    const double latency = iter_latency(*coeffs_, step.it, flops);
    const double useful = step.it.total_len == step.useful.total_len
                              ? flops
                              : iteration_flops(*model_, step.useful, tp);
    const double end = bt + latency;
    if (mode == InFlight::kDrop && end > limit) {
      halted[best] = true;
      continue;
    }

    if (step.prefill) {
      for (int k = 0; k < step.admit; ++k) {
        const int request = replica.waiting.front();
        replica.waiting.pop_front();
        const auto& st = workload.at(request);
        replica.kv_used += st.input_len + st.generated + 1;
        workload.AddGenerated(request, 1);
        replica.running.push_back(request);
      }
    } else {
      for (int v = 0; v < step.victims; ++v) {
        const int request = replica.running.back();
        replica.running.pop_back();
        const auto& st = workload.at(request);
        replica.kv_used -= st.input_len + st.generated;
        replica.waiting.push_front(request);
        ++state_.preemptions;
      }
      for (int request : replica.running) workload.AddGenerated(request, 1);
      replica.kv_used += static_cast<int64_t>(replica.running.size());
    }
    replica.clock = end;

    std::vector<int> still;
    still.reserve(replica.running.size());
    for (int request : replica.running) {
      const auto& st = workload.at(request);
      if (st.generated < st.output_len) {
        still.push_back(request);
        continue;
      }
      replica.kv_used -= st.input_len + st.generated;
      for (int released : workload.Complete(request, end))
        if (workload.at(released).node == state_.node)
          Note(released, workload);
    }
    replica.running.swap(still);

    summary.flops += flops;
    summary.useful_flops += useful;
    ++summary.iterations;
    if (trace) {
      IterationRecord rec;
      rec.replica = best;
      rec.start = bt;
      rec.latency = latency;
      rec.flops = flops;
      rec.useful_flops = useful;
      rec.it = step.it;
      rec.preempted = step.victims;
      rec.kv_used = replica.kv_used;
      trace->push_back(rec);
    }
  }
  return summary;
}

namespace {

void FillOutcome(SimResult& res, int node, double fallback_time) {
  const auto& w = res.end_state;
  res.finished = w.node_finished(node);
  if (res.finished) {
    res.total_time = w.node_completion_time(node);
  } else {
    res.total_time = fallback_time;
    for (const auto& rec : res.iteration_trace)
      res.total_time = std::max(res.total_time, rec.end());
  }
  res.finish_times.clear();
  for (int r : w.requests_of(node))
    if (w.at(r).done) res.finish_times[w.id(r)] = w.at(r).finish_time;
}

}  // namespace

SimResult simulate_model(const ModelSpec& model, const ExecutionPlan& plan,
                         int node, const WorkloadState& workload,
                         const CostTable& table, const EngineConfig& cfg,
                         std::optional<double> time_limit, InFlight mode,
                         double start_time) {
  SimResult res;
  res.end_state = workload;
  const auto& coeffs = table.coefficients(model.id, plan.tp);
  ModelEngine engine(model, coeffs, cfg, node, plan, start_time,
                     res.end_state);
  auto summary = engine.Run(res.end_state, time_limit.value_or(kNever), mode,
                            &res.iteration_trace);
  res.total_flops = summary.flops;
  res.engine_state = engine.state();
  FillOutcome(res, node, start_time);
  return res;
}

SimResult resume_model(const ModelSpec& model, const CostTable& table,
                       const EngineConfig& cfg, const SimResult& previous,
                       std::optional<double> time_limit, InFlight mode) {
  SimResult res = previous;
  const auto& coeffs =
      table.coefficients(model.id, previous.engine_state.plan.tp);
  ModelEngine engine(model, coeffs, cfg, previous.engine_state);
  auto summary = engine.Run(res.end_state, time_limit.value_or(kNever), mode,
                            &res.iteration_trace);
  res.total_flops += summary.flops;
  res.engine_state = engine.state();
  FillOutcome(res, engine.node(), previous.total_time);
  return res;
}

const ModelSpec& SimContext::model_of(int node) const {
  return catalog->at(graph->node(node).model_id);
}

EngineConfig SimContext::engine_config(int node,
                                       const ExecutionPlan& plan) const {
  return make_engine_config(model_of(node), plan, *topo);
}

double ModelStageResult::FlopsUntil(double t) const {
  auto it = std::upper_bound(
      cumulative_flops.begin(), cumulative_flops.end(), t,
      [](double v, const std::pair<double, double>& p) { return v < p.first; });
  if (it == cumulative_flops.begin()) return 0.0;
  return std::prev(it)->second;
}

double StageSimResult::throughput() const {
  const double d = duration();
  if (!(d > 0.0)) return flops_within > 0.0 ? kNever : 0.0;
  return flops_within / d;
}

void validate_stage(const SimContext& ctx, const WorkloadState& workload,
                    const std::vector<EntryStart>& entries) {
  std::set<int> nodes;
  int gpus = 0;
  for (const auto& e : entries) {
    if (e.node < 0 || e.node >= ctx.graph->size())
      throw InputError("stage entry names an unknown node");
    const auto& name = ctx.graph->node(e.node).id;
    if (!nodes.insert(e.node).second)
      throw InputError("node '" + name + "' appears twice in one stage");
    if (workload.node_finished(e.node))
      throw InputError("node '" + name + "' has already finished");
    if (!plan_is_valid(ctx.model_of(e.node), e.plan, *ctx.topo))
      throw InputError("plan " + e.plan.ToString() + " is not valid for '" +
                       name + "'");
    if (e.carried && (e.carried->node != e.node || e.carried->plan != e.plan))
      throw InputError("carried engine does not match entry '" + name + "'");
    gpus += e.plan.gpus_required();
  }
  if (gpus > ctx.topo->num_gpus)
    throw InputError("stage needs " + std::to_string(gpus) + " GPUs but only " +
                     std::to_string(ctx.topo->num_gpus) + " exist");
  for (const auto& e : entries)
    for (int p : ctx.graph->predecessors(e.node))
      if (!workload.node_finished(p) && !nodes.count(p))
        throw InputError("node '" + ctx.graph->node(e.node).id +
                         "' depends on '" + ctx.graph->node(p).id +
                         "', which is neither finished nor in the stage");
}

EngineState start_engine(const SimContext& ctx, int node,
                         const ExecutionPlan& plan, double start_time,
                         const WorkloadState& workload) {
  const auto& model = ctx.model_of(node);
  ModelEngine engine(model, ctx.table->coefficients(model.id, plan.tp),
                     ctx.engine_config(node, plan), node, plan, start_time,
                     workload);
  return engine.state();
}

std::vector<ModelStageResult> advance_engines(
    const SimContext& ctx, WorkloadState& workload,
    std::vector<EngineState>& engines, double limit, InFlight mode,
    bool keep_traces) {
  auto topo_order = ctx.graph->TopologicalOrder();
  if (!topo_order) throw InputError("application graph is cyclic");
  std::vector<int> rank(ctx.graph->size());
  for (size_t i = 0; i < topo_order->size(); ++i)
    rank[(*topo_order)[i]] = static_cast<int>(i);
  std::vector<size_t> order(engines.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return rank[engines[a].node] < rank[engines[b].node];
  });

  std::vector<ModelStageResult> out(engines.size());
  for (size_t i : order) {
    auto& state = engines[i];
    const auto& model = ctx.model_of(state.node);
    const ExecutionPlan plan = state.plan;
    ModelEngine engine(model, ctx.table->coefficients(model.id, plan.tp),
                       ctx.engine_config(state.node, plan), std::move(state));
    std::vector<IterationRecord> trace;
    auto summary = engine.Run(workload, limit, mode, &trace);
    state = engine.state();

    auto& m = out[i];
    m.node = state.node;
    m.plan = plan;
    m.flops = summary.flops;
    std::vector<std::pair<double, double>> ends;
    ends.reserve(trace.size());
    for (const auto& rec : trace) ends.emplace_back(rec.end(), rec.useful_flops);
    std::sort(ends.begin(), ends.end());
    double acc = 0.0;
    for (auto& [t, f] : ends) {
      acc += f;
      f = acc;
    }
    m.cumulative_flops = std::move(ends);
    m.completion = workload.node_finished(state.node)
                       ? workload.node_completion_time(state.node)
                       : kNever;
    if (keep_traces) m.trace = std::move(trace);
  }
  return out;
}

StageSimResult simulate_stage(const SimContext& ctx,
                              const WorkloadState& workload,
                              const std::vector<EntryStart>& entries,
                              double start_time, std::optional<double> limit,
                              InFlight mode, bool keep_traces) {
  validate_stage(ctx, workload, entries);
  StageSimResult res;
  res.start_time = start_time;
  res.workload = workload;
  res.engines.reserve(entries.size());
  for (const auto& e : entries)
    res.engines.push_back(e.carried ? *e.carried
                                    : start_engine(ctx, e.node, e.plan,
                                                   start_time + e.load_time,
                                                   res.workload));
  res.models = advance_engines(ctx, res.workload, res.engines,
                               limit.value_or(kNever), mode, keep_traces);

  double earliest = kNever;
  for (const auto& m : res.models) {
    if (m.completion < earliest ||
        (m.completion == earliest && m.completion < kNever &&
         m.node < res.first_finisher)) {
      earliest = m.completion;
      res.first_finisher = m.node;
    }
  }
  res.end_time = limit ? *limit : earliest;
  if (limit && earliest > *limit) res.first_finisher = -1;
  for (const auto& m : res.models)
    res.flops_within += m.FlopsUntil(res.end_time);
  return res;
}

}  // namespace stageplan
