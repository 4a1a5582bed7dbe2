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


// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "stageplan/baselines.h"
#include "stageplan/cost_model.h"
#include "stageplan/fixtures.h"
#include "stageplan/io.h"
#include "stageplan/length_sampler.h"
#include "stageplan/placement.h"
#include "stageplan/planner.h"
#include "stageplan/problem.h"
#include "stageplan/runtime.h"
#include "placement_oracle.h"
#include "runtime_cases.h"
#include "search_oracle.h"
#include "sim_cases.h"
#include "testing.h"

namespace stageplan {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome Fail(std::string why) { return {false, std::move(why)}; }

std::string Num(double v, const char* fmt = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

// 1 -------------------------------------------------------------------------
Outcome FlopsOracle() {
  std::mt19937_64 rng(7);
  auto pick = [&](int64_t lo, int64_t hi) {
    return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
  };
  const int tps[] = {1, 2, 4, 8};
  for (int i = 0; i < 1000; ++i) {
    const int64_t L = pick(1, 80), c = pick(1, 1 << 24);
    const int tp = tps[pick(0, 3)];
    const int64_t h = tp * pick(1, 8192 / tp);
    const int64_t B = pick(0, 256), s = pick(1, 4096);
    const int64_t S = pick(B, B * 4096);
    ModelSpec m = testing::TinyModel("m", 256, {tp});
    m.num_layers = L;
    m.hidden_dim = h;
    m.matmul_weight_sum = static_cast<double>(c);
    if (flops_prefill(m, {IterationKind::kPrefill, B, s, B * s}, tp) !=
        testing::OracleFlopsPrefill(L, c, h, B, s, tp))
      return Fail("prefill differs on tuple " + std::to_string(i));
    if (flops_decode(m, {IterationKind::kDecode, B, s, S}, tp) !=
        testing::OracleFlopsDecode(L, c, h, B, S, tp))
      return Fail("decode differs on tuple " + std::to_string(i));
  }
  return {true, "1000 tuples, exact"};
}

// 2 -------------------------------------------------------------------------
struct Truth {
  double a, b;
};

// Every (tp, phase, B) bucket gets its own line; x spans a range where the
// slope and intercept contribute comparably.
Outcome FitRoundTrip() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pos(0.5, 2.0), sym(-1.0, 1.0);
  double worst_clean = 0.0, worst_noisy = 0.0;
  for (double noise : {0.0, 0.05}) {
    std::vector<ProfileSample> samples;
    std::map<std::tuple<int, int, int64_t>, Truth> truth;
    for (int tp : {1, 2})
      for (int ph = 0; ph < 3; ++ph)
        for (int64_t B : {1, 4, 16, 64}) {
          const double b = 1e-3 * pos(rng);
          const double x_max = 1e6 * pos(rng);
          const double a = 2.0 * b / x_max * pos(rng);
          truth[{tp, ph, B}] = {a, b};
          for (int i = 0; i < 200; ++i) {
            const double x = x_max * (i + 1) / 200.0;
            samples.push_back({"m", tp, static_cast<Phase>(ph), B, x,
                               (a * x + b) * (1.0 + noise * sym(rng))});
          }
        }
    const CostTable t = fit_coefficients(samples);
    double worst = 0.0;
    for (const auto& [key, tr] : truth) {
      const auto& [tp, ph, B] = key;
      const auto& line =
          t.coefficients("m", tp).of(static_cast<Phase>(ph)).entries.at(B);
      worst = std::max({worst, std::abs(line.a / tr.a - 1.0),
                        std::abs(line.b / tr.b - 1.0)});
    }
    (noise == 0.0 ? worst_clean : worst_noisy) = worst;
  }
  const std::string d = "clean rel err " + Num(worst_clean) +
                        ", 5% noise rel err " + Num(worst_noisy);
  if (worst_clean > 1e-6 || worst_noisy > 5e-2) return Fail(d);
  return {true, d};
}

// 3 -------------------------------------------------------------------------
Outcome SamplerFidelity() {
  std::mt19937_64 rng(5);
  std::lognormal_distribution<double> ln(5.0, 0.8);
  std::vector<int64_t> trace;
  for (int i = 0; i < 3000; ++i) trace.push_back(static_cast<int64_t>(ln(rng)));
  const auto e = build_ecdf(trace, "m");
  std::vector<int64_t> samples;
  for (int i = 0; i < 100000; ++i)
    samples.push_back(draw_output_length(e, 77, "q" + std::to_string(i)));
  const double ks = testing::KsDistance(samples, trace);
  if (ks > 0.01) return Fail("KS distance " + Num(ks));

  for (int i = 0; i < 10000; ++i) {
    const int64_t l_max = 1 + static_cast<int64_t>(rng() % 4096);
    const int64_t l_in = static_cast<int64_t>(rng() % (l_max + 1));
    const std::optional<int64_t> cap =
        rng() % 3 ? std::optional<int64_t>(rng() % 600) : std::nullopt;
    const int64_t out =
        sample_output_length(e, l_in, l_max, cap, 3, std::to_string(i));
    if (out < 0 || out > l_max - l_in || (cap && out > *cap))
      return Fail("cap violated on pair " + std::to_string(i));
  }

  const ProblemInputs in = fixture_by_name("chain_summary");
  auto dump = [&](uint64_t seed) {
    const auto drawn = sample_draws(in, seed);
    std::map<std::string, int64_t> m;
    for (size_t i = 0; i < drawn.size(); ++i) m[in.requests[i].id] = drawn[i];
    return dump_json(lengths_to_json(m));
  };
  if (dump(9) != dump(9)) return Fail("replay under a fixed seed differs");
  if (dump(9) == dump(10)) return Fail("seed has no effect");
  return {true, "KS " + Num(ks) + ", 1e4 cap pairs, replay identical"};
}

// 4 -------------------------------------------------------------------------
Outcome SimulatorOracle() {
  for (const auto& c : testing::HandCases())
    if (auto m = testing::CheckHandCase(c); !m.empty())
      return Fail(c.name + ": " + m);
  if (auto m = testing::FuzzConservation(1000, 2024); !m.empty())
    return Fail("fuzz: " + m);
  int64_t preempting = 0;
  if (auto m = testing::FuzzConservation(300, 99, &preempting); !m.empty())
    return Fail("KV fuzz: " + m);
  if (auto m = testing::CheckTruncateResume(20, 31); !m.empty())
    return Fail("resume: " + m);
  return {true, "5 hand traces, 1300 fuzz workloads (" +
                    std::to_string(preempting) +
                    " with evictions), 20 cut points x 2 modes"};
}

// 5 -------------------------------------------------------------------------
Outcome SixModelStructure() {
  const Problem p = Problem::Sampled(fig1_fixture(), 0);
  const auto ctx = p.ctx();
  testing::SixModelSearch search(ctx);
  const double opt = search.Run(p.workload());
  const double g = greedy_search(ctx, p.workload()).total_latency;
  const double mx = max_heuristic(ctx, p.workload()).total_latency;
  const double mn = min_heuristic(ctx, p.workload()).total_latency;
  const std::string d = "greedy " + Num(g) + ", max " + Num(mx) + ", min " +
                        Num(mn) + ", optimum " + Num(opt) + " (" +
                        std::to_string(search.visited()) + " search nodes)";
  if (!(g < mx) || !(g <= mn) || g > 1.05 * opt ||
      search.visited() > 100000)
    return Fail(d);
  return {true, d};
}

// 6 -------------------------------------------------------------------------
Outcome ChatglmScaling() {
  const Problem p = Problem::Sampled(chatglm_fixture(), 0);
  const auto ctx = p.ctx();
  double t[2];
  int k = 0;
  for (int dp : {1, 8}) {
    EntryStart e;
    e.node = 0;
    e.plan = {dp, 1};
    e.load_time = loading_time(*ctx.table, ctx.model_of(0).id, e.plan);
    t[k++] = simulate_stage(ctx, p.workload(), {e}, 0.0).models[0].completion;
  }
  std::string d = "1 GPU " + Num(t[0]) + " s, 8 GPUs " + Num(t[1]) + " s";
  if (std::abs(t[0] - 48.0) > 1e-9 || std::abs(t[1] - 32.0) > 1e-9)
    return Fail(d);
  const auto plan = greedy_search(ctx, p.workload());
  int linear_waiting = p.workload().remaining(1);
  int widest = 0;
  for (const auto& s : plan.stages) {
    if (const auto* e = s.find(0)) {
      if (linear_waiting > 0 && e->plan.gpus_required() == 8)
        return Fail(d + "; chatglm took all 8 GPUs with work left elsewhere");
      widest = std::max(widest, e->plan.gpus_required());
    }
    linear_waiting = s.remaining_after[1];
  }
  return {true, d + "; greedy gives chatglm at most " +
                    std::to_string(widest) + " GPUs while the other runs"};
}

// 7 -------------------------------------------------------------------------
Outcome ReplayInvariants() {
  const testing::WorkedExample ex;
  const auto t = ex.Run();
  const auto got = testing::Shown(t);
  const auto want = testing::WorkedExample::Expected();
  if (got != want) {
    size_t i = 0;
    while (i < got.size() && i < want.size() && got[i] == want[i]) ++i;
    return Fail("worked example diverges at event " + std::to_string(i) +
                ": got '" + (i < got.size() ? got[i] : "<end>") +
                "', want '" + (i < want.size() ? want[i] : "<end>") + "'");
  }
  if (t.mispredictions != 1 || t.total_time != 7.0)
    return Fail("worked example totals are off");

  const Problem p = Problem::Sampled(ensembling_fixture(40), 0);
  const auto plan = greedy_search(p.ctx(), p.workload());
  if (plan.stages.size() < 3) return Fail("plan has fewer than 3 stages");
  const auto rep = testing::CheckPerturbations(p, plan, 100, 17);
  if (!rep.error.empty()) return Fail(rep.error);
  return {true, "worked example matches " + std::to_string(want.size()) +
                    " events; 100 perturbations (" +
                    std::to_string(rep.mispredicted) +
                    " with mispredictions) on a " +
                    std::to_string(plan.stages.size()) + "-stage plan"};
}

// 8 -------------------------------------------------------------------------
Outcome SelfConsistency() {
  int runs = 0;
  for (const auto& name : fixture_names()) {
    const Problem p = Problem::Sampled(fixture_by_name(name), 0);
    const auto ctx = p.ctx();
    for (const auto& plan :
         {greedy_search(ctx, p.workload()), max_heuristic(ctx, p.workload()),
          min_heuristic(ctx, p.workload())}) {
      const auto t = run_with_oracle(ctx, plan, p.workload());
      ++runs;
      if (t.total_time != plan.total_latency)
        return Fail(name + "/" + plan.algorithm + ": measured " +
                    Num(t.total_time, "%.17g") + ", planned " +
                    Num(plan.total_latency, "%.17g"));
    }
  }
  return {true, std::to_string(runs) + " replays equal their plans exactly"};
}

// 9 -------------------------------------------------------------------------
Outcome PreemptionAblation() {
  const Problem p = Problem::Sampled(mixed_fixture(), 0);
  const auto ctx = p.ctx();
  PlannerOptions np;
  np.allow_preemption = false;
  MinHeuristicOptions mnp;
  mnp.allow_preemption = false;
  const double g = greedy_search(ctx, p.workload()).total_latency;
  const double gn = greedy_search(ctx, p.workload(), np).total_latency;
  const double m = min_heuristic(ctx, p.workload()).total_latency;
  const double mn = min_heuristic(ctx, p.workload(), mnp).total_latency;
  const std::string d = "greedy " + Num(g) + " vs " + Num(gn) +
                        " without preemption; min " + Num(m) + " vs " +
                        Num(mn);
  if (g > gn || m > mn) return Fail(d);
  return {true, d};
}

// 10 ------------------------------------------------------------------------
Outcome PlacementOptimality() {
  int compared = 0, infeasible = 0;
  for (int n : {4, 8}) {
    const auto rep = testing::CheckRandomTransitions(n, 200, 5 + n);
    if (!rep.error.empty()) return Fail(rep.error);
    compared += rep.compared;
    infeasible += rep.infeasible;
  }
  const GpuTopology topo = GpuTopology::Uniform(4, 80 * testing::kGiB, 2);
  std::set<testing::Sets> seen;
  PlacementState prev = PlacementState::Empty(4);
  for (int busy = -1; busy < 4; ++busy) {
    PlacementState s = PlacementState::Empty(4);
    if (busy >= 0) {
      s.models[1] = {{1, 1}, {{busy}}};
      s.Rebuild(4);
    }
    std::vector<StageEntry> entries = {{0, {1, 2}}};
    if (busy >= 0) entries.push_back({1, {1, 1}});
    const auto r = place_stage(s, entries, topo, testing::Cost);
    const auto sets = testing::AsSets(r.state.models.at(0).replicas);
    if (sets != testing::Sets{{0, 1}} && sets != testing::Sets{{2, 3}})
      return Fail("tp=2 pair placed across links");
    seen.insert(sets);
  }
  return {true, std::to_string(compared) + " transitions at optimum, " +
                    std::to_string(infeasible) +
                    " rejected by both; tp=2 pair only on {0,1}/{2,3}"};
}

// 11 ------------------------------------------------------------------------
Outcome Complexity() {
  double worst = 0.0;
  std::string where;
  for (int n : {2, 4, 8})
    for (int v = 2; v <= 9; ++v) {
      const Problem p = Problem::Sampled(scaling_fixture(v, n), 0);
      const auto plan = greedy_search(p.ctx(), p.workload());
      const double k = static_cast<double>(plan.candidate_evaluations) /
                       (static_cast<double>(v) * v * n * n);
      if (k > worst) {
        worst = k;
        where = "|V|=" + std::to_string(v) + " N=" + std::to_string(n);
      }
    }
  const std::string d = "max K = " + Num(worst, "%.3f") + " at " + where;
  if (worst > 4.0) return Fail(d);
  return {true, d};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0: none
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace stageplan

int main() {
  using namespace stageplan;
  const std::vector<Criterion> criteria = {
      {1, "FLOPs oracle equivalence", 1.0, FlopsOracle},
      {2, "coefficient fitting round trip", 5.0, FitRoundTrip},
      {3, "sampler fidelity", 10.0, SamplerFidelity},
      {4, "simulator hand traces, fuzz, resume", 0.0, SimulatorOracle},
      {5, "greedy structure on the six-model example", 60.0, SixModelStructure},
      {6, "chatglm scaling", 30.0, ChatglmScaling},
      {7, "dynamic scheduler invariants", 0.0, ReplayInvariants},
      {8, "self-consistency", 0.0, SelfConsistency},
      {9, "preemption ablation direction", 0.0, PreemptionAblation},
      {10, "placement optimality", 0.0, PlacementOptimality},
      {11, "complexity instrumentation", 0.0, Complexity},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = Fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    if (o.pass && c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += "; over the " + Num(c.budget_s) + " s budget";
    }
    failed += !o.pass;
    std::printf("%s %2d %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", c.id,
                c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n",
              static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
