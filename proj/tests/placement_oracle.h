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


// Reference placement by enumerating every ordering of GPU ids.

#ifndef STAGEPLAN_TESTS_PLACEMENT_ORACLE_H_
#define STAGEPLAN_TESTS_PLACEMENT_ORACLE_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "stageplan/errors.h"
#include "stageplan/placement.h"

namespace stageplan::testing {

using Sets = std::set<std::set<int>>;

inline Sets AsSets(const std::vector<std::vector<int>>& replicas) {
  Sets out;
  for (const auto& r : replicas) out.insert(std::set<int>(r.begin(), r.end()));
  return out;
}

// Written without the library helper: one group, or whole groups only.
inline bool Connected(const std::vector<int>& gpus, const GpuTopology& topo) {
  std::set<int> groups;
  for (int g : gpus)
    for (size_t k = 0; k < topo.nvlink_groups.size(); ++k)
      for (int x : topo.nvlink_groups[k])
        if (x == g) groups.insert(static_cast<int>(k));
  if (groups.size() == 1) return true;
  std::set<int> covered;
  for (int k : groups)
    covered.insert(topo.nvlink_groups[k].begin(), topo.nvlink_groups[k].end());
  return covered == std::set<int>(gpus.begin(), gpus.end());
}

struct Layout {
  std::map<int, std::pair<ExecutionPlan, Sets>> models;
};

// Lays entries out along `perm`; nullopt when some replica is not
// connected.
inline std::optional<Layout> Chunk(const std::vector<int>& perm,
                            const std::vector<StageEntry>& entries,
                            const GpuTopology& topo) {
  Layout out;
  size_t pos = 0;
  for (const auto& e : entries) {
    Sets sets;
    for (int r = 0; r < e.plan.dp; ++r) {
      std::vector<int> rep(perm.begin() + pos, perm.begin() + pos + e.plan.tp);
      pos += e.plan.tp;
      if (!Connected(rep, topo)) return std::nullopt;
      sets.insert(std::set<int>(rep.begin(), rep.end()));
    }
    out.models[e.node] = {e.plan, sets};
  }
  return out;
}

// Minimum reload cost over every assignment of GPU ids.
inline std::optional<double> BruteForce(const Layout& prev,
                                 const std::vector<StageEntry>& entries,
                                 const GpuTopology& topo,
                                 const LoadCost& cost) {
  std::vector<int> perm(topo.num_gpus);
  std::iota(perm.begin(), perm.end(), 0);
  std::optional<double> best;
  do {
    const auto lay = Chunk(perm, entries, topo);
    if (!lay) continue;
    double c = 0.0;
    for (const auto& e : entries) {
      auto it = prev.models.find(e.node);
      const bool kept = it != prev.models.end() && it->second.first == e.plan &&
                        it->second.second == lay->models.at(e.node).second;
      if (!kept) c += cost(e.node, e.plan);
    }
    if (!best || c < *best) best = c;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline PlacementState ToState(const Layout& lay, int num_gpus) {
  PlacementState s = PlacementState::Empty(num_gpus);
  for (const auto& [node, ps] : lay.models) {
    ModelPlacement mp;
    mp.plan = ps.first;
    for (const auto& r : ps.second) mp.replicas.emplace_back(r.begin(), r.end());
    s.models[node] = mp;
  }
  s.Rebuild(num_gpus);
  return s;
}

inline std::vector<StageEntry> RandomEntries(std::mt19937_64& rng, int num_gpus,
                                      const std::vector<StageEntry>& keep_from) {
  std::uniform_int_distribution<int> coin(0, 2);
  std::vector<StageEntry> out;
  int used = 0;
  std::set<int> nodes;
  // carry some previous entries, some with a new plan
  for (const auto& e : keep_from) {
    const int roll = coin(rng);
    if (roll == 0) continue;
    StageEntry n = e;
    if (roll == 2 && e.plan.dp > 1) n.plan.dp -= 1;
    if (used + n.plan.gpus_required() > num_gpus) continue;
    used += n.plan.gpus_required();
    out.push_back(n);
    nodes.insert(n.node);
  }
  for (int node = 0; node < 6 && used < num_gpus; ++node) {
    if (nodes.count(node) || coin(rng) == 0) continue;
    const int tp = std::vector<int>{1, 1, 2, 4}[rng() % 4];
    const int dp = 1 + static_cast<int>(rng() % 2);
    if (used + dp * tp > num_gpus) continue;
    used += dp * tp;
    out.push_back({node, {dp, tp}});
  }
  std::sort(out.begin(), out.end(),
            [](const StageEntry& a, const StageEntry& b) {
              return a.node < b.node;
            });
  return out;
}

inline double Cost(int node, const ExecutionPlan& p) {
  return 1.0 + 2.0 * node + 0.5 * p.dp + 0.25 * p.tp;
}

struct TransitionReport {
  int compared = 0;    // feasible transitions checked against the oracle
  int infeasible = 0;  // transitions both sides rejected
  std::string error;   // first disagreement, empty if none
};

// Random stage transitions on pairs-linked GPUs: the planner's reload cost
// must equal the brute-force minimum and its layout must be valid.
inline TransitionReport CheckRandomTransitions(int n_gpus, int trials,
                                               uint64_t seed) {
  TransitionReport rep;
  std::mt19937_64 rng(seed);
  const GpuTopology topo = GpuTopology::Uniform(n_gpus, 80LL << 30, 2);
  auto fail = [&](int trial, const std::string& what) {
    rep.error = "N=" + std::to_string(n_gpus) + " trial " +
                std::to_string(trial) + ": " + what;
    return rep;
  };
  for (int trial = 0; trial < trials; ++trial) {
    std::optional<Layout> prev;
    std::vector<StageEntry> before;
    while (!prev) {
      before = RandomEntries(rng, n_gpus, {});
      std::vector<int> perm(n_gpus);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      prev = Chunk(perm, before, topo);
    }
    const PlacementState state = ToState(*prev, n_gpus);
    const auto next = RandomEntries(rng, n_gpus, before);
    const auto want = BruteForce(*prev, next, topo, Cost);
    if (!want) {
      try {
        place_stage(state, next, topo, Cost);
        return fail(trial, "placed a stage the oracle cannot place");
      } catch (const InfeasibleError&) {
        ++rep.infeasible;
      }
      continue;
    }
    PlacementResult got;
    try {
      got = place_stage(state, next, topo, Cost);
    } catch (const InfeasibleError& e) {
      return fail(trial, std::string("rejected a placeable stage: ") + e.what());
    }
    ++rep.compared;
    if (std::abs(got.reload_cost - *want) > 1e-12)
      return fail(trial, "reload cost " + std::to_string(got.reload_cost) +
                             ", optimum " + std::to_string(*want));
    if (!placement_is_feasible(got.state, topo))
      return fail(trial, "infeasible layout");
    double moved = 0.0;
    for (const auto& m : got.moves) moved += m.cost;
    if (std::abs(moved - got.reload_cost) > 1e-12)
      return fail(trial, "moves do not add up to the reload cost");
    if (got.state.models.size() != next.size())
      return fail(trial, "wrong number of placed models");
    for (const auto& e : next) {
      const auto& mp = got.state.models.at(e.node);
      if (!(mp.plan == e.plan) ||
          static_cast<int>(mp.replicas.size()) != e.plan.dp)
        return fail(trial, "plan not honoured");
      for (const auto& r : mp.replicas)
        if (static_cast<int>(r.size()) != e.plan.tp || !Connected(r, topo))
          return fail(trial, "replica not on linked GPUs");
    }
  }
  return rep;
}

}  // namespace stageplan::testing

#endif  // STAGEPLAN_TESTS_PLACEMENT_ORACLE_H_
