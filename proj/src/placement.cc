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

#include "stageplan/placement.h"

#include <algorithm>
#include <bit>
#include <numeric>
#include <set>

#include "stageplan/errors.h"

namespace stageplan {

PlacementState PlacementState::Empty(int num_gpus) {
  PlacementState s;
  s.gpus.assign(num_gpus, GpuOccupant{});
  return s;
}

void PlacementState::Rebuild(int num_gpus) {
  gpus.assign(num_gpus, GpuOccupant{});
  for (const auto& [node, mp] : models) {
    for (size_t r = 0; r < mp.replicas.size(); ++r) {
      for (size_t k = 0; k < mp.replicas[r].size(); ++k) {
        const int g = mp.replicas[r][k];
        if (g < 0 || g >= num_gpus)
          throw InfeasibleError("GPU id " + std::to_string(g) +
                                " out of range");
        if (gpus[g].node >= 0)
          throw InfeasibleError("GPU " + std::to_string(g) +
                                " is assigned twice");
        gpus[g] = {node, static_cast<int>(r), static_cast<int>(k)};
      }
    }
  }
}

int PlacementState::free_gpus() const {
  return static_cast<int>(std::count_if(
      gpus.begin(), gpus.end(), [](const GpuOccupant& o) { return o.node < 0; }));
}

bool tp_group_is_connected(const std::vector<int>& gpus,
                           const GpuTopology& topo) {
  if (gpus.size() <= 1) return true;
  std::set<int> members(gpus.begin(), gpus.end());
  if (members.size() != gpus.size()) return false;
  std::set<int> groups;
  for (int g : gpus) {
    if (g < 0 || g >= topo.num_gpus) return false;
    groups.insert(topo.group_of(g));
  }
  if (groups.size() == 1) return true;
  for (int grp : groups)
    for (int g : topo.nvlink_groups[grp])
      if (!members.count(g)) return false;
  return true;
}

bool placement_is_feasible(const PlacementState& state,
                           const GpuTopology& topo) {
  std::vector<int> owner(topo.num_gpus, 0);
  for (const auto& [node, mp] : state.models) {
    if (static_cast<int>(mp.replicas.size()) != mp.plan.dp) return false;
    for (const auto& rep : mp.replicas) {
      if (static_cast<int>(rep.size()) != mp.plan.tp) return false;
      if (!tp_group_is_connected(rep, topo)) return false;
      for (int g : rep) {
        if (g < 0 || g >= topo.num_gpus || owner[g]++) return false;
      }
    }
  }
  return true;
}

namespace {

struct Replica {
  size_t entry = 0;
  int tp = 1;
};

// Backtracking packer. GPUs inside one NVLink group are interchangeable, so
// only the lowest free ids of a group are ever tried.
class Packer {
 public:
  Packer(const GpuTopology& topo, std::vector<bool> used, int64_t budget)
      : topo_(topo), used_(std::move(used)), budget_(budget) {
    for (auto g : topo.nvlink_groups) {
      std::sort(g.begin(), g.end());
      groups_.push_back(std::move(g));
    }
  }

  bool Solve(const std::vector<Replica>& reps,
             std::vector<std::vector<int>>& out) {
    reps_ = &reps;
    out.assign(reps.size(), {});
    out_ = &out;
    return Rec(0);
  }

 private:
  int FreeIn(const std::vector<int>& grp) const {
    int n = 0;
    for (int g : grp) n += used_[g] ? 0 : 1;
    return n;
  }

  std::vector<int> LowestFree(const std::vector<int>& grp, int k) const {
    std::vector<int> out;
    for (int g : grp) {
      if (static_cast<int>(out.size()) == k) break;
      if (!used_[g]) out.push_back(g);
    }
    return out;
  }

  void WholeGroups(size_t from, int need, std::vector<int>& acc, int parts,
                   std::vector<std::vector<int>>& blocks) const {
    if (need == 0) {
      if (parts >= 2) {
        auto b = acc;
        std::sort(b.begin(), b.end());
        blocks.push_back(std::move(b));
      }
      return;
    }
    for (size_t i = from; i < groups_.size(); ++i) {
      const auto& grp = groups_[i];
      const int size = static_cast<int>(grp.size());
      if (size > need || FreeIn(grp) != size) continue;
      acc.insert(acc.end(), grp.begin(), grp.end());
      WholeGroups(i + 1, need - size, acc, parts + 1, blocks);
      acc.resize(acc.size() - grp.size());
    }
  }

  std::vector<std::vector<int>> Blocks(int tp) const {
    std::vector<std::vector<int>> blocks;
    if (tp == 1) {
      // partially used groups first so whole groups stay free for tp > 1
      std::vector<size_t> order(groups_.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const bool pa = FreeIn(groups_[a]) < static_cast<int>(groups_[a].size());
        const bool pb = FreeIn(groups_[b]) < static_cast<int>(groups_[b].size());
        return pa > pb;
      });
      for (size_t i : order)
        if (FreeIn(groups_[i]) > 0) blocks.push_back(LowestFree(groups_[i], 1));
      return blocks;
    }
    std::vector<size_t> order(groups_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return FreeIn(groups_[a]) < FreeIn(groups_[b]);  // tightest fit first
    });
    for (size_t i : order)
      if (FreeIn(groups_[i]) >= tp) blocks.push_back(LowestFree(groups_[i], tp));
    std::vector<int> acc;
    WholeGroups(0, tp, acc, 0, blocks);
    return blocks;
  }

  bool Rec(size_t i) {
    if (i == reps_->size()) return true;
    if (--budget_ < 0) return false;
    for (const auto& block : Blocks((*reps_)[i].tp)) {
      for (int g : block) used_[g] = true;
      (*out_)[i] = block;
      if (Rec(i + 1)) return true;
      for (int g : block) used_[g] = false;
    }
    return false;
  }

  const GpuTopology& topo_;
  std::vector<std::vector<int>> groups_;
  std::vector<bool> used_;
  int64_t budget_;
  const std::vector<Replica>* reps_ = nullptr;
  std::vector<std::vector<int>>* out_ = nullptr;
};

std::vector<std::vector<int>> Canonical(std::vector<std::vector<int>> reps) {
  for (auto& r : reps) std::sort(r.begin(), r.end());
  std::sort(reps.begin(), reps.end());
  return reps;
}

}  // namespace

PlacementResult place_stage(const PlacementState& prev,
                            const std::vector<StageEntry>& entries,
                            const GpuTopology& topo, const LoadCost& cost) {
  const int n_gpus = topo.num_gpus;
  std::set<int> nodes;
  for (const auto& e : entries)
    if (!nodes.insert(e.node).second)
      throw InputError("node appears twice in one placement request");
  if (gpus_of(entries) > n_gpus)
    throw InfeasibleError("stage needs more GPUs than the machine has");

  std::vector<double> costs(entries.size());
  std::vector<size_t> keepable;
  for (size_t i = 0; i < entries.size(); ++i) {
    costs[i] = cost(entries[i].node, entries[i].plan);
    auto it = prev.models.find(entries[i].node);
    if (it != prev.models.end() && it->second.plan == entries[i].plan &&
        static_cast<int>(it->second.replicas.size()) == entries[i].plan.dp)
      keepable.push_back(i);
  }

  // Try to keep subsets of the keepable entries in place, cheapest total
  // reload first.
  auto attempt = [&](uint64_t mask, std::vector<std::vector<int>>& placed,
                     std::vector<Replica>& reps) {
    std::vector<bool> used(n_gpus, false);
    std::vector<bool> kept(entries.size(), false);
    for (size_t k = 0; k < keepable.size(); ++k)
      if (mask >> k & 1) {
        kept[keepable[k]] = true;
        for (const auto& rep : prev.models.at(entries[keepable[k]].node).replicas)
          for (int g : rep) used[g] = true;
      }
    reps.clear();
    for (size_t i = 0; i < entries.size(); ++i)
      if (!kept[i])
        for (int r = 0; r < entries[i].plan.dp; ++r)
          reps.push_back({i, entries[i].plan.tp});
    std::stable_sort(reps.begin(), reps.end(),
                     [](const Replica& a, const Replica& b) {
                       return a.tp > b.tp;
                     });
    Packer packer(topo, used, 2'000'000);
    return packer.Solve(reps, placed);
  };
  auto mask_cost = [&](uint64_t mask) {
    double c = 0.0;
    std::vector<bool> kept(entries.size(), false);
    for (size_t k = 0; k < keepable.size(); ++k)
      if (mask >> k & 1) kept[keepable[k]] = true;
    for (size_t i = 0; i < entries.size(); ++i)
      if (!kept[i]) c += costs[i];
    return c;
  };

  std::vector<uint64_t> masks;
  const uint64_t all = keepable.empty() ? 0 : ((uint64_t{1} << keepable.size()) - 1);
  if (n_gpus <= 8 && keepable.size() <= 16) {
    for (uint64_t m = 0; m <= all; ++m) masks.push_back(m);
    std::stable_sort(masks.begin(), masks.end(), [&](uint64_t a, uint64_t b) {
      const double ca = mask_cost(a), cb = mask_cost(b);
      if (ca != cb) return ca < cb;
      return std::popcount(a) > std::popcount(b);
    });
  } else {
    // drop the cheapest keepers one at a time
    std::vector<size_t> by_cost(keepable.size());
    std::iota(by_cost.begin(), by_cost.end(), 0);
    std::stable_sort(by_cost.begin(), by_cost.end(), [&](size_t a, size_t b) {
      return costs[keepable[a]] < costs[keepable[b]];
    });
    uint64_t m = all;
    masks.push_back(m);
    for (size_t k : by_cost) {
      m &= ~(uint64_t{1} << k);
      masks.push_back(m);
    }
  }

  for (uint64_t mask : masks) {
    std::vector<std::vector<int>> placed;
    std::vector<Replica> reps;
    if (!attempt(mask, placed, reps)) continue;

    PlacementResult res;
    res.state.gpus.assign(n_gpus, GpuOccupant{});
    std::vector<std::vector<std::vector<int>>> fresh(entries.size());
    for (size_t j = 0; j < reps.size(); ++j)
      fresh[reps[j].entry].push_back(placed[j]);
    for (size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      auto prev_it = prev.models.find(e.node);
      ModelPlacement mp;
      mp.plan = e.plan;
      if (fresh[i].empty()) {
        mp.replicas = prev_it->second.replicas;
      } else {
        mp.replicas = Canonical(fresh[i]);
        const bool same = prev_it != prev.models.end() &&
                          prev_it->second.plan == e.plan &&
                          Canonical(prev_it->second.replicas) == mp.replicas;
        if (!same) {
          PlacementMove mv;
          mv.node = e.node;
          mv.plan = e.plan;
          if (prev_it != prev.models.end()) mv.from = prev_it->second.replicas;
          mv.to = mp.replicas;
          mv.cost = costs[i];
          res.reload_cost += costs[i];
          res.moves.push_back(std::move(mv));
        }
      }
      res.state.models[e.node] = std::move(mp);
    }
    res.state.Rebuild(n_gpus);
    return res;
  }

  std::string names;
  for (const auto& e : entries)
    if (e.plan.tp > 1)
      names += (names.empty() ? "" : ", ") + std::to_string(e.node) + ":" +
               e.plan.ToString();
  throw InfeasibleError("no NVLink-feasible GPU assignment for the stage" +
                        (names.empty() ? std::string() : " (blocking: " + names + ")"));
}

LoadCost table_load_cost(const AppGraph& graph, const CostTable& table) {
  return [&graph, &table](int node, const ExecutionPlan& plan) {
    return loading_time(table, graph.node(node).model_id, plan);
  };
}

}  // namespace stageplan
