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


#ifndef STAGEPLAN_TESTS_SEARCH_ORACLE_H_
#define STAGEPLAN_TESTS_SEARCH_ORACLE_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "stageplan/planner.h"

namespace stageplan::testing {

// Exhaustive search over stage sequences of the six-model example. Every
// stage is any non-empty dp assignment to unfinished models with at most
// four GPUs; the planner's own commit_stage moves between states.
class SixModelSearch {
 public:
  explicit SixModelSearch(const SimContext& ctx) : ctx_(ctx) {}

  double Run(const WorkloadState& w) {
    Dfs(initial_state(w));
    return best_;
  }
  int64_t visited() const { return visited_; }

 private:
  // m1 is 0.5 GPU-s per request at any dp; the others need at least one
  // batch pass (1 + r/16 s on one GPU). Work already in flight on a carried
  // engine is credited generously so the bound stays admissible.
  double LowerBound(const PlanningState& st) const {
    double gpu_seconds = 0.0, m1_alone = 0.0;
    for (int n = 0; n < 6; ++n) {
      const int r = st.workload.remaining(n);
      if (r == 0) continue;
      auto it = st.running.find(n);
      if (n == 0) {
        const int inflight = it == st.running.end() ? 0 : it->second.plan.dp;
        const int left = std::max(0, r - inflight);
        gpu_seconds += 0.5 * left;
        m1_alone = 0.5 * std::ceil(left / 4.0);
      } else if (it == st.running.end()) {
        gpu_seconds += 1.0 + r / 16.0;
      }
    }
    return st.time + std::max(gpu_seconds / 4.0, m1_alone);
  }

  void Dfs(const PlanningState& st) {
    if (++visited_ > 100000) throw std::runtime_error("search too large");
    if (st.workload.all_finished()) {
      best_ = std::min(best_, st.time);
      return;
    }
    if (LowerBound(st) >= best_ - 1e-12) return;
    std::vector<int> open;
    for (int n = 0; n < 6; ++n)
      if (!st.workload.node_finished(n)) open.push_back(n);
    std::vector<StageEntry> entries;
    std::function<void(size_t, int)> rec = [&](size_t i, int budget) {
      if (i == open.size()) {
        if (entries.empty()) return;
        PlanningState next = st;
        commit_stage(ctx_, next, entries);
        Dfs(next);
        return;
      }
      for (int dp = budget; dp >= 0; --dp) {  // wide stages first
        if (dp > 0) entries.push_back({open[i], {dp, 1}});
        rec(i + 1, budget - dp);
        if (dp > 0) entries.pop_back();
      }
    };
    rec(0, 4);
  }

  const SimContext& ctx_;
  double best_ = kNever;
  int64_t visited_ = 0;
};

}  // namespace stageplan::testing

#endif  // STAGEPLAN_TESTS_SEARCH_ORACLE_H_
