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

#include "stageplan/problem.h"

#include <utility>

#include "stageplan/errors.h"

namespace stageplan {

std::vector<int64_t> sample_draws(const ProblemInputs& inputs, uint64_t seed) {
  return draw_lengths(inputs.app, inputs.requests, inputs.ecdfs, seed);
}

Problem::Problem(ProblemInputs inputs, std::vector<int64_t> drawn)
    : inputs_(std::move(inputs)), drawn_(std::move(drawn)) {
  inputs_.topo.Validate();
  for (const auto& m : inputs_.catalog.models()) m.Validate();
  for (const auto& n : inputs_.app.nodes()) {
    if (!inputs_.catalog.contains(n.model_id))
      throw InputError("node '" + n.id + "' uses unknown model '" +
                       n.model_id + "'");
  }
  inputs_.table.CheckCoverage(inputs_.catalog, inputs_.topo);
  for (const auto& n : inputs_.app.nodes()) {
    if (enumerate_valid_plans(inputs_.catalog.at(n.model_id), inputs_.topo)
            .empty())
      throw InfeasibleError("model '" + n.model_id +
                            "' has no valid execution plan on these GPUs");
  }
  if (drawn_.size() != inputs_.requests.size())
    throw InputError("expected " + std::to_string(inputs_.requests.size()) +
                     " output lengths, got " + std::to_string(drawn_.size()));
  graph_ = fuse_self_loops(inputs_.app);
  workload_ = WorkloadFor(drawn_);
}

Problem Problem::Sampled(ProblemInputs inputs, uint64_t seed) {
  auto drawn = sample_draws(inputs, seed);
  return Problem(std::move(inputs), std::move(drawn));
}

SimContext Problem::ctx() const {
  SimContext c;
  c.graph = &graph_;
  c.catalog = &inputs_.catalog;
  c.topo = &inputs_.topo;
  c.table = &inputs_.table;
  return c;
}

std::vector<std::string> Problem::node_ids() const {
  std::vector<std::string> ids;
  for (const auto& n : graph_.nodes()) ids.push_back(n.id);
  return ids;
}

WorkloadState Problem::WorkloadFor(const std::vector<int64_t>& drawn) const {
  return WorkloadState(graph_, inputs_.catalog, inputs_.requests, drawn);
}

}  // namespace stageplan
