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

#ifndef STAGEPLAN_PROBLEM_H_
#define STAGEPLAN_PROBLEM_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stageplan/app_graph.h"
#include "stageplan/cost_model.h"
#include "stageplan/inference_simulator.h"
#include "stageplan/length_sampler.h"
#include "stageplan/model_catalog.h"

namespace stageplan {

// Everything read from disk for one application.
struct ProblemInputs {
  ModelCatalog catalog;
  GpuTopology topo;
  CostTable table;
  std::map<std::string, OutputLengthEcdf> ecdfs;
  AppGraph app;  // as written, self loops allowed
  std::vector<RequestSpec> requests;
};

// Uncapped per-request draws for `seed`.
std::vector<int64_t> sample_draws(const ProblemInputs& inputs, uint64_t seed);

// Validated inputs plus the fused graph and a workload built from one set of
// draws. ctx() points into this object, so keep it alive while in use.
class Problem {
 public:
  // Throws InputError on missing models, cost-table gaps or bad requests.
  Problem(ProblemInputs inputs, std::vector<int64_t> drawn);
  static Problem Sampled(ProblemInputs inputs, uint64_t seed);

  SimContext ctx() const;
  const ProblemInputs& inputs() const { return inputs_; }
  const AppGraph& graph() const { return graph_; }
  const WorkloadState& workload() const { return workload_; }
  const std::vector<int64_t>& drawn() const { return drawn_; }
  std::vector<std::string> node_ids() const;

  // Same application, different ground-truth lengths.
  WorkloadState WorkloadFor(const std::vector<int64_t>& drawn) const;

 private:
  ProblemInputs inputs_;
  AppGraph graph_;
  std::vector<int64_t> drawn_;
  WorkloadState workload_;
};

}  // namespace stageplan

#endif  // STAGEPLAN_PROBLEM_H_
