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

#include "stageplan/model_catalog.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "stageplan/errors.h"

namespace stageplan {

void ModelSpec::Validate() const {
  auto fail = [&](const std::string& why) {
    throw InputError("model '" + id + "': " + why);
  };
  if (id.empty()) throw InputError("model with empty id");
  if (num_layers < 1) fail("num_layers must be >= 1");
  if (hidden_dim < 1) fail("hidden_dim must be >= 1");
  if (!(matmul_weight_sum > 0) || !std::isfinite(matmul_weight_sum))
    fail("matmul_weight_sum must be > 0");
  if (max_seq_len < 1) fail("max_seq_len must be >= 1");
  if (weight_bytes <= 0) fail("weight_bytes must be > 0");
  if (kv_bytes_per_token_per_layer < 0)
    fail("kv_bytes_per_token_per_layer must be >= 0");
  if (max_num_seqs < 1) fail("max_num_seqs must be >= 1");
  if (allowed_tp.empty()) fail("allowed_tp must be nonempty");
  for (int tp : allowed_tp) {
    if (tp < 1 || hidden_dim % tp != 0)
      fail("tp " + std::to_string(tp) + " does not divide hidden_dim");
  }
}

int64_t GpuTopology::usable_bytes_per_gpu() const {
  return static_cast<int64_t>(
      std::floor(static_cast<long double>(mem_bytes_per_gpu) *
                 (1.0L - static_cast<long double>(reserved_fraction))));
}

int GpuTopology::group_of(int gpu) const {
  for (size_t g = 0; g < nvlink_groups.size(); ++g) {
    const auto& members = nvlink_groups[g];
    if (std::find(members.begin(), members.end(), gpu) != members.end())
      return static_cast<int>(g);
  }
  return -1;
}

void GpuTopology::Validate() const {
  if (num_gpus < 0) throw InputError("num_gpus must be >= 0");
  if (mem_bytes_per_gpu < 0) throw InputError("mem_bytes_per_gpu must be >= 0");
  if (reserved_fraction < 0 || reserved_fraction >= 1)
    throw InputError("reserved_fraction must lie in [0, 1)");
  std::set<int> seen;
  for (const auto& group : nvlink_groups) {
    if (group.empty()) throw InputError("empty nvlink group");
    for (int gpu : group) {
      if (gpu < 0 || gpu >= num_gpus)
        throw InputError("nvlink group references GPU " + std::to_string(gpu) +
                         " outside 0.." + std::to_string(num_gpus - 1));
      if (!seen.insert(gpu).second)
        throw InputError("GPU " + std::to_string(gpu) +
                         " appears in two nvlink groups");
    }
  }
  if (static_cast<int>(seen.size()) != num_gpus)
    throw InputError("nvlink groups must cover every GPU exactly once");
}

GpuTopology GpuTopology::Uniform(int num_gpus, int64_t mem_bytes_per_gpu,
                                 int group_size) {
  GpuTopology topo;
  topo.num_gpus = num_gpus;
  topo.mem_bytes_per_gpu = mem_bytes_per_gpu;
  for (int start = 0; start < num_gpus; start += group_size) {
    std::vector<int> group;
    for (int g = start; g < std::min(num_gpus, start + group_size); ++g)
      group.push_back(g);
    topo.nvlink_groups.push_back(std::move(group));
  }
  return topo;
}

std::string ExecutionPlan::ToString() const {
  return "dp" + std::to_string(dp) + "tp" + std::to_string(tp);
}

bool plan_is_valid(const ModelSpec& model, const ExecutionPlan& plan,
                   const GpuTopology& topo) {
  if (plan.dp < 1 || plan.tp < 1) return false;
  if (std::find(model.allowed_tp.begin(), model.allowed_tp.end(), plan.tp) ==
      model.allowed_tp.end())
    return false;
  if (plan.gpus_required() > topo.num_gpus) return false;
  // weights/tp + one l_max sequence of KV/tp <= usable, scaled by tp to stay
  // in integers.
  const __int128 need =
      static_cast<__int128>(model.weight_bytes) +
      static_cast<__int128>(model.max_seq_len) * model.num_layers *
          model.kv_bytes_per_token_per_layer;
  const __int128 have =
      static_cast<__int128>(topo.usable_bytes_per_gpu()) * plan.tp;
  return need <= have;
}

std::vector<ExecutionPlan> enumerate_valid_plans(const ModelSpec& model,
                                                 const GpuTopology& topo) {
  std::vector<ExecutionPlan> plans;
  for (int tp : model.allowed_tp) {
    if (tp < 1) continue;
    for (int dp = 1; dp * tp <= topo.num_gpus; ++dp) {
      ExecutionPlan plan{dp, tp};
      if (plan_is_valid(model, plan, topo)) plans.push_back(plan);
    }
  }
  std::sort(plans.begin(), plans.end());
  plans.erase(std::unique(plans.begin(), plans.end()), plans.end());
  return plans;
}

int64_t kv_capacity_tokens(const ModelSpec& model, const ExecutionPlan& plan,
                           const GpuTopology& topo) {
  const __int128 free_bytes =
      static_cast<__int128>(topo.usable_bytes_per_gpu()) * plan.tp -
      model.weight_bytes;
  const __int128 per_token = static_cast<__int128>(model.num_layers) *
                             model.kv_bytes_per_token_per_layer;
  if (per_token == 0) return INT64_MAX / 4;
  if (free_bytes <= 0) return 0;
  const __int128 tokens = free_bytes / per_token;
  return tokens > INT64_MAX / 4 ? INT64_MAX / 4 : static_cast<int64_t>(tokens);
}

ModelCatalog::ModelCatalog(std::vector<ModelSpec> models)
    : models_(std::move(models)) {
  for (size_t i = 0; i < models_.size(); ++i) {
    models_[i].Validate();
    if (!index_.emplace(models_[i].id, i).second)
      throw InputError("duplicate model id '" + models_[i].id + "'");
  }
}

const ModelSpec& ModelCatalog::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw InputError("unknown model id '" + id + "'");
  return models_[it->second];
}

bool ModelCatalog::contains(const std::string& id) const {
  return index_.count(id) > 0;
}

}  // namespace stageplan
