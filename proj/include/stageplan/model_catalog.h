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

#ifndef STAGEPLAN_MODEL_CATALOG_H_
#define STAGEPLAN_MODEL_CATALOG_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace stageplan {

// Static architecture parameters of one LLM.
struct ModelSpec {
  std::string id;
  int64_t num_layers = 1;
  int64_t hidden_dim = 1;
  // Sum of the sizes of all weight matrices that take part in matmuls, per
  // layer. Multiplies the per-token term of the FLOPs formulas.
  double matmul_weight_sum = 1.0;
  int64_t max_seq_len = 1;
  int64_t weight_bytes = 1;
  int64_t kv_bytes_per_token_per_layer = 0;
  std::vector<int> allowed_tp = {1};
  // Engine batch cap per replica.
  int max_num_seqs = 256;

  // Throws InputError when an invariant is violated.
  void Validate() const;
};

struct GpuTopology {
  int num_gpus = 0;
  int64_t mem_bytes_per_gpu = 0;
  // Partition of {0..num_gpus-1}; GPUs inside a group share NVLink.
  std::vector<std::vector<int>> nvlink_groups;
  // Fraction of each GPU reserved for activations/workspace.
  double reserved_fraction = 0.1;

  int64_t usable_bytes_per_gpu() const;
  // Index into nvlink_groups for a GPU id.
  int group_of(int gpu) const;
  void Validate() const;

  // Every GPU in its own group.
  static GpuTopology Uniform(int num_gpus, int64_t mem_bytes_per_gpu,
                             int group_size = 1);
};

// (dp, tp): dp replicas, each sharded over tp GPUs.
struct ExecutionPlan {
  int dp = 1;
  int tp = 1;

  int gpus_required() const { return dp * tp; }
  std::string ToString() const;  // "dp2tp1"

  friend bool operator==(const ExecutionPlan&, const ExecutionPlan&) = default;
  friend auto operator<=>(const ExecutionPlan& a, const ExecutionPlan& b) {
    if (auto c = a.gpus_required() <=> b.gpus_required(); c != 0) return c;
    return a.tp <=> b.tp;
  }
};

bool plan_is_valid(const ModelSpec& model, const ExecutionPlan& plan,
                   const GpuTopology& topo);

// All valid plans ordered by (gpus_required, tp).
std::vector<ExecutionPlan> enumerate_valid_plans(const ModelSpec& model,
                                                 const GpuTopology& topo);

// Tokens of KV cache one replica can hold after weights are resident.
int64_t kv_capacity_tokens(const ModelSpec& model, const ExecutionPlan& plan,
                           const GpuTopology& topo);

class ModelCatalog {
 public:
  ModelCatalog() = default;
  explicit ModelCatalog(std::vector<ModelSpec> models);

  const ModelSpec& at(const std::string& id) const;
  bool contains(const std::string& id) const;
  const std::vector<ModelSpec>& models() const { return models_; }

 private:
  std::vector<ModelSpec> models_;
  std::map<std::string, size_t> index_;
};

}  // namespace stageplan

#endif  // STAGEPLAN_MODEL_CATALOG_H_
