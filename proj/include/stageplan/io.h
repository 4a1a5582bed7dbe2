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

#ifndef STAGEPLAN_IO_H_
#define STAGEPLAN_IO_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "stageplan/app_graph.h"
#include "stageplan/cost_model.h"
#include "stageplan/length_sampler.h"
#include "stageplan/model_catalog.h"
#include "stageplan/planner.h"
#include "stageplan/runtime.h"

namespace stageplan {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

// Whole-file helpers. Parse failures and missing files raise InputError.
std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& text);
Json parse_json(const std::string& text, const std::string& what);
Json read_json(const std::string& path);
// Two-space indent plus a trailing newline.
std::string dump_json(const Json& j);

Json models_to_json(const ModelCatalog& catalog);
ModelCatalog models_from_json(const Json& j);

Json gpus_to_json(const GpuTopology& topo);
GpuTopology gpus_from_json(const Json& j);

Json cost_table_to_json(const CostTable& table);
CostTable cost_table_from_json(const Json& j);

Json ecdfs_to_json(const std::map<std::string, OutputLengthEcdf>& ecdfs);
std::map<std::string, OutputLengthEcdf> ecdfs_from_json(const Json& j);

Json app_to_json(const AppGraph& graph);
AppGraph app_from_json(const Json& j);

Json requests_to_json(const std::vector<RequestSpec>& requests);
std::vector<RequestSpec> requests_from_json(const Json& j);

Json lengths_to_json(const std::map<std::string, int64_t>& lengths);
std::map<std::string, int64_t> lengths_from_json(const Json& j);

Json plan_to_json(const AppPlan& plan);
AppPlan plan_from_json(const Json& j);

Json trace_to_json(const RuntimeTrace& trace,
                   const std::vector<std::string>& node_ids);

// model_id,tp,phase,B,x,latency_s
std::vector<ProfileSample> profile_from_csv(const std::string& text);
// model_id,output_len
std::map<std::string, std::vector<int64_t>> length_trace_from_csv(
    const std::string& text);
// model_id,dp,tp,seconds
void loading_from_csv(const std::string& text, CostTable& table);
// node,replica,t_start,kind,B,s,S,flops,latency
std::string iterations_to_csv(const std::vector<NodeIteration>& iterations,
                              const std::vector<std::string>& node_ids);

// One row per GPU, one colored bar per busy interval, stage starts as
// vertical rules.
std::string render_gantt_svg(const RuntimeTrace& trace,
                             const std::vector<std::string>& node_ids);

}  // namespace stageplan

#endif  // STAGEPLAN_IO_H_
