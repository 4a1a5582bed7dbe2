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

#ifndef STAGEPLAN_FIXTURES_H_
#define STAGEPLAN_FIXTURES_H_

#include <string>
#include <vector>

#include "stageplan/problem.h"

namespace stageplan {

// Built-in applications used by the tests, the acceptance suite and the
// `fixture` CLI command. All of them are deterministic.

// 4 GPUs, six independent models. m1 runs 16 requests one at a time (8 s on
// one GPU, linear in dp); m2..m6 run 16 requests in one batch whose latency
// is 1 + B/16, so extra GPUs help them less than linearly.
ProblemInputs fig1_fixture();

// 8 GPUs. chatglm3-6b finishes 1000 prompts in 48 s on one GPU and 32 s on
// eight, load time included; a competing model scales linearly.
ProblemInputs chatglm_fixture();

// 8 x 80 GB GPUs in NVLink pairs, five routed models with fixed request
// counts.
ProblemInputs router_fixture();

// 8 GPUs, six models answering the same prompts.
ProblemInputs ensembling_fixture(int requests_per_model = 300);

// Summarizer with a self loop over document chunks feeding an evaluator.
ProblemInputs chain_summary_fixture(int documents = 40, int evaluations = 2);

// Chain summary next to eight ensembling models on the same 8 GPUs.
ProblemInputs mixed_fixture(int documents = 200, int ensemble_requests = 1000);

// Small synthetic application with `nodes` models on `gpus` GPUs.
ProblemInputs scaling_fixture(int nodes, int gpus);

std::vector<std::string> fixture_names();
// Throws InputError for an unknown name.
ProblemInputs fixture_by_name(const std::string& name);

// 8 x A100 80 GB, NVLink pairs.
GpuTopology a100_pairs_topology();

}  // namespace stageplan

#endif  // STAGEPLAN_FIXTURES_H_
