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

#ifndef STAGEPLAN_APP_GRAPH_H_
#define STAGEPLAN_APP_GRAPH_H_

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stageplan/length_sampler.h"
#include "stageplan/model_catalog.h"

namespace stageplan {

inline constexpr double kNever = std::numeric_limits<double>::infinity();

// How a node consumes a producer's outputs.
enum class EdgeMode {
  kConcat,       // producer outputs are concatenated into one request
  kIndependent,  // each producer output is its own request
  kFilterFinal,  // only the last output of each producer chain is consumed
};

enum class LengthTransfer { kAddOutputLen, kNone };

const char* EdgeModeName(EdgeMode mode);
EdgeMode ParseEdgeMode(const std::string& name);
const char* LengthTransferName(LengthTransfer t);
LengthTransfer ParseLengthTransfer(const std::string& name);

struct GraphNode {
  std::string id;
  std::string model_id;
  // Output length limit y set in the inference settings.
  std::optional<int64_t> max_output_len;
  // Set by fuse_self_loops; the removed self edge's template overhead is
  // kept here.
  bool fused = false;
  int64_t self_overhead_tokens = 0;
};

struct GraphEdge {
  std::string src;
  std::string dst;
  EdgeMode mode = EdgeMode::kConcat;
  int64_t overhead_tokens = 0;
};

class AppGraph {
 public:
  AppGraph() = default;
  // Throws InputError on duplicate node ids or dangling edges.
  AppGraph(std::vector<GraphNode> nodes, std::vector<GraphEdge> edges);

  int size() const { return static_cast<int>(nodes_.size()); }
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const GraphNode& node(int index) const { return nodes_.at(index); }
  int index_of(std::string_view id) const;  // throws InputError
  std::optional<int> find(std::string_view id) const;

  // Distinct producer/consumer nodes, self loops excluded, ascending.
  const std::vector<int>& predecessors(int index) const {
    return preds_.at(index);
  }
  const std::vector<int>& successors(int index) const {
    return succs_.at(index);
  }
  bool has_self_loop(int index) const;
  bool has_self_loops() const;
  const GraphEdge* edge(int src, int dst) const;

  // Kahn order with ties broken by node index; nullopt when any cycle
  // (self loops included) exists.
  std::optional<std::vector<int>> TopologicalOrder() const;

 private:
  std::vector<GraphNode> nodes_;
  std::vector<GraphEdge> edges_;
  std::map<std::string, int, std::less<>> index_;
  std::vector<std::vector<int>> preds_;
  std::vector<std::vector<int>> succs_;
  std::map<std::pair<int, int>, size_t> edge_index_;
};

// Collapses self loops into the node (chains become intra-node request
// dependencies). Throws InputError when a cycle among distinct nodes remains.
AppGraph fuse_self_loops(const AppGraph& graph);

// Unfinished nodes whose producers are all finished or selected.
std::vector<int> ready_models(const AppGraph& graph,
                              const std::set<int>& finished,
                              const std::set<int>& selected);

struct Predecessor {
  std::string request_id;
  LengthTransfer transfer = LengthTransfer::kAddOutputLen;
};

struct RequestSpec {
  std::string id;
  std::string node_id;
  int64_t base_input_len = 0;
  std::vector<Predecessor> predecessors;
};

struct RequestState {
  int node = -1;
  int64_t drawn_len = 0;    // uncapped output length (sampled or known)
  int64_t input_len = -1;   // known once every predecessor finished
  int64_t output_len = -1;  // min(drawn, cap, l_max - input_len)
  int64_t generated = 0;
  double ready_time = kNever;
  double finish_time = kNever;
  int unmet_predecessors = 0;
  bool done = false;

  bool ready() const { return input_len >= 0; }
};

// Per-request progress for a whole application. Copyable; the immutable
// request layout is shared between copies.
class WorkloadState {
 public:
  WorkloadState() = default;
  // `graph` must be acyclic (fused). `drawn_lengths[i]` is the uncapped
  // output length of requests[i]. Throws InputError on dangling or cyclic
  // predecessors, predecessors without a matching edge, or prompts longer
  // than the model supports.
  WorkloadState(const AppGraph& graph, const ModelCatalog& catalog,
                std::span<const RequestSpec> requests,
                std::span<const int64_t> drawn_lengths);

  int size() const { return static_cast<int>(states_.size()); }
  const RequestState& at(int index) const { return states_.at(index); }
  const std::string& id(int index) const;
  int index_of(std::string_view id) const;  // throws InputError
  int num_nodes() const;
  const std::vector<int>& requests_of(int node) const;
  // Position of a request inside requests_of(its node).
  int position_in_node(int index) const;
  const std::vector<int>& dependents(int index) const;

  int remaining(int node) const { return remaining_.at(node); }
  bool node_finished(int node) const { return remaining_.at(node) == 0; }
  bool all_finished() const;
  // Latest finish time among a finished node's requests.
  double node_completion_time(int node) const;

  void AddGenerated(int index, int64_t tokens);
  // Marks `index` complete at time t and releases dependents whose
  // predecessors are now all complete. Returns the released requests that
  // need inference; zero-length outputs complete in place.
  std::vector<int> Complete(int index, double t);
  // Completes a ready request with an externally observed output length.
  std::vector<int> CompleteWithOutput(int index, int64_t out_len, double t);

  int64_t total_generated() const;

 private:
  struct Layout;
  std::vector<int> Release(int index, double t);

  std::shared_ptr<const Layout> layout_;
  std::vector<RequestState> states_;
  std::vector<int> remaining_;
};

// Uncapped per-request draws from each node model's eCDF.
std::vector<int64_t> draw_lengths(const AppGraph& graph,
                                  std::span<const RequestSpec> requests,
                                  const std::map<std::string, OutputLengthEcdf>&
                                      ecdfs,
                                  uint64_t seed);

// Known lengths keyed by request id; every request must be present.
std::vector<int64_t> known_lengths(
    std::span<const RequestSpec> requests,
    const std::map<std::string, int64_t>& lengths);

// Marks `completed` finished with output length `out_len` at `finish_time`
// and returns the updated state with dependent input lengths derived.
WorkloadState derive_request_lengths(WorkloadState workload,
                                     std::string_view completed,
                                     int64_t out_len,
                                     double finish_time = 0.0);

}  // namespace stageplan

#endif  // STAGEPLAN_APP_GRAPH_H_
