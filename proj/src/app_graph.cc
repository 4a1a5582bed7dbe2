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

#include "stageplan/app_graph.h"

#include <algorithm>
#include <deque>
#include <queue>

#include "stageplan/errors.h"

namespace stageplan {

const char* EdgeModeName(EdgeMode mode) {
  switch (mode) {
    case EdgeMode::kConcat:
      return "concat";
    case EdgeMode::kIndependent:
      return "independent";
    case EdgeMode::kFilterFinal:
      return "filter_final";
  }
  return "?";
}

EdgeMode ParseEdgeMode(const std::string& name) {
  if (name == "concat") return EdgeMode::kConcat;
  if (name == "independent") return EdgeMode::kIndependent;
  if (name == "filter_final") return EdgeMode::kFilterFinal;
  throw InputError("unknown edge mode '" + name + "'");
}

const char* LengthTransferName(LengthTransfer t) {
  return t == LengthTransfer::kAddOutputLen ? "add_output_len" : "none";
}

LengthTransfer ParseLengthTransfer(const std::string& name) {
  if (name == "add_output_len") return LengthTransfer::kAddOutputLen;
  if (name == "none") return LengthTransfer::kNone;
  throw InputError("unknown length transfer '" + name + "'");
}

AppGraph::AppGraph(std::vector<GraphNode> nodes, std::vector<GraphEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].id.empty()) throw InputError("graph node with empty id");
    if (!index_.emplace(nodes_[i].id, static_cast<int>(i)).second)
      throw InputError("duplicate graph node id '" + nodes_[i].id + "'");
  }
  preds_.resize(nodes_.size());
  succs_.resize(nodes_.size());
  for (size_t e = 0; e < edges_.size(); ++e) {
    const auto& edge = edges_[e];
    auto src = find(edge.src);
    auto dst = find(edge.dst);
    if (!src || !dst)
      throw InputError("edge " + edge.src + " -> " + edge.dst +
                       " references an unknown node");
    if (edge.overhead_tokens < 0)
      throw InputError("edge " + edge.src + " -> " + edge.dst +
                       " has negative overhead_tokens");
    if (!edge_index_.emplace(std::make_pair(*src, *dst), e).second)
      throw InputError("duplicate edge " + edge.src + " -> " + edge.dst);
    if (*src != *dst) {
      preds_[*dst].push_back(*src);
      succs_[*src].push_back(*dst);
    }
  }
  for (auto& p : preds_) std::sort(p.begin(), p.end());
  for (auto& s : succs_) std::sort(s.begin(), s.end());
}

int AppGraph::index_of(std::string_view id) const {
  auto found = find(id);
  if (!found) throw InputError("unknown graph node '" + std::string(id) + "'");
  return *found;
}

std::optional<int> AppGraph::find(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool AppGraph::has_self_loop(int index) const {
  return edge_index_.count({index, index}) > 0;
}

bool AppGraph::has_self_loops() const {
  for (int i = 0; i < size(); ++i)
    if (has_self_loop(i)) return true;
  return false;
}

const GraphEdge* AppGraph::edge(int src, int dst) const {
  auto it = edge_index_.find({src, dst});
  return it == edge_index_.end() ? nullptr : &edges_[it->second];
}

std::optional<std::vector<int>> AppGraph::TopologicalOrder() const {
  if (has_self_loops()) return std::nullopt;
  std::vector<int> indegree(nodes_.size());
  for (int i = 0; i < size(); ++i)
    indegree[i] = static_cast<int>(preds_[i].size());
  std::priority_queue<int, std::vector<int>, std::greater<>> frontier;
  for (int i = 0; i < size(); ++i)
    if (indegree[i] == 0) frontier.push(i);
  std::vector<int> order;
  while (!frontier.empty()) {
    int n = frontier.top();
    frontier.pop();
    order.push_back(n);
    for (int s : succs_[n])
      if (--indegree[s] == 0) frontier.push(s);
  }
  if (static_cast<int>(order.size()) != size()) return std::nullopt;
  return order;
}

AppGraph fuse_self_loops(const AppGraph& graph) {
  std::vector<GraphNode> nodes = graph.nodes();
  std::vector<GraphEdge> edges;
  for (const auto& edge : graph.edges()) {
    if (edge.src == edge.dst) {
      auto& node = nodes[graph.index_of(edge.src)];
      node.fused = true;
      node.self_overhead_tokens = edge.overhead_tokens;
    } else {
      edges.push_back(edge);
    }
  }
  AppGraph fused(std::move(nodes), std::move(edges));
  if (!fused.TopologicalOrder())
    throw InputError(
        "application graph has a cycle among distinct nodes; only self "
        "loops can be fused");
  return fused;
}

std::vector<int> ready_models(const AppGraph& graph,
                              const std::set<int>& finished,
                              const std::set<int>& selected) {
  std::vector<int> ready;
  for (int n = 0; n < graph.size(); ++n) {
    if (finished.count(n)) continue;
    bool inputs_ready = true;
    for (int p : graph.predecessors(n)) {
      if (!finished.count(p) && !selected.count(p)) {
        inputs_ready = false;
        break;
      }
    }
    if (inputs_ready) ready.push_back(n);
  }
  return ready;
}

struct WorkloadState::Layout {
  std::vector<std::string> ids;
  std::map<std::string, int, std::less<>> index;
  std::vector<std::vector<std::pair<int, LengthTransfer>>> preds;
  std::vector<std::vector<int>> dependents;
  std::vector<std::vector<int>> node_requests;
  std::vector<int> position;
  std::vector<int64_t> base_input;
  std::vector<int64_t> overhead;  // summed over transferring predecessors
  std::vector<int64_t> node_max_len;
  std::vector<std::optional<int64_t>> node_cap;
};

WorkloadState::WorkloadState(const AppGraph& graph,
                             const ModelCatalog& catalog,
                             std::span<const RequestSpec> requests,
                             std::span<const int64_t> drawn_lengths) {
  if (drawn_lengths.size() != requests.size())
    throw InputError("one drawn output length is required per request");
  auto layout = std::make_shared<Layout>();
  const int n = static_cast<int>(requests.size());
  layout->ids.reserve(n);
  layout->node_requests.resize(graph.size());
  for (int g = 0; g < graph.size(); ++g) {
    const auto& model = catalog.at(graph.node(g).model_id);
    layout->node_max_len.push_back(model.max_seq_len);
    layout->node_cap.push_back(graph.node(g).max_output_len);
  }
  states_.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& spec = requests[i];
    if (spec.base_input_len < 0)
      throw InputError("request '" + spec.id + "' has negative input length");
    if (!layout->index.emplace(spec.id, i).second)
      throw InputError("duplicate request id '" + spec.id + "'");
    layout->ids.push_back(spec.id);
    const int node = graph.index_of(spec.node_id);
    states_[i].node = node;
    states_[i].drawn_len = drawn_lengths[i];
    layout->position.push_back(
        static_cast<int>(layout->node_requests[node].size()));
    layout->node_requests[node].push_back(i);
    layout->base_input.push_back(spec.base_input_len);
  }

  layout->preds.resize(n);
  layout->dependents.resize(n);
  layout->overhead.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    const int node = states_[i].node;
    for (const auto& pred : requests[i].predecessors) {
      auto it = layout->index.find(pred.request_id);
      if (it == layout->index.end())
        throw InputError("request '" + requests[i].id +
                         "' depends on unknown request '" + pred.request_id +
                         "'");
      const int p = it->second;
      const int pnode = states_[p].node;
      int64_t overhead = 0;
      if (pnode == node) {
        overhead = graph.node(node).self_overhead_tokens;
      } else if (const GraphEdge* edge = graph.edge(pnode, node)) {
        overhead = edge->overhead_tokens;
      } else {
        throw InputError("request '" + requests[i].id + "' depends on '" +
                         pred.request_id + "' but the graph has no edge " +
                         graph.node(pnode).id + " -> " + graph.node(node).id);
      }
      layout->preds[i].push_back({p, pred.transfer});
      layout->dependents[p].push_back(i);
      if (pred.transfer == LengthTransfer::kAddOutputLen)
        layout->overhead[i] += overhead;
    }
    states_[i].unmet_predecessors =
        static_cast<int>(layout->preds[i].size());
  }

  // Only the tail of a producer chain may feed a filter_final edge.
  for (int i = 0; i < n; ++i) {
    for (const auto& [p, transfer] : layout->preds[i]) {
      const int pnode = states_[p].node;
      const GraphEdge* edge = graph.edge(pnode, states_[i].node);
      if (pnode == states_[i].node || !edge ||
          edge->mode != EdgeMode::kFilterFinal)
        continue;
      for (int d : layout->dependents[p]) {
        if (states_[d].node == pnode)
          throw InputError("request '" + layout->ids[i] + "' consumes '" +
                           layout->ids[p] +
                           "' over a filter_final edge, but that request is "
                           "not the end of its chain");
      }
    }
  }

  // Request-level cycle check.
  {
    std::vector<int> indegree(n);
    std::deque<int> frontier;
    for (int i = 0; i < n; ++i) {
      indegree[i] = states_[i].unmet_predecessors;
      if (indegree[i] == 0) frontier.push_back(i);
    }
    int visited = 0;
    while (!frontier.empty()) {
      int r = frontier.front();
      frontier.pop_front();
      ++visited;
      for (int d : layout->dependents[r])
        if (--indegree[d] == 0) frontier.push_back(d);
    }
    if (visited != n)
      throw InputError("request predecessor links form a cycle");
  }

  remaining_.assign(graph.size(), 0);
  for (int i = 0; i < n; ++i) ++remaining_[states_[i].node];
  layout_ = std::move(layout);

  std::vector<int> roots;
  for (int i = 0; i < n; ++i)
    if (states_[i].unmet_predecessors == 0) roots.push_back(i);
  for (int r : roots) {
    auto& st = states_[r];
    st.input_len = layout_->base_input[r];
    st.output_len =
        clamp_output_length(st.drawn_len, st.input_len,
                            layout_->node_max_len[st.node],
                            layout_->node_cap[st.node]);
    st.ready_time = 0.0;
  }
  for (int r : roots)
    if (states_[r].output_len == 0 && !states_[r].done) Complete(r, 0.0);
}

const std::string& WorkloadState::id(int index) const {
  return layout_->ids.at(index);
}

int WorkloadState::index_of(std::string_view id) const {
  auto it = layout_->index.find(id);
  if (it == layout_->index.end())
    throw InputError("unknown request '" + std::string(id) + "'");
  return it->second;
}

int WorkloadState::num_nodes() const {
  return static_cast<int>(remaining_.size());
}

const std::vector<int>& WorkloadState::requests_of(int node) const {
  return layout_->node_requests.at(node);
}

int WorkloadState::position_in_node(int index) const {
  return layout_->position.at(index);
}

const std::vector<int>& WorkloadState::dependents(int index) const {
  return layout_->dependents.at(index);
}

bool WorkloadState::all_finished() const {
  return std::all_of(remaining_.begin(), remaining_.end(),
                     [](int r) { return r == 0; });
}

double WorkloadState::node_completion_time(int node) const {
  double t = 0.0;
  for (int r : requests_of(node)) {
    if (!states_[r].done) return kNever;
    t = std::max(t, states_[r].finish_time);
  }
  return t;
}

void WorkloadState::AddGenerated(int index, int64_t tokens) {
  states_.at(index).generated += tokens;
}

std::vector<int> WorkloadState::Complete(int index, double t) {
  auto& st = states_.at(index);
  if (st.done) throw InputError("request '" + id(index) + "' completed twice");
  st.done = true;
  st.finish_time = t;
  --remaining_[st.node];
  return Release(index, t);
}

std::vector<int> WorkloadState::CompleteWithOutput(int index, int64_t out_len,
                                                  double t) {
  auto& st = states_.at(index);
  if (!st.ready())
    throw InputError("request '" + id(index) +
                     "' cannot complete before its predecessors");
  if (out_len < 0) throw InputError("negative output length");
  st.output_len = out_len;
  st.generated = out_len;
  return Complete(index, t);
}

std::vector<int> WorkloadState::Release(int index, double t) {
  std::vector<int> released;
  for (int d : layout_->dependents[index]) {
    auto& dep = states_[d];
    if (--dep.unmet_predecessors > 0) continue;
    int64_t input = layout_->base_input[d] + layout_->overhead[d];
    double ready = t;  // completions may be recorded out of time order
    for (const auto& [p, transfer] : layout_->preds[d]) {
      if (transfer == LengthTransfer::kAddOutputLen)
        input += states_[p].output_len;
      ready = std::max(ready, states_[p].finish_time);
    }
    dep.input_len = input;
    dep.output_len = clamp_output_length(dep.drawn_len, input,
                                         layout_->node_max_len[dep.node],
                                         layout_->node_cap[dep.node]);
    dep.ready_time = ready;
    if (dep.output_len == 0) {
      auto more = Complete(d, ready);
      released.insert(released.end(), more.begin(), more.end());
    } else {
      released.push_back(d);
    }
  }
  return released;
}

int64_t WorkloadState::total_generated() const {
  int64_t total = 0;
  for (const auto& st : states_) total += st.generated;
  return total;
}

std::vector<int64_t> draw_lengths(
    const AppGraph& graph, std::span<const RequestSpec> requests,
    const std::map<std::string, OutputLengthEcdf>& ecdfs, uint64_t seed) {
  std::vector<int64_t> drawn;
  drawn.reserve(requests.size());
  for (const auto& spec : requests) {
    const auto& model_id = graph.node(graph.index_of(spec.node_id)).model_id;
    auto it = ecdfs.find(model_id);
    if (it == ecdfs.end())
      throw InputError("no output-length eCDF for model '" + model_id + "'");
    drawn.push_back(draw_output_length(it->second, seed, spec.id));
  }
  return drawn;
}

std::vector<int64_t> known_lengths(
    std::span<const RequestSpec> requests,
    const std::map<std::string, int64_t>& lengths) {
  std::vector<int64_t> drawn;
  drawn.reserve(requests.size());
  for (const auto& spec : requests) {
    auto it = lengths.find(spec.id);
    if (it == lengths.end())
      throw InputError("known lengths are missing request '" + spec.id + "'");
    if (it->second < 0)
      throw InputError("negative known length for '" + spec.id + "'");
    drawn.push_back(it->second);
  }
  return drawn;
}

WorkloadState derive_request_lengths(WorkloadState workload,
                                     std::string_view completed,
                                     int64_t out_len, double finish_time) {
  workload.CompleteWithOutput(workload.index_of(completed), out_len,
                              finish_time);
  return workload;
}

}  // namespace stageplan
