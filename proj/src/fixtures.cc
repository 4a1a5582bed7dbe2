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

#include "stageplan/fixtures.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "stageplan/errors.h"

namespace stageplan {
namespace {

constexpr int64_t kGB = 1000LL * 1000 * 1000;

// Portable uniform in [0, 1): the raw mt19937_64 stream is fixed by the
// standard, the library distributions are not.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}
  double Uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  int64_t Between(int64_t lo, int64_t hi) {  // inclusive
    return lo + static_cast<int64_t>(Uniform() * static_cast<double>(hi - lo + 1));
  }

 private:
  std::mt19937_64 gen_;
};

// Exponential-ish lengths with a hard maximum.
std::vector<int64_t> SyntheticLengths(uint64_t seed, int n, double mean,
                                      int64_t max_len) {
  Rng rng(seed);
  std::vector<int64_t> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double x = 1.0 - mean * std::log(1.0 - rng.Uniform());
    out.push_back(std::min<int64_t>(max_len, static_cast<int64_t>(x)));
  }
  return out;
}

PhaseCoefficients Flat(std::initializer_list<std::pair<int64_t, double>> bs) {
  PhaseCoefficients p;
  for (const auto& [b, v] : bs) p.entries[b] = {0.0, v};
  return p;
}

// Architecture numbers for a few public checkpoints.
struct Llm {
  const char* id;
  double params;         // total
  double active_params;  // per token, differs for MoE
  int64_t layers;
  int64_t hidden;
  int64_t kv_bytes;      // per token per layer
  int64_t max_seq_len;
};

const Llm kLlms[] = {
    {"vicuna-13b-v1.5", 13.0e9, 13.0e9, 40, 5120, 20480, 4096},
    {"llama-2-70b-chat", 69.0e9, 69.0e9, 80, 8192, 4096, 4096},
    {"mixtral-8x7b-instruct", 46.7e9, 12.9e9, 32, 4096, 4096, 8192},
    {"wizardlm-13b-v1.2", 13.0e9, 13.0e9, 40, 5120, 20480, 4096},
    {"codellama-34b-instruct", 34.0e9, 34.0e9, 48, 8192, 4096, 8192},
    {"mistral-7b-instruct", 7.2e9, 7.2e9, 32, 4096, 4096, 8192},
    {"chatglm3-6b", 6.2e9, 6.2e9, 28, 4096, 1024, 8192},
    {"oasst-pythia-12b", 12.0e9, 12.0e9, 36, 5120, 20480, 2048},
    {"alpaca-13b", 13.0e9, 13.0e9, 40, 5120, 20480, 2048},
    {"koala-13b", 13.0e9, 13.0e9, 40, 5120, 20480, 2048},
    {"mpt-7b-chat", 6.7e9, 6.7e9, 32, 4096, 16384, 2048},
    {"stablelm-tuned-alpha-7b", 7.9e9, 7.9e9, 16, 6144, 24576, 4096},
    {"baize-v2-13b", 13.0e9, 13.0e9, 40, 5120, 20480, 2048},
    {"dolly-v2-12b", 12.0e9, 12.0e9, 36, 5120, 20480, 2048},
};

const Llm& FindLlm(const std::string& id) {
  for (const auto& l : kLlms)
    if (id == l.id) return l;
  throw InputError("no built-in model '" + id + "'");
}

ModelSpec RealisticSpec(const Llm& l) {
  ModelSpec m;
  m.id = l.id;
  m.num_layers = l.layers;
  m.hidden_dim = l.hidden;
  m.matmul_weight_sum = 2.0 * l.active_params / static_cast<double>(l.layers);
  m.max_seq_len = l.max_seq_len;
  m.weight_bytes = static_cast<int64_t>(2.0 * l.params);
  m.kv_bytes_per_token_per_layer = l.kv_bytes;
  m.allowed_tp = {1, 2, 4, 8};
  m.max_num_seqs = 256;
  return m;
}

// A100-like: half of peak bf16 on the matmuls, weight streaming at
// 1.5 TB/s, a little all-reduce cost per extra shard.
ModelCoefficients RealisticCoefficients(const ModelSpec& m, int tp) {
  ModelCoefficients c;
  const double a = 1.0 / (0.5 * 312e12 * tp);
  const double stream = static_cast<double>(m.weight_bytes) / (1.5e12 * tp);
  const double comm =
      tp > 1 ? 0.002 * std::log2(static_cast<double>(tp)) *
                   static_cast<double>(m.num_layers) / 40.0
             : 0.0;
  for (int64_t b : {1, 4, 16, 64, 128, 256})
    c.comp.entries[b] = {a, stream + comm + 2e-5 * static_cast<double>(b)};
  c.prep.entries[1] = {4e-10 / tp, 5e-4};
  c.prep.entries[256] = {4e-10 / tp, 1e-3};
  c.samp.entries[1] = {2e-9, 1e-4};
  c.samp.entries[256] = {2e-9, 3e-3};
  return c;
}

double RealisticLoad(const ModelSpec& m, const ExecutionPlan& p) {
  const double gb = static_cast<double>(m.weight_bytes) / kGB;
  const double t = 9.0 + 0.25 * gb + 1.5 * std::log2(static_cast<double>(p.tp)) +
                   0.4 * (p.dp - 1);
  return std::clamp(t, 11.0, 47.0);
}

// Adds a realistic model with its cost rows and output-length eCDF.
void AddRealistic(ProblemInputs& in, std::vector<ModelSpec>& models,
                  const std::string& id, const std::vector<int64_t>& lengths) {
  const Llm& l = FindLlm(id);
  ModelSpec m = RealisticSpec(l);
  for (int tp : m.allowed_tp) {
    in.table.SetCoefficients(m.id, tp, RealisticCoefficients(m, tp));
    for (int dp = 1; dp * tp <= in.topo.num_gpus; ++dp)
      in.table.SetLoadingTime(m.id, {dp, tp}, RealisticLoad(m, {dp, tp}));
  }
  in.ecdfs.emplace(m.id, build_ecdf(lengths, m.id));
  models.push_back(std::move(m));
}

void AddRealistic(ProblemInputs& in, std::vector<ModelSpec>& models,
                  const std::string& id, double mean_out, uint64_t seed) {
  AddRealistic(in, models, id, SyntheticLengths(seed, 2000, mean_out, 490));
}

// Long-tailed lengths in [lo, hi]: mostly exponential around `mean`, with a
// tenth of the mass on a much heavier component.
std::vector<int64_t> TailedLengths(uint64_t seed, int n, double mean,
                                   int64_t lo, int64_t hi) {
  Rng rng(seed);
  std::vector<int64_t> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const bool heavy = rng.Uniform() < 0.1;
    const double m = heavy ? 3.2 * mean : 0.75 * mean;
    const double x = -m * std::log(1.0 - rng.Uniform());
    out.push_back(std::clamp<int64_t>(static_cast<int64_t>(x), lo, hi));
  }
  return out;
}

std::vector<int64_t> PromptLengths(uint64_t seed, int n) {
  Rng rng(seed);
  std::vector<int64_t> out;
  for (int i = 0; i < n; ++i) {
    const double u = rng.Uniform();
    out.push_back(20 + static_cast<int64_t>(380.0 * u * u));
  }
  return out;
}

void AddIndependent(std::vector<RequestSpec>& reqs, const std::string& node,
                    const std::vector<int64_t>& prompts, int count) {
  for (int i = 0; i < count; ++i) {
    RequestSpec r;
    r.id = node + "/" + std::to_string(i);
    r.node_id = node;
    r.base_input_len = prompts[i % prompts.size()];
    reqs.push_back(std::move(r));
  }
}

// Chunk counts with a heavy tail: median about 3, a few very long ones.
std::vector<int> ChunkCounts(uint64_t seed, int documents) {
  Rng rng(seed);
  std::vector<int> out;
  for (int d = 0; d < documents; ++d) {
    const double u = std::max(rng.Uniform(), 1e-3);
    out.push_back(std::clamp(static_cast<int>(2.0 / std::pow(u, 0.6)), 1, 40));
  }
  return out;
}

struct ChainShape {
  int documents = 40;
  int evaluations = 2;
  int64_t summary_limit = 256;
  int64_t eval_limit = 128;
  int max_chunks = 40;
};

void AddChainSummary(ProblemInputs& in, std::vector<GraphNode>& nodes,
                     std::vector<GraphEdge>& edges, const ChainShape& shape,
                     uint64_t seed) {
  const std::string sum = "summarize";
  const std::string eval = "evaluate";
  nodes.push_back({sum, "vicuna-13b-v1.5", shape.summary_limit});
  nodes.push_back({eval, "llama-2-70b-chat", shape.eval_limit});
  edges.push_back({sum, sum, EdgeMode::kConcat, 64});
  edges.push_back({sum, eval, EdgeMode::kFilterFinal, 128});
  auto chunks = ChunkCounts(seed, shape.documents);
  for (auto& c : chunks) c = std::min(c, shape.max_chunks);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (int d = 0; d < shape.documents; ++d) {
    std::string prev;
    for (int k = 0; k < chunks[d]; ++k) {
      RequestSpec r;
      r.id = sum + "/d" + std::to_string(d) + "/c" + std::to_string(k);
      r.node_id = sum;
      // Last chunk of a document is usually short.
      r.base_input_len = k + 1 == chunks[d] ? rng.Between(200, 1024) : 1024;
      if (!prev.empty()) r.predecessors.push_back({prev, LengthTransfer::kAddOutputLen});
      prev = r.id;
      in.requests.push_back(std::move(r));
    }
    for (int e = 0; e < shape.evaluations; ++e) {
      RequestSpec r;
      r.id = eval + "/d" + std::to_string(d) + "/e" + std::to_string(e);
      r.node_id = eval;
      r.base_input_len = 150 + 20 * e;
      r.predecessors.push_back({prev, LengthTransfer::kAddOutputLen});
      in.requests.push_back(std::move(r));
    }
  }
}

ProblemInputs Assemble(ProblemInputs in, std::vector<ModelSpec> models,
                       std::vector<GraphNode> nodes,
                       std::vector<GraphEdge> edges) {
  in.catalog = ModelCatalog(std::move(models));
  in.app = AppGraph(std::move(nodes), std::move(edges));
  return in;
}

}  // namespace

GpuTopology a100_pairs_topology() {
  return GpuTopology::Uniform(8, 80 * kGB, 2);
}

ProblemInputs fig1_fixture() {
  ProblemInputs in;
  in.topo = GpuTopology::Uniform(4, 80 * kGB);
  std::vector<ModelSpec> models;
  std::vector<GraphNode> nodes;
  for (int i = 1; i <= 6; ++i) {
    ModelSpec m;
    m.id = "m" + std::to_string(i);
    m.num_layers = 1;
    m.hidden_dim = 1;
    m.matmul_weight_sum = i == 1 ? 1048576.0 : 524288.0;
    m.max_seq_len = 64;
    m.weight_bytes = kGB;
    m.kv_bytes_per_token_per_layer = 0;
    m.allowed_tp = {1};
    m.max_num_seqs = i == 1 ? 1 : 16;
    ModelCoefficients c;
    if (i == 1) {
      c.prep = Flat({{1, 0.5}});
    } else {
      for (int64_t b = 1; b <= 16; ++b)
        c.prep.entries[b] = {0.0, 1.0 + static_cast<double>(b) / 16.0};
    }
    in.table.SetCoefficients(m.id, 1, std::move(c));
    for (int dp = 1; dp <= 4; ++dp) in.table.SetLoadingTime(m.id, {dp, 1}, 0.0);
    in.ecdfs.emplace(m.id, build_ecdf(std::vector<int64_t>{1}, m.id));
    nodes.push_back({m.id, m.id, std::nullopt});
    for (int r = 0; r < 16; ++r)
      in.requests.push_back({m.id + "/" + std::to_string(r), m.id, 8, {}});
    models.push_back(std::move(m));
  }
  return Assemble(std::move(in), std::move(models), std::move(nodes), {});
}

ProblemInputs chatglm_fixture() {
  ProblemInputs in;
  in.topo = GpuTopology::Uniform(8, 80 * kGB);
  std::vector<ModelSpec> models;
  std::vector<GraphNode> nodes;

  // One prefill pass per replica: 1000 prompts on one GPU, 125 on each of
  // eight. Loading L and the batch line a + g*B are solved from
  // L + a + 1000g = 48, L + a + 125g = 32 and an inference-only speedup of
  // 2.3 for eight GPUs.
  const double load = (2.3 * 32.0 - 48.0) / 1.3;
  const double slope = 16.0 / 875.0;
  const double base = (32.0 - load) - 125.0 * slope;
  {
    ModelSpec m = RealisticSpec(FindLlm("chatglm3-6b"));
    m.allowed_tp = {1};
    m.max_num_seqs = 1024;
    ModelCoefficients c;
    c.prep.entries[1] = {0.0, base + slope};
    c.prep.entries[1024] = {0.0, base + 1024.0 * slope};
    in.table.SetCoefficients(m.id, 1, std::move(c));
    for (int dp = 1; dp <= 8; ++dp) in.table.SetLoadingTime(m.id, {dp, 1}, load);
    in.ecdfs.emplace(m.id, build_ecdf(std::vector<int64_t>{1}, m.id));
    nodes.push_back({"chatglm", m.id, std::nullopt});
    for (int r = 0; r < 1000; ++r)
      in.requests.push_back({"chatglm/" + std::to_string(r), "chatglm", 100, {}});
    models.push_back(std::move(m));
  }
  {
    // One request at a time, 0.25 s each: time is linear in dp.
    ModelSpec m = RealisticSpec(FindLlm("vicuna-13b-v1.5"));
    m.allowed_tp = {1};
    m.max_num_seqs = 1;
    ModelCoefficients c;
    c.prep = Flat({{1, 0.25}});
    in.table.SetCoefficients(m.id, 1, std::move(c));
    for (int dp = 1; dp <= 8; ++dp) in.table.SetLoadingTime(m.id, {dp, 1}, 1.0);
    in.ecdfs.emplace(m.id, build_ecdf(std::vector<int64_t>{1}, m.id));
    nodes.push_back({"linear", m.id, std::nullopt});
    for (int r = 0; r < 192; ++r)
      in.requests.push_back({"linear/" + std::to_string(r), "linear", 100, {}});
    models.push_back(std::move(m));
  }
  return Assemble(std::move(in), std::move(models), std::move(nodes), {});
}

ProblemInputs router_fixture() {
  ProblemInputs in;
  in.topo = a100_pairs_topology();
  std::vector<ModelSpec> models;
  std::vector<GraphNode> nodes;
  const std::pair<const char*, int> routed[] = {
      {"llama-2-70b-chat", 408},      {"mixtral-8x7b-instruct", 1267},
      {"wizardlm-13b-v1.2", 2068},    {"codellama-34b-instruct", 456},
      {"mistral-7b-instruct", 2657}};
  // Prompts 9..577 tokens, outputs 3..1585 with a long tail and no length
  // limit below the context window.
  const auto prompts = TailedLengths(11, 4096, 310.0, 9, 577);
  uint64_t seed = 100;
  for (const auto& [id, count] : routed) {
    AddRealistic(in, models, id, TailedLengths(++seed, 4000, 199.0, 3, 1585));
    nodes.push_back({id, id, std::nullopt});
    AddIndependent(in.requests, id, prompts, count);
  }
  return Assemble(std::move(in), std::move(models), std::move(nodes), {});
}

ProblemInputs ensembling_fixture(int requests_per_model) {
  ProblemInputs in;
  in.topo = a100_pairs_topology();
  std::vector<ModelSpec> models;
  std::vector<GraphNode> nodes;
  const char* ids[] = {"vicuna-13b-v1.5", "oasst-pythia-12b", "alpaca-13b",
                       "koala-13b",       "mpt-7b-chat",      "chatglm3-6b"};
  const double means[] = {180, 150, 120, 170, 140, 200};
  const auto prompts = PromptLengths(21, requests_per_model);
  for (int i = 0; i < 6; ++i) {
    AddRealistic(in, models, ids[i], means[i], 200 + i);
    nodes.push_back({ids[i], ids[i], 256});
    AddIndependent(in.requests, ids[i], prompts, requests_per_model);
  }
  return Assemble(std::move(in), std::move(models), std::move(nodes), {});
}

ProblemInputs chain_summary_fixture(int documents, int evaluations) {
  ProblemInputs in;
  in.topo = a100_pairs_topology();
  std::vector<ModelSpec> models;
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  AddRealistic(in, models, "vicuna-13b-v1.5", 180.0, 301);
  AddRealistic(in, models, "llama-2-70b-chat", 90.0, 302);
  ChainShape shape;
  shape.documents = documents;
  shape.evaluations = evaluations;
  AddChainSummary(in, nodes, edges, shape, 31);
  return Assemble(std::move(in), std::move(models), std::move(nodes),
                  std::move(edges));
}

ProblemInputs mixed_fixture(int documents, int ensemble_requests) {
  ProblemInputs in;
  in.topo = a100_pairs_topology();
  std::vector<ModelSpec> models;
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  AddRealistic(in, models, "vicuna-13b-v1.5",
               TailedLengths(401, 4000, 300.0, 16, 900));
  AddRealistic(in, models, "llama-2-70b-chat", 90.0, 402);
  ChainShape shape;
  shape.documents = documents;
  shape.evaluations = 4;
  shape.summary_limit = 900;
  shape.max_chunks = 60;
  AddChainSummary(in, nodes, edges, shape, 41);
  const char* ids[] = {"oasst-pythia-12b", "alpaca-13b",  "baize-v2-13b",
                       "koala-13b",        "dolly-v2-12b", "mpt-7b-chat",
                       "chatglm3-6b",      "stablelm-tuned-alpha-7b"};
  const auto prompts = PromptLengths(43, ensemble_requests);
  for (int i = 0; i < 8; ++i) {
    AddRealistic(in, models, ids[i], 150.0 + 10.0 * i, 410 + i);
    nodes.push_back({ids[i], ids[i], 256});
    AddIndependent(in.requests, ids[i], prompts, ensemble_requests);
  }
  return Assemble(std::move(in), std::move(models), std::move(nodes),
                  std::move(edges));
}

ProblemInputs scaling_fixture(int nodes_wanted, int gpus) {
  if (nodes_wanted < 1 || gpus < 1)
    throw InputError("scaling fixture needs at least one node and one GPU");
  ProblemInputs in;
  in.topo = GpuTopology::Uniform(gpus, 80 * kGB, gpus >= 2 ? 2 : 1);
  std::vector<ModelSpec> models;
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  Rng rng(1000 + 31 * nodes_wanted + gpus);
  for (int i = 0; i < nodes_wanted; ++i) {
    ModelSpec m;
    m.id = "s" + std::to_string(i);
    m.num_layers = 4;
    m.hidden_dim = 64;
    m.matmul_weight_sum = 4096.0 * (1 + i % 3);
    m.max_seq_len = 256;
    m.weight_bytes = kGB;
    m.kv_bytes_per_token_per_layer = 0;
    m.allowed_tp = gpus >= 2 ? std::vector<int>{1, 2} : std::vector<int>{1};
    m.max_num_seqs = 8;
    for (int tp : m.allowed_tp) {
      ModelCoefficients c;
      const double fixed = (0.02 + 0.01 * (i % 4)) / tp + 0.003 * (tp - 1);
      c.comp.entries[1] = {1e-7 / tp, fixed};
      c.comp.entries[8] = {1e-7 / tp, fixed * 1.5};
      in.table.SetCoefficients(m.id, tp, std::move(c));
      for (int dp = 1; dp * tp <= gpus; ++dp)
        in.table.SetLoadingTime(m.id, {dp, tp}, 0.2 + 0.05 * tp);
    }
    in.ecdfs.emplace(m.id, build_ecdf(SyntheticLengths(500 + i, 200, 6.0, 24), m.id));
    nodes.push_back({m.id, m.id, std::nullopt});
    const int count = 12 + static_cast<int>(rng.Between(0, 12));
    for (int r = 0; r < count; ++r) {
      RequestSpec q{m.id + "/" + std::to_string(r), m.id, rng.Between(8, 40), {}};
      // Every third node consumes the previous one request by request.
      if (i % 3 == 2) {
        const auto& prev = nodes[i - 1].id;
        q.predecessors.push_back({prev + "/" + std::to_string(r % 12),
                                  LengthTransfer::kAddOutputLen});
      }
      in.requests.push_back(std::move(q));
    }
    if (i % 3 == 2)
      edges.push_back({nodes[i - 1].id, m.id, EdgeMode::kIndependent, 4});
    models.push_back(std::move(m));
  }
  return Assemble(std::move(in), std::move(models), std::move(nodes),
                  std::move(edges));
}

std::vector<std::string> fixture_names() {
  return {"fig1", "chatglm", "router", "ensembling", "chain_summary", "mixed"};
}

ProblemInputs fixture_by_name(const std::string& name) {
  if (name == "fig1") return fig1_fixture();
  if (name == "chatglm") return chatglm_fixture();
  if (name == "router") return router_fixture();
  if (name == "ensembling") return ensembling_fixture();
  if (name == "chain_summary") return chain_summary_fixture();
  if (name == "mixed") return mixed_fixture();
  std::string known;
  for (const auto& n : fixture_names()) known += " " + n;
  throw InputError("unknown fixture '" + name + "'; known:" + known);
}

}  // namespace stageplan
