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

#include "stageplan/io.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "stageplan/errors.h"

namespace stageplan {
namespace {

template <typename T>
T Get(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw InputError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(where + ": field '" + key + "' has the wrong type");
  }
}

const Json& Field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw InputError(where + ": missing field '" + key + "'");
  return j.at(key);
}

void CheckVersion(const Json& j, const std::string& what) {
  if (!j.is_object()) throw InputError(what + ": expected a JSON object");
  if (Get<int>(j, "format_version", what) != kFormatVersion)
    throw InputError(what + ": unsupported format_version");
}

Json Versioned() {
  Json j = Json::object();
  j["format_version"] = kFormatVersion;
  return j;
}

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' '))
      cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Rows after a header that must match `expected`.
std::vector<std::vector<std::string>> ReadCsv(
    const std::string& text, const std::vector<std::string>& expected,
    const std::string& what) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool header = true;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = SplitCsvLine(line);
    if (header) {
      if (cells != expected) {
        std::string want;
        for (const auto& c : expected) want += (want.empty() ? "" : ",") + c;
        throw InputError(what + ": header must be '" + want + "'");
      }
      header = false;
      continue;
    }
    if (cells.size() != expected.size())
      throw InputError(what + ": line " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " fields, expected " +
                       std::to_string(expected.size()));
    rows.push_back(std::move(cells));
  }
  if (header) throw InputError(what + ": empty file");
  return rows;
}

double ToDouble(const std::string& s, const std::string& what) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError(what + ": '" + s + "' is not a number");
  }
}

int64_t ToInt(const std::string& s, const std::string& what) {
  try {
    size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError(what + ": '" + s + "' is not an integer");
  }
}

Json PlanJson(const ExecutionPlan& p) {
  return Json{{"dp", p.dp}, {"tp", p.tp}};
}

Json ReplicasJson(const std::vector<std::vector<int>>& reps) {
  Json out = Json::array();
  for (const auto& r : reps) out.push_back(r);
  return out;
}

}  // namespace

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(what + ": " + e.what());
  }
}

Json read_json(const std::string& path) {
  return parse_json(read_text(path), path);
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

// models ----------------------------------------------------------------

Json models_to_json(const ModelCatalog& catalog) {
  Json j = Versioned();
  Json arr = Json::array();
  for (const auto& m : catalog.models()) {
    arr.push_back({{"id", m.id},
                   {"num_layers", m.num_layers},
                   {"hidden_dim", m.hidden_dim},
                   {"matmul_weight_sum", m.matmul_weight_sum},
                   {"max_seq_len", m.max_seq_len},
                   {"weight_bytes", m.weight_bytes},
                   {"kv_bytes_per_token_per_layer",
                    m.kv_bytes_per_token_per_layer},
                   {"allowed_tp", m.allowed_tp},
                   {"max_num_seqs", m.max_num_seqs}});
  }
  j["models"] = std::move(arr);
  return j;
}

ModelCatalog models_from_json(const Json& j) {
  CheckVersion(j, "models");
  const auto& arr = Field(j, "models", "models");
  if (!arr.is_array()) throw InputError("models: 'models' must be an array");
  std::vector<ModelSpec> out;
  for (const auto& m : arr) {
    ModelSpec s;
    s.id = Get<std::string>(m, "id", "models");
    const std::string where = "model '" + s.id + "'";
    s.num_layers = Get<int64_t>(m, "num_layers", where);
    s.hidden_dim = Get<int64_t>(m, "hidden_dim", where);
    s.matmul_weight_sum = Get<double>(m, "matmul_weight_sum", where);
    s.max_seq_len = Get<int64_t>(m, "max_seq_len", where);
    s.weight_bytes = Get<int64_t>(m, "weight_bytes", where);
    s.kv_bytes_per_token_per_layer =
        Get<int64_t>(m, "kv_bytes_per_token_per_layer", where);
    s.allowed_tp = Get<std::vector<int>>(m, "allowed_tp", where);
    if (m.contains("max_num_seqs"))
      s.max_num_seqs = Get<int>(m, "max_num_seqs", where);
    s.Validate();
    out.push_back(std::move(s));
  }
  return ModelCatalog(std::move(out));
}

// gpus ------------------------------------------------------------------

Json gpus_to_json(const GpuTopology& topo) {
  Json j = Versioned();
  j["num_gpus"] = topo.num_gpus;
  j["mem_bytes_per_gpu"] = topo.mem_bytes_per_gpu;
  j["nvlink_groups"] = topo.nvlink_groups;
  j["reserved_fraction"] = topo.reserved_fraction;
  return j;
}

GpuTopology gpus_from_json(const Json& j) {
  CheckVersion(j, "gpus");
  GpuTopology t;
  t.num_gpus = Get<int>(j, "num_gpus", "gpus");
  t.mem_bytes_per_gpu = Get<int64_t>(j, "mem_bytes_per_gpu", "gpus");
  if (j.contains("nvlink_groups")) {
    t.nvlink_groups =
        Get<std::vector<std::vector<int>>>(j, "nvlink_groups", "gpus");
  } else {
    for (int g = 0; g < t.num_gpus; ++g) t.nvlink_groups.push_back({g});
  }
  if (j.contains("reserved_fraction"))
    t.reserved_fraction = Get<double>(j, "reserved_fraction", "gpus");
  t.Validate();
  return t;
}

// cost table ------------------------------------------------------------

Json cost_table_to_json(const CostTable& table) {
  Json j = Versioned();
  Json coeffs = Json::object();
  for (const auto& [key, mc] : table.all_coefficients()) {
    const auto& [model, tp] = key;
    Json phases = Json::object();
    for (Phase ph : {Phase::kComp, Phase::kPrep, Phase::kSamp}) {
      Json buckets = Json::object();
      for (const auto& [b, lc] : mc.of(ph).entries)
        buckets[std::to_string(b)] = {{"a", lc.a}, {"b", lc.b}};
      phases[PhaseName(ph)] = std::move(buckets);
    }
    coeffs[model][std::to_string(tp)] = std::move(phases);
  }
  j["coefficients"] = std::move(coeffs);
  Json loading = Json::object();
  for (const auto& [k, v] : table.all_loading_times()) loading[k] = v;
  j["loading_time"] = std::move(loading);
  return j;
}

CostTable cost_table_from_json(const Json& j) {
  CheckVersion(j, "cost_table");
  CostTable table;
  const auto& coeffs = Field(j, "coefficients", "cost_table");
  for (const auto& [model, by_tp] : coeffs.items()) {
    for (const auto& [tp_s, phases] : by_tp.items()) {
      const std::string where = "cost_table " + model + " tp " + tp_s;
      const int tp = static_cast<int>(ToInt(tp_s, where));
      ModelCoefficients mc;
      for (const auto& [ph_s, buckets] : phases.items()) {
        auto& pc = mc.of(ParsePhase(ph_s));
        for (const auto& [b_s, ab] : buckets.items()) {
          LinearCoefficients lc;
          lc.a = Get<double>(ab, "a", where);
          lc.b = Get<double>(ab, "b", where);
          pc.entries[ToInt(b_s, where)] = lc;
        }
      }
      table.SetCoefficients(model, tp, std::move(mc));
    }
  }
  if (j.contains("loading_time")) {
    for (const auto& [k, v] : j.at("loading_time").items()) {
      const auto colon = k.rfind(':');
      if (colon == std::string::npos)
        throw InputError("cost_table: bad loading key '" + k + "'");
      const std::string model = k.substr(0, colon);
      const std::string plan = k.substr(colon + 1);
      ExecutionPlan p;
      if (std::sscanf(plan.c_str(), "dp%dtp%d", &p.dp, &p.tp) != 2)
        throw InputError("cost_table: bad loading key '" + k + "'");
      if (!v.is_number())
        throw InputError("cost_table: loading time for '" + k +
                         "' is not a number");
      table.SetLoadingTime(model, p, v.get<double>());
    }
  }
  return table;
}

// eCDFs -----------------------------------------------------------------

Json ecdfs_to_json(const std::map<std::string, OutputLengthEcdf>& ecdfs) {
  Json j = Versioned();
  Json e = Json::object();
  for (const auto& [model, ecdf] : ecdfs) e[model] = ecdf.sorted_lengths();
  j["ecdfs"] = std::move(e);
  return j;
}

std::map<std::string, OutputLengthEcdf> ecdfs_from_json(const Json& j) {
  CheckVersion(j, "ecdf");
  std::map<std::string, OutputLengthEcdf> out;
  for (const auto& [model, arr] : Field(j, "ecdfs", "ecdf").items()) {
    std::vector<int64_t> v;
    try {
      v = arr.get<std::vector<int64_t>>();
    } catch (const nlohmann::json::exception&) {
      throw InputError("ecdf: lengths for '" + model + "' must be integers");
    }
    out.emplace(model, build_ecdf(v, model));
  }
  return out;
}

// app graph -------------------------------------------------------------

Json app_to_json(const AppGraph& graph) {
  Json j = Versioned();
  Json nodes = Json::array();
  for (const auto& n : graph.nodes()) {
    Json o = {{"id", n.id}, {"model_id", n.model_id}};
    if (n.max_output_len) o["max_output_len"] = *n.max_output_len;
    nodes.push_back(std::move(o));
  }
  Json edges = Json::array();
  for (const auto& e : graph.edges())
    edges.push_back({{"src", e.src},
                     {"dst", e.dst},
                     {"mode", EdgeModeName(e.mode)},
                     {"overhead_tokens", e.overhead_tokens}});
  j["nodes"] = std::move(nodes);
  j["edges"] = std::move(edges);
  return j;
}

AppGraph app_from_json(const Json& j) {
  CheckVersion(j, "app");
  std::vector<GraphNode> nodes;
  for (const auto& n : Field(j, "nodes", "app")) {
    GraphNode g;
    g.id = Get<std::string>(n, "id", "app node");
    g.model_id = Get<std::string>(n, "model_id", "app node '" + g.id + "'");
    if (n.contains("max_output_len") && !n.at("max_output_len").is_null())
      g.max_output_len = Get<int64_t>(n, "max_output_len", "app node");
    nodes.push_back(std::move(g));
  }
  std::vector<GraphEdge> edges;
  if (j.contains("edges")) {
    for (const auto& e : j.at("edges")) {
      GraphEdge g;
      g.src = Get<std::string>(e, "src", "app edge");
      g.dst = Get<std::string>(e, "dst", "app edge");
      if (e.contains("mode"))
        g.mode = ParseEdgeMode(Get<std::string>(e, "mode", "app edge"));
      if (e.contains("overhead_tokens"))
        g.overhead_tokens = Get<int64_t>(e, "overhead_tokens", "app edge");
      edges.push_back(std::move(g));
    }
  }
  return AppGraph(std::move(nodes), std::move(edges));
}

// requests --------------------------------------------------------------

Json requests_to_json(const std::vector<RequestSpec>& requests) {
  Json j = Versioned();
  Json arr = Json::array();
  for (const auto& r : requests) {
    Json o = {{"id", r.id}, {"node", r.node_id}, {"input_len", r.base_input_len}};
    if (!r.predecessors.empty()) {
      Json preds = Json::array();
      for (const auto& p : r.predecessors)
        preds.push_back({{"id", p.request_id},
                         {"transfer", LengthTransferName(p.transfer)}});
      o["predecessors"] = std::move(preds);
    }
    arr.push_back(std::move(o));
  }
  j["requests"] = std::move(arr);
  return j;
}

std::vector<RequestSpec> requests_from_json(const Json& j) {
  CheckVersion(j, "requests");
  std::vector<RequestSpec> out;
  for (const auto& r : Field(j, "requests", "requests")) {
    RequestSpec s;
    s.id = Get<std::string>(r, "id", "request");
    const std::string where = "request '" + s.id + "'";
    s.node_id = Get<std::string>(r, "node", where);
    s.base_input_len = Get<int64_t>(r, "input_len", where);
    if (r.contains("predecessors")) {
      for (const auto& p : r.at("predecessors")) {
        Predecessor pr;
        pr.request_id = Get<std::string>(p, "id", where);
        if (p.contains("transfer"))
          pr.transfer =
              ParseLengthTransfer(Get<std::string>(p, "transfer", where));
        s.predecessors.push_back(std::move(pr));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

Json lengths_to_json(const std::map<std::string, int64_t>& lengths) {
  Json j = Versioned();
  Json o = Json::object();
  for (const auto& [k, v] : lengths) o[k] = v;
  j["output_lengths"] = std::move(o);
  return j;
}

std::map<std::string, int64_t> lengths_from_json(const Json& j) {
  CheckVersion(j, "known lengths");
  std::map<std::string, int64_t> out;
  for (const auto& [k, v] : Field(j, "output_lengths", "known lengths").items()) {
    if (!v.is_number_integer() || v.get<int64_t>() < 0)
      throw InputError("known lengths: '" + k + "' must be a non-negative integer");
    out[k] = v.get<int64_t>();
  }
  return out;
}

// plan ------------------------------------------------------------------

Json plan_to_json(const AppPlan& plan) {
  Json j = Versioned();
  j["algorithm"] = plan.algorithm;
  j["allow_preemption"] = plan.allow_preemption;
  j["nodes"] = plan.node_ids;
  auto name = [&](int n) -> Json {
    if (n < 0) return nullptr;
    return plan.node_ids.at(n);
  };
  Json stages = Json::array();
  for (const auto& s : plan.stages) {
    Json entries = Json::array();
    for (const auto& e : s.entries)
      entries.push_back({{"node", name(e.node)}, {"dp", e.plan.dp}, {"tp", e.plan.tp}});
    Json remaining = Json::object();
    for (size_t n = 0; n < s.remaining_after.size(); ++n)
      remaining[plan.node_ids.at(n)] = s.remaining_after[n];
    stages.push_back({{"entries", std::move(entries)},
                      {"start_time", s.start_time},
                      {"end_time", s.end_time},
                      {"planned_duration", s.planned_duration},
                      {"planned_first_finisher", name(s.planned_first_finisher)},
                      {"gpus_used", s.gpus_used},
                      {"flops", s.flops},
                      {"throughput", s.throughput},
                      {"remaining_after", std::move(remaining)}});
  }
  j["stages"] = std::move(stages);
  j["total_latency"] = plan.total_latency;
  j["candidate_evaluations"] = plan.candidate_evaluations;
  return j;
}

AppPlan plan_from_json(const Json& j) {
  CheckVersion(j, "plan");
  AppPlan plan;
  plan.algorithm = Get<std::string>(j, "algorithm", "plan");
  plan.allow_preemption = Get<bool>(j, "allow_preemption", "plan");
  plan.node_ids = Get<std::vector<std::string>>(j, "nodes", "plan");
  std::map<std::string, int> index;
  for (size_t i = 0; i < plan.node_ids.size(); ++i)
    index[plan.node_ids[i]] = static_cast<int>(i);
  auto lookup = [&](const Json& v) {
    if (v.is_null()) return -1;
    if (!v.is_string()) throw InputError("plan: node references must be strings");
    auto it = index.find(v.get<std::string>());
    if (it == index.end())
      throw InputError("plan: unknown node '" + v.get<std::string>() + "'");
    return it->second;
  };
  for (const auto& s : Field(j, "stages", "plan")) {
    Stage st;
    for (const auto& e : Field(s, "entries", "plan stage")) {
      StageEntry en;
      en.node = lookup(Field(e, "node", "plan entry"));
      en.plan.dp = Get<int>(e, "dp", "plan entry");
      en.plan.tp = Get<int>(e, "tp", "plan entry");
      st.entries.push_back(en);
    }
    st.start_time = Get<double>(s, "start_time", "plan stage");
    st.end_time = Get<double>(s, "end_time", "plan stage");
    st.planned_duration = Get<double>(s, "planned_duration", "plan stage");
    st.planned_first_finisher =
        lookup(Field(s, "planned_first_finisher", "plan stage"));
    st.gpus_used = Get<int>(s, "gpus_used", "plan stage");
    st.flops = Get<double>(s, "flops", "plan stage");
    st.throughput = Get<double>(s, "throughput", "plan stage");
    if (s.contains("remaining_after")) {
      st.remaining_after.assign(plan.node_ids.size(), 0);
      for (const auto& [k, v] : s.at("remaining_after").items())
        st.remaining_after.at(lookup(k)) = v.get<int>();
    }
    plan.stages.push_back(std::move(st));
  }
  plan.total_latency = Get<double>(j, "total_latency", "plan");
  plan.candidate_evaluations = Get<int64_t>(j, "candidate_evaluations", "plan");
  return plan;
}

// trace -----------------------------------------------------------------

Json trace_to_json(const RuntimeTrace& trace,
                   const std::vector<std::string>& node_ids) {
  Json j = Versioned();
  j["time_basis"] = "simulated";
  j["total_time"] = trace.total_time;
  j["planned_total"] = trace.planned_total;
  j["error_ratio"] = trace.error_ratio();
  j["mispredictions"] = trace.mispredictions;
  j["reload_seconds"] = trace.reload_seconds;
  j["generated_tokens"] = trace.generated_tokens;
  auto name = [&](int n) -> Json {
    if (n < 0) return nullptr;
    return node_ids.at(n);
  };
  Json events = Json::array();
  for (const auto& e : trace.events) {
    Json o = {{"time", e.time}, {"event", EventKindName(e.kind)},
              {"node", name(e.node)}, {"stage", e.stage}};
    if (e.node >= 0) o["plan"] = PlanJson(e.plan);
    if (!e.reason.empty()) o["reason"] = e.reason;
    events.push_back(std::move(o));
  }
  j["events"] = std::move(events);
  Json placements = Json::array();
  for (const auto& p : trace.placements) {
    Json gpus = Json::array();
    for (const auto& o : p.placement.gpus) {
      if (o.node < 0)
        gpus.push_back(nullptr);
      else
        gpus.push_back({{"node", name(o.node)}, {"replica", o.replica},
                        {"tp_rank", o.tp_rank}});
    }
    Json models = Json::object();
    for (const auto& [n, mp] : p.placement.models)
      models[node_ids.at(n)] = {{"plan", PlanJson(mp.plan)},
                                {"replicas", ReplicasJson(mp.replicas)}};
    placements.push_back({{"time", p.time}, {"stage", p.stage},
                          {"gpus", std::move(gpus)},
                          {"models", std::move(models)}});
  }
  j["placements"] = std::move(placements);
  Json busy = Json::array();
  for (const auto& per : trace.gpu_busy) {
    Json arr = Json::array();
    for (const auto& iv : per)
      arr.push_back({{"start", iv.start}, {"end", iv.end}, {"node", name(iv.node)}});
    busy.push_back(std::move(arr));
  }
  j["gpu_busy"] = std::move(busy);
  const auto idle = gpu_idle_report(trace);
  j["idle"] = {{"span", idle.span}, {"per_gpu", idle.per_gpu},
               {"total", idle.total}};
  return j;
}

// CSV -------------------------------------------------------------------

std::vector<ProfileSample> profile_from_csv(const std::string& text) {
  const auto rows = ReadCsv(text, {"model_id", "tp", "phase", "B", "x", "latency_s"},
                            "profile CSV");
  std::vector<ProfileSample> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    ProfileSample s;
    s.model_id = r[0];
    s.tp = static_cast<int>(ToInt(r[1], "profile CSV tp"));
    s.phase = ParsePhase(r[2]);
    s.batch = ToInt(r[3], "profile CSV B");
    s.x = ToDouble(r[4], "profile CSV x");
    s.latency_s = ToDouble(r[5], "profile CSV latency_s");
    out.push_back(std::move(s));
  }
  return out;
}

std::map<std::string, std::vector<int64_t>> length_trace_from_csv(
    const std::string& text) {
  const auto rows = ReadCsv(text, {"model_id", "output_len"}, "length CSV");
  std::map<std::string, std::vector<int64_t>> out;
  for (const auto& r : rows)
    out[r[0]].push_back(ToInt(r[1], "length CSV output_len"));
  return out;
}

void loading_from_csv(const std::string& text, CostTable& table) {
  const auto rows =
      ReadCsv(text, {"model_id", "dp", "tp", "seconds"}, "loading CSV");
  for (const auto& r : rows) {
    ExecutionPlan p;
    p.dp = static_cast<int>(ToInt(r[1], "loading CSV dp"));
    p.tp = static_cast<int>(ToInt(r[2], "loading CSV tp"));
    table.SetLoadingTime(r[0], p, ToDouble(r[3], "loading CSV seconds"));
  }
}

std::string iterations_to_csv(const std::vector<NodeIteration>& iterations,
                              const std::vector<std::string>& node_ids) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "node,replica,t_start,kind,B,s,S,flops,latency\n";
  for (const auto& ni : iterations) {
    const auto& r = ni.record;
    out << node_ids.at(ni.node) << ',' << r.replica << ',' << r.start << ','
        << IterationKindName(r.it.kind) << ',' << r.it.batch << ','
        << r.it.max_len << ',' << r.it.total_len << ',' << r.flops << ','
        << r.latency << '\n';
  }
  return out.str();
}

// Gantt -----------------------------------------------------------------

std::string render_gantt_svg(const RuntimeTrace& trace,
                             const std::vector<std::string>& node_ids) {
  static const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                   "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
                                   "#9c755f", "#bab0ac"};
  const int n_gpus = static_cast<int>(trace.gpu_busy.size());
  const double span = trace.total_time > 0 ? trace.total_time : 1.0;
  const double left = 70, top = 30, row = 28, width = 900;
  const double height = top + row * n_gpus + 60;
  auto x = [&](double t) { return left + width * t / span; };

  std::ostringstream s;
  s << std::fixed << std::setprecision(2);
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + width + 20
    << "\" height=\"" << height << "\" font-family=\"sans-serif\" "
       "font-size=\"11\">\n";
  s << "<text x=\"" << left << "\" y=\"18\">simulated time, total "
    << trace.total_time << " s</text>\n";
  for (int g = 0; g < n_gpus; ++g) {
    const double y = top + row * g;
    s << "<text x=\"8\" y=\"" << y + row * 0.65 << "\">GPU " << g
      << "</text>\n";
    for (const auto& iv : trace.gpu_busy[g]) {
      const char* color = kPalette[iv.node % 10];
      s << "<rect x=\"" << x(iv.start) << "\" y=\"" << y + 3 << "\" width=\""
        << std::max(0.5, x(iv.end) - x(iv.start)) << "\" height=\"" << row - 6
        << "\" fill=\"" << color << "\"><title>" << node_ids.at(iv.node) << " "
        << iv.start << "-" << iv.end << "</title></rect>\n";
      if (x(iv.end) - x(iv.start) > 40)
        s << "<text x=\"" << x(iv.start) + 3 << "\" y=\"" << y + row * 0.65
          << "\" fill=\"white\">" << node_ids.at(iv.node) << "</text>\n";
    }
  }
  const double bottom = top + row * n_gpus;
  for (const auto& e : trace.events) {
    if (e.kind != EventKind::kStageAdvanced) continue;
    s << "<line x1=\"" << x(e.time) << "\" y1=\"" << top - 4 << "\" x2=\""
      << x(e.time) << "\" y2=\"" << bottom + 4
      << "\" stroke=\"black\" stroke-dasharray=\"4,3\"/>\n";
    s << "<text x=\"" << x(e.time) + 2 << "\" y=\"" << bottom + 16 << "\">S"
      << e.stage + 1 << "</text>\n";
  }
  s << "<line x1=\"" << left << "\" y1=\"" << bottom + 24 << "\" x2=\""
    << left + width << "\" y2=\"" << bottom + 24 << "\" stroke=\"gray\"/>\n";
  for (int k = 0; k <= 10; ++k) {
    const double t = span * k / 10;
    s << "<text x=\"" << x(t) - 8 << "\" y=\"" << bottom + 38 << "\">" << t
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace stageplan
