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

// stageplan command-line driver.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stageplan/baselines.h"
#include "stageplan/errors.h"
#include "stageplan/fixtures.h"
#include "stageplan/io.h"
#include "stageplan/planner.h"
#include "stageplan/problem.h"
#include "stageplan/runtime.h"

namespace fs = std::filesystem;
using namespace stageplan;

namespace {

struct Inputs {
  std::string models, gpus, cost_table, ecdf, app, requests;
  std::string known_lengths;
  uint64_t seed = 0;
};

void AddInputFlags(CLI::App* cmd, Inputs& in) {
  cmd->add_option("--models", in.models, "models.json")->required();
  cmd->add_option("--gpus", in.gpus, "gpus.json")->required();
  cmd->add_option("--cost-table", in.cost_table, "cost_table.json")->required();
  cmd->add_option("--ecdf", in.ecdf, "ecdf.json")->required();
  cmd->add_option("--app", in.app, "app.json")->required();
  cmd->add_option("--requests", in.requests, "requests.json")->required();
  cmd->add_option("--seed", in.seed, "output-length sampling seed");
  cmd->add_option("--known-lengths", in.known_lengths,
                  "JSON with the true output length of every request");
}

ProblemInputs LoadInputs(const Inputs& in) {
  ProblemInputs p;
  p.catalog = models_from_json(read_json(in.models));
  p.topo = gpus_from_json(read_json(in.gpus));
  p.table = cost_table_from_json(read_json(in.cost_table));
  p.ecdfs = ecdfs_from_json(read_json(in.ecdf));
  p.app = app_from_json(read_json(in.app));
  p.requests = requests_from_json(read_json(in.requests));
  return p;
}

Problem LoadProblem(const Inputs& in) {
  ProblemInputs p = LoadInputs(in);
  if (!in.known_lengths.empty()) {
    auto drawn = known_lengths(p.requests,
                               lengths_from_json(read_json(in.known_lengths)));
    return Problem(std::move(p), std::move(drawn));
  }
  return Problem::Sampled(std::move(p), in.seed);
}

fs::path OutDir(const std::string& dir) {
  fs::path p = dir.empty() ? fs::path(".") : fs::path(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw InputError("cannot create '" + p.string() + "'");
  return p;
}

std::string Fmt(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

AppPlan RunAlgorithm(const Problem& problem, const std::string& algo,
                     bool no_preemption) {
  const SimContext ctx = problem.ctx();
  if (algo == "greedy") {
    PlannerOptions o;
    o.allow_preemption = !no_preemption;
    return greedy_search(ctx, problem.workload(), o);
  }
  if (algo == "max") return max_heuristic(ctx, problem.workload());
  if (algo == "min") {
    MinHeuristicOptions o;
    o.allow_preemption = !no_preemption;
    return min_heuristic(ctx, problem.workload(), o);
  }
  throw InputError("unknown algorithm '" + algo + "'");
}

Json PlanReport(const Problem& problem, const AppPlan& plan, double wall) {
  const auto& w = problem.workload();
  Json j;
  j["format_version"] = kFormatVersion;
  j["time_basis"] = "simulated";
  j["algorithm"] = plan.algorithm;
  j["allow_preemption"] = plan.allow_preemption;
  j["planned_total"] = plan.total_latency;
  j["planning_wall_seconds"] = wall;
  j["candidate_evaluations"] = plan.candidate_evaluations;
  Json workloads = Json::object();
  for (int n = 0; n < problem.graph().size(); ++n) {
    int64_t tokens = 0;
    for (int r : w.requests_of(n)) tokens += w.at(r).drawn_len;
    workloads[problem.graph().node(n).id] = {
        {"model", problem.graph().node(n).model_id},
        {"requests", w.requests_of(n).size()},
        {"sampled_output_tokens_uncapped", tokens}};
  }
  j["workloads"] = std::move(workloads);
  return j;
}

void PrintPlan(const Problem& problem, const AppPlan& plan, double wall) {
  const auto& w = problem.workload();
  std::cout << "algorithm " << plan.algorithm
            << (plan.allow_preemption ? "" : " (no preemption)") << "\n";
  std::cout << "workloads:\n";
  for (int n = 0; n < problem.graph().size(); ++n)
    std::cout << "  " << problem.graph().node(n).id << ": "
              << w.requests_of(n).size() << " requests\n";
  std::cout << "stage  start      end        gpus  models\n";
  for (size_t s = 0; s < plan.stages.size(); ++s) {
    const auto& st = plan.stages[s];
    std::cout << "  " << s + 1 << "    " << Fmt("%-10.3f", st.start_time) << " "
              << Fmt("%-10.3f", st.end_time) << " " << st.gpus_used << "     ";
    for (const auto& e : st.entries)
      std::cout << plan.node_ids[e.node] << "@" << e.plan.ToString() << " ";
    std::cout << "\n";
  }
  std::cout << "planned total (simulated s): " << Fmt("%.6f", plan.total_latency)
            << "\n";
  std::cout << "planning wall time (s): " << Fmt("%.3f", wall) << "\n";
  std::cout << "candidate evaluations: " << plan.candidate_evaluations << "\n";
}

int CmdPlan(const Inputs& in, const std::string& algo, bool no_preemption,
            const std::string& out_dir) {
  const Problem problem = LoadProblem(in);
  const auto t0 = std::chrono::steady_clock::now();
  const AppPlan plan = RunAlgorithm(problem, algo, no_preemption);
  const double wall = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
  const fs::path dir = OutDir(out_dir);
  write_text((dir / "plan.json").string(), dump_json(plan_to_json(plan)));
  write_text((dir / "report.json").string(),
             dump_json(PlanReport(problem, plan, wall)));
  PrintPlan(problem, plan, wall);
  return 0;
}

int CmdRun(const Inputs& in, const std::string& plan_path,
           std::optional<uint64_t> oracle_seed,
           const std::string& oracle_lengths, bool trace_iterations,
           const std::string& out_dir) {
  const Problem problem = LoadProblem(in);
  const AppPlan plan = plan_from_json(read_json(plan_path));
  const SimContext ctx = problem.ctx();
  check_plan_matches(ctx, plan);

  WorkloadState oracle = problem.workload();
  if (!oracle_lengths.empty()) {
    oracle = problem.WorkloadFor(known_lengths(
        problem.inputs().requests, lengths_from_json(read_json(oracle_lengths))));
  } else if (oracle_seed) {
    oracle = problem.WorkloadFor(sample_draws(problem.inputs(), *oracle_seed));
  }
  RuntimeOptions opts;
  opts.keep_iterations = trace_iterations;
  const RuntimeTrace trace = run_with_oracle(ctx, plan, oracle, opts);

  const auto ids = problem.node_ids();
  const fs::path dir = OutDir(out_dir);
  write_text((dir / "trace.json").string(), dump_json(trace_to_json(trace, ids)));
  write_text((dir / "gantt.svg").string(), render_gantt_svg(trace, ids));
  if (trace_iterations)
    write_text((dir / "iterations.csv").string(),
               iterations_to_csv(trace.iterations, ids));

  std::cout << "times are simulated\n";
  std::cout << "planned total: " << Fmt("%.6f", trace.planned_total) << "\n";
  std::cout << "actual total:  " << Fmt("%.6f", trace.total_time) << "\n";
  std::cout << "error ratio:   " << Fmt("%.6f", trace.error_ratio()) << "\n";
  std::cout << "mispredicted stage ends: " << trace.mispredictions << "\n";
  std::cout << "reload seconds: " << Fmt("%.3f", trace.reload_seconds) << "\n";
  const auto idle = gpu_idle_report(trace);
  std::cout << "GPU idle seconds: " << Fmt("%.3f", idle.total) << "\n";
  return 0;
}

int CmdFit(const std::string& profile, const std::string& loading, bool trim,
           const std::string& out) {
  const auto samples = profile_from_csv(read_text(profile));
  FitOptions opts;
  opts.trim_outliers = trim;
  std::vector<std::string> warnings;
  CostTable table = fit_coefficients(samples, opts, &warnings);
  if (!loading.empty()) loading_from_csv(read_text(loading), table);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  write_text(out, dump_json(cost_table_to_json(table)));
  std::cout << "fitted " << table.all_coefficients().size()
            << " (model, tp) rows from " << samples.size() << " samples\n";
  return 0;
}

int CmdEcdf(const std::string& trace, const std::string& out) {
  std::map<std::string, OutputLengthEcdf> ecdfs;
  for (const auto& [model, lengths] : length_trace_from_csv(read_text(trace)))
    ecdfs.emplace(model, build_ecdf(lengths, model));
  write_text(out, dump_json(ecdfs_to_json(ecdfs)));
  std::cout << "wrote " << ecdfs.size() << " eCDFs\n";
  return 0;
}

int CmdFixture(const std::string& name, const std::string& out_dir) {
  const ProblemInputs p = fixture_by_name(name);
  const fs::path dir = OutDir(out_dir);
  write_text((dir / "models.json").string(), dump_json(models_to_json(p.catalog)));
  write_text((dir / "gpus.json").string(), dump_json(gpus_to_json(p.topo)));
  write_text((dir / "cost_table.json").string(),
             dump_json(cost_table_to_json(p.table)));
  write_text((dir / "ecdf.json").string(), dump_json(ecdfs_to_json(p.ecdfs)));
  write_text((dir / "app.json").string(), dump_json(app_to_json(p.app)));
  write_text((dir / "requests.json").string(),
             dump_json(requests_to_json(p.requests)));
  std::cout << "wrote fixture '" << name << "' to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stage-based planner for multi-LLM applications"};
  app.require_subcommand(1);

  Inputs in;
  std::string algo = "greedy", out_dir = ".", plan_path, oracle_lengths;
  std::string profile, loading, out, trace, fixture_name;
  std::optional<uint64_t> oracle_seed;
  bool no_preemption = false, trace_iterations = false, trim = false;

  auto* plan = app.add_subcommand("plan", "build an execution plan");
  AddInputFlags(plan, in);
  plan->add_option("--algo", algo)->check(CLI::IsMember({"greedy", "max", "min"}));
  plan->add_flag("--no-preemption", no_preemption);
  plan->add_option("--out-dir", out_dir);

  auto* baseline = app.add_subcommand("baseline", "plan with a baseline heuristic");
  AddInputFlags(baseline, in);
  baseline->add_option("--algo", algo)->required()->check(CLI::IsMember({"max", "min"}));
  baseline->add_flag("--no-preemption", no_preemption);
  baseline->add_option("--out-dir", out_dir);

  auto* run = app.add_subcommand("run", "replay a plan against ground-truth lengths");
  AddInputFlags(run, in);
  run->add_option("--plan", plan_path, "plan.json")->required();
  run->add_option("--oracle-seed", oracle_seed,
                  "sample ground truth with this seed (default: --seed)");
  run->add_option("--oracle-lengths", oracle_lengths,
                  "ground-truth output lengths JSON");
  run->add_flag("--trace-iterations", trace_iterations,
                "also write every engine iteration to iterations.csv");
  run->add_option("--out-dir", out_dir);

  auto* fit = app.add_subcommand("fit", "fit latency coefficients from a profile");
  fit->add_option("--profile", profile, "model_id,tp,phase,B,x,latency_s")->required();
  fit->add_option("--loading", loading, "model_id,dp,tp,seconds");
  fit->add_flag("--trim-outliers", trim);
  fit->add_option("--out", out, "cost_table.json")->required();

  auto* ecdf = app.add_subcommand("ecdf", "build output-length eCDFs");
  ecdf->add_option("--trace", trace, "model_id,output_len")->required();
  ecdf->add_option("--out", out, "ecdf.json")->required();

  auto* fixture = app.add_subcommand("fixture", "write a built-in application");
  fixture->add_option("--name", fixture_name)->required()->check(
      CLI::IsMember(fixture_names()));
  fixture->add_option("--out-dir", out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorKind::kInput);
  }

  try {
    if (*plan) return CmdPlan(in, algo, no_preemption, out_dir);
    if (*baseline) return CmdPlan(in, algo, no_preemption, out_dir);
    if (*run)
      return CmdRun(in, plan_path, oracle_seed, oracle_lengths,
                    trace_iterations, out_dir);
    if (*fit) return CmdFit(profile, loading, trim, out);
    if (*ecdf) return CmdEcdf(trace, out);
    if (*fixture) return CmdFixture(fixture_name, out_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  }
  return 0;
}
