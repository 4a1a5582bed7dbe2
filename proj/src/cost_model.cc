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

#include "stageplan/cost_model.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "stageplan/errors.h"

namespace stageplan {

const char* PhaseName(Phase phase) {
  switch (phase) {
    case Phase::kComp:
      return "comp";
    case Phase::kPrep:
      return "prep";
    case Phase::kSamp:
      return "samp";
  }
  return "?";
}

Phase ParsePhase(const std::string& name) {
  if (name == "comp") return Phase::kComp;
  if (name == "prep") return Phase::kPrep;
  if (name == "samp") return Phase::kSamp;
  throw InputError("unknown phase '" + name + "' (expected comp|prep|samp)");
}

const char* IterationKindName(IterationKind kind) {
  return kind == IterationKind::kPrefill ? "prefill" : "decode";
}

double flops_prefill(const ModelSpec& model, const IterationDescriptor& it,
                     int tp) {
  if (tp < 1) throw InputError("tensor parallel degree must be >= 1");
  if (it.kind != IterationKind::kPrefill)
    throw InputError("flops_prefill called on a decode iteration");
  const double L = static_cast<double>(model.num_layers);
  const double B = static_cast<double>(it.batch);
  const double s = static_cast<double>(it.max_len);
  const double h = static_cast<double>(model.hidden_dim);
  return L * (model.matmul_weight_sum * B * s + 2.0 * B * h * s * s / tp);
}

double flops_decode(const ModelSpec& model, const IterationDescriptor& it,
                    int tp) {
  if (tp < 1) throw InputError("tensor parallel degree must be >= 1");
  if (it.kind != IterationKind::kDecode)
    throw InputError("flops_decode called on a prefill iteration");
  const double L = static_cast<double>(model.num_layers);
  const double B = static_cast<double>(it.batch);
  const double S = static_cast<double>(it.total_len);
  const double h = static_cast<double>(model.hidden_dim);
  return L * (model.matmul_weight_sum * B + 2.0 * h * S / tp);
}

double iteration_flops(const ModelSpec& model, const IterationDescriptor& it,
                       int tp) {
  return it.kind == IterationKind::kPrefill ? flops_prefill(model, it, tp)
                                            : flops_decode(model, it, tp);
}

double PhaseCoefficients::Evaluate(int64_t batch, double x) const {
  if (entries.empty()) return 0.0;
  auto line = [x](const LinearCoefficients& c) { return c.a * x + c.b; };
  auto hi = entries.lower_bound(batch);
  if (hi == entries.end()) return line(std::prev(hi)->second);
  if (hi->first == batch || hi == entries.begin()) return line(hi->second);
  auto lo = std::prev(hi);
  const double t = static_cast<double>(batch - lo->first) /
                   static_cast<double>(hi->first - lo->first);
  return (1.0 - t) * line(lo->second) + t * line(hi->second);
}

const PhaseCoefficients& ModelCoefficients::of(Phase phase) const {
  switch (phase) {
    case Phase::kComp:
      return comp;
    case Phase::kPrep:
      return prep;
    case Phase::kSamp:
      break;
  }
  return samp;
}

PhaseCoefficients& ModelCoefficients::of(Phase phase) {
  return const_cast<PhaseCoefficients&>(
      static_cast<const ModelCoefficients&>(*this).of(phase));
}

double iter_latency(const ModelCoefficients& coeffs,
                    const IterationDescriptor& it, double flops) {
  const int64_t B = it.batch;
  const double padded = static_cast<double>(it.batch * it.max_len);
  return coeffs.comp.Evaluate(B, flops) + coeffs.prep.Evaluate(B, padded) +
         coeffs.samp.Evaluate(B, static_cast<double>(it.total_len));
}

double iter_latency(const CostTable& table, const ModelSpec& model, int tp,
                    const IterationDescriptor& it) {
  return iter_latency(table.coefficients(model.id, tp), it,
                      iteration_flops(model, it, tp));
}

void CostTable::SetCoefficients(const std::string& model_id, int tp,
                                ModelCoefficients coeffs) {
  coefficients_[{model_id, tp}] = std::move(coeffs);
}

bool CostTable::HasCoefficients(const std::string& model_id, int tp) const {
  return coefficients_.count({model_id, tp}) > 0;
}

const ModelCoefficients& CostTable::coefficients(const std::string& model_id,
                                                 int tp) const {
  auto it = coefficients_.find({model_id, tp});
  if (it == coefficients_.end())
    throw InputError("cost table has no coefficients for (" + model_id +
                     ", tp=" + std::to_string(tp) + ")");
  return it->second;
}

std::string CostTable::LoadingKey(const std::string& model_id,
                                  const ExecutionPlan& plan) {
  return model_id + ":" + plan.ToString();
}

void CostTable::SetLoadingTime(const std::string& model_id,
                               const ExecutionPlan& plan, double seconds) {
  if (!(seconds >= 0) || !std::isfinite(seconds))
    throw InputError("loading time for " + LoadingKey(model_id, plan) +
                     " must be finite and >= 0");
  loading_[LoadingKey(model_id, plan)] = seconds;
}

bool CostTable::HasLoadingTime(const std::string& model_id,
                               const ExecutionPlan& plan) const {
  return loading_.count(LoadingKey(model_id, plan)) > 0;
}

void CostTable::CheckCoverage(const ModelCatalog& catalog,
                              const GpuTopology& topo) const {
  std::vector<std::string> missing;
  for (const auto& model : catalog.models()) {
    for (const auto& plan : enumerate_valid_plans(model, topo)) {
      if (!HasCoefficients(model.id, plan.tp))
        missing.push_back("coefficients(" + model.id +
                          ", tp=" + std::to_string(plan.tp) + ")");
      if (!HasLoadingTime(model.id, plan))
        missing.push_back("loading_time[" + LoadingKey(model.id, plan) + "]");
    }
  }
  if (missing.empty()) return;
  std::sort(missing.begin(), missing.end());
  missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
  std::string msg = "cost table does not cover:";
  for (const auto& m : missing) msg += " " + m;
  throw InputError(msg);
}

double loading_time(const CostTable& table, const std::string& model_id,
                    const ExecutionPlan& plan) {
  const auto& all = table.all_loading_times();
  auto it = all.find(CostTable::LoadingKey(model_id, plan));
  if (it == all.end())
    throw InputError("cost table has no loading time for " +
                     CostTable::LoadingKey(model_id, plan));
  return it->second;
}

namespace {

struct Point {
  double x;
  double y;
};

// Least-squares line through the points. Columns are centered and scaled
// before the QR solve because x (FLOPs) and the intercept column differ by
// many orders of magnitude.
LinearCoefficients SolveLine(const std::vector<Point>& pts) {
  const Eigen::Index n = static_cast<Eigen::Index>(pts.size());
  Eigen::VectorXd x(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x[i] = pts[i].x;
    y[i] = pts[i].y;
  }
  const double x_mean = x.mean();
  const double x_scale = std::max((x.array() - x_mean).abs().maxCoeff(),
                                  std::numeric_limits<double>::min());
  Eigen::MatrixXd design(n, 2);
  design.col(0) = (x.array() - x_mean) / x_scale;
  design.col(1).setOnes();
  const Eigen::Vector2d sol = design.colPivHouseholderQr().solve(y);
  LinearCoefficients c;
  c.a = sol[0] / x_scale;
  c.b = sol[1] - c.a * x_mean;
  return c;
}

struct BucketKey {
  std::string model_id;
  int tp;
  Phase phase;
  int64_t batch;
  auto tie() const { return std::tie(model_id, tp, phase, batch); }
  bool operator<(const BucketKey& o) const { return tie() < o.tie(); }
};

std::string Describe(const BucketKey& k) {
  std::ostringstream os;
  os << "(model_id=" << k.model_id << ", tp=" << k.tp
     << ", phase=" << PhaseName(k.phase) << ", B=" << k.batch << ")";
  return os.str();
}

size_t DistinctX(const std::vector<Point>& pts) {
  std::set<double> xs;
  for (const auto& p : pts) xs.insert(p.x);
  return xs.size();
}

}  // namespace

CostTable fit_coefficients(std::span<const ProfileSample> samples,
                           const FitOptions& options,
                           std::vector<std::string>* warnings) {
  std::map<BucketKey, std::vector<Point>> buckets;
  for (const auto& s : samples) {
    if (!std::isfinite(s.x) || !std::isfinite(s.latency_s))
      throw InputError("non-finite profile sample for " + s.model_id);
    buckets[{s.model_id, s.tp, s.phase, s.batch}].push_back(
        {s.x, s.latency_s});
  }

  std::vector<std::string> underdetermined;
  for (const auto& [key, pts] : buckets) {
    if (DistinctX(pts) < 2) underdetermined.push_back(Describe(key));
  }
  if (!underdetermined.empty()) {
    std::string msg = "buckets need >= 2 distinct x values:";
    for (const auto& d : underdetermined) msg += " " + d;
    throw InputError(msg);
  }

  CostTable table;
  std::map<std::pair<std::string, int>, ModelCoefficients> fitted;
  for (auto& [key, pts] : buckets) {
    LinearCoefficients line = SolveLine(pts);
    const size_t drop = options.trim_outliers
                            ? static_cast<size_t>(std::floor(
                                  pts.size() * options.trim_fraction))
                            : 0;
    if (drop > 0) {
      std::vector<Point> kept = pts;
      std::stable_sort(kept.begin(), kept.end(),
                       [&line](const Point& p, const Point& q) {
                         return std::abs(p.y - (line.a * p.x + line.b)) <
                                std::abs(q.y - (line.a * q.x + line.b));
                       });
      kept.resize(kept.size() - drop);
      if (DistinctX(kept) >= 2) line = SolveLine(kept), pts = std::move(kept);
    }
    if (line.a < 0) {
      if (warnings)
        warnings->push_back("negative slope clamped to 0 for " +
                            Describe(key));
      line.a = 0.0;
      double sum = 0.0;
      for (const auto& p : pts) sum += p.y;
      line.b = sum / static_cast<double>(pts.size());
    }
    fitted[{key.model_id, key.tp}].of(key.phase).entries[key.batch] = line;
  }
  for (auto& [key, coeffs] : fitted)
    table.SetCoefficients(key.first, key.second, std::move(coeffs));
  return table;
}

}  // namespace stageplan
