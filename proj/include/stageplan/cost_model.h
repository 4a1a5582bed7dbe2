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

#ifndef STAGEPLAN_COST_MODEL_H_
#define STAGEPLAN_COST_MODEL_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stageplan/model_catalog.h"

namespace stageplan {

enum class Phase { kComp, kPrep, kSamp };
enum class IterationKind { kPrefill, kDecode };

const char* PhaseName(Phase phase);
Phase ParsePhase(const std::string& name);
const char* IterationKindName(IterationKind kind);

// One forward pass. For prefill, s is the longest prompt and S the summed
// prompt length; for decode, s is the longest context and S the summed
// context length of the running requests.
struct IterationDescriptor {
  IterationKind kind = IterationKind::kDecode;
  int64_t batch = 0;       // B
  int64_t max_len = 0;     // s
  int64_t total_len = 0;   // S
};

// Per-iteration FLOPs (prefill / decode). Throws InputError for tp < 1 or a
// descriptor of the wrong kind.
double flops_prefill(const ModelSpec& model, const IterationDescriptor& it,
                     int tp);
double flops_decode(const ModelSpec& model, const IterationDescriptor& it,
                    int tp);
double iteration_flops(const ModelSpec& model, const IterationDescriptor& it,
                       int tp);

struct LinearCoefficients {
  double a = 0.0;  // seconds per unit of x
  double b = 0.0;  // seconds
  friend bool operator==(const LinearCoefficients&,
                         const LinearCoefficients&) = default;
};

// Per-batch-size lines for one latency component. Unprofiled batch sizes
// are linearly interpolated between the two nearest profiled buckets and
// clamped outside the profiled range.
struct PhaseCoefficients {
  std::map<int64_t, LinearCoefficients> entries;

  double Evaluate(int64_t batch, double x) const;
};

struct ModelCoefficients {
  PhaseCoefficients comp;
  PhaseCoefficients prep;
  PhaseCoefficients samp;

  const PhaseCoefficients& of(Phase phase) const;
  PhaseCoefficients& of(Phase phase);
};

// t_comp + t_prep + t_samp for one iteration whose FLOPs are already known.
double iter_latency(const ModelCoefficients& coeffs,
                    const IterationDescriptor& it, double flops);

class CostTable {
 public:
  void SetCoefficients(const std::string& model_id, int tp,
                       ModelCoefficients coeffs);
  bool HasCoefficients(const std::string& model_id, int tp) const;
  // Throws InputError naming the missing (model_id, tp) key.
  const ModelCoefficients& coefficients(const std::string& model_id,
                                        int tp) const;

  void SetLoadingTime(const std::string& model_id, const ExecutionPlan& plan,
                      double seconds);
  bool HasLoadingTime(const std::string& model_id,
                      const ExecutionPlan& plan) const;

  // Every enumerated plan of every catalog model must have coefficients for
  // its tp and a loading time. Throws InputError listing gaps.
  void CheckCoverage(const ModelCatalog& catalog,
                     const GpuTopology& topo) const;

  // "model_id:dpXtpY"
  static std::string LoadingKey(const std::string& model_id,
                                const ExecutionPlan& plan);

  const std::map<std::pair<std::string, int>, ModelCoefficients>&
  all_coefficients() const {
    return coefficients_;
  }
  const std::map<std::string, double>& all_loading_times() const {
    return loading_;
  }

 private:
  std::map<std::pair<std::string, int>, ModelCoefficients> coefficients_;
  std::map<std::string, double> loading_;
};

double iter_latency(const CostTable& table, const ModelSpec& model, int tp,
                    const IterationDescriptor& it);

// Throws InputError when the entry is missing.
double loading_time(const CostTable& table, const std::string& model_id,
                    const ExecutionPlan& plan);

struct ProfileSample {
  std::string model_id;
  int tp = 1;
  Phase phase = Phase::kComp;
  int64_t batch = 1;
  double x = 0.0;
  double latency_s = 0.0;
};

struct FitOptions {
  // Drop the largest |residual| fraction of each bucket and refit.
  bool trim_outliers = false;
  double trim_fraction = 0.01;
};

// Least-squares line per (model_id, tp, phase, B) bucket. Buckets with
// fewer than two distinct x values raise InputError naming every such
// bucket. Negative slopes are clamped to zero (intercept refit to the mean)
// and reported through `warnings` when given.
CostTable fit_coefficients(std::span<const ProfileSample> samples,
                           const FitOptions& options = {},
                           std::vector<std::string>* warnings = nullptr);

}  // namespace stageplan

#endif  // STAGEPLAN_COST_MODEL_H_
