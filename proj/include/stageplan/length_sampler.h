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

#ifndef STAGEPLAN_LENGTH_SAMPLER_H_
#define STAGEPLAN_LENGTH_SAMPLER_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stageplan {

// Right-continuous step eCDF over observed output lengths.
class OutputLengthEcdf {
 public:
  OutputLengthEcdf() = default;
  OutputLengthEcdf(std::string model_id, std::vector<int64_t> sorted_lengths);

  const std::string& model_id() const { return model_id_; }
  const std::vector<int64_t>& sorted_lengths() const { return lengths_; }
  size_t size() const { return lengths_.size(); }

  // (#values <= x) / n
  double Cdf(double x) const;
  // Smallest stored length whose cumulative probability is >= u.
  int64_t Quantile(double u) const;

 private:
  std::string model_id_;
  std::vector<int64_t> lengths_;
};

// Throws InputError on an empty trace or a negative length.
OutputLengthEcdf build_ecdf(std::span<const int64_t> trace,
                            std::string model_id = "");

// Deterministic variate in [0, 1) for a (seed, request_id) pair.
double request_uniform(uint64_t seed, std::string_view request_id);

// Uncapped draw X from the eCDF for this request.
int64_t draw_output_length(const OutputLengthEcdf& ecdf, uint64_t seed,
                           std::string_view request_id);

// min(X, cap, l_max - l_in). Throws InputError when l_in > l_max.
int64_t clamp_output_length(int64_t drawn, int64_t input_len, int64_t max_len,
                            std::optional<int64_t> cap);

int64_t sample_output_length(const OutputLengthEcdf& ecdf, int64_t input_len,
                             int64_t max_len, std::optional<int64_t> cap,
                             uint64_t seed, std::string_view request_id);

}  // namespace stageplan

#endif  // STAGEPLAN_LENGTH_SAMPLER_H_
