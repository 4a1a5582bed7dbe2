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

#include "stageplan/length_sampler.h"

#include <algorithm>
#include <cmath>

#include "stageplan/errors.h"

namespace stageplan {
namespace {

// FNV-1a over the id, then a splitmix64 finalizer mixed with the seed.
uint64_t Mix(uint64_t seed, std::string_view id) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : id) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  uint64_t z = h ^ (seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

OutputLengthEcdf::OutputLengthEcdf(std::string model_id,
                                   std::vector<int64_t> sorted_lengths)
    : model_id_(std::move(model_id)), lengths_(std::move(sorted_lengths)) {
  if (lengths_.empty())
    throw InputError("eCDF for '" + model_id_ + "' has no samples");
  if (!std::is_sorted(lengths_.begin(), lengths_.end()))
    throw InputError("eCDF for '" + model_id_ + "' is not sorted");
  if (lengths_.front() < 0)
    throw InputError("eCDF for '" + model_id_ + "' has a negative length");
}

double OutputLengthEcdf::Cdf(double x) const {
  auto it = std::upper_bound(
      lengths_.begin(), lengths_.end(), x,
      [](double v, int64_t len) { return v < static_cast<double>(len); });
  return static_cast<double>(it - lengths_.begin()) /
         static_cast<double>(lengths_.size());
}

int64_t OutputLengthEcdf::Quantile(double u) const {
  const size_t n = lengths_.size();
  // smallest i with (i + 1) / n >= u
  auto i = static_cast<int64_t>(std::ceil(u * static_cast<double>(n))) - 1;
  i = std::clamp<int64_t>(i, 0, static_cast<int64_t>(n) - 1);
  while (i > 0 && static_cast<double>(i) / n >= u) --i;
  while (static_cast<size_t>(i) + 1 < n && static_cast<double>(i + 1) / n < u)
    ++i;
  return lengths_[static_cast<size_t>(i)];
}

OutputLengthEcdf build_ecdf(std::span<const int64_t> trace,
                            std::string model_id) {
  if (trace.empty())
    throw InputError("cannot build an eCDF from an empty trace" +
                     (model_id.empty() ? "" : " for '" + model_id + "'"));
  std::vector<int64_t> sorted(trace.begin(), trace.end());
  std::sort(sorted.begin(), sorted.end());
  return OutputLengthEcdf(std::move(model_id), std::move(sorted));
}

double request_uniform(uint64_t seed, std::string_view request_id) {
  return static_cast<double>(Mix(seed, request_id) >> 11) * 0x1.0p-53;
}

int64_t draw_output_length(const OutputLengthEcdf& ecdf, uint64_t seed,
                           std::string_view request_id) {
  return ecdf.Quantile(request_uniform(seed, request_id));
}

int64_t clamp_output_length(int64_t drawn, int64_t input_len, int64_t max_len,
                            std::optional<int64_t> cap) {
  if (input_len > max_len)
    throw InputError("input length " + std::to_string(input_len) +
                     " exceeds the model's maximum sequence length " +
                     std::to_string(max_len));
  int64_t out = std::min(drawn, max_len - input_len);
  if (cap) out = std::min(out, *cap);
  return std::max<int64_t>(out, 0);
}

int64_t sample_output_length(const OutputLengthEcdf& ecdf, int64_t input_len,
                             int64_t max_len, std::optional<int64_t> cap,
                             uint64_t seed, std::string_view request_id) {
  if (input_len > max_len)
    throw InputError("input length " + std::to_string(input_len) +
                     " exceeds the model's maximum sequence length " +
                     std::to_string(max_len));
  return clamp_output_length(draw_output_length(ecdf, seed, request_id),
                             input_len, max_len, cap);
}

}  // namespace stageplan
