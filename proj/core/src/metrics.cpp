// Copyright 2026 The qear Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qear/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "qear/errors.hpp"

namespace qear {

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw UsageError("percentile: empty input");
  if (p < 0.0 || p > 100.0) throw UsageError("percentile: p outside [0, 100]");
  std::sort(values.begin(), values.end());
  const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(rank);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double log_spectral_distance(const StereoSignal& a, const StereoSignal& b,
                             const AnalysisConfig& config) {
  if (a.size() != b.size()) throw DataError("log_spectral_distance: length mismatch");
  constexpr double kFloor = 1e-12;

  AudioSegment sa{"", 0, a};
  AudioSegment sb{"", 0, b};
  const MclTensor ta = analyze(sa, config);
  const MclTensor tb = analyze(sb, config);

  double sum = 0.0;
  std::size_t count = 0;
  auto accumulate = [&](const std::vector<double>& ma, const std::vector<double>& mb) {
    for (std::size_t i = 0; i < ma.size(); ++i) {
      // Subtract before scaling so identical magnitudes give exactly zero.
      const double d = 20.0 * (std::log10(ma[i] + kFloor) - std::log10(mb[i] + kFloor));
      sum += d * d;
      ++count;
    }
  };
  accumulate(ta.left_mag, tb.left_mag);
  accumulate(ta.right_mag, tb.right_mag);
  return std::sqrt(sum / static_cast<double>(count));
}

double rank_auc(std::span<const double> negative, std::span<const double> positive) {
  if (negative.empty() || positive.empty()) {
    throw UsageError("rank_auc: both classes must be non-empty");
  }
  // Average ranks over the pooled sample; ties get the mean rank of their run.
  struct Tagged {
    double value;
    bool positive;
  };
  std::vector<Tagged> pool;
  pool.reserve(negative.size() + positive.size());
  for (double v : negative) pool.push_back({v, false});
  for (double v : positive) pool.push_back({v, true});
  std::sort(pool.begin(), pool.end(),
            [](const Tagged& x, const Tagged& y) { return x.value < y.value; });

  double rank_sum_positive = 0.0;
  std::size_t i = 0;
  while (i < pool.size()) {
    std::size_t j = i;
    while (j < pool.size() && pool[j].value == pool[i].value) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (pool[k].positive) rank_sum_positive += mean_rank;
    }
    i = j;
  }
  const double np = static_cast<double>(positive.size());
  const double nn = static_cast<double>(negative.size());
  const double u = rank_sum_positive - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

}  // namespace qear
