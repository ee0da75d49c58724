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

#include "qear/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qear/errors.hpp"

namespace qear {
namespace {

constexpr double kPi = 3.14159265358979323846;

double log_mag(double m) { return std::log10(m + kLogMagEpsilon); }

}  // namespace

double wrap_phase_units(double v) {
  double w = std::fmod(v + 1.0, 2.0);
  if (w <= 0.0) w += 2.0;
  return w - 1.0;  // (-1, 1]
}

CorpusStats fit_stats(std::span<const MclTensor> tensors) {
  if (tensors.empty()) throw UsageError("fit_stats: empty corpus");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const MclTensor& tensor : tensors) {
    for (const std::vector<double>* plane : {&tensor.left_mag, &tensor.right_mag}) {
      for (double m : *plane) {
        const double v = log_mag(m);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!(hi > lo)) {
    throw NumericError("fit_stats: degenerate corpus, log-magnitude range is empty");
  }
  return CorpusStats{lo, hi};
}

std::vector<FeatureFrame> to_features(const MclTensor& tensor, const CorpusStats& stats) {
  if (!(stats.logmag_max > stats.logmag_min)) {
    throw UsageError("to_features: invalid stats");
  }
  const std::size_t m = tensor.bins;
  const double span = stats.logmag_max - stats.logmag_min;

  std::vector<FeatureFrame> frames;
  frames.reserve(tensor.frames);
  for (std::size_t t = 0; t < tensor.frames; ++t) {
    FeatureFrame frame;
    frame.frame_index = static_cast<int>(t);
    frame.source_id = tensor.source_id;
    frame.values.resize(4 * m);
    for (std::size_t k = 0; k < m; ++k) {
      const double lm_l =
          std::clamp(2.0 * (log_mag(tensor.left_mag[t * m + k]) - stats.logmag_min) / span - 1.0,
                     -1.0, 1.0);
      const double lm_r =
          std::clamp(2.0 * (log_mag(tensor.right_mag[t * m + k]) - stats.logmag_min) / span - 1.0,
                     -1.0, 1.0);
      frame.values[k] = lm_l;
      frame.values[m + k] = tensor.left_phase[t * m + k] / kPi;
      frame.values[2 * m + k] = lm_r;
      frame.values[3 * m + k] = tensor.right_phase[t * m + k] / kPi;
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

MclTensor from_features(std::span<const FeatureFrame> frames, const CorpusStats& stats,
                        const PadInfo& pad_info, int sample_rate,
                        const std::string& source_id, int index) {
  if (frames.empty()) throw DataError("from_features: no frames");
  if (!(stats.logmag_max > stats.logmag_min)) {
    throw UsageError("from_features: invalid stats");
  }
  const std::size_t dim = frames.front().values.size();
  if (dim == 0 || dim % 4 != 0) throw DataError("from_features: frame size not 4M");
  const std::size_t m = dim / 4;
  for (const FeatureFrame& f : frames) {
    if (f.values.size() != dim) throw DataError("from_features: inconsistent frame sizes");
  }
  if (pad_info.padded_len() != (frames.size() + 1) * m) {
    throw DataError("from_features: pad_info inconsistent with frame count");
  }

  const double span = stats.logmag_max - stats.logmag_min;
  MclTensor tensor;
  tensor.frames = frames.size();
  tensor.bins = m;
  tensor.pad_info = pad_info;
  tensor.sample_rate = sample_rate;
  tensor.source_id = source_id;
  tensor.index = index;
  const std::size_t plane_size = tensor.frames * m;
  tensor.left_mag.resize(plane_size);
  tensor.left_phase.resize(plane_size);
  tensor.right_mag.resize(plane_size);
  tensor.right_phase.resize(plane_size);

  auto to_mag = [&](double v) {
    const double lm = stats.logmag_min + (std::clamp(v, -1.0, 1.0) + 1.0) / 2.0 * span;
    return std::max(std::pow(10.0, lm) - kLogMagEpsilon, 0.0);
  };
  for (std::size_t t = 0; t < tensor.frames; ++t) {
    const auto& v = frames[t].values;
    for (std::size_t k = 0; k < m; ++k) {
      tensor.left_mag[t * m + k] = to_mag(v[k]);
      tensor.left_phase[t * m + k] = wrap_phase_units(v[m + k]) * kPi;
      tensor.right_mag[t * m + k] = to_mag(v[2 * m + k]);
      tensor.right_phase[t * m + k] = wrap_phase_units(v[3 * m + k]) * kPi;
    }
  }
  return tensor;
}

}  // namespace qear
