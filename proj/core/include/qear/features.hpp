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

#ifndef QEAR_FEATURES_HPP_
#define QEAR_FEATURES_HPP_

#include <span>
#include <string>
#include <vector>

#include "qear/mclt.hpp"

namespace qear {

/// Magnitude floor used inside the log compression.
inline constexpr double kLogMagEpsilon = 1e-8;

/// One model input/output vector: the four planes of a single time frame
/// concatenated as [log-mag L | phase L | log-mag R | phase R], 4M values.
/// Log-magnitudes are log10(m + eps) affine-mapped to [-1, 1] with corpus
/// bounds (clamped); phases are stored as phi/pi in (-1, 1].
struct FeatureFrame {
  std::vector<double> values;
  int frame_index = 0;
  std::string source_id;
};

/// Global normalization bounds for the log-magnitude planes, fitted once per
/// training corpus so reconstruction errors are comparable across frames.
struct CorpusStats {
  double logmag_min = 0.0;
  double logmag_max = 1.0;
};

/// Min/max of log10(m + eps) over every magnitude entry of every tensor.
/// Throws NumericError if the corpus is degenerate (min == max, e.g. all
/// silence) and UsageError on an empty list.
CorpusStats fit_stats(std::span<const MclTensor> tensors);

/// One FeatureFrame per tensor frame, per the layout above.
std::vector<FeatureFrame> to_features(const MclTensor& tensor, const CorpusStats& stats);

/// Exact inverse of to_features on its range: magnitudes are recovered from
/// the affine map (values at the -1 clamp come back at the corpus floor) and
/// phases are re-wrapped into (-pi, pi]. The frames must all have the same
/// 4M size consistent with pad_info.
MclTensor from_features(std::span<const FeatureFrame> frames, const CorpusStats& stats,
                        const PadInfo& pad_info, int sample_rate,
                        const std::string& source_id = "", int index = 0);

/// Wraps a phase expressed in pi units onto (-1, 1].
double wrap_phase_units(double v);

}  // namespace qear

#endif  // QEAR_FEATURES_HPP_
