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

#ifndef QEAR_METRICS_HPP_
#define QEAR_METRICS_HPP_

#include <span>
#include <vector>

#include "qear/audio_io.hpp"
#include "qear/mclt.hpp"

namespace qear {

/// Percentile with linear interpolation between order statistics
/// (rank = p/100 * (n-1)). p in [0, 100]; values need not be sorted.
double percentile(std::vector<double> values, double p);

/// RMS difference of the 20*log10(mag + 1e-12) transform planes of the two
/// signals, in dB, over all frames/bins/channels. Signals must have equal
/// length.
double log_spectral_distance(const StereoSignal& a, const StereoSignal& b,
                             const AnalysisConfig& config);

/// Rank-based AUC of `positive` scoring above `negative`; ties count 1/2.
/// Equivalent to the Mann-Whitney U statistic scaled to [0, 1].
double rank_auc(std::span<const double> negative, std::span<const double> positive);

}  // namespace qear

#endif  // QEAR_METRICS_HPP_
