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

#ifndef QEAR_SYNTHGEN_HPP_
#define QEAR_SYNTHGEN_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qear/audio_io.hpp"

namespace qear {

struct Harmonic {
  double freq_hz = 0.0;
  double gain = 0.0;
};

/// Fault signature: a narrowband squeal plus amplitude modulation of the
/// whole bed at the given rate.
struct DamageSpec {
  double squeal_hz = 0.0;
  double am_rate_hz = 0.0;
  double gain = 0.0;
};

/// Inter-channel offsets. The right channel is the bed delayed by
/// `right_delay` samples and scaled by `right_gain`.
struct StereoSpread {
  double right_gain = 1.0;
  int right_delay = 0;
};

/// Recipe for one machine sound: a tilted broadband noise floor, a stack of
/// partials with slow coherent phase drift, Poisson-timed impact bursts, and
/// an optional damage signature.
struct MachineProfile {
  std::string name;
  double noise_level = 0.0;  // linear gain of the white noise before tilting
  double noise_color = 0.0;  // spectral tilt in dB/octave
  std::vector<Harmonic> harmonics;
  double impact_rate = 0.0;     // events per second
  double impact_gain = 0.0;     // click amplitude
  double impact_decay_s = 0.004;  // click envelope time constant
  std::optional<DamageSpec> damage;
  StereoSpread stereo_spread;
};

/// Throws UsageError on out-of-range fields (frequencies >= fs/2, negative
/// gains or rates, absurd tilt or delay).
void validate(const MachineProfile& profile, int sample_rate);

/// Renders `duration_s` seconds of the profile. Fully deterministic for a
/// given (profile, seed); the output is peak-normalized to 0.9. Duration 0
/// yields an empty signal.
StereoSignal generate(const MachineProfile& profile, double duration_s, int sample_rate,
                      std::uint64_t seed);

/// Four normal machine presets (belt, mill, crusher, screen) with distinct
/// comb spacings, tilts and impact behavior, plus one damaged preset that
/// differs from its base (belt) only in the damage field.
std::vector<MachineProfile> preset_profiles();

/// Returns the preset with the given name; throws UsageError if unknown.
MachineProfile preset_by_name(const std::string& name);

/// Line-oriented key=value profile files. `harmonic=freq:gain` may repeat;
/// `damage=squeal:am_rate:gain` is optional; '#' starts a comment.
MachineProfile parse_profile(std::istream& in);
MachineProfile load_profile(const std::filesystem::path& path);
void save_profile(const MachineProfile& profile, const std::filesystem::path& path);

}  // namespace qear

#endif  // QEAR_SYNTHGEN_HPP_
