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

#ifndef QEAR_AUDIO_IO_HPP_
#define QEAR_AUDIO_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qear/errors.hpp"

namespace qear {

/// A two-channel recording. Samples are float64 in [-1, 1]; integer PCM is
/// converted at the file boundary and never used internally.
struct StereoSignal {
  int sample_rate = 0;
  std::vector<double> left;
  std::vector<double> right;
  bool from_mono = false;  // single-channel file duplicated into both channels

  std::size_t size() const { return left.size(); }
};

/// A fixed-length cut of a recording. `source_id` identifies the recording it
/// came from; it is carried along for evaluation only and never enters
/// training.
struct AudioSegment {
  std::string source_id;
  int index = 0;
  StereoSignal samples;
};

enum class BitDepth { kPcm16, kPcm24, kFloat32 };

/// Reads a RIFF/WAVE file: PCM 16/24-bit or IEEE float 32-bit, mono or
/// stereo. Mono data is duplicated into both channels (from_mono is set).
/// Integer samples are scaled by the format's full-scale value into [-1, 1].
///
/// Throws MalformedHeaderError, UnsupportedCodecError or TruncatedDataError.
StereoSignal read_wav(const std::filesystem::path& path);

/// Writes a little-endian RIFF/WAVE file at the requested depth. Samples
/// outside [-1, 1] are clipped; the clip count is returned and a warning is
/// logged when it is nonzero.
std::size_t write_wav(const StereoSignal& signal,
                      const std::filesystem::path& path, BitDepth bit_depth);

/// Cuts `signal` into segments of `segment_len` samples spaced `hop` samples
/// apart: floor((len - segment_len)/hop) + 1 of them, or none if the signal
/// is shorter than one segment. The trailing remainder is discarded.
std::vector<AudioSegment> segment_signal(const StereoSignal& signal,
                                         std::size_t segment_len,
                                         std::size_t hop,
                                         const std::string& source_id = "");

}  // namespace qear

#endif  // QEAR_AUDIO_IO_HPP_
