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

#ifndef QEAR_MCLT_HPP_
#define QEAR_MCLT_HPP_

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "qear/audio_io.hpp"

namespace qear {

/// Analysis parameters for the modulated complex lapped transform. Frames are
/// 2M samples long, hopped by M (50% overlap); each frame yields M complex
/// bins. The window must satisfy h(n)^2 + h(n+M)^2 = 1 for n in [0, M) so
/// that overlap-add cancels the time aliasing.
struct AnalysisConfig {
  std::size_t half_frame = 1024;  // M; power of two, >= 8
  std::vector<double> window;     // 2M values

  std::size_t frame_len() const { return 2 * half_frame; }

  /// Sine window sin((n + 0.5) * pi / (2M)); passes the overlap condition
  /// exactly.
  static AnalysisConfig make(std::size_t half_frame = 1024);
};

/// Throws UsageError if M is not a power of two >= 8 or the window fails the
/// overlap condition beyond 1e-12.
void validate(const AnalysisConfig& config);

/// How a segment was padded before analysis, so synthesis can undo it.
struct PadInfo {
  std::size_t original_len = 0;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;

  std::size_t padded_len() const { return original_len + pad_left + pad_right; }
};

/// Per-segment stack of four time-frequency planes (T frames by M bins):
/// left/right magnitude and phase. Magnitudes are >= 0, phases in (-pi, pi]
/// with phase 0 at zero magnitude.
struct MclTensor {
  std::size_t frames = 0;  // T
  std::size_t bins = 0;    // M
  std::vector<double> left_mag;
  std::vector<double> left_phase;
  std::vector<double> right_mag;
  std::vector<double> right_phase;
  PadInfo pad_info;

  // Carried through the pipeline; not used for analysis.
  std::string source_id;
  int index = 0;
  int sample_rate = 0;

  double& at(std::vector<double>& plane, std::size_t t, std::size_t k) {
    return plane[t * bins + k];
  }
  double at(const std::vector<double>& plane, std::size_t t, std::size_t k) const {
    return plane[t * bins + k];
  }
};

/// Reusable transform for one config; precomputes twiddle tables. const
/// methods are thread-safe, so frames of one segment may be processed in
/// parallel.
class Mclt {
 public:
  explicit Mclt(AnalysisConfig config);

  /// X(k) = sum_n x(n) h(n) sqrt(2/M) [cos(t) - i sin(t)],
  /// t = (n + (M+1)/2)(k + 1/2) pi / M, for k in [0, M). Frame must be 2M
  /// samples.
  std::vector<std::complex<double>> forward(std::span<const double> frame) const;

  /// Windowed synthesis frame whose overlap-add at hop M reconstructs the
  /// input; an isolated frame comes back as h(n)^2 x(n).
  std::vector<double> inverse(std::span<const std::complex<double>> coeffs) const;

  const AnalysisConfig& config() const { return config_; }

 private:
  AnalysisConfig config_;
  std::vector<std::complex<double>> fwd_pre_;    // e^{-i pi n / (2M)}, n in [0, 2M)
  std::vector<std::complex<double>> fwd_post_;   // sqrt(2/M) e^{-i pi (M+1)(2k+1)/(4M)}
  std::vector<std::complex<double>> inv_pre_;    // e^{+i pi (M+1) k / (2M)}
  std::vector<std::complex<double>> inv_post_;   // (1/2) sqrt(2/M) e^{+i pi (n/(2M) + (M+1)/(4M)) ...}
  std::vector<std::complex<double>> fft_twiddle_;
};

/// One-shot helpers around Mclt.
std::vector<std::complex<double>> mclt_forward(std::span<const double> frame,
                                               const AnalysisConfig& config);
std::vector<double> mclt_inverse(std::span<const std::complex<double>> coeffs,
                                 const AnalysisConfig& config);

/// Zero-pads the segment symmetrically to the next multiple of M admitting at
/// least one full frame, transforms every 2M frame at hop M, and converts to
/// magnitude/phase per channel. A 31,994-sample segment at M = 1024 pads to
/// 32,768 samples and yields T = 31 frames.
MclTensor analyze(const AudioSegment& segment, const AnalysisConfig& config);

/// Rebuilds complex coefficients from magnitude/phase, inverse-transforms
/// each frame, overlap-adds at hop M and strips the recorded padding.
AudioSegment synthesize(const MclTensor& tensor, const AnalysisConfig& config);

/// Flat binary dump: magic "MCLT1", u32 M, u32 T, four 4-byte plane tags in
/// file order, u64 original length, u32 pad_left, u32 pad_right, u32 sample
/// rate, then the planes as little-endian float64, each T*M row-major.
void save_tensor(const MclTensor& tensor, const std::filesystem::path& path);
MclTensor load_tensor(const std::filesystem::path& path);

/// CSV export (frame, bin, left_mag, left_phase, right_mag, right_phase) for
/// plotting the planes.
void export_tensor_csv(const MclTensor& tensor, const std::filesystem::path& path);

}  // namespace qear

#endif  // QEAR_MCLT_HPP_
