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

#include "qear/mclt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "qear/errors.hpp"

namespace qear {
namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

// Iterative radix-2 DIT transform, X(k) = sum_n x(n) e^{-2 pi i n k / N}.
// `twiddle[j]` must hold e^{-2 pi i j / N} for j in [0, N/2).
void fft(std::vector<std::complex<double>>& a,
         const std::vector<std::complex<double>>& twiddle) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j |= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t step = n / len;
    const std::size_t half = len / 2;
    for (std::size_t base = 0; base < n; base += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const std::complex<double> w = twiddle[k * step];
        const std::complex<double> u = a[base + k];
        const std::complex<double> v = a[base + k + half] * w;
        a[base + k] = u + v;
        a[base + k + half] = u - v;
      }
    }
  }
}

void put_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  put_bytes(out, b, 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xFFFFFFFFULL));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f64_plane(std::ofstream& out, const std::vector<double>& plane) {
  for (double v : plane) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
  }
}

std::uint32_t take_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("tensor file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t take_u64(std::ifstream& in) {
  const std::uint64_t lo = take_u32(in);
  const std::uint64_t hi = take_u32(in);
  return lo | (hi << 32);
}

void take_f64_plane(std::ifstream& in, std::vector<double>& plane, std::size_t count) {
  plane.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t bits = take_u64(in);
    std::memcpy(&plane[i], &bits, 8);
  }
}

constexpr char kTensorMagic[5] = {'M', 'C', 'L', 'T', '1'};
constexpr char kPlaneTags[4][4] = {
    {'L', 'M', 'A', 'G'}, {'L', 'P', 'H', 'S'}, {'R', 'M', 'A', 'G'}, {'R', 'P', 'H', 'S'}};

}  // namespace

AnalysisConfig AnalysisConfig::make(std::size_t half_frame) {
  AnalysisConfig config;
  config.half_frame = half_frame;
  config.window.resize(2 * half_frame);
  for (std::size_t n = 0; n < 2 * half_frame; ++n) {
    config.window[n] =
        std::sin((static_cast<double>(n) + 0.5) * kPi / (2.0 * static_cast<double>(half_frame)));
  }
  validate(config);
  return config;
}

void validate(const AnalysisConfig& config) {
  const std::size_t m = config.half_frame;
  if (m < 8 || !is_pow2(m)) {
    throw UsageError("analysis half-frame must be a power of two >= 8");
  }
  if (config.window.size() != 2 * m) {
    throw UsageError("window must have 2M values");
  }
  for (std::size_t n = 0; n < m; ++n) {
    const double s = config.window[n] * config.window[n] +
                     config.window[n + m] * config.window[n + m];
    if (std::abs(s - 1.0) > 1e-12) {
      throw UsageError("window fails the overlap condition h(n)^2 + h(n+M)^2 = 1");
    }
  }
}

Mclt::Mclt(AnalysisConfig config) : config_(std::move(config)) {
  validate(config_);
  const std::size_t m = config_.half_frame;
  const std::size_t n2 = 2 * m;
  const double md = static_cast<double>(m);

  fwd_pre_.resize(n2);
  inv_post_.resize(n2);
  const double scale = std::sqrt(2.0 / md);
  for (std::size_t n = 0; n < n2; ++n) {
    const double a = kPi * static_cast<double>(n) / (2.0 * md);
    fwd_pre_[n] = std::polar(1.0, -a);
    // Folds the window, the synthesis constant and both post-rotations:
    // y(n) = Re[ inv_post_[n] * S(n) ].
    const double b = kPi * (2.0 * static_cast<double>(n) + md + 1.0) / (4.0 * md);
    inv_post_[n] = 0.5 * scale * config_.window[n] * std::polar(1.0, b);
  }

  fwd_post_.resize(m);
  inv_pre_.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double c = kPi * (md + 1.0) * (2.0 * static_cast<double>(k) + 1.0) / (4.0 * md);
    fwd_post_[k] = scale * std::polar(1.0, -c);
    inv_pre_[k] = std::polar(1.0, kPi * (md + 1.0) * static_cast<double>(k) / (2.0 * md));
  }

  fft_twiddle_.resize(n2 / 2);
  for (std::size_t j = 0; j < n2 / 2; ++j) {
    fft_twiddle_[j] = std::polar(1.0, -2.0 * kPi * static_cast<double>(j) /
                                          static_cast<double>(n2));
  }
}

std::vector<std::complex<double>> Mclt::forward(std::span<const double> frame) const {
  const std::size_t m = config_.half_frame;
  if (frame.size() != 2 * m) {
    throw UsageError("mclt_forward: frame must be exactly 2M samples");
  }
  std::vector<std::complex<double>> buf(2 * m);
  for (std::size_t n = 0; n < 2 * m; ++n) {
    buf[n] = frame[n] * config_.window[n] * fwd_pre_[n];
  }
  fft(buf, fft_twiddle_);
  std::vector<std::complex<double>> coeffs(m);
  for (std::size_t k = 0; k < m; ++k) {
    coeffs[k] = fwd_post_[k] * buf[k];
  }
  return coeffs;
}

std::vector<double> Mclt::inverse(std::span<const std::complex<double>> coeffs) const {
  const std::size_t m = config_.half_frame;
  if (coeffs.size() != m) {
    throw UsageError("mclt_inverse: expected M coefficients");
  }
  // S(n) = sum_k X'(k) e^{+2 pi i n k / 2M} computed as conj(FFT(conj(X'))).
  std::vector<std::complex<double>> buf(2 * m, std::complex<double>(0.0, 0.0));
  for (std::size_t k = 0; k < m; ++k) {
    buf[k] = std::conj(coeffs[k] * inv_pre_[k]);
  }
  fft(buf, fft_twiddle_);
  std::vector<double> frame(2 * m);
  for (std::size_t n = 0; n < 2 * m; ++n) {
    const std::complex<double> s = std::conj(buf[n]);
    frame[n] = inv_post_[n].real() * s.real() - inv_post_[n].imag() * s.imag();
  }
  return frame;
}

std::vector<std::complex<double>> mclt_forward(std::span<const double> frame,
                                               const AnalysisConfig& config) {
  return Mclt(config).forward(frame);
}

std::vector<double> mclt_inverse(std::span<const std::complex<double>> coeffs,
                                 const AnalysisConfig& config) {
  return Mclt(config).inverse(coeffs);
}

MclTensor analyze(const AudioSegment& segment, const AnalysisConfig& config) {
  const std::size_t len = segment.samples.left.size();
  if (len == 0) throw DataError("analyze: empty segment");
  if (segment.samples.left.size() != segment.samples.right.size()) {
    throw DataError("analyze: channel lengths differ");
  }

  const Mclt mclt(config);
  const std::size_t m = config.half_frame;
  std::size_t padded = ((len + m - 1) / m) * m;
  padded = std::max(padded, 2 * m);  // need at least one full frame
  const std::size_t pad = padded - len;

  MclTensor tensor;
  tensor.bins = m;
  tensor.frames = padded / m - 1;
  tensor.pad_info.original_len = len;
  tensor.pad_info.pad_left = pad / 2;
  tensor.pad_info.pad_right = pad - pad / 2;
  tensor.source_id = segment.source_id;
  tensor.index = segment.index;
  tensor.sample_rate = segment.samples.sample_rate;

  const std::size_t plane_size = tensor.frames * m;
  tensor.left_mag.resize(plane_size);
  tensor.left_phase.resize(plane_size);
  tensor.right_mag.resize(plane_size);
  tensor.right_phase.resize(plane_size);

  std::vector<double> padded_left(padded, 0.0), padded_right(padded, 0.0);
  std::copy(segment.samples.left.begin(), segment.samples.left.end(),
            padded_left.begin() + static_cast<std::ptrdiff_t>(tensor.pad_info.pad_left));
  std::copy(segment.samples.right.begin(), segment.samples.right.end(),
            padded_right.begin() + static_cast<std::ptrdiff_t>(tensor.pad_info.pad_left));

  auto fill = [&](const std::vector<double>& samples, std::vector<double>& mag_plane,
                  std::vector<double>& phase_plane) {
    for (std::size_t t = 0; t < tensor.frames; ++t) {
      const auto coeffs =
          mclt.forward(std::span<const double>(samples.data() + t * m, 2 * m));
      for (std::size_t k = 0; k < m; ++k) {
        const double mag = std::abs(coeffs[k]);
        double phase = 0.0;  // atan2(0, 0) pinned to 0
        if (mag > 0.0) {
          phase = std::atan2(coeffs[k].imag(), coeffs[k].real());
          if (phase <= -kPi) phase += 2.0 * kPi;  // keep phases in (-pi, pi]
        }
        mag_plane[t * m + k] = mag;
        phase_plane[t * m + k] = phase;
      }
    }
  };
  fill(padded_left, tensor.left_mag, tensor.left_phase);
  fill(padded_right, tensor.right_mag, tensor.right_phase);
  return tensor;
}

AudioSegment synthesize(const MclTensor& tensor, const AnalysisConfig& config) {
  const std::size_t m = config.half_frame;
  if (tensor.bins != m) throw DataError("synthesize: tensor bins do not match config");
  const std::size_t plane_size = tensor.frames * tensor.bins;
  if (tensor.left_mag.size() != plane_size || tensor.left_phase.size() != plane_size ||
      tensor.right_mag.size() != plane_size || tensor.right_phase.size() != plane_size) {
    throw DataError("synthesize: plane sizes inconsistent");
  }
  if (tensor.pad_info.padded_len() != (tensor.frames + 1) * m) {
    throw DataError("synthesize: pad_info inconsistent with frame count");
  }

  const Mclt mclt(config);
  const std::size_t padded = tensor.pad_info.padded_len();

  auto render = [&](const std::vector<double>& mag_plane,
                    const std::vector<double>& phase_plane) {
    std::vector<double> out(padded, 0.0);
    std::vector<std::complex<double>> coeffs(m);
    for (std::size_t t = 0; t < tensor.frames; ++t) {
      for (std::size_t k = 0; k < m; ++k) {
        coeffs[k] = std::polar(mag_plane[t * m + k], phase_plane[t * m + k]);
      }
      const auto frame = mclt.inverse(coeffs);
      for (std::size_t n = 0; n < 2 * m; ++n) {
        out[t * m + n] += frame[n];
      }
    }
    return out;
  };

  const auto left = render(tensor.left_mag, tensor.left_phase);
  const auto right = render(tensor.right_mag, tensor.right_phase);

  AudioSegment segment;
  segment.source_id = tensor.source_id;
  segment.index = tensor.index;
  segment.samples.sample_rate = tensor.sample_rate;
  const auto begin = static_cast<std::ptrdiff_t>(tensor.pad_info.pad_left);
  const auto end = begin + static_cast<std::ptrdiff_t>(tensor.pad_info.original_len);
  segment.samples.left.assign(left.begin() + begin, left.begin() + end);
  segment.samples.right.assign(right.begin() + begin, right.begin() + end);
  return segment;
}

void save_tensor(const MclTensor& tensor, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  put_bytes(out, kTensorMagic, 5);
  put_u32(out, static_cast<std::uint32_t>(tensor.bins));
  put_u32(out, static_cast<std::uint32_t>(tensor.frames));
  for (const auto& tag : kPlaneTags) put_bytes(out, tag, 4);
  put_u64(out, tensor.pad_info.original_len);
  put_u32(out, static_cast<std::uint32_t>(tensor.pad_info.pad_left));
  put_u32(out, static_cast<std::uint32_t>(tensor.pad_info.pad_right));
  put_u32(out, static_cast<std::uint32_t>(tensor.sample_rate));
  put_f64_plane(out, tensor.left_mag);
  put_f64_plane(out, tensor.left_phase);
  put_f64_plane(out, tensor.right_mag);
  put_f64_plane(out, tensor.right_phase);
  if (!out) throw DataError("short write to " + path.string());
}

MclTensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kTensorMagic, 5) != 0) {
    throw DataError(path.string() + ": not a tensor dump");
  }
  MclTensor tensor;
  tensor.bins = take_u32(in);
  tensor.frames = take_u32(in);
  for (const auto& expect : kPlaneTags) {
    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, expect, 4) != 0) {
      throw DataError(path.string() + ": unexpected plane order");
    }
  }
  tensor.pad_info.original_len = take_u64(in);
  tensor.pad_info.pad_left = take_u32(in);
  tensor.pad_info.pad_right = take_u32(in);
  tensor.sample_rate = static_cast<int>(take_u32(in));
  const std::size_t plane_size = tensor.frames * tensor.bins;
  take_f64_plane(in, tensor.left_mag, plane_size);
  take_f64_plane(in, tensor.left_phase, plane_size);
  take_f64_plane(in, tensor.right_mag, plane_size);
  take_f64_plane(in, tensor.right_phase, plane_size);
  return tensor;
}

void export_tensor_csv(const MclTensor& tensor, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "frame,bin,left_mag,left_phase,right_mag,right_phase\n";
  char line[256];
  for (std::size_t t = 0; t < tensor.frames; ++t) {
    for (std::size_t k = 0; k < tensor.bins; ++k) {
      const std::size_t i = t * tensor.bins + k;
      std::snprintf(line, sizeof(line), "%zu,%zu,%.17g,%.17g,%.17g,%.17g\n", t, k,
                    tensor.left_mag[i], tensor.left_phase[i], tensor.right_mag[i],
                    tensor.right_phase[i]);
      out << line;
    }
  }
}

}  // namespace qear
