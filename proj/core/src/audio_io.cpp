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

#include "qear/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

namespace qear {
namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatIeeeFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
  out.push_back(static_cast<unsigned char>((v >> 24) & 0xFF));
}

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
};

double sample_from_bytes(const unsigned char* p, const FmtChunk& fmt) {
  if (fmt.format == kFormatIeeeFloat) {
    float f;
    std::memcpy(&f, p, 4);
    return static_cast<double>(f);
  }
  if (fmt.bits_per_sample == 16) {
    const auto v = static_cast<std::int16_t>(get_u16(p));
    return static_cast<double>(v) / 32768.0;
  }
  // 24-bit: sign-extend through a shifted 32-bit value.
  const std::int32_t v =
      static_cast<std::int32_t>((static_cast<std::uint32_t>(p[0]) << 8) |
                                (static_cast<std::uint32_t>(p[1]) << 16) |
                                (static_cast<std::uint32_t>(p[2]) << 24)) >>
      8;
  return static_cast<double>(v) / 8388608.0;
}

}  // namespace

StereoSignal read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());

  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw MalformedHeaderError(path.string() + ": not a RIFF/WAVE file");
  }

  FmtChunk fmt;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    char id[4];
    std::memcpy(id, bytes.data() + pos, 4);
    const std::uint32_t chunk_size = get_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;

    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (chunk_size < 16 || body + 16 > bytes.size()) {
        throw MalformedHeaderError(path.string() + ": fmt chunk too short");
      }
      const unsigned char* f = bytes.data() + body;
      fmt.format = get_u16(f);
      fmt.channels = get_u16(f + 2);
      fmt.sample_rate = get_u32(f + 4);
      fmt.bits_per_sample = get_u16(f + 14);
      if (fmt.format == kFormatExtensible) {
        // Resolve the real format from the sub-format GUID's leading bytes.
        if (chunk_size < 40 || body + 40 > bytes.size()) {
          throw MalformedHeaderError(path.string() + ": extensible fmt chunk too short");
        }
        fmt.format = get_u16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (body + chunk_size > bytes.size()) {
        throw TruncatedDataError(path.string() + ": data chunk declares " +
                                 std::to_string(chunk_size) + " bytes, file has " +
                                 std::to_string(bytes.size() - body));
      }
      data = bytes.data() + body;
      data_size = chunk_size;
    }
    pos = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
  }

  if (!have_fmt) throw MalformedHeaderError(path.string() + ": missing fmt chunk");
  if (data == nullptr) throw MalformedHeaderError(path.string() + ": missing data chunk");

  const bool pcm_ok = fmt.format == kFormatPcm &&
                      (fmt.bits_per_sample == 16 || fmt.bits_per_sample == 24);
  const bool float_ok = fmt.format == kFormatIeeeFloat && fmt.bits_per_sample == 32;
  if (!pcm_ok && !float_ok) {
    throw UnsupportedCodecError(path.string() + ": unsupported codec (format tag " +
                                std::to_string(fmt.format) + ", " +
                                std::to_string(fmt.bits_per_sample) + " bits)");
  }
  if (fmt.channels != 1 && fmt.channels != 2) {
    throw UnsupportedCodecError(path.string() + ": unsupported channel count " +
                                std::to_string(fmt.channels));
  }
  if (fmt.sample_rate == 0) {
    throw MalformedHeaderError(path.string() + ": zero sample rate");
  }

  const std::size_t bytes_per_sample = fmt.bits_per_sample / 8;
  const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
  const std::size_t n_frames = data_size / frame_bytes;

  StereoSignal out;
  out.sample_rate = static_cast<int>(fmt.sample_rate);
  out.from_mono = fmt.channels == 1;
  out.left.resize(n_frames);
  out.right.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    const unsigned char* p = data + i * frame_bytes;
    const double l = sample_from_bytes(p, fmt);
    const double r = fmt.channels == 2 ? sample_from_bytes(p + bytes_per_sample, fmt) : l;
    out.left[i] = l;
    out.right[i] = r;
  }
  return out;
}

std::size_t write_wav(const StereoSignal& signal, const std::filesystem::path& path,
                      BitDepth bit_depth) {
  if (signal.left.size() != signal.right.size()) {
    throw DataError("write_wav: channel lengths differ");
  }
  if (signal.sample_rate <= 0) throw DataError("write_wav: sample rate must be positive");

  const std::uint16_t channels = 2;
  std::uint16_t bits = 0;
  std::uint16_t format = kFormatPcm;
  switch (bit_depth) {
    case BitDepth::kPcm16: bits = 16; break;
    case BitDepth::kPcm24: bits = 24; break;
    case BitDepth::kFloat32: bits = 32; format = kFormatIeeeFloat; break;
    default: throw UsageError("write_wav: invalid bit depth");
  }

  const std::size_t n = signal.left.size();
  const std::size_t frame_bytes = (bits / 8) * channels;
  const std::uint32_t data_size = static_cast<std::uint32_t>(n * frame_bytes);

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E'});
  out.insert(out.end(), {'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, channels);
  put_u32(out, static_cast<std::uint32_t>(signal.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(signal.sample_rate) * frame_bytes);
  put_u16(out, static_cast<std::uint16_t>(frame_bytes));
  put_u16(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_size);

  std::size_t clipped = 0;
  auto emit = [&](double x) {
    if (x < -1.0 || x > 1.0) {
      ++clipped;
      x = std::clamp(x, -1.0, 1.0);
    }
    if (bit_depth == BitDepth::kFloat32) {
      const float f = static_cast<float>(x);
      unsigned char b[4];
      std::memcpy(b, &f, 4);
      out.insert(out.end(), b, b + 4);
    } else if (bit_depth == BitDepth::kPcm16) {
      const auto v = static_cast<std::int32_t>(
          std::clamp(std::llround(x * 32768.0), -32768LL, 32767LL));
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
    } else {
      const auto v = static_cast<std::int32_t>(
          std::clamp(std::llround(x * 8388608.0), -8388608LL, 8388607LL));
      out.push_back(static_cast<unsigned char>(v & 0xFF));
      out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
      out.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
    }
  };
  for (std::size_t i = 0; i < n; ++i) {
    emit(signal.left[i]);
    emit(signal.right[i]);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("short write to " + path.string());

  if (clipped > 0) {
    std::fprintf(stderr, "[qear] warning: %zu sample(s) clipped writing %s\n", clipped,
                 path.string().c_str());
  }
  return clipped;
}

std::vector<AudioSegment> segment_signal(const StereoSignal& signal,
                                         std::size_t segment_len, std::size_t hop,
                                         const std::string& source_id) {
  if (segment_len == 0) throw UsageError("segment_signal: segment_len must be positive");
  if (hop == 0) throw UsageError("segment_signal: hop must be positive");
  if (signal.left.size() != signal.right.size()) {
    throw DataError("segment_signal: channel lengths differ");
  }

  std::vector<AudioSegment> segments;
  const std::size_t n = signal.left.size();
  if (n < segment_len) return segments;

  const std::size_t count = (n - segment_len) / hop + 1;
  segments.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t start = i * hop;
    AudioSegment seg;
    seg.source_id = source_id;
    seg.index = static_cast<int>(i);
    seg.samples.sample_rate = signal.sample_rate;
    seg.samples.from_mono = signal.from_mono;
    seg.samples.left.assign(signal.left.begin() + start,
                            signal.left.begin() + start + segment_len);
    seg.samples.right.assign(signal.right.begin() + start,
                             signal.right.begin() + start + segment_len);
    segments.push_back(std::move(seg));
  }
  return segments;
}

}  // namespace qear
