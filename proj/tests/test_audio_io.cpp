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

#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "qear/errors.hpp"
#include "qear/rng.hpp"

namespace qear {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const char* name) {
  const fs::path dir = fs::temp_directory_path() / "qear_test_audio";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<unsigned char> file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

// Offset of the data payload in the canonical 44-byte header layout written
// by write_wav.
constexpr std::size_t kDataOffset = 44;

StereoSignal make_signal(std::size_t n, int rate = 48000) {
  StereoSignal s;
  s.sample_rate = rate;
  s.left.resize(n, 0.0);
  s.right.resize(n, 0.0);
  return s;
}

// Minimal mono 16-bit file, hand-assembled.
std::vector<unsigned char> mono16_wav(const std::vector<std::int16_t>& samples,
                                      std::uint32_t rate) {
  std::vector<unsigned char> b;
  auto u16 = [&](std::uint16_t v) {
    b.push_back(v & 0xFF);
    b.push_back((v >> 8) & 0xFF);
  };
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xFF);
  };
  auto tag = [&](const char* t) { b.insert(b.end(), t, t + 4); };
  const std::uint32_t data_size = 2 * static_cast<std::uint32_t>(samples.size());
  tag("RIFF");
  u32(36 + data_size);
  tag("WAVE");
  tag("fmt ");
  u32(16);
  u16(1);  // PCM
  u16(1);  // mono
  u32(rate);
  u32(rate * 2);
  u16(2);
  u16(16);
  tag("data");
  u32(data_size);
  for (std::int16_t s : samples) u16(static_cast<std::uint16_t>(s));
  return b;
}

}  // namespace

TEST_CASE("wav: silence round-trips as all-zero bytes at 24-bit") {
  auto s = make_signal(10);
  const auto path = temp_file("zeros24.wav");
  CHECK(write_wav(s, path, BitDepth::kPcm24) == 0);

  const auto bytes = file_bytes(path);
  REQUIRE(bytes.size() == kDataOffset + 10 * 2 * 3);
  for (std::size_t i = kDataOffset; i < bytes.size(); ++i) CHECK(bytes[i] == 0);

  const StereoSignal back = read_wav(path);
  CHECK(back.sample_rate == 48000);
  REQUIRE(back.left.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(back.left[i] == 0.0);
    CHECK(back.right[i] == 0.0);
  }
}

TEST_CASE("wav: full-scale 1.0 maps to 2^23 - 1 at 24-bit") {
  auto s = make_signal(1);
  s.left[0] = 1.0;
  s.right[0] = -1.0;
  const auto path = temp_file("fullscale24.wav");
  CHECK(write_wav(s, path, BitDepth::kPcm24) == 0);

  const auto bytes = file_bytes(path);
  const auto v = static_cast<std::int32_t>(
                     (static_cast<std::uint32_t>(bytes[kDataOffset]) << 8) |
                     (static_cast<std::uint32_t>(bytes[kDataOffset + 1]) << 16) |
                     (static_cast<std::uint32_t>(bytes[kDataOffset + 2]) << 24)) >>
                 8;
  CHECK(v == 8388607);  // 2^23 - 1
  const auto w = static_cast<std::int32_t>(
                     (static_cast<std::uint32_t>(bytes[kDataOffset + 3]) << 8) |
                     (static_cast<std::uint32_t>(bytes[kDataOffset + 4]) << 16) |
                     (static_cast<std::uint32_t>(bytes[kDataOffset + 5]) << 24)) >>
                 8;
  CHECK(w == -8388608);
}

TEST_CASE("wav: random signal round-trips within the quantization bound") {
  Rng rng(7);
  auto s = make_signal(2048, 44100);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s.left[i] = rng.uniform(-1.0, 1.0);
    s.right[i] = rng.uniform(-1.0, 1.0);
  }

  struct Case {
    BitDepth depth;
    double bound;
    const char* name;
  };
  for (const Case& c : {Case{BitDepth::kPcm24, 0x1.0p-23, "rt24.wav"},
                        Case{BitDepth::kPcm16, 0x1.0p-15, "rt16.wav"},
                        Case{BitDepth::kFloat32, 0x1.0p-23, "rt32f.wav"}}) {
    const auto path = temp_file(c.name);
    CHECK(write_wav(s, path, c.depth) == 0);
    const StereoSignal back = read_wav(path);
    CHECK(back.sample_rate == 44100);
    REQUIRE(back.left.size() == s.left.size());
    double max_err = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      max_err = std::max(max_err, std::abs(back.left[i] - s.left[i]));
      max_err = std::max(max_err, std::abs(back.right[i] - s.right[i]));
    }
    INFO(c.name);
    CHECK(max_err <= c.bound);
  }
}

TEST_CASE("wav: sample rate comes from the header") {
  auto s = make_signal(16, 48000);
  const auto path = temp_file("rate.wav");
  write_wav(s, path, BitDepth::kPcm16);
  CHECK(read_wav(path).sample_rate == 48000);
}

TEST_CASE("wav: out-of-range samples are clipped and counted") {
  auto s = make_signal(4);
  s.left = {1.5, 0.0, -2.0, 0.5};
  s.right = {0.0, 0.0, 0.0, 0.0};
  const auto path = temp_file("clip.wav");
  CHECK(write_wav(s, path, BitDepth::kPcm24) == 2);
  const StereoSignal back = read_wav(path);
  CHECK(back.left[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(back.left[2] == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("wav: mono input is duplicated into both channels") {
  const auto path = temp_file("mono.wav");
  write_bytes(path, mono16_wav({1000, -1000, 0, 16384}, 48000));
  const StereoSignal s = read_wav(path);
  CHECK(s.from_mono);
  REQUIRE(s.left.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(s.left[i] == s.right[i]);
  CHECK(s.left[3] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("wav: malformed header, unsupported codec and truncation are distinct") {
  const auto path = temp_file("bad.wav");

  SUBCASE("not RIFF") {
    write_bytes(path, {'R', 'I', 'F', 'X', 0, 0, 0, 0, 'W', 'A', 'V', 'E'});
    CHECK_THROWS_AS(read_wav(path), MalformedHeaderError);
  }
  SUBCASE("missing chunks") {
    write_bytes(path, {'R', 'I', 'F', 'F', 4, 0, 0, 0, 'W', 'A', 'V', 'E'});
    CHECK_THROWS_AS(read_wav(path), MalformedHeaderError);
  }
  SUBCASE("ADPCM codec rejected") {
    auto bytes = mono16_wav({0, 0}, 48000);
    bytes[20] = 0x02;  // format tag -> ADPCM
    write_bytes(path, bytes);
    CHECK_THROWS_AS(read_wav(path), UnsupportedCodecError);
  }
  SUBCASE("three channels rejected") {
    auto bytes = mono16_wav({0, 0}, 48000);
    bytes[22] = 3;
    write_bytes(path, bytes);
    CHECK_THROWS_AS(read_wav(path), UnsupportedCodecError);
  }
  SUBCASE("truncated data chunk") {
    auto bytes = mono16_wav({1, 2, 3, 4}, 48000);
    bytes.resize(bytes.size() - 3);  // data smaller than declared
    write_bytes(path, bytes);
    CHECK_THROWS_AS(read_wav(path), TruncatedDataError);
  }
}

TEST_CASE("segment_signal: counts match the closed form") {
  SUBCASE("three full segments, no remainder") {
    auto s = make_signal(95982);  // 3 x 31994
    const auto segs = segment_signal(s, 31994, 31994, "rec");
    REQUIRE(segs.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(segs[i].index == static_cast<int>(i));
      CHECK(segs[i].source_id == "rec");
      CHECK(segs[i].samples.left.size() == 31994);
    }
  }
  SUBCASE("short input yields empty list") {
    auto s = make_signal(31993);
    CHECK(segment_signal(s, 31994, 31994).empty());
  }
  SUBCASE("half-hop tiling") {
    const std::size_t len = 512;  // 2L with L = 256
    auto s = make_signal(len);
    for (std::size_t i = 0; i < len; ++i) s.left[i] = static_cast<double>(i);
    s.right = s.left;
    const auto segs = segment_signal(s, 256, 128, "t");
    REQUIRE(segs.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t i = 0; i < 256; ++i) {
        CHECK(segs[k].samples.left[i] == static_cast<double>(k * 128 + i));
      }
    }
  }
}

TEST_CASE("segment_signal: randomized property against the formula") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const auto len = static_cast<std::size_t>(rng.uniform_int(5000));
    const auto seg = static_cast<std::size_t>(1 + rng.uniform_int(800));
    const auto hop = static_cast<std::size_t>(1 + rng.uniform_int(800));
    auto s = make_signal(len);
    const auto segs = segment_signal(s, seg, hop);
    const std::size_t expected = len < seg ? 0 : (len - seg) / hop + 1;
    CHECK(segs.size() == expected);
    if (!segs.empty()) {
      // never reads past the input
      CHECK((segs.size() - 1) * hop + seg <= len);
    }
  }
}

TEST_CASE("segment_signal: rejects zero segment length or hop") {
  auto s = make_signal(100);
  CHECK_THROWS_AS(segment_signal(s, 0, 1), UsageError);
  CHECK_THROWS_AS(segment_signal(s, 10, 0), UsageError);
}

}  // namespace qear
