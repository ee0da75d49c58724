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

#include "qear/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <sstream>

#include "qear/errors.hpp"
#include "qear/rng.hpp"

namespace qear {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Drift of the partial stack: an OU process on the stack's phase, updated
// once per block. Partials inherit it scaled by f/f_ref (capped, so high
// partials stay phase-coherent frame to frame).
constexpr std::size_t kDriftBlock = 64;
constexpr double kDriftTau = 2.0;     // seconds
constexpr double kDriftStd = 0.02;    // radians at the reference partial
constexpr double kDriftScaleCap = 4.0;

// First-order pole/zero section, bilinear-transformed.
struct Shelf {
  double b0 = 1.0, b1 = 0.0, a1 = 0.0;
  double z = 0.0;  // state

  double step(double x) {
    const double y = b0 * x + z;
    z = b1 * x - a1 * y;
    return y;
  }

  std::complex<double> response(double w) const {
    const std::complex<double> zi = std::polar(1.0, -w);
    return (b0 + b1 * zi) / (1.0 + a1 * zi);
  }
};

Shelf make_shelf(double f_zero, double f_pole, double fs) {
  const double wz = 2.0 * kPi * f_zero;
  const double wp = 2.0 * kPi * f_pole;
  const double k = 2.0 * fs;
  const double a0 = k + wp;
  Shelf s;
  s.b0 = (k + wz) / a0;
  s.b1 = (wz - k) / a0;
  s.a1 = (wp - k) / a0;
  return s;
}

// Cascade approximating a constant `tilt` dB/octave slope across the audio
// band, normalized to unity gain at 1 kHz.
std::vector<Shelf> make_tilt_cascade(double tilt, double fs, double* gain_at_1k) {
  std::vector<Shelf> cascade;
  *gain_at_1k = 1.0;
  if (std::abs(tilt) < 1e-9) return cascade;

  const double f_lo = 30.0;
  const double f_hi = 0.45 * fs;
  const double octaves = std::log2(f_hi / f_lo);
  const int sections = 6;
  const double rise_per_section = tilt * octaves / sections;  // dB
  const double span = rise_per_section / 6.0206;              // octaves between zero and pole

  for (int i = 0; i < sections; ++i) {
    const double fc = f_lo * std::pow(2.0, octaves * (i + 0.5) / sections);
    const double fz = std::clamp(fc * std::pow(2.0, -span / 2.0), 1.0, 0.49 * fs);
    const double fp = std::clamp(fc * std::pow(2.0, span / 2.0), 1.0, 0.49 * fs);
    cascade.push_back(make_shelf(fz, fp, fs));
  }

  const double w_ref = 2.0 * kPi * 1000.0 / fs;
  std::complex<double> h(1.0, 0.0);
  for (const Shelf& s : cascade) h *= s.response(w_ref);
  *gain_at_1k = std::abs(h);
  return cascade;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("profile: cannot parse " + what + " from '" + s + "'");
  }
}

}  // namespace

void validate(const MachineProfile& profile, int sample_rate) {
  if (sample_rate <= 0) throw UsageError("profile: sample rate must be positive");
  const double nyquist = sample_rate / 2.0;
  auto check_nonneg = [&](double v, const char* what) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw UsageError("profile '" + profile.name + "': " + what + " must be >= 0");
    }
  };
  check_nonneg(profile.noise_level, "noise_level");
  check_nonneg(profile.impact_rate, "impact_rate");
  check_nonneg(profile.impact_gain, "impact_gain");
  if (!(profile.impact_decay_s > 0.0)) {
    throw UsageError("profile '" + profile.name + "': impact_decay_s must be positive");
  }
  if (std::abs(profile.noise_color) > 12.0) {
    throw UsageError("profile '" + profile.name + "': noise_color outside +-12 dB/octave");
  }
  for (const Harmonic& h : profile.harmonics) {
    check_nonneg(h.gain, "harmonic gain");
    if (!(h.freq_hz > 0.0) || h.freq_hz >= nyquist) {
      throw UsageError("profile '" + profile.name + "': harmonic frequency outside (0, fs/2)");
    }
  }
  if (profile.damage) {
    check_nonneg(profile.damage->gain, "damage gain");
    check_nonneg(profile.damage->am_rate_hz, "damage AM rate");
    if (!(profile.damage->squeal_hz > 0.0) || profile.damage->squeal_hz >= nyquist) {
      throw UsageError("profile '" + profile.name + "': squeal frequency outside (0, fs/2)");
    }
  }
  if (!(profile.stereo_spread.right_gain >= 0.0)) {
    throw UsageError("profile '" + profile.name + "': stereo gain must be >= 0");
  }
  if (profile.stereo_spread.right_delay < 0 ||
      profile.stereo_spread.right_delay > sample_rate / 10) {
    throw UsageError("profile '" + profile.name + "': stereo delay outside [0, fs/10]");
  }
}

StereoSignal generate(const MachineProfile& profile, double duration_s, int sample_rate,
                      std::uint64_t seed) {
  if (duration_s < 0.0) throw UsageError("generate: duration must be >= 0");
  validate(profile, sample_rate);

  StereoSignal out;
  out.sample_rate = sample_rate;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  if (n == 0) return out;

  const auto delay = static_cast<std::size_t>(profile.stereo_spread.right_delay);
  const std::size_t total = n + delay;
  const double fs = sample_rate;

  Rng rng(seed);
  std::vector<double> bed(total, 0.0);

  // (a) tilted noise floor
  if (profile.noise_level > 0.0) {
    for (std::size_t i = 0; i < total; ++i) {
      bed[i] = profile.noise_level * rng.normal();
    }
    double gain_ref = 1.0;
    auto cascade = make_tilt_cascade(profile.noise_color, fs, &gain_ref);
    if (!cascade.empty()) {
      for (std::size_t i = 0; i < total; ++i) {
        double x = bed[i];
        for (Shelf& s : cascade) x = s.step(x);
        bed[i] = x / gain_ref;
      }
    }
  }

  // common drift series, one value per block
  const std::size_t n_blocks = (total + kDriftBlock - 1) / kDriftBlock;
  std::vector<double> drift(n_blocks);
  {
    const double rho = std::exp(-static_cast<double>(kDriftBlock) / (fs * kDriftTau));
    const double sigma = kDriftStd * std::sqrt(1.0 - rho * rho);
    double w = rng.normal(0.0, kDriftStd);
    for (std::size_t b = 0; b < n_blocks; ++b) {
      drift[b] = w;
      w = rho * w + sigma * rng.normal();
    }
  }

  // (b) partial stack: complex oscillators, drift folded in per block
  if (!profile.harmonics.empty()) {
    const double f_ref = profile.harmonics.front().freq_hz;
    const std::size_t n_h = profile.harmonics.size();
    std::vector<std::complex<double>> osc(n_h), rot(n_h);
    std::vector<double> scale(n_h), gain(n_h);
    for (std::size_t h = 0; h < n_h; ++h) {
      const double f = profile.harmonics[h].freq_hz;
      gain[h] = profile.harmonics[h].gain;
      scale[h] = std::min(f / f_ref, kDriftScaleCap);
      rot[h] = std::polar(1.0, 2.0 * kPi * f / fs);
      osc[h] = std::polar(1.0, rng.uniform(0.0, 2.0 * kPi));  // per-recording phase
    }
    double prev_drift = 0.0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
      const double dw = drift[b] - prev_drift;
      prev_drift = drift[b];
      const std::size_t begin = b * kDriftBlock;
      const std::size_t end = std::min(begin + kDriftBlock, total);
      for (std::size_t h = 0; h < n_h; ++h) {
        osc[h] *= std::polar(1.0, scale[h] * dw);
        osc[h] /= std::abs(osc[h]);  // keep the rotation on the unit circle
        std::complex<double> z = osc[h];
        const std::complex<double> r = rot[h];
        const double g = gain[h];
        for (std::size_t i = begin; i < end; ++i) {
          bed[i] += g * z.imag();
          z *= r;
        }
        osc[h] = z;
      }
    }
  }

  // (c) Poisson impact train: exponentially decaying broadband clicks
  if (profile.impact_rate > 0.0 && profile.impact_gain > 0.0) {
    const double tau = profile.impact_decay_s * fs;
    const auto click_len = static_cast<std::size_t>(std::llround(6.0 * tau));
    double t = rng.exponential(profile.impact_rate) * fs;
    while (t < static_cast<double>(total)) {
      const auto start = static_cast<std::size_t>(t);
      const double amp = profile.impact_gain * rng.uniform(0.8, 1.2);
      const std::size_t stop = std::min(start + click_len, total);
      for (std::size_t i = start; i < stop; ++i) {
        bed[i] += amp * std::exp(-static_cast<double>(i - start) / tau) * rng.normal();
      }
      t += rng.exponential(profile.impact_rate) * fs;
    }
  }

  // (d) damage: amplitude modulation of the bed plus an off-comb squeal
  if (profile.damage) {
    const DamageSpec& dmg = *profile.damage;
    const double depth = 0.35 * std::min(1.0, dmg.gain);
    const double am_w = 2.0 * kPi * dmg.am_rate_hz / fs;
    const double sq_w = 2.0 * kPi * dmg.squeal_hz / fs;
    const double sq_phase = rng.uniform(0.0, 2.0 * kPi);
    for (std::size_t i = 0; i < total; ++i) {
      const double am = std::sin(am_w * static_cast<double>(i));
      const double squeal = dmg.gain * (1.0 + 0.8 * am) *
                            std::sin(sq_w * static_cast<double>(i) + sq_phase);
      bed[i] = bed[i] * (1.0 + depth * am) + squeal;
    }
  }

  out.left.resize(n);
  out.right.resize(n);
  const double rg = profile.stereo_spread.right_gain;
  for (std::size_t i = 0; i < n; ++i) {
    out.left[i] = bed[i + delay];
    out.right[i] = rg * bed[i];
  }

  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    peak = std::max(peak, std::max(std::abs(out.left[i]), std::abs(out.right[i])));
  }
  if (peak > 0.0) {
    const double s = 0.9 / peak;
    for (std::size_t i = 0; i < n; ++i) {
      out.left[i] *= s;
      out.right[i] *= s;
    }
  }
  return out;
}

std::vector<MachineProfile> preset_profiles() {
  // Every preset rides a dense comb of partials at multiples of 46.875 Hz
  // (= 48 kHz / 1024): one partial per pair of bins at the default analysis
  // hop, with a fixed frame-to-frame phase relation. The presets differ in
  // spectral envelope (decay and formant band), impact behavior, noise floor
  // and stereo spread.
  constexpr double kBase = 46.875;
  constexpr double kTop = 23900.0;

  auto comb = [](double gain, double decay) {
    std::vector<Harmonic> v;
    for (int h = 1; kBase * h < kTop; ++h) {
      v.push_back({kBase * h, gain * std::pow(static_cast<double>(h), -decay)});
    }
    return v;
  };
  auto boost = [](std::vector<Harmonic>& v, double lo, double hi, double factor) {
    for (Harmonic& h : v) {
      if (h.freq_hz >= lo && h.freq_hz < hi) h.gain *= factor;
    }
  };

  std::vector<MachineProfile> presets;

  MachineProfile belt;
  belt.name = "belt";
  belt.noise_level = 0.0006;
  belt.noise_color = -3.0;
  belt.harmonics = comb(0.55, 0.45);  // low rumble, fast rolloff
  boost(belt.harmonics, 80.0, 400.0, 2.2);
  belt.impact_rate = 1.2;
  belt.impact_gain = 0.5;
  belt.impact_decay_s = 0.004;
  belt.stereo_spread = {0.92, 13};
  presets.push_back(belt);

  MachineProfile mill;
  mill.name = "mill";
  mill.noise_level = 0.0012;
  mill.noise_color = -6.0;
  mill.harmonics = comb(0.5, 0.25);  // grinding mid band
  boost(mill.harmonics, 500.0, 2000.0, 1.8);
  mill.impact_rate = 7.0;
  mill.impact_gain = 0.6;
  mill.impact_decay_s = 0.002;
  mill.stereo_spread = {0.85, 23};
  presets.push_back(mill);

  MachineProfile crusher;
  crusher.name = "crusher";
  crusher.noise_level = 0.0009;
  crusher.noise_color = -2.0;
  crusher.harmonics = comb(0.45, 0.15);  // broadband with a hard upper-mid
  boost(crusher.harmonics, 2000.0, 6000.0, 1.7);
  crusher.impact_rate = 3.0;
  crusher.impact_gain = 1.6;
  crusher.impact_decay_s = 0.008;
  crusher.stereo_spread = {0.8, 31};
  presets.push_back(crusher);

  MachineProfile screen;
  screen.name = "screen";
  screen.noise_level = 0.0007;
  screen.noise_color = -1.0;
  screen.harmonics = comb(0.4, 0.05);  // nearly flat, ringing deck
  boost(screen.harmonics, 6000.0, 16000.0, 1.9);
  screen.impact_rate = 0.5;
  screen.impact_gain = 0.4;
  screen.impact_decay_s = 0.003;
  screen.stereo_spread = {0.95, 7};
  presets.push_back(screen);

  MachineProfile damaged = belt;
  damaged.name = "damaged";
  damaged.damage = DamageSpec{3222.0, 9.0, 0.6};  // off-comb squeal
  presets.push_back(damaged);

  return presets;
}

MachineProfile preset_by_name(const std::string& name) {
  for (MachineProfile& p : preset_profiles()) {
    if (p.name == name) return std::move(p);
  }
  throw UsageError("unknown preset '" + name + "'");
}

MachineProfile parse_profile(std::istream& in) {
  MachineProfile profile;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("profile line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);

    if (key == "name") {
      profile.name = value;
    } else if (key == "noise_level") {
      profile.noise_level = parse_double(value, key);
    } else if (key == "noise_color") {
      profile.noise_color = parse_double(value, key);
    } else if (key == "harmonic") {
      const auto parts = split(value, ':');
      if (parts.size() != 2) throw DataError("profile: harmonic needs freq:gain");
      profile.harmonics.push_back(
          {parse_double(parts[0], "harmonic frequency"), parse_double(parts[1], "harmonic gain")});
    } else if (key == "impact_rate") {
      profile.impact_rate = parse_double(value, key);
    } else if (key == "impact_gain") {
      profile.impact_gain = parse_double(value, key);
    } else if (key == "impact_decay_s") {
      profile.impact_decay_s = parse_double(value, key);
    } else if (key == "damage") {
      const auto parts = split(value, ':');
      if (parts.size() != 3) throw DataError("profile: damage needs squeal:am_rate:gain");
      profile.damage = DamageSpec{parse_double(parts[0], "squeal frequency"),
                                  parse_double(parts[1], "AM rate"),
                                  parse_double(parts[2], "damage gain")};
    } else if (key == "stereo_gain") {
      profile.stereo_spread.right_gain = parse_double(value, key);
    } else if (key == "stereo_delay") {
      profile.stereo_spread.right_delay = static_cast<int>(parse_double(value, key));
    } else {
      throw DataError("profile: unknown key '" + key + "'");
    }
  }
  return profile;
}

MachineProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_profile(in);
}

void save_profile(const MachineProfile& profile, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  char buf[128];
  out << "name=" << profile.name << "\n";
  std::snprintf(buf, sizeof(buf), "noise_level=%.17g\n", profile.noise_level);
  out << buf;
  std::snprintf(buf, sizeof(buf), "noise_color=%.17g\n", profile.noise_color);
  out << buf;
  for (const Harmonic& h : profile.harmonics) {
    std::snprintf(buf, sizeof(buf), "harmonic=%.17g:%.17g\n", h.freq_hz, h.gain);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "impact_rate=%.17g\n", profile.impact_rate);
  out << buf;
  std::snprintf(buf, sizeof(buf), "impact_gain=%.17g\n", profile.impact_gain);
  out << buf;
  std::snprintf(buf, sizeof(buf), "impact_decay_s=%.17g\n", profile.impact_decay_s);
  out << buf;
  if (profile.damage) {
    std::snprintf(buf, sizeof(buf), "damage=%.17g:%.17g:%.17g\n", profile.damage->squeal_hz,
                  profile.damage->am_rate_hz, profile.damage->gain);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "stereo_gain=%.17g\n", profile.stereo_spread.right_gain);
  out << buf;
  out << "stereo_delay=" << profile.stereo_spread.right_delay << "\n";
}

}  // namespace qear
