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

#ifndef QEAR_TOOLS_COMMANDS_HPP_
#define QEAR_TOOLS_COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qear/vae.hpp"

namespace qear::cli {

namespace fs = std::filesystem;

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

struct AnalysisOptions {
  std::size_t segment_len = 31994;
  std::size_t hop = 0;  // 0: same as segment_len
  std::size_t mclt_m = 1024;

  std::size_t resolved_hop() const { return hop == 0 ? segment_len : hop; }
};

struct SynthOptions {
  fs::path out_dir;
  std::vector<std::string> presets;   // names, or the single entry "all"
  std::vector<fs::path> profile_files;
  int per_profile = 3;
  double duration = 20.0;
  int sample_rate = 48000;
  std::string bit_depth = "24";
  std::uint64_t seed = 1234;
  std::string resolved_config;
};

struct TrainOptions {
  fs::path corpus;
  fs::path out_dir;
  AnalysisOptions analysis;
  TrainingConfig config;
  std::string resolved_config;
};

struct EvalOptions {
  std::vector<fs::path> models;
  fs::path corpus;
  fs::path out_dir;
  AnalysisOptions analysis;
  std::string resolved_config;
};

struct ProjectOptions {
  fs::path model;
  fs::path corpus;
  fs::path anomaly_dir;  // optional
  fs::path out_dir;
  std::string method = "both";            // pca | tsne | both
  std::string granularity = "segment";    // segment | frame
  double perplexity = 30.0;
  int iterations = 1000;
  std::uint64_t seed = 1234;
  AnalysisOptions analysis;
  std::string resolved_config;
};

struct ScoreOptions {
  fs::path model;
  fs::path reference;
  fs::path target;       // optional; defaults to the reference corpus
  fs::path anomaly_dir;  // optional
  fs::path out_dir;
  AnalysisOptions analysis;
  std::string resolved_config;
};

int cmd_synth(const SynthOptions& options);
int cmd_train(const TrainOptions& options);
int cmd_eval(const EvalOptions& options);
int cmd_project(const ProjectOptions& options);
int cmd_score(const ScoreOptions& options);

// Shared corpus plumbing. A corpus directory either carries a manifest.csv
// (path,profile,seed; paths relative to the directory) or is scanned for
// *.wav files; either way the file order is deterministic.
std::vector<fs::path> list_corpus(const fs::path& dir);
std::vector<AudioSegment> load_segments(const fs::path& dir, const AnalysisOptions& analysis);

}  // namespace qear::cli

#endif  // QEAR_TOOLS_COMMANDS_HPP_
