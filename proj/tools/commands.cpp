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

#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "qear/anomaly.hpp"
#include "qear/audio_io.hpp"
#include "qear/errors.hpp"
#include "qear/latent_analysis.hpp"
#include "qear/metrics.hpp"
#include "qear/synthgen.hpp"

namespace qear::cli {
namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << text;
}

void write_resolved_config(const fs::path& out_dir, const std::string& resolved) {
  write_text(out_dir / "run_config.ini", resolved);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

BitDepth parse_bit_depth(const std::string& s) {
  if (s == "16") return BitDepth::kPcm16;
  if (s == "24") return BitDepth::kPcm24;
  if (s == "32f") return BitDepth::kFloat32;
  throw UsageError("invalid bit depth '" + s + "' (expected 16, 24 or 32f)");
}

std::vector<MachineProfile> resolve_profiles(const SynthOptions& options) {
  std::vector<MachineProfile> profiles;
  for (const std::string& name : options.presets) {
    if (name == "all") {
      for (auto& p : preset_profiles()) profiles.push_back(std::move(p));
    } else {
      profiles.push_back(preset_by_name(name));
    }
  }
  for (const fs::path& file : options.profile_files) {
    profiles.push_back(load_profile(file));
  }
  if (profiles.empty()) {
    throw UsageError("synth: no profiles selected (use --preset or --profile)");
  }
  return profiles;
}

ModelParams load_model_checked(const fs::path& path, const AnalysisOptions& analysis) {
  ModelParams params = load_model(path);
  if (params.input_dim != static_cast<int>(4 * analysis.mclt_m)) {
    throw DataError("model " + path.string() + " was trained with M = " +
                    std::to_string(params.input_dim / 4) + ", but --mclt-m is " +
                    std::to_string(analysis.mclt_m));
  }
  return params;
}

}  // namespace

std::vector<fs::path> list_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("corpus directory not found: " + dir.string());

  std::vector<fs::path> files;
  const fs::path manifest = dir / "manifest.csv";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    if (!in) throw DataError("cannot open " + manifest.string());
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto comma = line.find(',');
      files.push_back(dir / line.substr(0, comma));
    }
  } else {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".wav") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw DataError("no recordings found in " + dir.string());
  return files;
}

std::vector<AudioSegment> load_segments(const fs::path& dir, const AnalysisOptions& analysis) {
  std::vector<AudioSegment> segments;
  for (const fs::path& file : list_corpus(dir)) {
    const StereoSignal signal = read_wav(file);
    auto segs = segment_signal(signal, analysis.segment_len, analysis.resolved_hop(),
                               file.stem().string());
    segments.insert(segments.end(), std::make_move_iterator(segs.begin()),
                    std::make_move_iterator(segs.end()));
  }
  if (segments.empty()) {
    throw DataError("corpus " + dir.string() + " yields no full segments of " +
                    std::to_string(analysis.segment_len) + " samples");
  }
  return segments;
}

int cmd_synth(const SynthOptions& options) {
  if (!(options.duration > 0.0)) {
    throw UsageError("synth: --duration must be positive (empty files are useless)");
  }
  if (options.per_profile < 1) throw UsageError("synth: --per-profile must be >= 1");
  const BitDepth depth = parse_bit_depth(options.bit_depth);
  const auto profiles = resolve_profiles(options);

  fs::create_directories(options.out_dir);
  std::ostringstream manifest;
  manifest << "path,profile,seed\n";

  std::uint64_t counter = 0;
  for (const MachineProfile& profile : profiles) {
    validate(profile, options.sample_rate);
    for (int i = 0; i < options.per_profile; ++i, ++counter) {
      const std::uint64_t seed = options.seed + counter;
      const StereoSignal signal =
          generate(profile, options.duration, options.sample_rate, seed);
      char name[128];
      std::snprintf(name, sizeof(name), "%s_%02d.wav", profile.name.c_str(), i);
      write_wav(signal, options.out_dir / name, depth);
      manifest << name << "," << profile.name << "," << seed << "\n";
    }
  }
  write_text(options.out_dir / "manifest.csv", manifest.str());
  write_resolved_config(options.out_dir, options.resolved_config);
  std::printf("synth: wrote %llu recordings to %s\n",
              static_cast<unsigned long long>(counter), options.out_dir.string().c_str());
  return kExitOk;
}

int cmd_train(const TrainOptions& options) {
  const auto segments = load_segments(options.corpus, options.analysis);
  const AnalysisConfig analysis = AnalysisConfig::make(options.analysis.mclt_m);

  std::vector<MclTensor> tensors;
  tensors.reserve(segments.size());
  for (const AudioSegment& seg : segments) tensors.push_back(analyze(seg, analysis));
  const CorpusStats stats = fit_stats(tensors);

  std::vector<FeatureFrame> dataset;
  for (const MclTensor& t : tensors) {
    for (FeatureFrame& f : to_features(t, stats)) dataset.push_back(std::move(f));
  }
  std::printf("train: %zu segments, %zu frames, input dim %zu\n", segments.size(),
              dataset.size(), 4 * options.analysis.mclt_m);

  const TrainResult result = train(dataset, options.config, stats);

  fs::create_directories(options.out_dir);
  save_model(result.params, options.out_dir / "model.qvae");
  save_loss_csv(result.curve, options.out_dir / "loss.csv");
  write_resolved_config(options.out_dir, options.resolved_config);

  const LossRecord& last = result.curve.back();
  std::printf("train: stopped after epoch %d, total %.6g (mse %.6g, kl %.6g)\n", last.epoch,
              last.mean_total, last.mean_mse, last.mean_kl);
  return kExitOk;
}

int cmd_eval(const EvalOptions& options) {
  const auto segments = load_segments(options.corpus, options.analysis);
  const AnalysisConfig analysis = AnalysisConfig::make(options.analysis.mclt_m);

  fs::create_directories(options.out_dir);
  std::ostringstream per_segment;
  per_segment << "model,source_id,index,mse,lsd\n";
  std::ostringstream summary;
  summary << "model,statistic,mse,lsd\n";

  for (const fs::path& model_path : options.models) {
    const ModelParams params = load_model_checked(model_path, options.analysis);
    const std::string model_name = model_path.stem().string();

    std::vector<double> mses, lsds;
    for (const AudioSegment& seg : segments) {
      const auto [audio, frame_mse] = reconstruct_segment(params, seg, analysis);
      double mse = 0.0;
      for (double v : frame_mse) mse += v;
      mse /= static_cast<double>(frame_mse.size());
      const double lsd = log_spectral_distance(seg.samples, audio.samples, analysis);
      mses.push_back(mse);
      lsds.push_back(lsd);
      per_segment << model_name << "," << seg.source_id << "," << seg.index << ","
                  << fmt(mse) << "," << fmt(lsd) << "\n";
    }

    auto mean_of = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return s / static_cast<double>(v.size());
    };
    auto variance_of = [&](const std::vector<double>& v, double mean) {
      if (v.size() < 2) return 0.0;
      double s = 0.0;
      for (double x : v) s += (x - mean) * (x - mean);
      return s / static_cast<double>(v.size() - 1);
    };
    const double mse_mean = mean_of(mses);
    const double lsd_mean = mean_of(lsds);
    summary << model_name << ",mean," << fmt(mse_mean) << "," << fmt(lsd_mean) << "\n";
    summary << model_name << ",variance," << fmt(variance_of(mses, mse_mean)) << ","
            << fmt(variance_of(lsds, lsd_mean)) << "\n";
    std::printf("eval: %s mean mse %.6g, mean lsd %.4f dB over %zu segments\n",
                model_name.c_str(), mse_mean, lsd_mean, segments.size());
  }

  write_text(options.out_dir / "eval_segments.csv", per_segment.str());
  write_text(options.out_dir / "eval_summary.csv", summary.str());
  write_resolved_config(options.out_dir, options.resolved_config);
  return kExitOk;
}

int cmd_project(const ProjectOptions& options) {
  if (options.method != "pca" && options.method != "tsne" && options.method != "both") {
    throw UsageError("project: --method must be pca, tsne or both");
  }
  const Granularity granularity = [&] {
    if (options.granularity == "segment") return Granularity::kSegment;
    if (options.granularity == "frame") return Granularity::kFrame;
    throw UsageError("project: --granularity must be segment or frame");
  }();

  const ModelParams params = load_model_checked(options.model, options.analysis);
  const AnalysisConfig analysis = AnalysisConfig::make(options.analysis.mclt_m);

  auto points = embed_corpus(params, load_segments(options.corpus, options.analysis),
                             granularity, analysis);
  if (!options.anomaly_dir.empty()) {
    auto extra = embed_corpus(params, load_segments(options.anomaly_dir, options.analysis),
                              granularity, analysis);
    for (LatentPoint& p : extra) p.is_anomaly = true;
    points.insert(points.end(), std::make_move_iterator(extra.begin()),
                  std::make_move_iterator(extra.end()));
  }

  fs::create_directories(options.out_dir);
  if (options.method == "pca" || options.method == "both") {
    const Projection2D proj = pca2(points);
    save_projection_csv(proj, points, options.out_dir / "projection_pca.csv");
    std::printf("project: pca explained variance %.3f + %.3f over %zu points\n",
                proj.explained_variance[0], proj.explained_variance[1], points.size());
  }
  if (options.method == "tsne" || options.method == "both") {
    TsneOptions tsne_options;
    tsne_options.perplexity = options.perplexity;
    tsne_options.iterations = options.iterations;
    tsne_options.seed = options.seed;
    const Projection2D proj = tsne2(points, tsne_options);
    save_projection_csv(proj, points, options.out_dir / "projection_tsne.csv");
    std::printf("project: tsne final objective %.4f over %zu points\n",
                proj.final_objective, points.size());
  }
  write_resolved_config(options.out_dir, options.resolved_config);
  return kExitOk;
}

int cmd_score(const ScoreOptions& options) {
  const ModelParams params = load_model_checked(options.model, options.analysis);
  const AnalysisConfig analysis = AnalysisConfig::make(options.analysis.mclt_m);

  const auto reference_segments = load_segments(options.reference, options.analysis);
  const ReferenceStats ref = fit_reference(params, reference_segments, analysis);

  const auto target_segments = options.target.empty()
                                   ? reference_segments
                                   : load_segments(options.target, options.analysis);

  std::vector<AnomalyScore> normal_scores, anomaly_scores;
  for (const AudioSegment& seg : target_segments) {
    normal_scores.push_back(score_segment(params, ref, seg, analysis));
  }
  if (!options.anomaly_dir.empty()) {
    for (const AudioSegment& seg : load_segments(options.anomaly_dir, options.analysis)) {
      anomaly_scores.push_back(score_segment(params, ref, seg, analysis));
    }
  }

  nlohmann::ordered_json report;
  auto add_scores = [&report](const std::vector<AnomalyScore>& scores, bool flagged) {
    for (const AnomalyScore& s : scores) {
      report["segments"].push_back({{"source_id", s.source_id},
                                    {"index", s.index},
                                    {"recon_mse", s.recon_mse},
                                    {"mahalanobis", s.mahalanobis},
                                    {"flags",
                                     {{"recon_above_p99", s.recon_above_p99},
                                      {"mahal_above_p99", s.mahal_above_p99},
                                      {"is_anomaly_set", flagged}}}});
    }
  };
  add_scores(normal_scores, false);
  add_scores(anomaly_scores, true);

  auto table_json = [](const PercentileTable& t) {
    return nlohmann::ordered_json{
        {"p50", t.p50}, {"p90", t.p90}, {"p95", t.p95}, {"p99", t.p99}};
  };
  report["reference"] = {{"segments", reference_segments.size()},
                         {"ridge", ref.ridge},
                         {"recon_error", table_json(ref.recon_error)},
                         {"mahalanobis", table_json(ref.mahal)}};

  if (!anomaly_scores.empty()) {
    const DetectionSummary summary = evaluate_detection(normal_scores, anomaly_scores);
    report["summary"] = {{"auc", summary.auc},
                         {"normal_mahal", table_json(summary.normal_mahal)},
                         {"anomalous_mahal", table_json(summary.anomalous_mahal)},
                         {"normal_recon", table_json(summary.normal_recon)},
                         {"anomalous_recon", table_json(summary.anomalous_recon)}};
    std::printf("score: auc %.4f (%zu normal, %zu anomalous)\n", summary.auc,
                normal_scores.size(), anomaly_scores.size());
  } else {
    std::printf("score: %zu segments scored against the reference (single class, no auc)\n",
                normal_scores.size());
  }

  fs::create_directories(options.out_dir);
  write_text(options.out_dir / "scores.json", report.dump(2) + "\n");
  write_resolved_config(options.out_dir, options.resolved_config);
  return kExitOk;
}

}  // namespace qear::cli
