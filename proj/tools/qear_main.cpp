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

// qear: unsupervised acoustic modeling of machinery sounds.
//
//   synth    generate a synthetic recording corpus
//   train    train the variational autoencoder on a corpus
//   eval     reconstruction error / log-spectral distance tables
//   project  2-D latent projections (PCA, t-SNE)
//   score    anomaly scores against a normal-operation reference
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <CLI11.hpp>
#include <cstdio>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "qear/errors.hpp"

namespace {

using qear::cli::AnalysisOptions;

void add_analysis_flags(CLI::App* cmd, AnalysisOptions* analysis) {
  cmd->add_option("--segment-len", analysis->segment_len, "Samples per segment")
      ->capture_default_str();
  cmd->add_option("--hop", analysis->hop, "Hop between segments (0: same as --segment-len)")
      ->capture_default_str();
  cmd->add_option("--mclt-m", analysis->mclt_m, "MCLT half-frame (bins), power of two")
      ->capture_default_str();
}

std::string parse_hidden_dims(const std::string& csv, std::vector<int>* out) {
  std::vector<int> dims;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      dims.push_back(std::stoi(item));
    } catch (const std::exception&) {
      return "cannot parse hidden layer width '" + item + "'";
    }
  }
  *out = dims;
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qear - unsupervised acoustic modeling and anomaly scoring"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI file");
  app.get_formatter()->column_width(30);

  qear::cli::SynthOptions synth;
  qear::cli::TrainOptions train;
  qear::cli::EvalOptions eval;
  qear::cli::ProjectOptions project;
  qear::cli::ScoreOptions score;
  std::string train_hidden = "512,128";

  CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--preset", synth.presets,
                        "Preset name (belt, mill, crusher, screen, damaged) or 'all'");
  synth_cmd->add_option("--profile", synth.profile_files, "Profile file (key=value lines)");
  synth_cmd->add_option("--per-profile", synth.per_profile, "Recordings per profile")
      ->capture_default_str();
  synth_cmd->add_option("--duration", synth.duration, "Seconds per recording")
      ->capture_default_str();
  synth_cmd->add_option("--fs", synth.sample_rate, "Sample rate in Hz")->capture_default_str();
  synth_cmd->add_option("--bit-depth", synth.bit_depth, "16, 24 or 32f")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Base seed (recording i uses seed + i)")
      ->envname("QEAR_SEED")
      ->capture_default_str();

  CLI::App* train_cmd = app.add_subcommand("train", "Train the model on a corpus");
  train_cmd->add_option("--corpus", train.corpus, "Corpus directory")->required();
  train_cmd->add_option("--out-dir", train.out_dir, "Output directory")->required();
  add_analysis_flags(train_cmd, &train.analysis);
  train_cmd->add_option("--latent-dim", train.config.latent_dim, "Latent dimensions")
      ->capture_default_str();
  train_cmd->add_option("--beta", train.config.beta, "KL weight")->capture_default_str();
  train_cmd->add_option("--hidden", train_hidden, "Hidden layer widths, comma-separated")
      ->capture_default_str();
  train_cmd->add_option("--lr", train.config.learning_rate, "Learning rate")
      ->capture_default_str();
  train_cmd->add_option("--batch-size", train.config.batch_size, "Mini-batch size")
      ->capture_default_str();
  train_cmd->add_option("--epochs", train.config.epochs, "Maximum epochs")
      ->capture_default_str();
  train_cmd->add_option("--early-stop-window", train.config.early_stop_window,
                        "Early-stop window in epochs")
      ->capture_default_str();
  train_cmd->add_option("--early-stop-tol", train.config.early_stop_tol,
                        "Relative improvement threshold over the window")
      ->capture_default_str();
  train_cmd->add_option("--seed", train.config.seed, "Training seed")
      ->envname("QEAR_SEED")
      ->capture_default_str();

  CLI::App* eval_cmd = app.add_subcommand("eval", "Reconstruction quality tables");
  eval_cmd->add_option("--model", eval.models, "Model checkpoint (repeatable)")->required();
  eval_cmd->add_option("--corpus", eval.corpus, "Corpus directory")->required();
  eval_cmd->add_option("--out-dir", eval.out_dir, "Output directory")->required();
  add_analysis_flags(eval_cmd, &eval.analysis);

  CLI::App* project_cmd = app.add_subcommand("project", "2-D latent projections");
  project_cmd->add_option("--model", project.model, "Model checkpoint")->required();
  project_cmd->add_option("--corpus", project.corpus, "Corpus directory")->required();
  project_cmd->add_option("--anomaly-dir", project.anomaly_dir,
                          "Extra corpus whose points are flagged as anomalies");
  project_cmd->add_option("--out-dir", project.out_dir, "Output directory")->required();
  project_cmd->add_option("--method", project.method, "pca, tsne or both")
      ->capture_default_str();
  project_cmd->add_option("--granularity", project.granularity, "segment or frame")
      ->capture_default_str();
  project_cmd->add_option("--perplexity", project.perplexity, "t-SNE perplexity")
      ->capture_default_str();
  project_cmd->add_option("--iters", project.iterations, "t-SNE iterations")
      ->capture_default_str();
  project_cmd->add_option("--seed", project.seed, "t-SNE seed")
      ->envname("QEAR_SEED")
      ->capture_default_str();
  add_analysis_flags(project_cmd, &project.analysis);

  CLI::App* score_cmd = app.add_subcommand("score", "Anomaly scores against a reference");
  score_cmd->add_option("--model", score.model, "Model checkpoint")->required();
  score_cmd->add_option("--reference", score.reference, "Normal-operation corpus")->required();
  score_cmd->add_option("--target", score.target,
                        "Corpus to score (default: the reference corpus)");
  score_cmd->add_option("--anomaly-dir", score.anomaly_dir,
                        "Corpus scored as labeled anomalies (enables AUC)");
  score_cmd->add_option("--out-dir", score.out_dir, "Output directory")->required();
  add_analysis_flags(score_cmd, &score.analysis);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return qear::cli::kExitUsage;
  }

  try {
    const std::string resolved = app.config_to_str(true, true);
    if (synth_cmd->parsed()) {
      synth.resolved_config = resolved;
      return qear::cli::cmd_synth(synth);
    }
    if (train_cmd->parsed()) {
      const std::string err = parse_hidden_dims(train_hidden, &train.config.hidden_dims);
      if (!err.empty()) throw qear::UsageError(err);
      train.resolved_config = resolved;
      return qear::cli::cmd_train(train);
    }
    if (eval_cmd->parsed()) {
      eval.resolved_config = resolved;
      return qear::cli::cmd_eval(eval);
    }
    if (project_cmd->parsed()) {
      project.resolved_config = resolved;
      return qear::cli::cmd_project(project);
    }
    if (score_cmd->parsed()) {
      score.resolved_config = resolved;
      return qear::cli::cmd_score(score);
    }
    std::fprintf(stderr, "no subcommand given\n");
    return qear::cli::kExitUsage;
  } catch (const qear::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return qear::cli::kExitUsage;
  } catch (const qear::NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return qear::cli::kExitNumeric;
  } catch (const qear::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return qear::cli::kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return qear::cli::kExitData;
  }
}
