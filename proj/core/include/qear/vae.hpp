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

#ifndef QEAR_VAE_HPP_
#define QEAR_VAE_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "qear/features.hpp"
#include "qear/mclt.hpp"
#include "qear/rng.hpp"

namespace qear {

/// logvar outputs are clamped to +-kLogvarClamp to keep the latent variance
/// away from collapse and explosion.
inline constexpr double kLogvarClamp = 10.0;

struct TrainingConfig {
  int latent_dim = 20;  // presets used in the experiments: 20, 4, 50
  double beta = 1.0;
  std::vector<int> hidden_dims = {512, 128};
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 40;
  std::uint64_t seed = 1234;
  // Stop at the first epoch whose mean total loss improved by less than
  // `early_stop_tol` (relative) over the last `early_stop_window` epochs.
  int early_stop_window = 5;
  double early_stop_tol = 0.005;
};

/// Throws UsageError if any field is out of range.
void validate(const TrainingConfig& config);

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

/// The network parameters: a tanh MLP encoder, linear mu / logvar heads, a
/// mirrored tanh MLP decoder, and a mixed output head (tanh on the log-mag
/// blocks, linear on the phase blocks).
struct VaeNet {
  std::vector<DenseLayer> encoder;
  DenseLayer mu_head;
  DenseLayer logvar_head;
  std::vector<DenseLayer> decoder;
  DenseLayer output_head;
};

struct ModelParams {
  TrainingConfig config;
  int input_dim = 0;  // 4M
  CorpusStats stats{0.0, 1.0};
  VaeNet net;
};

/// Per-input Gaussian over the latent space.
struct LatentDistribution {
  Eigen::VectorXd mu;
  Eigen::VectorXd logvar;  // clamped to [-kLogvarClamp, kLogvarClamp]
};

struct LossParts {
  double total = 0.0;
  double mse = 0.0;
  double kl = 0.0;
};

struct LossRecord {
  int epoch = 0;  // 1-based
  double mean_total = 0.0;
  double mean_mse = 0.0;
  double mean_kl = 0.0;
};

/// Fan-in scaled uniform init, deterministic per seed; biases zero.
ModelParams init_model(const TrainingConfig& config, int input_dim);

LatentDistribution encode(const ModelParams& params, const Eigen::VectorXd& x);

/// z = mu + exp(logvar/2) * n with n standard normal from `rng`.
Eigen::VectorXd sample_latent(const LatentDistribution& dist, Rng& rng);

Eigen::VectorXd decode(const ModelParams& params, const Eigen::VectorXd& z);

/// Column-batched variants of encode/decode; inputs pair column-wise.
/// encode_batch returns (mu, logvar).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> encode_batch(const ModelParams& params,
                                                         const Eigen::MatrixXd& x);
Eigen::MatrixXd decode_batch(const ModelParams& params, const Eigen::MatrixXd& z);

/// mse = mean over entries of (x - x_hat)^2;
/// kl  = -1/2 sum_i (1 + logvar_i - mu_i^2 - exp(logvar_i));
/// total = mse + beta * kl.
LossParts loss(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat,
               const LatentDistribution& dist, double beta);

/// Batched forward/backward pass with frozen per-example noise (columns of
/// `noise` pair with columns of `x`). Returns the batch-mean loss; fills
/// `grads` (same shapes as the net) when non-null. Exposed so gradients can
/// be checked against finite differences.
LossParts vae_batch_loss(const ModelParams& params, const Eigen::MatrixXd& x,
                         const Eigen::MatrixXd& noise, double beta, VaeNet* grads);

struct TrainResult {
  ModelParams params;
  std::vector<LossRecord> curve;
};

/// Mini-batch training with adaptive moments (beta1 = 0.9, beta2 = 0.999,
/// eps = 1e-8), per-epoch seeded shuffling and one latent sample per example
/// per step. Bit-deterministic for a fixed config. Returns the parameters at
/// the early-stop epoch plus the full loss curve. Throws NumericError when
/// the loss stops being finite.
TrainResult train(const std::vector<FeatureFrame>& dataset, const TrainingConfig& config,
                  const CorpusStats& stats);

/// analyze -> features -> encode (posterior mean, no sampling) -> decode ->
/// invert features -> synthesize. Returns the audio and the per-frame
/// feature-space MSE.
std::pair<AudioSegment, std::vector<double>> reconstruct_segment(
    const ModelParams& params, const AudioSegment& segment, const AnalysisConfig& config);

/// Draws z ~ N(0, I) per frame, decodes, inverts features and synthesizes
/// `n_frames` frames of new audio; samples are clamped to [-1, 1].
AudioSegment generate_audio(const ModelParams& params, Rng& rng, std::size_t n_frames,
                            int sample_rate, const AnalysisConfig& config);

/// Checkpoint: magic "QVAE1", u32 version, config block, corpus stats, flat
/// little-endian float64 parameter arrays in declaration order (weights
/// column-major), trailing CRC32.
void save_model(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

/// Loss curve as CSV with header epoch,total,mse,kl; %.17g formatting so
/// reruns are byte-identical.
void save_loss_csv(const std::vector<LossRecord>& curve, const std::filesystem::path& path);

}  // namespace qear

#endif  // QEAR_VAE_HPP_
