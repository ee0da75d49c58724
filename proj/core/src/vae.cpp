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

#include "qear/vae.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>

#include "qear/errors.hpp"

namespace qear {
namespace {

std::vector<const DenseLayer*> list_layers(const VaeNet& net) {
  std::vector<const DenseLayer*> v;
  for (const auto& l : net.encoder) v.push_back(&l);
  v.push_back(&net.mu_head);
  v.push_back(&net.logvar_head);
  for (const auto& l : net.decoder) v.push_back(&l);
  v.push_back(&net.output_head);
  return v;
}

std::vector<DenseLayer*> list_layers(VaeNet& net) {
  std::vector<DenseLayer*> v;
  for (auto& l : net.encoder) v.push_back(&l);
  v.push_back(&net.mu_head);
  v.push_back(&net.logvar_head);
  for (auto& l : net.decoder) v.push_back(&l);
  v.push_back(&net.output_head);
  return v;
}

VaeNet zeros_like(const VaeNet& net) {
  VaeNet g = net;
  for (DenseLayer* l : list_layers(g)) {
    l->weight.setZero();
    l->bias.setZero();
  }
  return g;
}

Eigen::MatrixXd affine(const DenseLayer& layer, const Eigen::MatrixXd& x) {
  return (layer.weight * x).colwise() + layer.bias;
}

// tanh on the two log-magnitude blocks, identity on the phase blocks.
void apply_output_activation(Eigen::MatrixXd& a, Eigen::Index m) {
  a.topRows(m) = a.topRows(m).array().tanh();
  a.middleRows(2 * m, m) = a.middleRows(2 * m, m).array().tanh();
}

struct ForwardCache {
  std::vector<Eigen::MatrixXd> enc_act;  // [0] = x, then tanh outputs
  Eigen::MatrixXd mu, logvar_raw, logvar, sigma, z;
  std::vector<Eigen::MatrixXd> dec_act;  // [0] = z, then tanh outputs
  Eigen::MatrixXd x_hat;
};

void forward_pass(const ModelParams& params, const Eigen::MatrixXd& x,
                  const Eigen::MatrixXd* noise, ForwardCache& cache) {
  const VaeNet& net = params.net;
  cache.enc_act.clear();
  cache.enc_act.push_back(x);
  for (const DenseLayer& layer : net.encoder) {
    cache.enc_act.push_back(affine(layer, cache.enc_act.back()).array().tanh().matrix());
  }
  const Eigen::MatrixXd& h = cache.enc_act.back();
  cache.mu = affine(net.mu_head, h);
  cache.logvar_raw = affine(net.logvar_head, h);
  cache.logvar = cache.logvar_raw.cwiseMax(-kLogvarClamp).cwiseMin(kLogvarClamp);
  cache.sigma = (0.5 * cache.logvar).array().exp();
  if (noise != nullptr) {
    cache.z = cache.mu + cache.sigma.cwiseProduct(*noise);
  } else {
    cache.z = cache.mu;  // posterior mean, used for deterministic evaluation
  }
  cache.dec_act.clear();
  cache.dec_act.push_back(cache.z);
  for (const DenseLayer& layer : net.decoder) {
    cache.dec_act.push_back(affine(layer, cache.dec_act.back()).array().tanh().matrix());
  }
  cache.x_hat = affine(net.output_head, cache.dec_act.back());
  apply_output_activation(cache.x_hat, params.input_dim / 4);
}

std::uint32_t crc32(const unsigned char* data, std::size_t len) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) {
    c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  }
  return c ^ 0xFFFFFFFFu;
}

void ap_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void ap_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void ap_f64(std::vector<unsigned char>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  ap_u64(out, bits);
}

struct Cursor {
  const unsigned char* data;
  std::size_t size;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > size) throw DataError("checkpoint corrupt: unexpected end of file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    const std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

constexpr char kModelMagic[5] = {'Q', 'V', 'A', 'E', '1'};
constexpr std::uint32_t kModelVersion = 1;

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  long t = 0;
};

AdamState make_adam_state(const VaeNet& net) {
  AdamState st;
  for (const DenseLayer* l : list_layers(net)) {
    st.mw.push_back(Eigen::MatrixXd::Zero(l->weight.rows(), l->weight.cols()));
    st.vw.push_back(Eigen::MatrixXd::Zero(l->weight.rows(), l->weight.cols()));
    st.mb.push_back(Eigen::VectorXd::Zero(l->bias.size()));
    st.vb.push_back(Eigen::VectorXd::Zero(l->bias.size()));
  }
  return st;
}

void adam_step(VaeNet& net, const VaeNet& grads, AdamState& st, double lr) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  ++st.t;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(st.t));
  auto params = list_layers(net);
  auto gs = list_layers(const_cast<VaeNet&>(grads));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.mw[i] = kBeta1 * st.mw[i] + (1.0 - kBeta1) * gs[i]->weight;
    st.vw[i] = kBeta2 * st.vw[i] + (1.0 - kBeta2) * gs[i]->weight.array().square().matrix();
    params[i]->weight.array() -=
        lr * (st.mw[i].array() / bc1) / ((st.vw[i].array() / bc2).sqrt() + kEps);
    st.mb[i] = kBeta1 * st.mb[i] + (1.0 - kBeta1) * gs[i]->bias;
    st.vb[i] = kBeta2 * st.vb[i] + (1.0 - kBeta2) * gs[i]->bias.array().square().matrix();
    params[i]->bias.array() -=
        lr * (st.mb[i].array() / bc1) / ((st.vb[i].array() / bc2).sqrt() + kEps);
  }
}

}  // namespace

void validate(const TrainingConfig& config) {
  if (config.latent_dim < 1) throw UsageError("latent_dim must be >= 1");
  if (!(config.beta >= 0.0)) throw UsageError("beta must be >= 0");
  for (int w : config.hidden_dims) {
    if (w < 1) throw UsageError("hidden layer widths must be >= 1");
  }
  if (!(config.learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
  if (config.batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (config.epochs < 1) throw UsageError("epochs must be >= 1");
  if (config.early_stop_window < 1) throw UsageError("early_stop_window must be >= 1");
  if (!(config.early_stop_tol >= 0.0)) throw UsageError("early_stop_tol must be >= 0");
}

ModelParams init_model(const TrainingConfig& config, int input_dim) {
  validate(config);
  if (input_dim < 4 || input_dim % 4 != 0) {
    throw UsageError("init_model: input_dim must be a positive multiple of 4");
  }

  ModelParams params;
  params.config = config;
  params.input_dim = input_dim;

  Rng rng(config.seed, 0);
  auto make_layer = [&rng](int out, int in) {
    DenseLayer layer;
    layer.weight.resize(out, in);
    const double a = 1.0 / std::sqrt(static_cast<double>(in));
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        layer.weight(r, c) = rng.uniform(-a, a);
      }
    }
    layer.bias = Eigen::VectorXd::Zero(out);
    return layer;
  };

  int prev = input_dim;
  for (int width : config.hidden_dims) {
    params.net.encoder.push_back(make_layer(width, prev));
    prev = width;
  }
  params.net.mu_head = make_layer(config.latent_dim, prev);
  params.net.logvar_head = make_layer(config.latent_dim, prev);

  prev = config.latent_dim;
  for (auto it = config.hidden_dims.rbegin(); it != config.hidden_dims.rend(); ++it) {
    params.net.decoder.push_back(make_layer(*it, prev));
    prev = *it;
  }
  params.net.output_head = make_layer(input_dim, prev);
  return params;
}

LatentDistribution encode(const ModelParams& params, const Eigen::VectorXd& x) {
  if (x.size() != params.input_dim) {
    throw DataError("encode: input dimension mismatch");
  }
  const auto [mu, logvar] = encode_batch(params, x);
  return LatentDistribution{mu.col(0), logvar.col(0)};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> encode_batch(const ModelParams& params,
                                                         const Eigen::MatrixXd& x) {
  if (x.rows() != params.input_dim) throw DataError("encode: input dimension mismatch");
  Eigen::MatrixXd h = x;
  for (const DenseLayer& layer : params.net.encoder) {
    h = affine(layer, h).array().tanh().matrix();
  }
  Eigen::MatrixXd mu = affine(params.net.mu_head, h);
  Eigen::MatrixXd logvar =
      affine(params.net.logvar_head, h).cwiseMax(-kLogvarClamp).cwiseMin(kLogvarClamp);
  return {std::move(mu), std::move(logvar)};
}

Eigen::VectorXd sample_latent(const LatentDistribution& dist, Rng& rng) {
  Eigen::VectorXd z(dist.mu.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z(i) = dist.mu(i) + std::exp(0.5 * dist.logvar(i)) * rng.normal();
  }
  return z;
}

Eigen::VectorXd decode(const ModelParams& params, const Eigen::VectorXd& z) {
  if (z.size() != params.config.latent_dim) {
    throw DataError("decode: latent dimension mismatch");
  }
  return decode_batch(params, z).col(0);
}

Eigen::MatrixXd decode_batch(const ModelParams& params, const Eigen::MatrixXd& z) {
  if (z.rows() != params.config.latent_dim) {
    throw DataError("decode: latent dimension mismatch");
  }
  Eigen::MatrixXd h = z;
  for (const DenseLayer& layer : params.net.decoder) {
    h = affine(layer, h).array().tanh().matrix();
  }
  Eigen::MatrixXd out = affine(params.net.output_head, h);
  apply_output_activation(out, params.input_dim / 4);
  return out;
}

LossParts loss(const Eigen::VectorXd& x, const Eigen::VectorXd& x_hat,
               const LatentDistribution& dist, double beta) {
  if (x.size() != x_hat.size()) throw DataError("loss: dimension mismatch");
  LossParts parts;
  parts.mse = (x - x_hat).squaredNorm() / static_cast<double>(x.size());
  parts.kl = -0.5 * (1.0 + dist.logvar.array() - dist.mu.array().square() -
                     dist.logvar.array().exp())
                        .sum();
  parts.total = parts.mse + beta * parts.kl;
  return parts;
}

LossParts vae_batch_loss(const ModelParams& params, const Eigen::MatrixXd& x,
                         const Eigen::MatrixXd& noise, double beta, VaeNet* grads) {
  const auto batch = x.cols();
  if (batch == 0) throw UsageError("vae_batch_loss: empty batch");
  if (noise.rows() != params.config.latent_dim || noise.cols() != batch) {
    throw DataError("vae_batch_loss: noise shape mismatch");
  }

  ForwardCache cache;
  forward_pass(params, x, &noise, cache);

  const double d = static_cast<double>(params.input_dim);
  const double b = static_cast<double>(batch);

  LossParts parts;
  parts.mse = (cache.x_hat - x).squaredNorm() / (d * b);
  parts.kl = -0.5 *
             (1.0 + cache.logvar.array() - cache.mu.array().square() -
              cache.logvar.array().exp())
                 .sum() /
             b;
  parts.total = parts.mse + beta * parts.kl;
  if (grads == nullptr) return parts;

  const VaeNet& net = params.net;
  *grads = zeros_like(net);
  const Eigen::Index m = params.input_dim / 4;

  // output head (mixed tanh/linear)
  Eigen::MatrixXd delta = 2.0 / (d * b) * (cache.x_hat - x);
  delta.topRows(m).array() *= 1.0 - cache.x_hat.topRows(m).array().square();
  delta.middleRows(2 * m, m).array() *=
      1.0 - cache.x_hat.middleRows(2 * m, m).array().square();
  grads->output_head.weight = delta * cache.dec_act.back().transpose();
  grads->output_head.bias = delta.rowwise().sum();
  Eigen::MatrixXd d_act = net.output_head.weight.transpose() * delta;

  for (std::size_t i = net.decoder.size(); i-- > 0;) {
    const Eigen::MatrixXd& out = cache.dec_act[i + 1];
    Eigen::MatrixXd dz = d_act.cwiseProduct((1.0 - out.array().square()).matrix());
    grads->decoder[i].weight = dz * cache.dec_act[i].transpose();
    grads->decoder[i].bias = dz.rowwise().sum();
    d_act = net.decoder[i].weight.transpose() * dz;
  }

  // d_act is now dL/dz; route through the reparameterization and add the KL
  // terms.
  Eigen::MatrixXd d_mu = d_act + (beta / b) * cache.mu;
  Eigen::MatrixXd d_lv = d_act.cwiseProduct(0.5 * cache.sigma.cwiseProduct(noise)) +
                         (beta / b) * 0.5 * (cache.logvar.array().exp() - 1.0).matrix();
  // No gradient through a saturated clamp.
  d_lv = (cache.logvar_raw.array().abs() < kLogvarClamp)
             .select(d_lv.array(), 0.0)
             .matrix();

  const Eigen::MatrixXd& h_enc = cache.enc_act.back();
  grads->mu_head.weight = d_mu * h_enc.transpose();
  grads->mu_head.bias = d_mu.rowwise().sum();
  grads->logvar_head.weight = d_lv * h_enc.transpose();
  grads->logvar_head.bias = d_lv.rowwise().sum();

  d_act = net.mu_head.weight.transpose() * d_mu + net.logvar_head.weight.transpose() * d_lv;
  for (std::size_t i = net.encoder.size(); i-- > 0;) {
    const Eigen::MatrixXd& out = cache.enc_act[i + 1];
    Eigen::MatrixXd dz = d_act.cwiseProduct((1.0 - out.array().square()).matrix());
    grads->encoder[i].weight = dz * cache.enc_act[i].transpose();
    grads->encoder[i].bias = dz.rowwise().sum();
    if (i > 0) d_act = net.encoder[i].weight.transpose() * dz;
  }
  return parts;
}

TrainResult train(const std::vector<FeatureFrame>& dataset, const TrainingConfig& config,
                  const CorpusStats& stats) {
  validate(config);
  if (dataset.empty()) throw DataError("train: empty dataset");
  const std::size_t dim = dataset.front().values.size();
  for (const FeatureFrame& f : dataset) {
    if (f.values.size() != dim) throw DataError("train: inconsistent frame sizes");
  }

  TrainResult result;
  result.params = init_model(config, static_cast<int>(dim));
  result.params.stats = stats;

  Rng rng(config.seed, 1);
  AdamState adam = make_adam_state(result.params.net);
  VaeNet grads;

  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  const auto batch_size = static_cast<std::size_t>(config.batch_size);
  Eigen::MatrixXd x(dim, batch_size);
  Eigen::MatrixXd noise(config.latent_dim, batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(order);
    double total_sum = 0.0, mse_sum = 0.0, kl_sum = 0.0;

    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t b = std::min(batch_size, n - start);
      x.resize(Eigen::NoChange, static_cast<Eigen::Index>(b));
      noise.resize(Eigen::NoChange, static_cast<Eigen::Index>(b));
      for (std::size_t i = 0; i < b; ++i) {
        const auto& values = dataset[order[start + i]].values;
        x.col(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(dim));
        for (int j = 0; j < config.latent_dim; ++j) {
          noise(j, static_cast<Eigen::Index>(i)) = rng.normal();
        }
      }

      const LossParts parts = vae_batch_loss(result.params, x, noise, config.beta, &grads);
      if (!std::isfinite(parts.total)) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(start / batch_size) +
                           " (total=" + std::to_string(parts.total) +
                           ", mse=" + std::to_string(parts.mse) +
                           ", kl=" + std::to_string(parts.kl) + ")");
      }
      adam_step(result.params.net, grads, adam, config.learning_rate);

      const double bw = static_cast<double>(b);
      total_sum += parts.total * bw;
      mse_sum += parts.mse * bw;
      kl_sum += parts.kl * bw;
    }

    const double nn = static_cast<double>(n);
    result.curve.push_back({epoch, total_sum / nn, mse_sum / nn, kl_sum / nn});

    // Stop when the window-relative improvement of the mean total loss
    // drops below the tolerance.
    const int w = config.early_stop_window;
    if (epoch > w) {
      const double prev = result.curve[static_cast<std::size_t>(epoch - 1 - w)].mean_total;
      const double cur = result.curve.back().mean_total;
      if (!(prev > 0.0) || (prev - cur) / prev < config.early_stop_tol) break;
    }
  }
  return result;
}

std::pair<AudioSegment, std::vector<double>> reconstruct_segment(
    const ModelParams& params, const AudioSegment& segment, const AnalysisConfig& config) {
  if (static_cast<int>(4 * config.half_frame) != params.input_dim) {
    throw DataError("reconstruct_segment: model input dim does not match 4M");
  }
  const MclTensor tensor = analyze(segment, config);
  const std::vector<FeatureFrame> frames = to_features(tensor, params.stats);

  const auto t = static_cast<Eigen::Index>(frames.size());
  const auto dim = static_cast<Eigen::Index>(params.input_dim);
  Eigen::MatrixXd x(dim, t);
  for (Eigen::Index i = 0; i < t; ++i) {
    x.col(i) = Eigen::Map<const Eigen::VectorXd>(frames[static_cast<std::size_t>(i)].values.data(), dim);
  }

  const auto [mu, logvar] = encode_batch(params, x);
  (void)logvar;
  const Eigen::MatrixXd x_hat = decode_batch(params, mu);

  std::vector<double> frame_mse(frames.size());
  std::vector<FeatureFrame> decoded(frames.size());
  for (Eigen::Index i = 0; i < t; ++i) {
    frame_mse[static_cast<std::size_t>(i)] =
        (x.col(i) - x_hat.col(i)).squaredNorm() / static_cast<double>(dim);
    FeatureFrame& f = decoded[static_cast<std::size_t>(i)];
    f.frame_index = static_cast<int>(i);
    f.source_id = segment.source_id;
    f.values.assign(x_hat.col(i).data(), x_hat.col(i).data() + dim);
  }

  const MclTensor out_tensor =
      from_features(decoded, params.stats, tensor.pad_info, tensor.sample_rate,
                    tensor.source_id, tensor.index);
  return {synthesize(out_tensor, config), std::move(frame_mse)};
}

AudioSegment generate_audio(const ModelParams& params, Rng& rng, std::size_t n_frames,
                            int sample_rate, const AnalysisConfig& config) {
  if (n_frames == 0) throw UsageError("generate_audio: n_frames must be >= 1");
  if (static_cast<int>(4 * config.half_frame) != params.input_dim) {
    throw DataError("generate_audio: model input dim does not match 4M");
  }
  const auto d = static_cast<Eigen::Index>(params.config.latent_dim);
  Eigen::MatrixXd z(d, static_cast<Eigen::Index>(n_frames));
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    for (Eigen::Index r = 0; r < d; ++r) z(r, c) = rng.normal();
  }
  const Eigen::MatrixXd x_hat = decode_batch(params, z);

  std::vector<FeatureFrame> frames(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    frames[i].frame_index = static_cast<int>(i);
    frames[i].source_id = "generated";
    frames[i].values.assign(x_hat.col(static_cast<Eigen::Index>(i)).data(),
                            x_hat.col(static_cast<Eigen::Index>(i)).data() + x_hat.rows());
  }
  PadInfo pad;
  pad.original_len = (n_frames + 1) * config.half_frame;
  const MclTensor tensor =
      from_features(frames, params.stats, pad, sample_rate, "generated", 0);
  AudioSegment audio = synthesize(tensor, config);
  for (double* channel : {audio.samples.left.data(), audio.samples.right.data()}) {
    for (std::size_t i = 0; i < audio.samples.left.size(); ++i) {
      channel[i] = std::clamp(channel[i], -1.0, 1.0);
    }
  }
  return audio;
}

void save_model(const ModelParams& params, const std::filesystem::path& path) {
  std::vector<unsigned char> buf;
  buf.insert(buf.end(), kModelMagic, kModelMagic + 5);
  ap_u32(buf, kModelVersion);
  ap_u32(buf, static_cast<std::uint32_t>(params.input_dim));
  ap_u32(buf, static_cast<std::uint32_t>(params.config.latent_dim));
  ap_f64(buf, params.config.beta);
  ap_u32(buf, static_cast<std::uint32_t>(params.config.hidden_dims.size()));
  for (int w : params.config.hidden_dims) ap_u32(buf, static_cast<std::uint32_t>(w));
  ap_f64(buf, params.config.learning_rate);
  ap_u32(buf, static_cast<std::uint32_t>(params.config.batch_size));
  ap_u32(buf, static_cast<std::uint32_t>(params.config.epochs));
  ap_u64(buf, params.config.seed);
  ap_u32(buf, static_cast<std::uint32_t>(params.config.early_stop_window));
  ap_f64(buf, params.config.early_stop_tol);
  ap_f64(buf, params.stats.logmag_min);
  ap_f64(buf, params.stats.logmag_max);

  for (const DenseLayer* layer : list_layers(params.net)) {
    ap_u32(buf, static_cast<std::uint32_t>(layer->weight.rows()));
    ap_u32(buf, static_cast<std::uint32_t>(layer->weight.cols()));
    for (Eigen::Index c = 0; c < layer->weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer->weight.rows(); ++r) {
        ap_f64(buf, layer->weight(r, c));
      }
    }
    ap_u32(buf, static_cast<std::uint32_t>(layer->bias.size()));
    for (Eigen::Index i = 0; i < layer->bias.size(); ++i) ap_f64(buf, layer->bias(i));
  }
  ap_u32(buf, crc32(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("short write to " + path.string());
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 13) throw DataError("checkpoint corrupt: file too short");
  const std::uint32_t stored =
      static_cast<std::uint32_t>(buf[buf.size() - 4]) |
      (static_cast<std::uint32_t>(buf[buf.size() - 3]) << 8) |
      (static_cast<std::uint32_t>(buf[buf.size() - 2]) << 16) |
      (static_cast<std::uint32_t>(buf[buf.size() - 1]) << 24);
  if (crc32(buf.data(), buf.size() - 4) != stored) {
    throw DataError("checkpoint corrupt: checksum mismatch");
  }

  Cursor cur{buf.data(), buf.size() - 4};
  cur.need(5);
  if (std::memcmp(buf.data(), kModelMagic, 5) != 0) {
    throw DataError(path.string() + ": not a model checkpoint");
  }
  cur.pos = 5;
  const std::uint32_t version = cur.u32();
  if (version != kModelVersion) {
    throw DataError("checkpoint version mismatch: have " + std::to_string(version) +
                    ", expected " + std::to_string(kModelVersion));
  }

  ModelParams params;
  params.input_dim = static_cast<int>(cur.u32());
  params.config.latent_dim = static_cast<int>(cur.u32());
  params.config.beta = cur.f64();
  const std::uint32_t n_hidden = cur.u32();
  if (n_hidden > 64) throw DataError("checkpoint corrupt: implausible hidden layer count");
  params.config.hidden_dims.clear();
  for (std::uint32_t i = 0; i < n_hidden; ++i) {
    params.config.hidden_dims.push_back(static_cast<int>(cur.u32()));
  }
  params.config.learning_rate = cur.f64();
  params.config.batch_size = static_cast<int>(cur.u32());
  params.config.epochs = static_cast<int>(cur.u32());
  params.config.seed = cur.u64();
  params.config.early_stop_window = static_cast<int>(cur.u32());
  params.config.early_stop_tol = cur.f64();
  params.stats.logmag_min = cur.f64();
  params.stats.logmag_max = cur.f64();

  // Rebuild the expected shapes, then check the stored ones against them.
  ModelParams expect = init_model(params.config, params.input_dim);
  params.net = expect.net;
  for (DenseLayer* layer : list_layers(params.net)) {
    const std::uint32_t rows = cur.u32();
    const std::uint32_t cols = cur.u32();
    if (rows != static_cast<std::uint32_t>(layer->weight.rows()) ||
        cols != static_cast<std::uint32_t>(layer->weight.cols())) {
      throw DataError("checkpoint corrupt: layer shape mismatch");
    }
    for (Eigen::Index c = 0; c < layer->weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer->weight.rows(); ++r) {
        layer->weight(r, c) = cur.f64();
      }
    }
    const std::uint32_t bias_len = cur.u32();
    if (bias_len != static_cast<std::uint32_t>(layer->bias.size())) {
      throw DataError("checkpoint corrupt: bias shape mismatch");
    }
    for (Eigen::Index i = 0; i < layer->bias.size(); ++i) layer->bias(i) = cur.f64();
  }
  if (cur.pos != cur.size) throw DataError("checkpoint corrupt: trailing bytes");
  return params;
}

void save_loss_csv(const std::vector<LossRecord>& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "epoch,total,mse,kl\n";
  char line[160];
  for (const LossRecord& r : curve) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g\n", r.epoch, r.mean_total,
                  r.mean_mse, r.mean_kl);
    out << line;
  }
  if (!out) throw DataError("short write to " + path.string());
}

}  // namespace qear
