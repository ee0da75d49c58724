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
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "qear/errors.hpp"
#include "qear/synthgen.hpp"

namespace qear {
namespace {

namespace fs = std::filesystem;

TrainingConfig toy_config(int d, std::vector<int> hidden, std::uint64_t seed = 42) {
  TrainingConfig c;
  c.latent_dim = d;
  c.hidden_dims = std::move(hidden);
  c.seed = seed;
  return c;
}

void zero_net(VaeNet& net) {
  for (auto* layers : {&net.encoder, &net.decoder}) {
    for (DenseLayer& l : *layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
  }
  net.mu_head.weight.setZero();
  net.mu_head.bias.setZero();
  net.logvar_head.weight.setZero();
  net.logvar_head.bias.setZero();
  net.output_head.weight.setZero();
  net.output_head.bias.setZero();
}

// All parameter tensors of a net, for generic mutation in the FD check.
std::vector<Eigen::MatrixXd*> weight_list(VaeNet& net) {
  std::vector<Eigen::MatrixXd*> v;
  for (auto& l : net.encoder) v.push_back(&l.weight);
  v.push_back(&net.mu_head.weight);
  v.push_back(&net.logvar_head.weight);
  for (auto& l : net.decoder) v.push_back(&l.weight);
  v.push_back(&net.output_head.weight);
  return v;
}

std::vector<Eigen::VectorXd*> bias_list(VaeNet& net) {
  std::vector<Eigen::VectorXd*> v;
  for (auto& l : net.encoder) v.push_back(&l.bias);
  v.push_back(&net.mu_head.bias);
  v.push_back(&net.logvar_head.bias);
  for (auto& l : net.decoder) v.push_back(&l.bias);
  v.push_back(&net.output_head.bias);
  return v;
}

bool nets_equal(const VaeNet& a, const VaeNet& b) {
  VaeNet& ma = const_cast<VaeNet&>(a);
  VaeNet& mb = const_cast<VaeNet&>(b);
  auto wa = weight_list(ma), wb = weight_list(mb);
  auto ba = bias_list(ma), bb = bias_list(mb);
  for (std::size_t i = 0; i < wa.size(); ++i) {
    if (*wa[i] != *wb[i]) return false;
    if (*ba[i] != *bb[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("init_model: deterministic per seed, shapes follow the config") {
  const auto config = toy_config(4, {512, 128}, 7);
  const ModelParams a = init_model(config, 4096);
  const ModelParams b = init_model(config, 4096);
  CHECK(nets_equal(a.net, b.net));

  auto config2 = config;
  config2.seed = 8;
  const ModelParams c = init_model(config2, 4096);
  CHECK_FALSE(nets_equal(a.net, c.net));

  CHECK(a.net.mu_head.weight.rows() == 4);
  CHECK(a.net.mu_head.weight.cols() == 128);
  CHECK(a.net.logvar_head.weight.rows() == 4);
  CHECK(a.net.encoder[0].weight.rows() == 512);
  CHECK(a.net.encoder[0].weight.cols() == 4096);
  CHECK(a.net.decoder[0].weight.rows() == 128);
  CHECK(a.net.decoder[0].weight.cols() == 4);
  CHECK(a.net.output_head.weight.rows() == 4096);
  CHECK(a.net.output_head.weight.cols() == 512);
  for (Eigen::Index i = 0; i < a.net.encoder[0].bias.size(); ++i) {
    CHECK(a.net.encoder[0].bias(i) == 0.0);
  }
}

TEST_CASE("encode: zero weights give mu = 0 and logvar = 0, and it is deterministic") {
  ModelParams params = init_model(toy_config(2, {2}), 4);
  zero_net(params.net);
  const Eigen::VectorXd x = Eigen::Vector4d(0.3, -0.1, 0.9, 0.2);
  const LatentDistribution dist = encode(params, x);
  CHECK(dist.mu.isZero(0.0));
  CHECK(dist.logvar.isZero(0.0));

  ModelParams random_params = init_model(toy_config(2, {2}), 4);
  const LatentDistribution d1 = encode(random_params, x);
  const LatentDistribution d2 = encode(random_params, x);
  CHECK(d1.mu == d2.mu);
  CHECK(d1.logvar == d2.logvar);
}

TEST_CASE("encode matches an explicit forward computation on a 2-2-2 net") {
  ModelParams params = init_model(toy_config(2, {2}), 4);
  params.net.encoder[0].weight << 0.1, -0.2, 0.3, 0.05, 0.0, 0.4, -0.1, 0.2;
  params.net.encoder[0].bias << 0.01, -0.02;
  params.net.mu_head.weight << 0.5, -0.5, 0.25, 0.1;
  params.net.mu_head.bias << 0.0, 0.1;
  params.net.logvar_head.weight << -0.3, 0.2, 0.0, 0.6;
  params.net.logvar_head.bias << 0.05, 0.0;

  const Eigen::VectorXd x = Eigen::Vector4d(0.5, -0.3, 0.2, 0.8);
  const LatentDistribution dist = encode(params, x);

  const double h0 = std::tanh(0.1 * 0.5 - 0.2 * -0.3 + 0.3 * 0.2 + 0.05 * 0.8 + 0.01);
  const double h1 = std::tanh(0.4 * -0.3 - 0.1 * 0.2 + 0.2 * 0.8 - 0.02);
  CHECK(dist.mu(0) == doctest::Approx(0.5 * h0 - 0.5 * h1).epsilon(1e-12));
  CHECK(dist.mu(1) == doctest::Approx(0.25 * h0 + 0.1 * h1 + 0.1).epsilon(1e-12));
  CHECK(dist.logvar(0) == doctest::Approx(-0.3 * h0 + 0.2 * h1 + 0.05).epsilon(1e-12));
  CHECK(dist.logvar(1) == doctest::Approx(0.6 * h1).epsilon(1e-12));
}

TEST_CASE("decode matches an explicit forward computation with the mixed head") {
  ModelParams params = init_model(toy_config(2, {2}), 4);
  params.net.decoder[0].weight << 0.2, -0.4, 0.7, 0.1;
  params.net.decoder[0].bias << -0.05, 0.02;
  params.net.output_head.weight << 0.3, 0.1, -0.2, 0.5, 0.05, -0.6, 0.4, 0.4;
  params.net.output_head.bias << 0.01, 0.02, 0.03, 0.04;

  const Eigen::VectorXd z = Eigen::Vector2d(0.6, -0.2);
  const Eigen::VectorXd out = decode(params, z);

  const double g0 = std::tanh(0.2 * 0.6 - 0.4 * -0.2 - 0.05);
  const double g1 = std::tanh(0.7 * 0.6 + 0.1 * -0.2 + 0.02);
  const double a0 = 0.3 * g0 + 0.1 * g1 + 0.01;   // log-mag L -> tanh
  const double a1 = -0.2 * g0 + 0.5 * g1 + 0.02;  // phase L -> linear
  const double a2 = 0.05 * g0 - 0.6 * g1 + 0.03;  // log-mag R -> tanh
  const double a3 = 0.4 * g0 + 0.4 * g1 + 0.04;   // phase R -> linear
  CHECK(out(0) == doctest::Approx(std::tanh(a0)).epsilon(1e-12));
  CHECK(out(1) == doctest::Approx(a1).epsilon(1e-12));
  CHECK(out(2) == doctest::Approx(std::tanh(a2)).epsilon(1e-12));
  CHECK(out(3) == doctest::Approx(a3).epsilon(1e-12));

  SUBCASE("zero weights give zero output") {
    zero_net(params.net);
    CHECK(decode(params, z).isZero(0.0));
  }
  SUBCASE("deterministic") {
    CHECK(decode(params, z) == decode(params, z));
  }
}

TEST_CASE("sample_latent: variance collapse, Monte Carlo mean, reproducibility") {
  LatentDistribution dist;
  dist.mu = Eigen::Vector2d(0.3, -0.2);
  dist.logvar = Eigen::Vector2d(-10.0, -10.0);

  SUBCASE("collapsed variance pins z to mu") {
    Rng rng(1);
    const Eigen::VectorXd z = sample_latent(dist, rng);
    CHECK(std::abs(z(0) - 0.3) < 5.0 * std::exp(-5.0));
    CHECK(std::abs(z(1) + 0.2) < 5.0 * std::exp(-5.0));
  }
  SUBCASE("empirical mean approaches mu") {
    dist.logvar = Eigen::Vector2d(0.1, -0.3);
    Rng rng(2);
    const int n = 100000;
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    for (int i = 0; i < n; ++i) sum += sample_latent(dist, rng);
    const Eigen::Vector2d mean = sum / n;
    for (int j = 0; j < 2; ++j) {
      const double sigma = std::exp(0.5 * dist.logvar(j));
      CHECK(std::abs(mean(j) - dist.mu(j)) < 4.0 * sigma / std::sqrt(double(n)));
    }
  }
  SUBCASE("fixed seed reproduces z") {
    Rng a(3), b(3);
    CHECK(sample_latent(dist, a) == sample_latent(dist, b));
  }
}

TEST_CASE("loss: KL closed forms and beta weighting") {
  const Eigen::VectorXd x = Eigen::Vector4d(0.1, 0.2, 0.3, 0.4);
  const Eigen::VectorXd x_hat = Eigen::Vector4d(0.1, 0.0, 0.3, 0.8);

  SUBCASE("standard normal posterior has zero KL") {
    LatentDistribution dist{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero()};
    const LossParts parts = loss(x, x_hat, dist, 1.0);
    CHECK(parts.kl == 0.0);
    CHECK(parts.total == parts.mse);
  }
  SUBCASE("unit mean in one dimension gives KL = 1/2") {
    LatentDistribution dist{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1)};
    const LossParts parts = loss(x, x_hat, dist, 1.0);
    CHECK(parts.kl == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("beta = 0 degenerates to the MSE") {
    LatentDistribution dist{Eigen::Vector2d(0.5, -1.0), Eigen::Vector2d(0.3, 0.2)};
    const LossParts parts = loss(x, x_hat, dist, 0.0);
    CHECK(parts.total == parts.mse);
    const double expected_mse = (0.2 * 0.2 + 0.4 * 0.4) / 4.0;
    CHECK(parts.mse == doctest::Approx(expected_mse).epsilon(1e-12));
  }
  SUBCASE("KL is non-negative and total is monotone in beta when KL > 0") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      LatentDistribution dist;
      dist.mu = Eigen::VectorXd::NullaryExpr(3, [&](Eigen::Index) { return rng.normal(); });
      dist.logvar =
          Eigen::VectorXd::NullaryExpr(3, [&](Eigen::Index) { return rng.uniform(-4.0, 4.0); });
      const LossParts p1 = loss(x, x_hat, dist, 0.5);
      const LossParts p2 = loss(x, x_hat, dist, 1.5);
      CHECK(p1.kl >= 0.0);
      if (p1.kl > 0.0) CHECK(p2.total > p1.total);
    }
  }
}

TEST_CASE("analytic gradients match central finite differences on a 16-8-2 model") {
  Rng rng(101);
  const double step = 1e-5;
  int checked = 0;
  for (int draw = 0; draw < 20; ++draw) {
    ModelParams params = init_model(toy_config(2, {8}, 1000 + draw), 16);
    const double beta = rng.uniform(0.0, 2.0);
    const int batch = 1 + static_cast<int>(rng.uniform_int(3));
    Eigen::MatrixXd x(16, batch), noise(2, batch);
    for (int c = 0; c < batch; ++c) {
      for (int r = 0; r < 16; ++r) x(r, c) = rng.uniform(-1.0, 1.0);
      for (int r = 0; r < 2; ++r) noise(r, c) = rng.normal();
    }

    VaeNet grads;
    vae_batch_loss(params, x, noise, beta, &grads);

    auto check_tensor = [&](double* param, const double* grad, Eigen::Index count) {
      for (Eigen::Index i = 0; i < count; ++i) {
        const double saved = param[i];
        param[i] = saved + step;
        const double up = vae_batch_loss(params, x, noise, beta, nullptr).total;
        param[i] = saved - step;
        const double down = vae_batch_loss(params, x, noise, beta, nullptr).total;
        param[i] = saved;
        const double fd = (up - down) / (2.0 * step);
        const double rel =
            std::abs(grad[i] - fd) / std::max(std::abs(grad[i]) + std::abs(fd), 1e-3);
        CHECK(rel < 1e-4);
        ++checked;
      }
    };

    auto pw = weight_list(params.net);
    auto gw = weight_list(grads);
    auto pb = bias_list(params.net);
    auto gb = bias_list(grads);
    for (std::size_t i = 0; i < pw.size(); ++i) {
      check_tensor(pw[i]->data(), gw[i]->data(), pw[i]->size());
      check_tensor(pb[i]->data(), gb[i]->data(), pb[i]->size());
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("train: a single repeated frame is memorized with beta = 0") {
  FeatureFrame frame;
  frame.values = {0.3, -0.5, 0.7, 0.1, -0.2, 0.4, -0.6, 0.05};
  std::vector<FeatureFrame> dataset(16, frame);

  TrainingConfig config = toy_config(2, {8}, 5);
  config.beta = 0.0;
  config.learning_rate = 0.02;
  config.batch_size = 16;
  config.epochs = 200;
  config.early_stop_window = 1000;  // disabled

  const TrainResult result = train(dataset, config, CorpusStats{-8.0, 1.0});
  CHECK(result.curve.back().mean_mse < 1e-4);
}

TEST_CASE("train: bit-identical runs for the same seed") {
  Rng rng(55);
  std::vector<FeatureFrame> dataset;
  for (int i = 0; i < 12; ++i) {
    FeatureFrame f;
    f.values.resize(8);
    for (double& v : f.values) v = rng.uniform(-0.9, 0.9);
    dataset.push_back(std::move(f));
  }
  TrainingConfig config = toy_config(2, {4}, 9);
  config.epochs = 5;
  config.batch_size = 4;
  config.beta = 0.01;

  const TrainResult a = train(dataset, config, CorpusStats{-8.0, 1.0});
  const TrainResult b = train(dataset, config, CorpusStats{-8.0, 1.0});
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].mean_total == b.curve[i].mean_total);
    CHECK(a.curve[i].mean_mse == b.curve[i].mean_mse);
    CHECK(a.curve[i].mean_kl == b.curve[i].mean_kl);
  }
  CHECK(nets_equal(a.params.net, b.params.net));

  SUBCASE("the loss record satisfies total = mse + beta * kl") {
    for (const LossRecord& r : a.curve) {
      CHECK(std::abs(r.mean_total - (r.mean_mse + config.beta * r.mean_kl)) < 1e-12);
    }
  }
}

TEST_CASE("train: non-finite loss raises a numeric error with diagnostics") {
  FeatureFrame frame;
  frame.values.assign(8, 1e200);  // blows up the squared error
  std::vector<FeatureFrame> dataset(4, frame);
  TrainingConfig config = toy_config(2, {4}, 1);
  config.epochs = 2;
  config.batch_size = 4;
  CHECK_THROWS_AS(train(dataset, config, CorpusStats{-8.0, 1.0}), NumericError);
}

TEST_CASE("reconstruct_segment: total on silence, deterministic, improves with training") {
  const auto analysis = AnalysisConfig::make(16);  // input dim 64

  SUBCASE("untrained model on silence stays finite and bounded") {
    ModelParams params = init_model(toy_config(3, {16}, 2), 64);
    params.stats = CorpusStats{-8.0, 1.0};
    AudioSegment silence;
    silence.samples.sample_rate = 8000;
    silence.samples.left.assign(600, 0.0);
    silence.samples.right.assign(600, 0.0);
    const auto [audio, mse] = reconstruct_segment(params, silence, analysis);
    REQUIRE(audio.samples.left.size() == 600);
    CHECK(mse.size() > 0);
    for (double v : audio.samples.left) {
      REQUIRE(std::isfinite(v));
      CHECK(std::abs(v) < 100.0);
    }
    const auto [audio2, mse2] = reconstruct_segment(params, silence, analysis);
    CHECK(audio.samples.left == audio2.samples.left);
    CHECK(mse == mse2);
  }

  SUBCASE("training lowers the reconstruction error below the untrained baseline") {
    MachineProfile tone;
    tone.name = "tone";
    tone.harmonics = {{500.0, 1.0}, {1000.0, 0.5}, {1500.0, 0.25}};
    tone.noise_level = 0.001;
    const StereoSignal sound = generate(tone, 1.0, 8000, 77);
    const auto segments = segment_signal(sound, 1024, 1024, "tone");
    REQUIRE(segments.size() >= 6);

    std::vector<MclTensor> tensors;
    for (const auto& seg : segments) tensors.push_back(analyze(seg, analysis));
    const CorpusStats stats = fit_stats(tensors);
    std::vector<FeatureFrame> dataset;
    for (const auto& t : tensors) {
      for (auto& f : to_features(t, stats)) dataset.push_back(std::move(f));
    }

    TrainingConfig config = toy_config(4, {48}, 3);
    config.beta = 1e-3;
    config.learning_rate = 3e-3;
    config.batch_size = 32;
    config.epochs = 40;
    config.early_stop_window = 100;
    const TrainResult trained = train(dataset, config, stats);

    ModelParams untrained = init_model(config, 64);
    untrained.stats = stats;

    std::vector<double> untrained_mse;
    double trained_mean = 0.0;
    for (const auto& seg : segments) {
      const auto [ta, tm] = reconstruct_segment(trained.params, seg, analysis);
      const auto [ua, um] = reconstruct_segment(untrained, seg, analysis);
      double t_sum = 0.0, u_sum = 0.0;
      for (double v : tm) t_sum += v;
      for (double v : um) u_sum += v;
      trained_mean += t_sum / static_cast<double>(tm.size());
      untrained_mse.push_back(u_sum / static_cast<double>(um.size()));
    }
    trained_mean /= static_cast<double>(segments.size());

    std::sort(untrained_mse.begin(), untrained_mse.end());
    const double p90 = untrained_mse[static_cast<std::size_t>(0.9 * (untrained_mse.size() - 1))];
    CHECK(trained_mean < p90);
  }
}

TEST_CASE("generate_audio: length arithmetic, determinism, output clamp") {
  const auto analysis = AnalysisConfig::make(64);  // input dim 256
  ModelParams params = init_model(toy_config(3, {16}, 6), 256);
  params.stats = CorpusStats{-8.0, 1.0};

  Rng rng_a(9), rng_b(9);
  const AudioSegment a = generate_audio(params, rng_a, 7, 48000, analysis);
  const AudioSegment b = generate_audio(params, rng_b, 7, 48000, analysis);
  CHECK(a.samples.left.size() == (7 + 1) * 64);
  CHECK(a.samples.left == b.samples.left);
  for (double v : a.samples.left) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("save/load round-trips checkpoints and detects corruption") {
  const auto dir = fs::temp_directory_path() / "qear_test_vae";
  fs::create_directories(dir);
  const auto path = dir / "model.qvae";

  TrainingConfig config = toy_config(4, {8, 6}, 77);
  config.beta = 0.25;
  ModelParams params = init_model(config, 16);
  params.stats = CorpusStats{-7.5, 0.5};
  save_model(params, path);

  SUBCASE("bit-identical round trip") {
    const ModelParams back = load_model(path);
    CHECK(back.input_dim == 16);
    CHECK(back.config.latent_dim == 4);
    CHECK(back.config.beta == 0.25);
    CHECK(back.config.hidden_dims == std::vector<int>{8, 6});
    CHECK(back.config.seed == 77);
    CHECK(back.stats.logmag_min == -7.5);
    CHECK(back.stats.logmag_max == 0.5);
    CHECK(nets_equal(back.net, params.net));
  }
  SUBCASE("truncated file is corruption") {
    auto bytes = [&] {
      std::ifstream in(path, std::ios::binary);
      return std::vector<char>((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    }();
    bytes.resize(bytes.size() / 2);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    CHECK_THROWS_AS(load_model(path), DataError);
  }
  SUBCASE("flipped byte is corruption") {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(40);
    char c;
    f.seekg(40);
    f.read(&c, 1);
    c ^= 0x40;
    f.seekp(40);
    f.write(&c, 1);
    f.close();
    CHECK_THROWS_AS(load_model(path), DataError);
  }
}

TEST_CASE("config validation rejects out-of-range fields") {
  TrainingConfig config;
  config.latent_dim = 0;
  CHECK_THROWS_AS(validate(config), UsageError);
  config.latent_dim = 2;
  config.beta = -0.5;
  CHECK_THROWS_AS(validate(config), UsageError);
  config.beta = 1.0;
  config.hidden_dims = {16, 0};
  CHECK_THROWS_AS(validate(config), UsageError);
}

}  // namespace qear
