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

#include "qear/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "qear/errors.hpp"
#include "qear/metrics.hpp"

namespace qear {
namespace {

// One pass over a segment: segment-mean latent plus the mean feature-space
// reconstruction MSE (posterior-mean encoding, no synthesis).
struct SegmentEmbedding {
  Eigen::VectorXd z;
  double recon_mse = 0.0;
};

SegmentEmbedding embed_segment(const ModelParams& params, const AudioSegment& segment,
                               const AnalysisConfig& config) {
  const MclTensor tensor = analyze(segment, config);
  const std::vector<FeatureFrame> frames = to_features(tensor, params.stats);
  const auto dim = static_cast<Eigen::Index>(params.input_dim);
  Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(frames.size()));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(frames[i].values.data(), dim);
  }
  const auto [mu, logvar] = encode_batch(params, x);
  (void)logvar;
  const Eigen::MatrixXd x_hat = decode_batch(params, mu);

  SegmentEmbedding out;
  out.z = mu.rowwise().mean();
  out.recon_mse = (x - x_hat).squaredNorm() /
                  static_cast<double>(x.rows() * x.cols());
  return out;
}

PercentileTable table_of(std::vector<double> values) {
  PercentileTable t;
  t.p50 = percentile(values, 50.0);
  t.p90 = percentile(values, 90.0);
  t.p95 = percentile(values, 95.0);
  t.p99 = percentile(values, 99.0);
  return t;
}

std::vector<double> mahal_values(std::span<const AnomalyScore> scores) {
  std::vector<double> v;
  v.reserve(scores.size());
  for (const AnomalyScore& s : scores) v.push_back(s.mahalanobis);
  return v;
}

std::vector<double> recon_values(std::span<const AnomalyScore> scores) {
  std::vector<double> v;
  v.reserve(scores.size());
  for (const AnomalyScore& s : scores) v.push_back(s.recon_mse);
  return v;
}

}  // namespace

double mahalanobis_distance(const Eigen::VectorXd& mean, const Eigen::MatrixXd& reg_cov,
                            const Eigen::VectorXd& z) {
  const Eigen::LLT<Eigen::MatrixXd> llt(reg_cov);
  if (llt.info() != Eigen::Success) {
    throw NumericError("mahalanobis: covariance is not positive definite");
  }
  const Eigen::VectorXd delta = z - mean;
  return std::sqrt(delta.dot(llt.solve(delta)));
}

ReferenceStats fit_reference_latents(std::span<const Eigen::VectorXd> latents) {
  if (latents.empty()) throw DataError("fit_reference: no latents");
  const Eigen::Index d = latents.front().size();
  if (latents.size() < static_cast<std::size_t>(d) + 2) {
    throw DataError("fit_reference: need at least latent_dim + 2 latent vectors");
  }

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const Eigen::VectorXd& z : latents) {
    if (z.size() != d) throw DataError("fit_reference: latent dimensions differ");
    mean += z;
  }
  mean /= static_cast<double>(latents.size());

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const Eigen::VectorXd& z : latents) {
    const Eigen::VectorXd delta = z - mean;
    cov.noalias() += delta * delta.transpose();
  }
  cov /= static_cast<double>(latents.size() - 1);

  ReferenceStats ref;
  // Absolute floor keeps the matrix positive definite even for a fully
  // degenerate cloud (identical segments -> zero covariance).
  ref.ridge = std::max(1e-6 * cov.trace() / static_cast<double>(d), 1e-12);
  ref.mean = std::move(mean);
  ref.reg_covariance = cov + ref.ridge * Eigen::MatrixXd::Identity(d, d);
  if (Eigen::LLT<Eigen::MatrixXd>(ref.reg_covariance).info() != Eigen::Success) {
    throw NumericError("fit_reference: regularized covariance is not positive definite");
  }
  return ref;
}

ReferenceStats fit_reference(const ModelParams& params,
                             std::span<const AudioSegment> segments,
                             const AnalysisConfig& config) {
  const auto d = static_cast<std::size_t>(params.config.latent_dim);
  if (segments.size() < d + 2) {
    throw DataError("fit_reference: need at least latent_dim + 2 segments (" +
                    std::to_string(d + 2) + "), got " + std::to_string(segments.size()));
  }

  std::vector<Eigen::VectorXd> latents;
  std::vector<double> recon;
  latents.reserve(segments.size());
  recon.reserve(segments.size());
  for (const AudioSegment& segment : segments) {
    SegmentEmbedding e = embed_segment(params, segment, config);
    latents.push_back(std::move(e.z));
    recon.push_back(e.recon_mse);
  }

  ReferenceStats ref = fit_reference_latents(latents);
  ref.recon_error = table_of(recon);

  std::vector<double> mahal;
  mahal.reserve(latents.size());
  for (const Eigen::VectorXd& z : latents) {
    mahal.push_back(mahalanobis_distance(ref.mean, ref.reg_covariance, z));
  }
  ref.mahal = table_of(std::move(mahal));
  return ref;
}

AnomalyScore score_segment(const ModelParams& params, const ReferenceStats& ref,
                           const AudioSegment& segment, const AnalysisConfig& config) {
  const SegmentEmbedding e = embed_segment(params, segment, config);
  AnomalyScore score;
  score.source_id = segment.source_id;
  score.index = segment.index;
  score.recon_mse = e.recon_mse;
  score.mahalanobis = mahalanobis_distance(ref.mean, ref.reg_covariance, e.z);
  score.recon_above_p99 = score.recon_mse > ref.recon_error.p99;
  score.mahal_above_p99 = score.mahalanobis > ref.mahal.p99;
  return score;
}

DetectionSummary evaluate_detection(std::span<const AnomalyScore> normal,
                                    std::span<const AnomalyScore> anomalous) {
  if (normal.empty() || anomalous.empty()) {
    throw UsageError("evaluate_detection: both score lists must be non-empty");
  }
  DetectionSummary summary;
  const auto normal_mahal = mahal_values(normal);
  const auto anomalous_mahal = mahal_values(anomalous);
  summary.auc = rank_auc(normal_mahal, anomalous_mahal);
  summary.normal_mahal = table_of(normal_mahal);
  summary.anomalous_mahal = table_of(anomalous_mahal);
  summary.normal_recon = table_of(recon_values(normal));
  summary.anomalous_recon = table_of(recon_values(anomalous));
  return summary;
}

}  // namespace qear
