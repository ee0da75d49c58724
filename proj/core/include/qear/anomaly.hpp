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

#ifndef QEAR_ANOMALY_HPP_
#define QEAR_ANOMALY_HPP_

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "qear/vae.hpp"

namespace qear {

struct PercentileTable {
  double p50 = 0.0;
  double p90 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
};

/// Normal-operation reference fitted on training segments: mean and
/// ridge-regularized covariance of segment-mean latents, plus score
/// percentiles used for flag thresholds.
struct ReferenceStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd reg_covariance;  // covariance + ridge * I, SPD
  double ridge = 0.0;              // 1e-6 * trace(cov) / d
  PercentileTable recon_error;     // feature-space MSE over training segments
  PercentileTable mahal;           // Mahalanobis over training segments
};

struct AnomalyScore {
  std::string source_id;
  int index = 0;
  double recon_mse = 0.0;     // mean feature-space MSE over frames
  double mahalanobis = 0.0;   // sqrt((z-m)' (cov+ridge I)^-1 (z-m)), segment-mean z
  bool recon_above_p99 = false;
  bool mahal_above_p99 = false;
};

/// sqrt((z - mean)' reg_cov^-1 (z - mean)) via Cholesky. Throws NumericError
/// if reg_cov is not positive definite.
double mahalanobis_distance(const Eigen::VectorXd& mean, const Eigen::MatrixXd& reg_cov,
                            const Eigen::VectorXd& z);

/// Mean and ridge-regularized covariance of raw latent vectors; percentile
/// tables are left empty. Needs at least d + 2 vectors.
ReferenceStats fit_reference_latents(std::span<const Eigen::VectorXd> latents);

/// Full reference: embeds the segments (segment-mean posterior means),
/// fits the Gaussian and records recon-error and Mahalanobis percentiles.
ReferenceStats fit_reference(const ModelParams& params,
                             std::span<const AudioSegment> segments,
                             const AnalysisConfig& config);

/// Deterministic score of one segment (posterior-mean encoding).
AnomalyScore score_segment(const ModelParams& params, const ReferenceStats& ref,
                           const AudioSegment& segment, const AnalysisConfig& config);

struct DetectionSummary {
  double auc = 0.0;  // rank-based, over the Mahalanobis score, ties 1/2
  PercentileTable normal_mahal, anomalous_mahal;
  PercentileTable normal_recon, anomalous_recon;
};

DetectionSummary evaluate_detection(std::span<const AnomalyScore> normal,
                                    std::span<const AnomalyScore> anomalous);

}  // namespace qear

#endif  // QEAR_ANOMALY_HPP_
