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

#ifndef QEAR_LATENT_ANALYSIS_HPP_
#define QEAR_LATENT_ANALYSIS_HPP_

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qear/vae.hpp"

namespace qear {

/// One embedded point: the posterior mean of a frame, or the mean posterior
/// mean over a segment's frames. `is_anomaly` is evaluation metadata attached
/// post hoc by provenance; it never influences the embedding.
struct LatentPoint {
  Eigen::VectorXd z;
  std::string source_id;
  bool is_anomaly = false;
};

enum class Granularity { kFrame, kSegment };

std::vector<LatentPoint> embed_corpus(const ModelParams& params,
                                      std::span<const AudioSegment> segments,
                                      Granularity granularity,
                                      const AnalysisConfig& config);

struct Projection2D {
  Eigen::MatrixXd coords;  // n x 2
  std::string method;      // "pca" or "tsne"
  std::array<double, 2> explained_variance{0.0, 0.0};   // pca only
  double final_objective = 0.0;                         // tsne: final KL(P||Q)
  std::vector<std::pair<int, double>> objective_trace;  // tsne: (iteration, KL)
};

/// Principal component projection onto the top-2 eigenvectors of the latent
/// covariance, computed with cyclic Jacobi rotations. Sign convention: each
/// component's largest-magnitude entry is positive. Throws NumericError on
/// zero-variance data, UsageError when n < 3 or d < 2.
Projection2D pca2(std::span<const LatentPoint> points);

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  std::uint64_t seed = 1234;
};

/// Exact O(n^2) t-SNE: per-point Gaussian bandwidths found by bisection to
/// the perplexity target (tolerance 1e-5 in log-perplexity, <= 50 steps),
/// symmetrized affinities, Student-t low-dimensional kernel, and plain
/// momentum gradient descent (0.5, then 0.8 after iteration 250) with x12
/// early exaggeration for the first 250 iterations. Deterministic per seed.
Projection2D tsne2(std::span<const LatentPoint> points, const TsneOptions& options = {});

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations;
/// eigenvalues in descending order, eigenvectors as columns.
struct JacobiEigen {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};
JacobiEigen jacobi_eigen_symmetric(Eigen::MatrixXd a);

/// High-dimensional affinities used by tsne2, exposed with the per-point
/// achieved perplexities so the bisection can be verified. `x` holds one
/// point per row.
struct TsneAffinities {
  Eigen::MatrixXd p;                    // symmetrized, sums to ~1
  Eigen::VectorXd achieved_perplexity;  // per point, before symmetrization
};
TsneAffinities tsne_affinities(const Eigen::MatrixXd& x, double perplexity);

/// CSV: point_id, source_id, is_anomaly, x, y, method. %.17g formatting.
void save_projection_csv(const Projection2D& projection,
                         std::span<const LatentPoint> points,
                         const std::filesystem::path& path);

}  // namespace qear

#endif  // QEAR_LATENT_ANALYSIS_HPP_
