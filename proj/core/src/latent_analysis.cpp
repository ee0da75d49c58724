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

#include "qear/latent_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "qear/errors.hpp"
#include "qear/rng.hpp"

namespace qear {
namespace {

constexpr double kAffinityFloor = 1e-12;
constexpr int kExaggerationIters = 250;
constexpr double kExaggeration = 12.0;

// Step size scaled to the sample count so the strongest pair attraction
// stays contractive during the exaggeration phase; n/5 recovers the usual
// 200 at n = 1000 and keeps small corpora from overshooting.
double tsne_step(Eigen::Index n) {
  return std::max(10.0, static_cast<double>(n) / 5.0);
}

Eigen::MatrixXd points_matrix(std::span<const LatentPoint> points) {
  if (points.empty()) throw UsageError("no latent points");
  const auto d = points.front().z.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(points.size()), d);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].z.size() != d) throw DataError("latent dimensions differ across points");
    if (!points[i].z.allFinite()) throw DataError("non-finite latent point");
    x.row(static_cast<Eigen::Index>(i)) = points[i].z.transpose();
  }
  return x;
}

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  const Eigen::VectorXd norms = x.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * x * x.transpose()).colwise() + norms;
  d2.rowwise() += norms.transpose();
  return d2.cwiseMax(0.0);
}

// KL(P || Q) over distinct pairs for the current embedding.
double tsne_objective(const Eigen::MatrixXd& p, const Eigen::MatrixXd& y) {
  const Eigen::Index n = y.rows();
  Eigen::MatrixXd w = (1.0 + squared_distances(y).array()).inverse().matrix();
  w.diagonal().setZero();
  const double sum_w = w.sum();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double q = std::max(w(i, j) / sum_w, kAffinityFloor);
      kl += p(i, j) * std::log(p(i, j) / q);
    }
  }
  return kl;
}

}  // namespace

JacobiEigen jacobi_eigen_symmetric(Eigen::MatrixXd a) {
  if (a.rows() != a.cols()) throw UsageError("jacobi: matrix must be square");
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    }
    if (std::sqrt(off) <= 1e-15 * scale * static_cast<double>(n)) break;

    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        const double app = a(p, p), aqq = a(q, q);
        a(p, p) = c * c * app - 2.0 * s * c * apq + s * s * aqq;
        a(q, q) = s * s * app + 2.0 * s * c * apq + c * c * aqq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (i == p || i == q) continue;
          const double aip = a(i, p), aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(p, i) = a(i, p);
          a(i, q) = s * aip + c * aiq;
          a(q, i) = a(i, q);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
          const double vip = v(i, p), viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&a](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

  JacobiEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

std::vector<LatentPoint> embed_corpus(const ModelParams& params,
                                      std::span<const AudioSegment> segments,
                                      Granularity granularity,
                                      const AnalysisConfig& config) {
  std::vector<LatentPoint> points;
  for (const AudioSegment& segment : segments) {
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
    if (granularity == Granularity::kSegment) {
      points.push_back({mu.rowwise().mean(), segment.source_id, false});
    } else {
      for (Eigen::Index c = 0; c < mu.cols(); ++c) {
        points.push_back({mu.col(c), segment.source_id, false});
      }
    }
  }
  return points;
}

Projection2D pca2(std::span<const LatentPoint> points) {
  if (points.size() < 3) throw UsageError("pca2: need at least 3 points");
  Eigen::MatrixXd x = points_matrix(points);
  if (x.cols() < 2) throw UsageError("pca2: need latent dimension >= 2");

  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov =
      x.transpose() * x / static_cast<double>(x.rows() - 1);
  const double total_var = cov.trace();
  if (!(total_var > 0.0)) {
    throw NumericError("pca2: degenerate data (zero variance)");
  }

  JacobiEigen eig = jacobi_eigen_symmetric(cov);
  Eigen::MatrixXd basis = eig.vectors.leftCols(2);
  for (Eigen::Index c = 0; c < 2; ++c) {
    Eigen::Index imax = 0;
    basis.col(c).cwiseAbs().maxCoeff(&imax);
    if (basis(imax, c) < 0.0) basis.col(c) = -basis.col(c);
  }

  Projection2D out;
  out.method = "pca";
  out.coords = x * basis;
  const double denom = eig.values.cwiseMax(0.0).sum();
  out.explained_variance = {std::max(eig.values(0), 0.0) / denom,
                            std::max(eig.values(1), 0.0) / denom};
  return out;
}

TsneAffinities tsne_affinities(const Eigen::MatrixXd& x, double perplexity) {
  const Eigen::Index n = x.rows();
  if (!(perplexity > 0.0)) throw UsageError("tsne: perplexity must be positive");
  if (static_cast<double>(n) < 3.0 * perplexity) {
    throw UsageError("tsne: perplexity infeasible for " + std::to_string(n) + " points");
  }
  const Eigen::MatrixXd d2 = squared_distances(x);
  const double target = std::log(perplexity);

  TsneAffinities out;
  out.p = Eigen::MatrixXd::Zero(n, n);
  out.achieved_perplexity.resize(n);

  Eigen::VectorXd row(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0;
    double beta_min = -std::numeric_limits<double>::infinity();
    double beta_max = std::numeric_limits<double>::infinity();
    double entropy = 0.0;
    for (int step = 0; step < 50; ++step) {
      double sum = 0.0, weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) {
          row(j) = 0.0;
          continue;
        }
        row(j) = std::exp(-beta * d2(i, j));
        sum += row(j);
        weighted += d2(i, j) * row(j);
      }
      entropy = std::log(sum) + beta * weighted / sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0.0) {  // too spread out, sharpen
        beta_min = beta;
        beta = std::isinf(beta_max) ? beta * 2.0 : 0.5 * (beta + beta_max);
      } else {
        beta_max = beta;
        beta = std::isinf(beta_min) ? beta * 0.5 : 0.5 * (beta + beta_min);
      }
    }
    const double sum = row.sum();
    out.p.row(i) = (row / sum).transpose();
    out.achieved_perplexity(i) = std::exp(entropy);
  }

  const Eigen::MatrixXd symmetric = out.p + out.p.transpose();
  out.p = (symmetric / (2.0 * static_cast<double>(n))).cwiseMax(kAffinityFloor);
  out.p.diagonal().setZero();
  return out;
}

Projection2D tsne2(std::span<const LatentPoint> points, const TsneOptions& options) {
  if (points.size() < 3) throw UsageError("tsne2: need at least 3 points");
  if (options.iterations < 1) throw UsageError("tsne2: iterations must be >= 1");
  const Eigen::MatrixXd x = points_matrix(points);
  const Eigen::Index n = x.rows();

  TsneAffinities aff = tsne_affinities(x, options.perplexity);
  // Rebuild the floor-clamped matrix with zero diagonal for the objective.
  Eigen::MatrixXd p = aff.p;

  Rng rng(options.seed);
  Eigen::MatrixXd y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < 2; ++c) y(i, c) = rng.normal(0.0, 1e-4);
  }
  Eigen::MatrixXd inc = Eigen::MatrixXd::Zero(n, 2);
  // Per-coordinate step gains, grown on consistent sign and shrunk on sign
  // flips; damps the oscillation of strongly attracted pairs.
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);

  Projection2D out;
  out.method = "tsne";

  const double step = tsne_step(n);
  for (int iter = 1; iter <= options.iterations; ++iter) {
    const double exaggeration = iter <= kExaggerationIters ? kExaggeration : 1.0;
    const double momentum = iter <= kExaggerationIters ? 0.5 : 0.8;

    Eigen::MatrixXd w = (1.0 + squared_distances(y).array()).inverse().matrix();
    w.diagonal().setZero();
    const double sum_w = w.sum();

    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double q = std::max(w(i, j) / sum_w, kAffinityFloor);
        const double coeff = 4.0 * (exaggeration * p(i, j) - q) * w(i, j);
        grad(i, 0) += coeff * (y(i, 0) - y(j, 0));
        grad(i, 1) += coeff * (y(i, 1) - y(j, 1));
      }
    }

    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < 2; ++c) {
        const bool same_sign = (grad(i, c) > 0.0) == (inc(i, c) > 0.0);
        gains(i, c) = same_sign ? std::max(gains(i, c) * 0.8, 0.01) : gains(i, c) + 0.2;
        inc(i, c) = momentum * inc(i, c) - step * gains(i, c) * grad(i, c);
      }
    }
    y += inc;
    y.rowwise() -= y.colwise().mean();

    if (iter % 25 == 0 || iter == options.iterations || iter == 300) {
      out.objective_trace.emplace_back(iter, tsne_objective(p, y));
    }
  }

  out.coords = y;
  out.final_objective = out.objective_trace.back().second;
  return out;
}

void save_projection_csv(const Projection2D& projection,
                         std::span<const LatentPoint> points,
                         const std::filesystem::path& path) {
  if (static_cast<std::size_t>(projection.coords.rows()) != points.size()) {
    throw DataError("save_projection_csv: point count mismatch");
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "point_id,source_id,is_anomaly,x,y,method\n";
  char line[320];
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::snprintf(line, sizeof(line), "%zu,%s,%s,%.17g,%.17g,%s\n", i,
                  points[i].source_id.c_str(), points[i].is_anomaly ? "true" : "false",
                  projection.coords(static_cast<Eigen::Index>(i), 0),
                  projection.coords(static_cast<Eigen::Index>(i), 1),
                  projection.method.c_str());
    out << line;
  }
}

}  // namespace qear
