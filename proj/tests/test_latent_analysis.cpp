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

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "qear/errors.hpp"
#include "qear/rng.hpp"

namespace qear {
namespace {

std::vector<LatentPoint> random_cloud(int n, int d, Rng& rng, double spread = 1.0) {
  std::vector<LatentPoint> points(static_cast<std::size_t>(n));
  for (auto& p : points) {
    p.z = Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) { return spread * rng.normal(); });
    p.source_id = "cloud";
  }
  return points;
}

// Independent oracle for pca2: Eigen's solver on the same covariance, with
// the same sign convention applied afterwards.
Eigen::MatrixXd pca_oracle(const std::vector<LatentPoint>& points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  const Eigen::Index d = points.front().z.size();
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = points[static_cast<std::size_t>(i)].z;
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  REQUIRE(solver.info() == Eigen::Success);
  // Eigen sorts ascending; take the last two columns in descending order.
  Eigen::MatrixXd basis(d, 2);
  basis.col(0) = solver.eigenvectors().col(d - 1);
  basis.col(1) = solver.eigenvectors().col(d - 2);
  for (Eigen::Index c = 0; c < 2; ++c) {
    Eigen::Index imax = 0;
    basis.col(c).cwiseAbs().maxCoeff(&imax);
    if (basis(imax, c) < 0.0) basis.col(c) = -basis.col(c);
  }
  return x * basis;
}

}  // namespace

TEST_CASE("jacobi eigensolver matches Eigen's solver") {
  Rng rng(21);
  for (const int d : {2, 5, 17, 50}) {
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j <= i; ++j) {
        m(i, j) = rng.normal();
        m(j, i) = m(i, j);
      }
    }
    const JacobiEigen mine = jacobi_eigen_symmetric(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> reference(m);

    for (int k = 0; k < d; ++k) {
      // mine is descending, Eigen ascending
      CHECK(mine.values(k) ==
            doctest::Approx(reference.eigenvalues()(d - 1 - k)).epsilon(1e-10));
      const Eigen::VectorXd a = mine.vectors.col(k);
      const Eigen::VectorXd b = reference.eigenvectors().col(d - 1 - k);
      const double err = std::min((a - b).norm(), (a + b).norm());
      CHECK(err < 1e-8);
    }
    // residual check: A v = lambda v
    for (int k = 0; k < d; ++k) {
      CHECK((m * mine.vectors.col(k) - mine.values(k) * mine.vectors.col(k)).norm() < 1e-9);
    }
  }
}

TEST_CASE("pca2: points in a 2-D coordinate plane are recovered exactly") {
  Rng rng(22);
  std::vector<LatentPoint> points;
  Eigen::MatrixXd plane(40, 2);
  for (int i = 0; i < 40; ++i) {
    LatentPoint p;
    p.z = Eigen::VectorXd::Zero(5);
    p.z(1) = 3.0 * rng.normal();
    p.z(3) = 1.5 * rng.normal();
    plane(i, 0) = p.z(1);
    plane(i, 1) = p.z(3);
    points.push_back(std::move(p));
  }
  const Projection2D proj = pca2(points);
  CHECK(proj.method == "pca");
  CHECK(proj.explained_variance[0] + proj.explained_variance[1] ==
        doctest::Approx(1.0).epsilon(1e-12));

  // Distances are preserved up to the rotation/sign ambiguity.
  plane.rowwise() -= plane.colwise().mean();
  for (int i = 0; i < 40; i += 7) {
    for (int j = 0; j < 40; j += 5) {
      const double original = (plane.row(i) - plane.row(j)).norm();
      const double projected = (proj.coords.row(i) - proj.coords.row(j)).norm();
      CHECK(projected == doctest::Approx(original).epsilon(1e-9));
    }
  }
}

TEST_CASE("pca2 matches the brute-force eigendecomposition oracle") {
  Rng rng(23);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 10 + static_cast<int>(rng.uniform_int(190));
    const int d = 2 + static_cast<int>(rng.uniform_int(49));
    const auto points = random_cloud(n, d, rng);
    const Projection2D proj = pca2(points);
    const Eigen::MatrixXd expected = pca_oracle(points);

    for (Eigen::Index c = 0; c < 2; ++c) {
      const double err = std::min((proj.coords.col(c) - expected.col(c)).norm(),
                                  (proj.coords.col(c) + expected.col(c)).norm());
      CHECK(err < 1e-8 * std::max(1.0, expected.col(c).norm()));
    }
    CHECK(proj.explained_variance[0] >= proj.explained_variance[1]);
    CHECK(proj.explained_variance[1] >= 0.0);
    CHECK(proj.explained_variance[0] <= 1.0);
    CHECK(proj.explained_variance[0] + proj.explained_variance[1] <= 1.0 + 1e-12);
  }
}

TEST_CASE("pca2 rejects degenerate input") {
  std::vector<LatentPoint> identical(5);
  for (auto& p : identical) p.z = Eigen::Vector3d(1.0, 2.0, 3.0);
  CHECK_THROWS_AS(pca2(identical), NumericError);

  Rng rng(24);
  const auto two = random_cloud(2, 3, rng);
  CHECK_THROWS_AS(pca2(two), UsageError);
}

TEST_CASE("tsne affinities hit the perplexity target per point") {
  Rng rng(25);
  const auto points = random_cloud(120, 6, rng);
  Eigen::MatrixXd x(120, 6);
  for (int i = 0; i < 120; ++i) x.row(i) = points[static_cast<std::size_t>(i)].z;

  const double target = 25.0;
  const TsneAffinities aff = tsne_affinities(x, target);
  for (Eigen::Index i = 0; i < 120; ++i) {
    CHECK(std::abs(std::log(aff.achieved_perplexity(i)) - std::log(target)) < 1e-4);
  }
  // symmetrized, normalized, zero diagonal
  CHECK(aff.p.sum() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(aff.p.diagonal().isZero(0.0));
  CHECK((aff.p - aff.p.transpose()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("tsne2 separates two clusters and keeps neighborhoods") {
  Rng rng(26);
  std::vector<LatentPoint> points;
  for (int i = 0; i < 100; ++i) {
    LatentPoint p;
    p.z = Eigen::VectorXd::NullaryExpr(5, [&](Eigen::Index) { return 0.3 * rng.normal(); });
    p.z(0) += i < 50 ? -5.0 : 5.0;
    p.source_id = i < 50 ? "a" : "b";
    points.push_back(std::move(p));
  }

  TsneOptions options;
  options.perplexity = 15.0;
  options.iterations = 600;
  options.seed = 7;
  const Projection2D proj = tsne2(points, options);
  CHECK(proj.method == "tsne");
  CHECK(proj.final_objective >= 0.0);

  // 10-nearest-neighbor co-membership in the embedding.
  int preserved = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<std::pair<double, int>> dist;
    for (int j = 0; j < 100; ++j) {
      if (j == i) continue;
      dist.push_back({(proj.coords.row(i) - proj.coords.row(j)).squaredNorm(), j});
    }
    std::partial_sort(dist.begin(), dist.begin() + 10, dist.end());
    int same = 0;
    for (int k = 0; k < 10; ++k) {
      if ((dist[static_cast<std::size_t>(k)].second < 50) == (i < 50)) ++same;
    }
    if (same == 10) ++preserved;
  }
  CHECK(preserved >= 90);

  SUBCASE("same seed gives identical coordinates") {
    const Projection2D again = tsne2(points, options);
    CHECK(again.coords == proj.coords);
  }
}

TEST_CASE("tsne2: duplicated points embed on top of each other") {
  Rng rng(27);
  auto points = random_cloud(60, 4, rng);
  points[10].z = points[42].z;  // exact duplicate pair

  TsneOptions options;
  options.perplexity = 10.0;
  options.iterations = 500;
  options.seed = 3;
  const Projection2D proj = tsne2(points, options);

  std::vector<double> all_pairs;
  for (int i = 0; i < 60; ++i) {
    for (int j = i + 1; j < 60; ++j) {
      all_pairs.push_back((proj.coords.row(i) - proj.coords.row(j)).norm());
    }
  }
  std::sort(all_pairs.begin(), all_pairs.end());
  const double pair_dist = (proj.coords.row(10) - proj.coords.row(42)).norm();
  const double cutoff = all_pairs[static_cast<std::size_t>(0.01 * (all_pairs.size() - 1))];
  CHECK(pair_dist <= cutoff);
}

TEST_CASE("tsne2: objective decreases after the exaggeration phase") {
  Rng rng(28);
  const auto points = random_cloud(90, 5, rng);
  TsneOptions options;
  options.perplexity = 12.0;
  options.iterations = 1000;
  options.seed = 11;
  const Projection2D proj = tsne2(points, options);

  double at_300 = -1.0, at_1000 = -1.0;
  for (const auto& [iter, kl] : proj.objective_trace) {
    if (iter == 300) at_300 = kl;
    if (iter == 1000) at_1000 = kl;
  }
  REQUIRE(at_300 > 0.0);
  REQUIRE(at_1000 > 0.0);
  CHECK(at_1000 <= at_300);
}

TEST_CASE("tsne2 rejects infeasible perplexity") {
  Rng rng(29);
  const auto points = random_cloud(10, 3, rng);
  TsneOptions options;
  options.perplexity = 30.0;
  CHECK_THROWS_AS(tsne2(points, options), UsageError);
}

}  // namespace qear
