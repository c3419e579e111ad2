// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

// Independent reference computations used only by the tests. Nothing here
// calls into the code paths it is used to check.

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace wsibench::oracle {

// O(n_pos * n_neg) pairwise counting; ties count one half.
inline double pairwise_auroc(std::span<const double> scores, std::span<const int> labels) {
  double wins = 0.0, ties = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] == 1) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) ties += 1.0;
    }
  }
  return (wins + 0.5 * ties) / pairs;
}

// Materialises every trial's gap for every row by recursion over seed
// assignments, then takes a two-pass mean and population std.
inline std::vector<std::pair<double, double>> brute_force_nds(const Eigen::MatrixXd& A) {
  const auto F = static_cast<std::size_t>(A.rows());
  const auto S = static_cast<std::size_t>(A.cols());
  std::vector<std::vector<double>> gaps(F);
  std::vector<std::size_t> pick(F);
  std::function<void(std::size_t)> rec = [&](std::size_t row) {
    if (row == F) {
      double best = A(0, static_cast<Eigen::Index>(pick[0]));
      for (std::size_t j = 1; j < F; ++j)
        best = std::max(best, A(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(pick[j])));
      for (std::size_t i = 0; i < F; ++i)
        gaps[i].push_back(best - A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(pick[i])));
      return;
    }
    for (std::size_t s = 0; s < S; ++s) {
      pick[row] = s;
      rec(row + 1);
    }
  };
  rec(0);
  std::vector<std::pair<double, double>> out;
  for (const auto& g : gaps) {
    double mean = 0.0;
    for (double d : g) mean += d;
    mean /= static_cast<double>(g.size());
    double ss = 0.0;
    for (double d : g) ss += (d - mean) * (d - mean);
    out.emplace_back(mean, std::sqrt(ss / static_cast<double>(g.size())));
  }
  return out;
}

// Central differences of a scalar function of a flat parameter vector.
inline double central_difference(const std::function<double()>& f, double& x, double h) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace wsibench::oracle

namespace wsibench::oracle {

// Two-variable NNLS by projected gradient descent; slow but independent.
inline Eigen::Vector2d projected_gradient_nnls(const Eigen::Matrix<double, 3, 2>& a, const Eigen::Vector3d& b,
                                               int iterations = 100000) {
  const Eigen::Matrix2d g = a.transpose() * a;
  const Eigen::Vector2d r = a.transpose() * b;
  const double step = 1.0 / g.trace();  // trace bounds the largest eigenvalue
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  for (int i = 0; i < iterations; ++i) x = (x - step * (g * x - r)).cwiseMax(0.0);
  return x;
}

}  // namespace wsibench::oracle
