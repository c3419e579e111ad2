// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include "wsibench/auroc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "wsibench/error.hpp"

namespace wsibench {

AurocValue auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    fail(ErrorKind::DimensionMismatch, "scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Ranks are 1-based; a tie block occupying ranks [lo+1, hi] gets the
  // midrank (lo+1+hi)/2. Doubled ranks stay integral, so the sum is exact.
  double doubled_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo + 1;
    while (hi < n && scores[order[hi]] == scores[order[lo]]) ++hi;
    const double doubled_mid = static_cast<double>(lo + 1 + hi);
    for (std::size_t k = lo; k < hi; ++k) {
      if (labels[order[k]] == 1) {
        doubled_rank_sum += doubled_mid;
        ++n_pos;
      }
    }
    lo = hi;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) fail(ErrorKind::SingleClassRun, "AUROC needs both classes");
  const double np = static_cast<double>(n_pos);
  const double u2 = doubled_rank_sum - np * (np + 1.0);
  return AurocValue{u2 / (2.0 * np * static_cast<double>(n_neg)), n_pos, n_neg};
}

AurocValue auroc(const PredictionSet& preds) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(preds.samples.size());
  labels.reserve(preds.samples.size());
  for (const auto& p : preds.samples) {
    scores.push_back(p.score);
    labels.push_back(p.label);
  }
  return auroc(scores, labels);
}

}  // namespace wsibench
