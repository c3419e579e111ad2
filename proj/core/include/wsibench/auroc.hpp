// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

#include "wsibench/score_model.hpp"

namespace wsibench {

struct AurocValue {
  double value = 0.5;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

// Mann-Whitney U / (n_pos * n_neg) with midranks, i.e. a tied
// positive/negative pair counts 1/2. Labels are 0/1. O(n log n).
// Throws SingleClassRun when either class is absent.
AurocValue auroc(std::span<const double> scores, std::span<const int> labels);
AurocValue auroc(const PredictionSet& preds);

}  // namespace wsibench
