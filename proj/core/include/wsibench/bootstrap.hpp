// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wsibench/rng.hpp"
#include "wsibench/score_model.hpp"
#include "wsibench/stats.hpp"

namespace wsibench {

// Two models evaluated on the same test set: one trained under condition A,
// one under condition B.
struct RunPair {
  std::string task;
  int seed = 1;
  PredictionSet a;
  PredictionSet b;
};

struct PairedRuns {
  std::string extractor;
  std::string condition_a;
  std::string condition_b;
  std::vector<RunPair> pairs;  // sorted by (task, seed)
};

enum class ConditionField { Augmentation, Magnification };

// Pairs runs of one extractor/model that differ only in the chosen field.
// Throws PairMismatch if a run lacks its partner or the test sets differ.
PairedRuns pair_runs(const std::vector<PredictionSet>& sets, const std::string& extractor, ModelKind model,
                     ConditionField field, const std::string& value_a, const std::string& value_b);

// Checks that a and b cover identical sample ids with identical labels.
void check_pair(const RunPair& pair);

// AUROC(a) - AUROC(b) on the multiset selected by `indices` (positions in
// the sample_id-sorted test set).
double paired_difference(const PredictionSet& a, const PredictionSet& b, std::span<const std::size_t> indices);

// n draws with replacement, redrawn until both classes appear. Throws
// DegenerateResample after max_retries failed draws.
std::vector<std::size_t> draw_resample(std::span<const int> labels, Rng& rng, int max_retries = 1000);

struct BootstrapOptions {
  int resamples = 25;
  std::uint64_t rng_seed = 0;
  int max_retries = 1000;
  unsigned threads = 1;
};

struct BootstrapDistribution {
  std::string extractor;
  std::string condition_a;
  std::string condition_b;
  std::size_t pairs = 0;
  int resamples = 0;
  // Pair-major: pairs[0] b=0..B-1, pairs[1] ...
  std::vector<double> differences;
  SpreadSummary summary;
};

// Every (task, seed, b) triple draws from its own child stream of rng_seed,
// so results do not depend on thread count or evaluation order.
BootstrapDistribution bootstrap_diff(const PairedRuns& runs, const BootstrapOptions& options = {});

struct BoxplotRecord {
  std::string extractor;
  std::string comparison;
  double median = 0.0;
  double box_low = 0.0;
  double box_high = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  double mean = 0.0;
  std::size_t n = 0;
};

BoxplotRecord summarize_boxplot(const BootstrapDistribution& dist);

}  // namespace wsibench
