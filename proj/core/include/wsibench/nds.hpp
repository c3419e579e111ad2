// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wsibench/score_model.hpp"
#include "wsibench/stats.hpp"

namespace wsibench {

// Normalised differential AUROC score.
//
// A trial draws one seed per row of a ScoreGrid. Within a trial, row i scores
// D_i = max_j A[j][s_j] - A[i][s_i], the gap to the best row of that trial.
// The NDS of row i is the mean of D_i over all S^F trials; the reported
// spread is the population standard deviation over the same trials.

struct ExtractorScore {
  std::string extractor;
  double mean = 0.0;
  double stddev = 0.0;
};

struct NdsResult {
  std::string task;
  ModelKind model = ModelKind::AttMil;
  Augmentation augmentation = Augmentation::None;
  Magnification magnification = Magnification::Low;
  std::vector<ExtractorScore> per_extractor;
  // S^F as a real; exact while below 2^53.
  double trial_count = 0.0;

  const ExtractorScore& at(const std::string& extractor) const;
};

struct EnumerateOptions {
  std::uint64_t max_trials = 100'000'000;
  // Trials per Welford batch; 0 runs the whole space as a single batch.
  std::uint64_t chunk_size = 1 << 16;
  unsigned threads = 1;
};

// S^F, or UINT64_MAX when it does not fit.
std::uint64_t trial_space_size(const ScoreGrid& grid) noexcept;

// Accumulates D_i for the trials with linear index in [begin, end). Trial t
// assigns seed digit (t / S^i) % S to row i. One accumulator per row.
std::vector<WelfordAccumulator> enumerate_trials(const ScoreGrid& grid, std::uint64_t begin,
                                                 std::uint64_t end);

// Brute force over all S^F trials with batched Welford accumulation; batches
// are merged left to right in trial order regardless of thread count.
// Throws EnumerationTooLarge above options.max_trials.
NdsResult nds_enumerate(const ScoreGrid& grid, const EnumerateOptions& options = {});

// Closed form over the distribution of the competitor maximum. Runs in
// O(F^2 S^2) time and never enumerates trials.
NdsResult nds_exact(const ScoreGrid& grid);

struct TaskAverageScore {
  std::string extractor;
  double mean_of_means = 0.0;
  // sqrt(mean of per-task variances).
  double pooled_std = 0.0;
  // Population std of the per-task means.
  double across_task_std = 0.0;
  std::vector<double> task_means;
  std::vector<double> task_stds;
};

struct TaskAverage {
  std::vector<std::string> tasks;
  std::vector<TaskAverageScore> per_extractor;
};

// Throws ExtractorSetMismatch unless every result covers the same rows.
TaskAverage task_average(const std::vector<NdsResult>& results);

// Stacks grids that share task/model/S into one grid whose rows are labelled
// "extractor@magnification".
ScoreGrid merge_magnification_grids(const std::vector<ScoreGrid>& grids);
NdsResult cross_config_nds(const std::vector<ScoreGrid>& grids);

// One row per aggregation model, taken from each grid's row for `extractor`.
ScoreGrid induced_model_grid(const std::vector<ScoreGrid>& grids_by_model, const std::string& extractor);
NdsResult downstream_model_nds(const std::vector<ScoreGrid>& grids_by_model, const std::string& extractor);

}  // namespace wsibench
