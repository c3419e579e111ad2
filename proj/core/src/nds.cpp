// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include "wsibench/nds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

#include "wsibench/error.hpp"

namespace wsibench {

const ExtractorScore& NdsResult::at(const std::string& extractor) const {
  for (const auto& e : per_extractor)
    if (e.extractor == extractor) return e;
  fail(ErrorKind::ExtractorSetMismatch, "no row '" + extractor + "' in NDS result");
}

namespace {

NdsResult result_shell(const ScoreGrid& grid) {
  NdsResult r;
  r.task = grid.task;
  r.model = grid.model;
  r.augmentation = grid.augmentation;
  r.magnification = grid.magnification;
  r.trial_count = std::pow(static_cast<double>(grid.num_seeds()), static_cast<double>(grid.num_extractors()));
  return r;
}

}  // namespace

std::uint64_t trial_space_size(const ScoreGrid& grid) noexcept {
  const std::uint64_t S = grid.num_seeds();
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < grid.num_extractors(); ++i) {
    if (S != 0 && total > std::numeric_limits<std::uint64_t>::max() / S)
      return std::numeric_limits<std::uint64_t>::max();
    total *= S;
  }
  return total;
}

std::vector<WelfordAccumulator> enumerate_trials(const ScoreGrid& grid, std::uint64_t begin,
                                                 std::uint64_t end) {
  const std::size_t F = grid.num_extractors();
  const std::size_t S = grid.num_seeds();
  std::vector<WelfordAccumulator> acc(F);
  if (begin >= end) return acc;

  std::vector<double> values(F * S);
  for (std::size_t i = 0; i < F; ++i)
    for (std::size_t s = 0; s < S; ++s)
      values[i * S + s] = grid.auroc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s));

  std::vector<std::size_t> digit(F);
  std::uint64_t t = begin;
  for (std::size_t i = 0; i < F; ++i) {
    digit[i] = static_cast<std::size_t>(t % S);
    t /= S;
  }

  std::vector<double> drawn(F);
  for (std::uint64_t trial = begin; trial < end; ++trial) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < F; ++i) {
      drawn[i] = values[i * S + digit[i]];
      best = std::max(best, drawn[i]);
    }
    for (std::size_t i = 0; i < F; ++i) acc[i].push(best - drawn[i]);
    for (std::size_t i = 0; i < F; ++i) {
      if (++digit[i] < S) break;
      digit[i] = 0;
    }
  }
  return acc;
}

NdsResult nds_enumerate(const ScoreGrid& grid, const EnumerateOptions& options) {
  validate(grid);
  const std::uint64_t total = trial_space_size(grid);
  if (total > options.max_trials)
    fail(ErrorKind::EnumerationTooLarge,
         std::to_string(grid.num_seeds()) + "^" + std::to_string(grid.num_extractors()) +
             " trials exceed the enumeration cap of " + std::to_string(options.max_trials) +
             "; use the exact method");

  const std::uint64_t chunk = options.chunk_size == 0 ? total : options.chunk_size;
  const std::uint64_t n_chunks = (total + chunk - 1) / chunk;
  std::vector<std::vector<WelfordAccumulator>> partial(n_chunks);

  auto run_chunk = [&](std::uint64_t c) {
    const std::uint64_t b = c * chunk;
    partial[c] = enumerate_trials(grid, b, std::min(total, b + chunk));
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(n_chunks)));
  if (threads == 1) {
    for (std::uint64_t c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::uint64_t c = w; c < n_chunks; c += threads) run_chunk(c);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<WelfordAccumulator> acc(grid.num_extractors());
  for (const auto& part : partial)
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i].merge(part[i]);

  NdsResult r = result_shell(grid);
  for (std::size_t i = 0; i < acc.size(); ++i)
    r.per_extractor.push_back({grid.extractors[i], acc[i].mean(), acc[i].stddev()});
  return r;
}

NdsResult nds_exact(const ScoreGrid& grid) {
  validate(grid);
  const std::size_t F = grid.num_extractors();
  const std::size_t S = grid.num_seeds();
  const double inv_s = 1.0 / static_cast<double>(S);

  // Distinct grid values, ascending. Every CDF below is evaluated on them.
  std::vector<double> levels(grid.auroc.data(), grid.auroc.data() + grid.auroc.size());
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  const std::size_t V = levels.size();

  // cdf[j][k] = P(X_j <= levels[k]) with X_j uniform over row j.
  std::vector<std::vector<double>> cdf(F, std::vector<double>(V));
  for (std::size_t j = 0; j < F; ++j) {
    std::vector<double> row(S);
    for (std::size_t s = 0; s < S; ++s)
      row[s] = grid.auroc(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(s));
    std::sort(row.begin(), row.end());
    std::size_t count = 0;
    for (std::size_t k = 0; k < V; ++k) {
      while (count < S && row[count] <= levels[k]) ++count;
      cdf[j][k] = static_cast<double>(count) * inv_s;
    }
  }

  // prefix[j][k] = prod_{j' < j} cdf[j'][k], suffix[j][k] = prod_{j' > j}.
  std::vector<std::vector<double>> prefix(F + 1, std::vector<double>(V, 1.0));
  std::vector<std::vector<double>> suffix(F + 1, std::vector<double>(V, 1.0));
  for (std::size_t j = 0; j < F; ++j)
    for (std::size_t k = 0; k < V; ++k) prefix[j + 1][k] = prefix[j][k] * cdf[j][k];
  for (std::size_t j = F; j-- > 0;)
    for (std::size_t k = 0; k < V; ++k) suffix[j][k] = suffix[j + 1][k] * cdf[j][k];

  NdsResult r = result_shell(grid);
  std::vector<double> below(V), pmf(V);
  for (std::size_t i = 0; i < F; ++i) {
    // Law of the competitor maximum M = max_{j != i} X_j. With no
    // competitors M is -inf, which the empty product maps to the lowest level
    // where it contributes a zero gap.
    for (std::size_t k = 0; k < V; ++k) {
      below[k] = prefix[i][k] * suffix[i + 1][k];
      pmf[k] = below[k] - (k ? below[k - 1] : 0.0);
    }

    // D_i = max(0, M - X_i). Only competitor levels strictly above the drawn
    // value contribute, so a dominant row sums exact zeros.
    std::vector<std::size_t> first_above(S);
    double mean = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      const double a = grid.auroc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s));
      first_above[s] = static_cast<std::size_t>(std::upper_bound(levels.begin(), levels.end(), a) - levels.begin());
      double gap = 0.0;
      for (std::size_t k = first_above[s]; k < V; ++k) gap += pmf[k] * (levels[k] - a);
      mean += gap;
    }
    mean *= inv_s;

    // Centered second moment; avoids E[D^2] - E[D]^2 cancellation.
    double var = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      const double a = grid.auroc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s));
      const std::size_t k0 = first_above[s];
      const double p_zero = k0 ? below[k0 - 1] : 0.0;
      double term = p_zero * mean * mean;
      for (std::size_t k = k0; k < V; ++k) {
        const double dev = (levels[k] - a) - mean;
        term += pmf[k] * dev * dev;
      }
      var += term;
    }
    var = std::max(0.0, var * inv_s);
    r.per_extractor.push_back({grid.extractors[i], mean, std::sqrt(var)});
  }
  return r;
}

TaskAverage task_average(const std::vector<NdsResult>& results) {
  if (results.empty()) fail(ErrorKind::ExtractorSetMismatch, "no NDS results to average");
  TaskAverage avg;
  std::vector<std::string> names;
  for (const auto& e : results.front().per_extractor) names.push_back(e.extractor);
  std::vector<std::string> sorted = names;
  std::sort(sorted.begin(), sorted.end());
  for (const auto& r : results) {
    std::vector<std::string> these;
    for (const auto& e : r.per_extractor) these.push_back(e.extractor);
    std::sort(these.begin(), these.end());
    if (these != sorted)
      fail(ErrorKind::ExtractorSetMismatch, "task " + r.task + " covers a different extractor set");
    avg.tasks.push_back(r.task);
  }
  const double T = static_cast<double>(results.size());
  for (const auto& name : names) {
    TaskAverageScore s;
    s.extractor = name;
    double sum = 0.0, var_sum = 0.0;
    for (const auto& r : results) {
      const auto& e = r.at(name);
      s.task_means.push_back(e.mean);
      s.task_stds.push_back(e.stddev);
      sum += e.mean;
      var_sum += e.stddev * e.stddev;
    }
    s.mean_of_means = sum / T;
    s.pooled_std = std::sqrt(var_sum / T);
    WelfordAccumulator across;
    for (double m : s.task_means) across.push(m);
    s.across_task_std = across.stddev();
    avg.per_extractor.push_back(std::move(s));
  }
  return avg;
}

ScoreGrid merge_magnification_grids(const std::vector<ScoreGrid>& grids) {
  if (grids.empty()) fail(ErrorKind::MissingCell, "no grids to merge");
  ScoreGrid merged;
  merged.task = grids.front().task;
  merged.model = grids.front().model;
  merged.augmentation = grids.front().augmentation;
  merged.magnification = grids.front().magnification;
  merged.seeds = grids.front().seeds;
  Eigen::Index rows = 0;
  for (const auto& g : grids) {
    if (g.seeds != merged.seeds)
      fail(ErrorKind::DimensionMismatch, "grids use different seed sets");
    rows += static_cast<Eigen::Index>(g.num_extractors());
  }
  merged.auroc.resize(rows, static_cast<Eigen::Index>(merged.seeds.size()));
  Eigen::Index at = 0;
  for (const auto& g : grids)
    for (std::size_t i = 0; i < g.num_extractors(); ++i, ++at) {
      merged.extractors.push_back(g.extractors[i] + "@" + std::string(to_string(g.magnification)));
      merged.auroc.row(at) = g.auroc.row(static_cast<Eigen::Index>(i));
    }
  std::vector<std::string> labels = merged.extractors;
  std::sort(labels.begin(), labels.end());
  if (std::adjacent_find(labels.begin(), labels.end()) != labels.end())
    fail(ErrorKind::DuplicateRow, "merged grid has duplicate extractor@magnification rows");
  return merged;
}

NdsResult cross_config_nds(const std::vector<ScoreGrid>& grids) {
  return nds_exact(merge_magnification_grids(grids));
}

ScoreGrid induced_model_grid(const std::vector<ScoreGrid>& grids_by_model, const std::string& extractor) {
  if (grids_by_model.empty()) fail(ErrorKind::MissingCell, "no model grids given");
  ScoreGrid g;
  g.task = grids_by_model.front().task;
  g.augmentation = grids_by_model.front().augmentation;
  g.magnification = grids_by_model.front().magnification;
  g.seeds = grids_by_model.front().seeds;
  g.auroc.resize(static_cast<Eigen::Index>(grids_by_model.size()), static_cast<Eigen::Index>(g.seeds.size()));
  for (std::size_t m = 0; m < grids_by_model.size(); ++m) {
    const auto& src = grids_by_model[m];
    if (src.task != g.task) fail(ErrorKind::PairMismatch, "model grids belong to different tasks");
    if (src.seeds != g.seeds) fail(ErrorKind::DimensionMismatch, "model grids use different seed sets");
    auto it = std::find(src.extractors.begin(), src.extractors.end(), extractor);
    if (it == src.extractors.end())
      fail(ErrorKind::MissingCell, "extractor " + extractor + " absent for model " + std::string(to_string(src.model)));
    g.extractors.emplace_back(to_string(src.model));
    g.auroc.row(static_cast<Eigen::Index>(m)) = src.auroc.row(it - src.extractors.begin());
  }
  return g;
}

NdsResult downstream_model_nds(const std::vector<ScoreGrid>& grids_by_model, const std::string& extractor) {
  return nds_exact(induced_model_grid(grids_by_model, extractor));
}

}  // namespace wsibench
