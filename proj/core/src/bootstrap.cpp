// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include "wsibench/bootstrap.hpp"

#include <algorithm>
#include <map>

#include "wsibench/auroc.hpp"
#include "wsibench/error.hpp"
#include "wsibench/parallel.hpp"

namespace wsibench {

namespace {

std::string field_value(const RunKey& key, ConditionField field) {
  return field == ConditionField::Augmentation ? std::string(to_string(key.augmentation))
                                               : std::string(to_string(key.magnification));
}

}  // namespace

void check_pair(const RunPair& pair) {
  const auto& a = pair.a.samples;
  const auto& b = pair.b.samples;
  if (a.size() != b.size())
    fail(ErrorKind::PairMismatch, pair.task + " seed " + std::to_string(pair.seed) + ": test sets differ in size");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].sample_id != b[i].sample_id)
      fail(ErrorKind::PairMismatch, pair.task + " seed " + std::to_string(pair.seed) + ": sample '" +
                                        a[i].sample_id + "' has no partner");
    if (a[i].label != b[i].label)
      fail(ErrorKind::PairMismatch, pair.task + " seed " + std::to_string(pair.seed) + ": label of '" +
                                        a[i].sample_id + "' differs between conditions");
  }
}

PairedRuns pair_runs(const std::vector<PredictionSet>& sets, const std::string& extractor, ModelKind model,
                     ConditionField field, const std::string& value_a, const std::string& value_b) {
  // The "other" field stays fixed; key everything else by (task, seed, other).
  using Slot = std::tuple<std::string, int, std::string>;
  std::map<Slot, const PredictionSet*> side_a, side_b;
  for (const auto& set : sets) {
    if (set.key.extractor != extractor || set.key.model != model) continue;
    const std::string v = field_value(set.key, field);
    const std::string other = field == ConditionField::Augmentation ? std::string(to_string(set.key.magnification))
                                                                    : std::string(to_string(set.key.augmentation));
    Slot slot{set.key.task, set.key.seed, other};
    if (v == value_a) side_a[slot] = &set;
    if (v == value_b) side_b[slot] = &set;
  }
  PairedRuns runs;
  runs.extractor = extractor;
  runs.condition_a = value_a;
  runs.condition_b = value_b;
  for (const auto& [slot, a] : side_a) {
    auto it = side_b.find(slot);
    if (it == side_b.end())
      fail(ErrorKind::PairMismatch, std::get<0>(slot) + " seed " + std::to_string(std::get<1>(slot)) +
                                        ": no run under condition " + value_b);
    RunPair pair{std::get<0>(slot), std::get<1>(slot), *a, *it->second};
    check_pair(pair);
    runs.pairs.push_back(std::move(pair));
  }
  for (const auto& [slot, b] : side_b)
    if (!side_a.contains(slot))
      fail(ErrorKind::PairMismatch, std::get<0>(slot) + " seed " + std::to_string(std::get<1>(slot)) +
                                        ": no run under condition " + value_a);
  if (runs.pairs.empty())
    fail(ErrorKind::PairMismatch, "no runs for extractor " + extractor + " under " + value_a + "/" + value_b);
  return runs;
}

double paired_difference(const PredictionSet& a, const PredictionSet& b, std::span<const std::size_t> indices) {
  std::vector<double> sa, sb;
  std::vector<int> labels;
  sa.reserve(indices.size());
  sb.reserve(indices.size());
  labels.reserve(indices.size());
  for (std::size_t idx : indices) {
    sa.push_back(a.samples.at(idx).score);
    sb.push_back(b.samples.at(idx).score);
    labels.push_back(a.samples[idx].label);
  }
  return auroc(sa, labels).value - auroc(sb, labels).value;
}

std::vector<std::size_t> draw_resample(std::span<const int> labels, Rng& rng, int max_retries) {
  const std::size_t n = labels.size();
  std::vector<std::size_t> idx(n);
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    bool pos = false, neg = false;
    for (auto& i : idx) {
      i = static_cast<std::size_t>(rng.below(n));
      (labels[i] == 1 ? pos : neg) = true;
    }
    if (pos && neg) return idx;
  }
  fail(ErrorKind::DegenerateResample,
       "no resample with both classes after " + std::to_string(max_retries) + " draws");
}

BootstrapDistribution bootstrap_diff(const PairedRuns& runs, const BootstrapOptions& options) {
  if (options.resamples < 1) fail(ErrorKind::InvalidConfig, "need at least one resample");
  BootstrapDistribution dist;
  dist.extractor = runs.extractor;
  dist.condition_a = runs.condition_a;
  dist.condition_b = runs.condition_b;
  dist.pairs = runs.pairs.size();
  dist.resamples = options.resamples;
  const std::size_t B = static_cast<std::size_t>(options.resamples);
  dist.differences.assign(runs.pairs.size() * B, 0.0);

  for (const auto& pair : runs.pairs) check_pair(pair);
  const Rng master(options.rng_seed);

  auto run_job = [&](std::size_t job) {
    const RunPair& pair = runs.pairs[job / B];
    const std::size_t b = job % B;
    // The child stream depends only on (task, seed, b); it is the same for
    // both conditions and for the swapped comparison.
    Rng rng = master.child("bootstrap", {fnv1a64(pair.task), static_cast<std::uint64_t>(pair.seed), b});
    std::vector<int> labels;
    labels.reserve(pair.a.samples.size());
    for (const auto& p : pair.a.samples) labels.push_back(p.label);
    const auto idx = draw_resample(labels, rng, options.max_retries);
    dist.differences[job] = paired_difference(pair.a, pair.b, idx);
  };

  parallel_for(dist.differences.size(), options.threads, run_job);
  dist.summary = summarize(dist.differences);
  return dist;
}

BoxplotRecord summarize_boxplot(const BootstrapDistribution& dist) {
  const SpreadSummary s = summarize(dist.differences);
  BoxplotRecord r;
  r.extractor = dist.extractor;
  r.comparison = dist.condition_a + " - " + dist.condition_b;
  r.median = s.median;
  r.box_low = s.q1;
  r.box_high = s.q3;
  r.whisker_low = s.p2_5;
  r.whisker_high = s.p97_5;
  r.mean = s.mean;
  r.n = dist.differences.size();
  return r;
}

}  // namespace wsibench
