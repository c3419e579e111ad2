// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace wsibench {

// Streaming mean/variance (Welford) with the pairwise merge of Chan et al.
class WelfordAccumulator {
 public:
  WelfordAccumulator() = default;
  WelfordAccumulator(std::uint64_t count, double mean, double m2)
      : count_(count), mean_(mean), m2_(m2) {}

  void push(double x) noexcept {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }

  void merge(const WelfordAccumulator& other) noexcept;

  std::uint64_t count() const noexcept { return count_; }
  double mean() const noexcept { return mean_; }
  double m2() const noexcept { return m2_; }
  // Population variance (m2 / count); 0 for an empty accumulator.
  double variance() const noexcept;
  double stddev() const noexcept;

 private:
  std::uint64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Linear interpolation between order statistics ("type 7"). `sorted` must be
// ascending and non-empty; p in [0, 1].
double percentile_sorted(std::span<const double> sorted, double p);
double percentile(std::span<const double> values, double p);

struct SpreadSummary {
  double p2_5 = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double p97_5 = 0.0;
  double mean = 0.0;
};

// Throws ValueOutOfRange on an empty input.
SpreadSummary summarize(std::span<const double> values);

}  // namespace wsibench
