// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include "wsibench/stats.hpp"

#include <algorithm>
#include <cmath>

#include "wsibench/error.hpp"

namespace wsibench {

void WelfordAccumulator::merge(const WelfordAccumulator& other) noexcept {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double n = na + nb;
  const double delta = other.mean_ - mean_;
  mean_ += delta * (nb / n);
  m2_ += other.m2_ + delta * delta * (na * nb / n);
  count_ += other.count_;
}

double WelfordAccumulator::variance() const noexcept {
  if (count_ == 0) return 0.0;
  return std::max(0.0, m2_ / static_cast<double>(count_));
}

double WelfordAccumulator::stddev() const noexcept { return std::sqrt(variance()); }

double percentile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) fail(ErrorKind::ValueOutOfRange, "percentile of an empty sample");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double percentile(std::span<const double> values, double p) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return percentile_sorted(sorted, p);
}

SpreadSummary summarize(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::ValueOutOfRange, "summary of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  SpreadSummary s;
  s.p2_5 = percentile_sorted(sorted, 0.025);
  s.q1 = percentile_sorted(sorted, 0.25);
  s.median = percentile_sorted(sorted, 0.5);
  s.q3 = percentile_sorted(sorted, 0.75);
  s.p97_5 = percentile_sorted(sorted, 0.975);
  // Sum in sorted order so the mean does not depend on input order.
  double total = 0.0;
  for (double v : sorted) total += v;
  s.mean = total / static_cast<double>(sorted.size());
  return s;
}

}  // namespace wsibench
