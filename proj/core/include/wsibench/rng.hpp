// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>

namespace wsibench {

// Seedable generator with platform-independent output. Standard library
// distributions are implementation-defined, so the sampling helpers here
// are implemented directly on top of mt19937_64.
//
// Stream splitting: a child stream is identified by its parent's seed and
// a sequence of 64-bit labels. Children never depend on how many draws the
// parent has made, which lets serial and parallel code agree.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  Rng child(std::initializer_list<std::uint64_t> labels) const;
  Rng child(std::string_view name) const;
  Rng child(std::string_view name, std::initializer_list<std::uint64_t> labels) const;

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer on [0, n), unbiased. n must be > 0.
  std::uint64_t below(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  // Gamma(shape, 1) for shape >= 1 (Marsaglia-Tsang); shape 1 reduces to Exp(1).
  double gamma(double shape);

  template <class T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view text) noexcept;

}  // namespace wsibench
