// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wsibench/stats.hpp"

namespace wsibench {

class FeatureCache;

inline constexpr const char* kOriginalVariant = "original";

// 1 - cos(u, v), clamped to [0, 2]. Throws ZeroVector or DimensionMismatch.
double cosine_distance(std::span<const double> u, std::span<const double> v);

struct EmbeddingEntry {
  std::string id;
  std::string class_label;
  std::string variant;
  std::vector<double> vector;
};

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  // Validates: shared width, no zero vectors, no duplicate (id, variant),
  // and an "original" row for every id.
  explicit EmbeddingTable(std::vector<EmbeddingEntry> entries);

  std::size_t dim() const noexcept { return dim_; }
  const std::vector<EmbeddingEntry>& entries() const noexcept { return entries_; }
  // Ids in ascending order.
  std::vector<std::string> ids() const;
  std::vector<std::string> variants() const;
  bool has(const std::string& id, const std::string& variant) const;
  const EmbeddingEntry& at(const std::string& id, const std::string& variant) const;

 private:
  std::vector<EmbeddingEntry> entries_;
  std::map<std::pair<std::string, std::string>, std::size_t> index_;
  std::size_t dim_ = 0;
};

// CSV with header id,class_label,variant,v0,v1,...
EmbeddingTable parse_embedding_csv(std::string_view text);
EmbeddingTable read_embedding_csv(const std::filesystem::path& path);
std::string embedding_csv(const EmbeddingTable& table);

// Joins a cache with a manifest CSV of id,class_label,slide_id,row,col.
// Every manifest row yields one entry per cache variant that holds it.
EmbeddingTable embedding_table_from_cache(const FeatureCache& cache, std::string_view manifest_csv);

struct Displacement {
  std::string variant;
  std::vector<std::string> ids;  // ascending
  std::vector<double> distances;
  std::size_t skipped = 0;  // ids without this variant
};

// One distance per id between its original and `variant` embeddings.
// Throws VariantMissing if no id carries the variant.
Displacement displacement_stats(const EmbeddingTable& table, const std::string& variant, unsigned threads = 1);

struct ClassBaselines {
  std::vector<double> same_class;
  std::vector<double> cross_class;
};

// Distinct unordered pairs of originals drawn uniformly per condition.
// Requests beyond the number of distinct pairs are capped. Throws
// InsufficientClasses for fewer than 2 classes or no class with 2 ids.
ClassBaselines class_pair_baselines(const EmbeddingTable& table, std::size_t n_pairs, std::uint64_t rng_seed);

// Mean distance between distinct random pairs of originals.
double dispersion(const EmbeddingTable& table, std::size_t n_pairs, std::uint64_t rng_seed);

struct DistanceStats {
  std::size_t n = 0;
  SpreadSummary spread;  // zero when n == 0
};
DistanceStats distance_stats(std::span<const double> distances);

struct VariantDisplacement {
  std::string variant;
  DistanceStats raw;
  // Divided by the dispersion; absent when the dispersion is 0.
  std::optional<DistanceStats> normalised;
  std::size_t covered = 0;
  std::size_t skipped = 0;
};

struct DisplacementSummary {
  std::vector<VariantDisplacement> variants;
  DistanceStats same_class;
  DistanceStats cross_class;
  double dispersion = 0.0;
  std::size_t n_pairs = 0;
  std::uint64_t rng_seed = 0;
};

struct LatentOptions {
  std::size_t n_pairs = 10000;
  std::uint64_t rng_seed = 0;
  unsigned threads = 1;
};

struct LatentAnalysis {
  DisplacementSummary summary;
  std::vector<Displacement> displacements;
  ClassBaselines baselines;
};

// Every non-original variant in the table, in name order.
LatentAnalysis analyse_latent(const EmbeddingTable& table, const LatentOptions& options = {});

std::string summary_json(const DisplacementSummary& summary);
// Long format: kind,variant,id,distance (kind = displacement|same_class|cross_class).
std::string distances_csv(const LatentAnalysis& analysis);

}  // namespace wsibench
