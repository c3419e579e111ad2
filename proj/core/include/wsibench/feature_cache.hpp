// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "wsibench/augment.hpp"
#include "wsibench/image.hpp"

namespace wsibench {

// Layout (all little-endian):
//   "WBK1" | u32 version | u32 d_x | u32 variant_count
//   variant_count x (u16 length | name bytes)
//   records: u64 fnv1a64(slide_id) | u32 row | u32 col | u16 variant | d_x x f32
//   u32 CRC-32 of every preceding byte
inline constexpr std::uint32_t kCacheVersion = 1;

struct CacheReport {
  std::size_t records = 0;
  std::size_t payload_bytes = 0;  // records * d_x * 4
  std::size_t header_bytes = 0;   // magic, fields and name table
  std::size_t file_bytes = 0;
};

// Appends records in call order; finish() writes the checksum.
class FeatureCacheWriter {
 public:
  FeatureCacheWriter(const std::filesystem::path& path, std::uint32_t d_x, std::vector<std::string> variant_names);
  ~FeatureCacheWriter();
  FeatureCacheWriter(const FeatureCacheWriter&) = delete;
  FeatureCacheWriter& operator=(const FeatureCacheWriter&) = delete;

  void add(const std::string& slide_id, GridPos pos, std::uint16_t variant, std::span<const float> vector);
  CacheReport finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class FeatureCache {
 public:
  static FeatureCache open(const std::filesystem::path& path);

  std::uint32_t d_x() const noexcept { return d_x_; }
  const std::vector<std::string>& variants() const noexcept { return variants_; }
  std::size_t record_count() const noexcept { return index_.size(); }
  std::uint16_t variant_index(std::string_view name) const;

  bool contains(const std::string& slide_id, GridPos pos, std::uint16_t variant) const;
  // Grid positions stored for a slide under one variant, row-major.
  std::vector<GridPos> positions(const std::string& slide_id, std::uint16_t variant) const;
  // Throws KeyMissing.
  std::span<const float> get(const std::string& slide_id, GridPos pos, std::uint16_t variant) const;
  std::span<const float> get(const std::string& slide_id, GridPos pos, std::string_view variant) const;

 private:
  using Key = std::tuple<std::uint64_t, std::uint32_t, std::uint32_t, std::uint16_t>;
  std::uint32_t d_x_ = 0;
  std::vector<std::string> variants_;
  std::vector<float> data_;
  std::map<Key, std::size_t> index_;
};

// Storage model n * (|A| + 1) * d_x * 4 bytes for n patches.
std::size_t cache_payload_bytes(std::size_t patches, std::size_t variants, std::size_t d_x);

struct VariantDef {
  std::string name;
  std::optional<AugKind> kind;  // empty = the original patch
  bool center_crop = false;
  // Overrides `kind` when set, e.g. for slide-level normalisation.
  std::function<Image(const Patch&)> transform;
};
// "original" followed by the 27 augmentations.
std::vector<VariantDef> all_variants();

using EmbedFn = std::function<std::vector<float>(const Image&)>;

struct CacheBuildOptions {
  std::uint64_t augment_seed = 0;
  std::optional<StainProfile> reference;  // needed for macenko_patch
  unsigned threads = 1;
};

// Seed of the stochastic parameters for one (patch, augmentation) pair.
std::uint64_t patch_augment_seed(std::uint64_t base, const std::string& slide_id, GridPos pos, AugKind kind);
// The exact pixels a cache record is computed from.
Image variant_pixels(const Patch& patch, const VariantDef& variant, const CacheBuildOptions& options);

// One record per (patch, variant), written patch-major in input order.
CacheReport cache_build(const std::filesystem::path& path, const std::vector<Patch>& patches,
                        const std::vector<VariantDef>& variants, const EmbedFn& embed, std::uint32_t d_x,
                        const CacheBuildOptions& options = {});

}  // namespace wsibench
