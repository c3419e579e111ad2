// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include "wsibench/feature_cache.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "wsibench/error.hpp"
#include "wsibench/parallel.hpp"
#include "wsibench/rng.hpp"

namespace wsibench {

namespace {

constexpr char kMagic[4] = {'W', 'B', 'K', '1'};
constexpr std::size_t kKeyBytes = 8 + 4 + 4 + 2;

template <class T>
void put_le(std::vector<unsigned char>& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<unsigned char>((u >> (8 * i)) & 0xFF));
}

template <class T>
T get_le(const unsigned char* p) {
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::make_unsigned_t<T>>(p[i]) << (8 * i);
  return static_cast<T>(u);
}

std::uint32_t crc_of(const unsigned char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

struct FeatureCacheWriter::Impl {
  std::filesystem::path path;
  std::uint32_t d_x;
  std::size_t variant_count;
  std::vector<unsigned char> bytes;
  std::size_t header_bytes = 0;
  std::size_t records = 0;
  bool finished = false;
};

FeatureCacheWriter::FeatureCacheWriter(const std::filesystem::path& path, std::uint32_t d_x,
                                       std::vector<std::string> names)
    : impl_(std::make_unique<Impl>(Impl{path, d_x, names.size(), {}})) {
  if (d_x == 0 || names.empty() || names.size() > 0xFFFF)
    fail(ErrorKind::InvalidConfig, "cache needs d_x > 0 and between 1 and 65535 variants");
  auto& b = impl_->bytes;
  b.insert(b.end(), kMagic, kMagic + 4);
  put_le<std::uint32_t>(b, kCacheVersion);
  put_le<std::uint32_t>(b, d_x);
  put_le<std::uint32_t>(b, static_cast<std::uint32_t>(names.size()));
  for (const auto& n : names) {
    if (n.size() > 0xFFFF) fail(ErrorKind::InvalidConfig, "variant name too long");
    put_le<std::uint16_t>(b, static_cast<std::uint16_t>(n.size()));
    b.insert(b.end(), n.begin(), n.end());
  }
  impl_->header_bytes = b.size();
}

FeatureCacheWriter::~FeatureCacheWriter() = default;

void FeatureCacheWriter::add(const std::string& slide_id, GridPos pos, std::uint16_t variant,
                             std::span<const float> vector) {
  if (impl_->finished) fail(ErrorKind::InvalidConfig, "cache writer already finished");
  if (vector.size() != impl_->d_x) fail(ErrorKind::DimensionMismatch, "feature vector width differs from d_x");
  if (variant >= impl_->variant_count) fail(ErrorKind::InvalidConfig, "variant index outside the name table");
  if (pos.row < 0 || pos.col < 0) fail(ErrorKind::InvalidConfig, "negative grid position");
  auto& b = impl_->bytes;
  put_le<std::uint64_t>(b, fnv1a64(slide_id));
  put_le<std::uint32_t>(b, static_cast<std::uint32_t>(pos.row));
  put_le<std::uint32_t>(b, static_cast<std::uint32_t>(pos.col));
  put_le<std::uint16_t>(b, variant);
  for (float f : vector) put_le<std::uint32_t>(b, std::bit_cast<std::uint32_t>(f));
  ++impl_->records;
}

CacheReport FeatureCacheWriter::finish() {
  if (impl_->finished) fail(ErrorKind::InvalidConfig, "cache writer already finished");
  auto& b = impl_->bytes;
  put_le<std::uint32_t>(b, crc_of(b.data(), b.size()));
  if (impl_->path.has_parent_path()) std::filesystem::create_directories(impl_->path.parent_path());
  std::ofstream out(impl_->path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot write " + impl_->path.string());
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) fail(ErrorKind::Io, "write failed for " + impl_->path.string());
  impl_->finished = true;
  return {impl_->records, impl_->records * impl_->d_x * 4, impl_->header_bytes, b.size()};
}

FeatureCache FeatureCache::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  const std::vector<unsigned char> b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto corrupt = [&](const std::string& why) { fail(ErrorKind::CacheCorrupt, path.string() + ": " + why); };
  if (b.size() < 16 + 4) corrupt("file too short");
  if (std::memcmp(b.data(), kMagic, 4) != 0) corrupt("bad magic");
  const std::size_t body = b.size() - 4;
  if (crc_of(b.data(), body) != get_le<std::uint32_t>(&b[body])) corrupt("checksum mismatch");
  if (get_le<std::uint32_t>(&b[4]) != kCacheVersion) corrupt("unsupported version");

  FeatureCache c;
  c.d_x_ = get_le<std::uint32_t>(&b[8]);
  const std::uint32_t n_variants = get_le<std::uint32_t>(&b[12]);
  if (c.d_x_ == 0 || n_variants == 0) corrupt("empty header");
  std::size_t off = 16;
  for (std::uint32_t v = 0; v < n_variants; ++v) {
    if (off + 2 > body) corrupt("truncated name table");
    const auto len = get_le<std::uint16_t>(&b[off]);
    off += 2;
    if (off + len > body) corrupt("truncated name table");
    c.variants_.emplace_back(reinterpret_cast<const char*>(&b[off]), len);
    off += len;
  }
  const std::size_t record = kKeyBytes + 4u * c.d_x_;
  if ((body - off) % record != 0) corrupt("record area is not a whole number of records");
  const std::size_t n = (body - off) / record;
  c.data_.resize(n * c.d_x_);
  for (std::size_t r = 0; r < n; ++r, off += record) {
    const Key key{get_le<std::uint64_t>(&b[off]), get_le<std::uint32_t>(&b[off + 8]),
                  get_le<std::uint32_t>(&b[off + 12]), get_le<std::uint16_t>(&b[off + 16])};
    if (std::get<3>(key) >= n_variants) corrupt("variant index outside the name table");
    if (!c.index_.emplace(key, r * c.d_x_).second) corrupt("duplicate record");
    for (std::uint32_t i = 0; i < c.d_x_; ++i)
      c.data_[r * c.d_x_ + i] = std::bit_cast<float>(get_le<std::uint32_t>(&b[off + kKeyBytes + 4u * i]));
  }
  return c;
}

std::uint16_t FeatureCache::variant_index(std::string_view name) const {
  for (std::size_t i = 0; i < variants_.size(); ++i)
    if (variants_[i] == name) return static_cast<std::uint16_t>(i);
  fail(ErrorKind::KeyMissing, "variant '" + std::string(name) + "' not in cache");
}

bool FeatureCache::contains(const std::string& slide_id, GridPos pos, std::uint16_t variant) const {
  return index_.count({fnv1a64(slide_id), static_cast<std::uint32_t>(pos.row), static_cast<std::uint32_t>(pos.col),
                       variant}) > 0;
}

std::vector<GridPos> FeatureCache::positions(const std::string& slide_id, std::uint16_t variant) const {
  const std::uint64_t h = fnv1a64(slide_id);
  std::vector<GridPos> out;
  for (auto it = index_.lower_bound({h, 0, 0, 0}); it != index_.end() && std::get<0>(it->first) == h; ++it)
    if (std::get<3>(it->first) == variant)
      out.push_back({static_cast<int>(std::get<1>(it->first)), static_cast<int>(std::get<2>(it->first))});
  return out;
}

std::span<const float> FeatureCache::get(const std::string& slide_id, GridPos pos, std::uint16_t variant) const {
  const auto it = index_.find(
      {fnv1a64(slide_id), static_cast<std::uint32_t>(pos.row), static_cast<std::uint32_t>(pos.col), variant});
  if (it == index_.end())
    fail(ErrorKind::KeyMissing, "no record for slide " + slide_id + " (" + std::to_string(pos.row) + ", " +
                                    std::to_string(pos.col) + ") variant " + std::to_string(variant));
  return {data_.data() + it->second, d_x_};
}

std::span<const float> FeatureCache::get(const std::string& slide_id, GridPos pos, std::string_view variant) const {
  return get(slide_id, pos, variant_index(variant));
}

std::size_t cache_payload_bytes(std::size_t patches, std::size_t variants, std::size_t d_x) {
  return patches * variants * d_x * 4;
}

std::vector<VariantDef> all_variants() {
  std::vector<VariantDef> v{{"original", std::nullopt, false, {}}};
  for (AugKind k : kAllAugmentations) v.push_back({std::string(to_string(k)), k, false, {}});
  return v;
}

std::uint64_t patch_augment_seed(std::uint64_t base, const std::string& slide_id, GridPos pos, AugKind kind) {
  return Rng(base)
      .child({fnv1a64(slide_id), static_cast<std::uint64_t>(pos.row), static_cast<std::uint64_t>(pos.col),
              static_cast<std::uint64_t>(kind)})
      .next_u64();
}

Image variant_pixels(const Patch& patch, const VariantDef& variant, const CacheBuildOptions& options) {
  if (variant.transform) return variant.transform(patch);
  if (!variant.kind) return patch.pixels;
  AugmentationSpec spec =
      make_spec(*variant.kind, patch_augment_seed(options.augment_seed, patch.slide_id, patch.grid_pos, *variant.kind),
                patch.pixels.width, patch.pixels.height, options.reference);
  spec.center_crop = variant.center_crop;
  return apply_augmentation(patch.pixels, spec);
}

CacheReport cache_build(const std::filesystem::path& path, const std::vector<Patch>& patches,
                        const std::vector<VariantDef>& variants, const EmbedFn& embed, std::uint32_t d_x,
                        const CacheBuildOptions& options) {
  std::vector<std::string> names;
  for (const auto& v : variants) names.push_back(v.name);
  FeatureCacheWriter writer(path, d_x, names);
  // Workers fill fixed slots; the writer then emits them in index order.
  std::vector<std::vector<float>> vectors(patches.size() * variants.size());
  parallel_for(vectors.size(), options.threads, [&](std::size_t j) {
    const auto& patch = patches[j / variants.size()];
    vectors[j] = embed(variant_pixels(patch, variants[j % variants.size()], options));
  });
  for (std::size_t j = 0; j < vectors.size(); ++j)
    writer.add(patches[j / variants.size()].slide_id, patches[j / variants.size()].grid_pos,
               static_cast<std::uint16_t>(j % variants.size()), vectors[j]);
  return writer.finish();
}

}  // namespace wsibench
