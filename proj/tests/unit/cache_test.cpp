// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "wsibench/embedder.hpp"
#include "wsibench/error.hpp"
#include "wsibench/feature_cache.hpp"
#include "wsibench/macenko.hpp"
#include "wsibench/synthetic.hpp"

namespace wsibench {
namespace {

namespace fs = std::filesystem;

template <class F>
void expect_kind(ErrorKind kind, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

std::vector<Patch> tissue_patches(std::uint64_t seed) {
  Rng rng(seed);
  synth::TwoStainOptions opts;
  opts.width = 320;
  opts.height = 128;
  const auto slide = synth::two_stain_image(synth::random_stain_matrix(rng), opts, rng);
  return tile(slide.image, 64, "slide-" + std::to_string(seed));
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

TEST(Embedder, DeterministicWidthAndNonNegative) {
  const auto patches = tissue_patches(1);
  const Embedder a({"rp", 7, 384, 8, 0.0}), b({"rp", 7, 384, 8, 0.0}), c({"rp", 8, 384, 8, 0.0});
  const auto va = a.embed(patches[0].pixels);
  ASSERT_EQ(va.size(), 384u);
  EXPECT_EQ(va, b.embed(patches[0].pixels));
  EXPECT_NE(va, c.embed(patches[0].pixels));
  for (float v : va) EXPECT_GE(v, 0.0f);
  EXPECT_GT(std::count_if(va.begin(), va.end(), [](float v) { return v > 0; }), 0);
}

TEST(Embedder, DownsampleAveragesCells) {
  Image img(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) img.at(x, y, 0) = x < 8 ? 0 : 255;
  const Embedder e({"rp", 0, 8, 2, 0.0});
  const auto cells = e.downsample(img);
  ASSERT_EQ(cells.size(), 12);
  // Row-major cells, three channels each.
  EXPECT_DOUBLE_EQ(cells[0], 0.0);
  EXPECT_DOUBLE_EQ(cells[3], 1.0);
  EXPECT_DOUBLE_EQ(cells[6], 0.0);
  EXPECT_DOUBLE_EQ(cells[9], 1.0);
}

TEST(Cache, PayloadArithmetic) {
  EXPECT_EQ(cache_payload_bytes(10, 28, 384), 430080u);
  EXPECT_EQ(all_variants().size(), 28u);
  EXPECT_EQ(all_variants().front().name, "original");
}

TEST(Cache, BuildThenGetIsBitIdentical) {
  TempDir dir("wsibench_cache_full");
  const auto patches = tissue_patches(2);
  ASSERT_EQ(patches.size(), 10u);
  const Embedder embedder({"rp", 3, 384, 8, 0.5});
  const auto variants = all_variants();
  CacheBuildOptions opts{11, default_reference_profile(), 3};
  const auto path = dir.path() / "f.wbk";
  const auto report = cache_build(
      path, patches, variants, [&](const Image& im) { return embedder.embed(im); }, 384, opts);

  EXPECT_EQ(report.records, 280u);
  EXPECT_EQ(report.payload_bytes, 430080u);
  std::size_t names = 0;
  for (const auto& v : variants) names += 2 + v.name.size();
  EXPECT_EQ(report.header_bytes, 16 + names);
  // Every record also carries an 18-byte key; the file ends with a 4-byte CRC.
  EXPECT_EQ(report.file_bytes, report.header_bytes + report.payload_bytes + 280 * 18 + 4);
  EXPECT_EQ(fs::file_size(path), report.file_bytes);

  const auto cache = FeatureCache::open(path);
  EXPECT_EQ(cache.d_x(), 384u);
  EXPECT_EQ(cache.record_count(), 280u);
  for (const auto& p : patches)
    for (std::size_t v = 0; v < variants.size(); ++v) {
      const auto direct = embedder.embed(variant_pixels(p, variants[v], opts));
      const auto stored = cache.get(p.slide_id, p.grid_pos, static_cast<std::uint16_t>(v));
      ASSERT_EQ(stored.size(), direct.size());
      EXPECT_EQ(std::memcmp(stored.data(), direct.data(), direct.size() * sizeof(float)), 0)
          << p.slide_id << " " << variants[v].name;
    }
}

TEST(Cache, ThreadCountDoesNotChangeBytes) {
  TempDir dir("wsibench_cache_threads");
  const auto patches = tissue_patches(3);
  const Embedder embedder({"rp", 4, 32, 4, 0.0});
  const auto embed = [&](const Image& im) { return embedder.embed(im); };
  cache_build(dir.path() / "a", patches, all_variants(), embed, 32, {5, default_reference_profile(), 1});
  cache_build(dir.path() / "b", patches, all_variants(), embed, 32, {5, default_reference_profile(), 4});
  std::ifstream a(dir.path() / "a", std::ios::binary), b(dir.path() / "b", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_FALSE(sa.empty());
  EXPECT_EQ(sa, sb);
}

class CacheFile : public testing::Test {
 protected:
  void SetUp() override {
    FeatureCacheWriter w(path_, 3, {"original", "flip_h"});
    const float v0[] = {1.0f, -2.5f, 3.25f}, v1[] = {0.0f, 1e-30f, -0.0f};
    w.add("s", {0, 1}, 0, v0);
    w.add("s", {0, 1}, 1, v1);
    w.add("t", {2, 0}, 0, v1);
    w.finish();
    std::ifstream in(path_, std::ios::binary);
    bytes_.assign((std::istreambuf_iterator<char>(in)), {});
  }
  void write(const std::string& b) {
    std::ofstream out(path_, std::ios::binary | std::ios::trunc);
    out << b;
  }
  TempDir dir_{"wsibench_cache_file"};
  fs::path path_ = dir_.path() / "c.wbk";
  std::string bytes_;
};

TEST_F(CacheFile, ReadsBackExactly) {
  const auto c = FeatureCache::open(path_);
  EXPECT_EQ(c.variants(), (std::vector<std::string>{"original", "flip_h"}));
  const auto v = c.get("s", {0, 1}, "original");
  EXPECT_EQ(std::vector<float>(v.begin(), v.end()), (std::vector<float>{1.0f, -2.5f, 3.25f}));
  EXPECT_TRUE(std::signbit(c.get("s", {0, 1}, 1)[2]));
  // Header 16 + names (2+8)+(2+6), 3 records of 18+12, CRC 4.
  EXPECT_EQ(bytes_.size(), 16u + 18 + 3 * 30 + 4);
  EXPECT_EQ(bytes_.substr(0, 4), "WBK1");
}

TEST_F(CacheFile, MissingKeys) {
  const auto c = FeatureCache::open(path_);
  EXPECT_FALSE(c.contains("t", {2, 0}, 1));
  EXPECT_EQ(c.positions("s", 1), (std::vector<GridPos>{{0, 1}}));
  EXPECT_EQ(c.positions("t", 0), (std::vector<GridPos>{{2, 0}}));
  EXPECT_TRUE(c.positions("u", 0).empty());
  expect_kind(ErrorKind::KeyMissing, [&] { c.get("t", {2, 0}, 1); });
  expect_kind(ErrorKind::KeyMissing, [&] { c.get("u", {0, 0}, 0); });
  expect_kind(ErrorKind::KeyMissing, [&] { c.get("s", {0, 1}, "rotate90"); });
}

TEST_F(CacheFile, EverySingleByteFlipIsDetected) {
  for (std::size_t i = 0; i < bytes_.size(); ++i) {
    std::string b = bytes_;
    b[i] = static_cast<char>(b[i] ^ 0x10);
    write(b);
    expect_kind(ErrorKind::CacheCorrupt, [&] { FeatureCache::open(path_); });
  }
}

TEST_F(CacheFile, TruncationAndExtensionAreDetected) {
  for (std::size_t n : {std::size_t{0}, std::size_t{3}, std::size_t{19}, bytes_.size() - 1, bytes_.size() - 31}) {
    write(bytes_.substr(0, n));
    expect_kind(ErrorKind::CacheCorrupt, [&] { FeatureCache::open(path_); });
  }
  write(bytes_ + "x");
  expect_kind(ErrorKind::CacheCorrupt, [&] { FeatureCache::open(path_); });
}

TEST(CacheWriter, RejectsBadRecords) {
  TempDir dir("wsibench_cache_writer");
  FeatureCacheWriter w(dir.path() / "x", 2, {"original"});
  const float ok[] = {1, 2}, wide[] = {1, 2, 3};
  expect_kind(ErrorKind::DimensionMismatch, [&] { w.add("s", {0, 0}, 0, wide); });
  expect_kind(ErrorKind::InvalidConfig, [&] { w.add("s", {0, 0}, 1, ok); });
  w.add("s", {0, 0}, 0, ok);
  w.add("s", {0, 0}, 0, ok);
  w.finish();
  expect_kind(ErrorKind::CacheCorrupt, [&] { FeatureCache::open(dir.path() / "x"); });
  expect_kind(ErrorKind::Io, [&] { FeatureCache::open(dir.path() / "absent"); });
}

}  // namespace
}  // namespace wsibench
