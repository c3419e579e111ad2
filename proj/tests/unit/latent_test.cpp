// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <json.hpp>

#include <cmath>

#include "wsibench/error.hpp"
#include "wsibench/latent.hpp"
#include "wsibench/synthetic.hpp"

namespace wsibench {
namespace {

template <class F>
void expect_kind(ErrorKind kind, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(kind);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

using V = std::vector<double>;

TEST(CosineDistance, Examples) {
  EXPECT_EQ(cosine_distance(V{1, 2, 3}, V{1, 2, 3}), 0.0);
  EXPECT_NEAR(cosine_distance(V{1, 0}, V{0, 1}), 1.0, 1e-15);
  EXPECT_NEAR(cosine_distance(V{1, 2}, V{-1, -2}), 2.0, 1e-15);
  expect_kind(ErrorKind::ZeroVector, [] { cosine_distance(V{0, 0}, V{1, 0}); });
  expect_kind(ErrorKind::DimensionMismatch, [] { cosine_distance(V{1}, V{1, 0}); });
}

TEST(CosineDistance, PositiveScalingInvariantAndBounded) {
  Rng rng(4);
  for (int t = 0; t < 2000; ++t) {
    V u(5), v(5);
    for (auto& x : u) x = rng.normal();
    for (auto& x : v) x = rng.normal();
    const double d = cosine_distance(u, v);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
    V w = v;
    const double scale = 1.0 + 50.0 * rng.uniform();
    for (auto& x : w) x *= scale;
    EXPECT_NEAR(cosine_distance(u, w), d, 1e-12);
  }
}

EmbeddingTable hand_table() {
  return EmbeddingTable({{"a", "x", "original", {1, 0}},
                         {"a", "x", "stain", {0, 1}},
                         {"b", "x", "original", {1, 1}},
                         {"b", "x", "stain", {1, 0}},
                         {"c", "y", "original", {3, 4}},
                         {"c", "y", "stain", {-3, -4}},
                         {"d", "y", "original", {0, 2}}});
}

TEST(Displacement, HandSetVectors) {
  const auto d = displacement_stats(hand_table(), "stain");
  EXPECT_EQ(d.ids, (std::vector<std::string>{"a", "b", "c"}));
  ASSERT_EQ(d.distances.size(), 3u);
  EXPECT_NEAR(d.distances[0], 1.0, 1e-15);
  EXPECT_NEAR(d.distances[1], 1.0 - 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(d.distances[2], 2.0, 1e-15);
  EXPECT_EQ(d.skipped, 1u);
  expect_kind(ErrorKind::VariantMissing, [] { displacement_stats(hand_table(), "rotate90"); });
}

TEST(Displacement, IdenticalVariantGivesZeros) {
  Rng rng(1);
  const EmbeddingTable t(synth::two_class_embeddings(20, 8, 10.0, rng));
  const auto d = displacement_stats(t, "identity", 3);
  EXPECT_EQ(d.distances.size(), 40u);
  for (double x : d.distances) EXPECT_EQ(x, 0.0);
}

TEST(EmbeddingTable, Validation) {
  expect_kind(ErrorKind::DimensionMismatch, [] { EmbeddingTable({{"a", "x", "original", {1, 0}}, {"b", "x", "original", {1}}}); });
  expect_kind(ErrorKind::ZeroVector, [] { EmbeddingTable({{"a", "x", "original", {0, 0}}}); });
  expect_kind(ErrorKind::VariantMissing, [] { EmbeddingTable({{"a", "x", "flip_h", {1, 0}}}); });
  expect_kind(ErrorKind::DuplicateRow,
              [] { EmbeddingTable({{"a", "x", "original", {1, 0}}, {"a", "x", "original", {1, 0}}}); });
}

TEST(EmbeddingTable, CsvRoundTrip) {
  const auto t = hand_table();
  const auto text = embedding_csv(t);
  EXPECT_EQ(text.substr(0, text.find('\n')), "id,class_label,variant,v0,v1");
  const auto back = parse_embedding_csv(text);
  ASSERT_EQ(back.entries().size(), t.entries().size());
  for (std::size_t i = 0; i < t.entries().size(); ++i) EXPECT_EQ(back.entries()[i].vector, t.entries()[i].vector);
  expect_kind(ErrorKind::MalformedRow, [] { parse_embedding_csv("id,label,variant,v0\na,x,original,1\n"); });
}

TEST(Baselines, IdenticalEmbeddingsGiveZeros) {
  std::vector<EmbeddingEntry> e;
  for (int i = 0; i < 6; ++i) e.push_back({"p" + std::to_string(i), i % 2 ? "x" : "y", "original", {2, -1, 5}});
  const EmbeddingTable t(e);
  const auto b = class_pair_baselines(t, 4, 9);
  EXPECT_EQ(b.same_class.size(), 4u);
  EXPECT_EQ(b.cross_class.size(), 4u);
  for (double x : b.same_class) EXPECT_NEAR(x, 0.0, 1e-15);
  for (double x : b.cross_class) EXPECT_NEAR(x, 0.0, 1e-15);
  EXPECT_NEAR(dispersion(t, 100, 3), 0.0, 1e-15);
}

TEST(Baselines, ZeroPairsAndErrors) {
  const auto b = class_pair_baselines(hand_table(), 0, 1);
  EXPECT_TRUE(b.same_class.empty());
  EXPECT_TRUE(b.cross_class.empty());
  expect_kind(ErrorKind::InsufficientClasses, [] {
    class_pair_baselines(EmbeddingTable({{"a", "x", "original", {1, 0}}, {"b", "x", "original", {0, 1}}}), 5, 1);
  });
  expect_kind(ErrorKind::InsufficientClasses, [] {
    class_pair_baselines(EmbeddingTable({{"a", "x", "original", {1, 0}}, {"b", "y", "original", {0, 1}}}), 5, 1);
  });
}

TEST(Baselines, PairsAreDistinctAndCapped) {
  // Class x holds ids a, b (one pair); class y holds c, d (one pair); four cross pairs.
  const auto b = class_pair_baselines(hand_table(), 100, 2);
  ASSERT_EQ(b.same_class.size(), 2u);
  ASSERT_EQ(b.cross_class.size(), 4u);
  std::vector<double> same(b.same_class);
  std::sort(same.begin(), same.end());
  EXPECT_NEAR(same[0], 1.0 - 4.0 / 5.0, 1e-15);             // c, d
  EXPECT_NEAR(same[1], 1.0 - 1.0 / std::sqrt(2.0), 1e-15);  // a, b
}

TEST(Baselines, DeterministicAndSeedSensitive) {
  Rng rng(2);
  const EmbeddingTable t(synth::two_class_embeddings(60, 8, 10.0, rng));
  const auto a = class_pair_baselines(t, 300, 5), b = class_pair_baselines(t, 300, 5), c = class_pair_baselines(t, 300, 6);
  EXPECT_EQ(a.same_class, b.same_class);
  EXPECT_EQ(a.cross_class, b.cross_class);
  EXPECT_NE(a.same_class, c.same_class);
  EXPECT_EQ(dispersion(t, 300, 5), dispersion(t, 300, 5));
}

TEST(Dispersion, HandSetThreeVectors) {
  const EmbeddingTable t({{"a", "x", "original", {1, 0}}, {"b", "x", "original", {0, 1}}, {"c", "y", "original", {1, 1}}});
  const double expected = (1.0 + 2.0 * (1.0 - 1.0 / std::sqrt(2.0))) / 3.0;
  EXPECT_NEAR(dispersion(t, 3, 8), expected, 1e-15);
  EXPECT_NEAR(dispersion(t, 1000, 8), expected, 1e-15);
}

TEST(Dispersion, ScaleInvariant) {
  Rng rng(3);
  auto entries = synth::two_class_embeddings(30, 8, 10.0, rng);
  const double d = dispersion(EmbeddingTable(entries), 200, 4);
  for (auto& e : entries)
    for (auto& x : e.vector) x *= 3.0;
  EXPECT_NEAR(dispersion(EmbeddingTable(entries), 200, 4), d, 1e-14);
}

TEST(LatentAnalysis, SeparatedClasses) {
  Rng rng(5);
  const EmbeddingTable t(synth::two_class_embeddings(100, 8, 10.0, rng));
  const auto a = analyse_latent(t, {10000, 7, 2});
  const auto& s = a.summary;
  EXPECT_GT(s.cross_class.spread.median, s.same_class.spread.median);
  EXPECT_EQ(s.cross_class.n, 10000u);
  EXPECT_EQ(s.same_class.n, 9900u);  // 2 * C(100, 2) distinct same-class pairs
  ASSERT_EQ(s.variants.size(), 1u);
  ASSERT_TRUE(s.variants[0].normalised.has_value());
  EXPECT_EQ(s.variants[0].normalised->spread.median, 0.0);
  EXPECT_EQ(s.variants[0].normalised->spread.p97_5, 0.0);
  for (const auto* d : {&a.baselines.same_class, &a.baselines.cross_class})
    for (double x : *d) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 2.0);
    }
  for (const auto* st : {&s.same_class, &s.cross_class}) {
    EXPECT_LE(st->spread.p2_5, st->spread.q1);
    EXPECT_LE(st->spread.q1, st->spread.median);
    EXPECT_LE(st->spread.median, st->spread.q3);
    EXPECT_LE(st->spread.q3, st->spread.p97_5);
  }
}

TEST(LatentAnalysis, OutputsAreParseable) {
  const auto a = analyse_latent(hand_table(), {50, 1, 1});
  const auto j = nlohmann::json::parse(summary_json(a.summary));
  EXPECT_EQ(j["variants"][0]["variant"], "stain");
  EXPECT_EQ(j["variants"][0]["skipped"], 1);
  EXPECT_DOUBLE_EQ(j["variants"][0]["raw"]["median"].get<double>(), 1.0);
  const auto csv = distances_csv(a);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "kind,variant,id,distance");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 3 + 2 + 4);
}

}  // namespace
}  // namespace wsibench
