// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "wsibench/error.hpp"
#include "wsibench/rng.hpp"
#include "wsibench/score_model.hpp"

namespace wsibench {
namespace {

const char* kMinimalScores =
    "task,model,extractor,seed,augmentation,magnification,auroc\n"
    "cdh1,attmil,uni,1,none,low,0.81\n"
    "cdh1,attmil,uni,2,none,low,0.79\n"
    "cdh1,attmil,ctp,1,none,low,0.75\n"
    "cdh1,attmil,ctp,2,none,low,0.72\n";

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::Io;
}

TEST(IngestScores, MinimalCompleteGrid) {
  auto grids = parse_scores(kMinimalScores, 2);
  ASSERT_EQ(grids.size(), 1u);
  const auto& g = grids[0];
  EXPECT_EQ(g.task, "cdh1");
  EXPECT_EQ(g.model, ModelKind::AttMil);
  ASSERT_EQ(g.extractors, (std::vector<std::string>{"ctp", "uni"}));
  EXPECT_EQ(g.seeds, (std::vector<int>{1, 2}));
  EXPECT_EQ(g.auroc(0, 0), 0.75);
  EXPECT_EQ(g.auroc(1, 1), 0.79);
}

TEST(IngestScores, MissingRowNamesTheCell) {
  std::string text = kMinimalScores;
  text.erase(text.find("cdh1,attmil,ctp,2"), std::string("cdh1,attmil,ctp,2,none,low,0.72\n").size());
  try {
    parse_scores(text, 2);
    FAIL() << "expected MissingCell";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingCell);
    EXPECT_NE(std::string(e.what()).find("extractor ctp, seed 2"), std::string::npos) << e.what();
  }
}

TEST(IngestScores, OutOfRangeAndDuplicates) {
  std::string bad = std::string(kMinimalScores) + "cdh1,attmil,x,1,none,low,1.2\n";
  EXPECT_EQ(kind_of([&] { parse_scores(bad, 2); }), ErrorKind::ValueOutOfRange);
  std::string dup = std::string(kMinimalScores) + "cdh1,attmil,uni,1,none,low,0.5\n";
  EXPECT_EQ(kind_of([&] { parse_scores(dup, 2); }), ErrorKind::DuplicateRow);
  std::string seed_high = std::string(kMinimalScores) + "cdh1,attmil,uni,3,none,low,0.5\n";
  EXPECT_EQ(kind_of([&] { parse_scores(seed_high, 2); }), ErrorKind::ValueOutOfRange);
  EXPECT_EQ(kind_of([&] { parse_scores("task,model\n", 2); }), ErrorKind::MalformedRow);
}

TEST(IngestScores, GroupsByConfiguration) {
  std::string text = std::string(kMinimalScores) +
                     "cdh1,attmil,uni,1,macenko_patch,low,0.8\n"
                     "cdh1,attmil,uni,2,macenko_patch,low,0.7\n";
  auto grids = parse_scores(text, 2);
  ASSERT_EQ(grids.size(), 2u);
  EXPECT_EQ(grids[0].augmentation, Augmentation::None);
  EXPECT_EQ(grids[1].augmentation, Augmentation::MacenkoPatch);
  EXPECT_EQ(grids[1].num_extractors(), 1u);
}

// Property: row order never matters, and emit/ingest round-trips exactly.
TEST(IngestScores, PermutationInvariantAndRoundTrips) {
  Rng rng(5);
  std::vector<std::string> lines;
  for (const char* task : {"a", "b"})
    for (const char* ex : {"e1", "e2", "e3"})
      for (int s = 1; s <= 4; ++s)
        lines.push_back(std::string(task) + ",transformer," + ex + "," + std::to_string(s) + ",all,high," +
                        std::to_string(rng.uniform()));
  auto assemble = [&](const std::vector<std::string>& ls) {
    std::string t = std::string(kScoresHeader) + "\n";
    for (const auto& l : ls) t += l + "\n";
    return t;
  };
  const auto reference = parse_scores(assemble(lines), 4);
  for (int trial = 0; trial < 20; ++trial) {
    rng.shuffle(std::span<std::string>(lines));
    auto again = parse_scores(assemble(lines), 4);
    ASSERT_EQ(again.size(), reference.size());
    for (std::size_t g = 0; g < again.size(); ++g) {
      EXPECT_EQ(again[g].extractors, reference[g].extractors);
      EXPECT_EQ(again[g].auroc, reference[g].auroc);
    }
  }
  const std::string emitted = emit_scores(reference);
  const auto reparsed = parse_scores(emitted, 4);
  EXPECT_EQ(emit_scores(reparsed), emitted);
  for (std::size_t g = 0; g < reparsed.size(); ++g)
    EXPECT_TRUE(reparsed[g].auroc.isApprox(reference[g].auroc, 1e-12));
}

const char* kPredHeader = "task,model,extractor,seed,augmentation,magnification,sample_id,score,label\n";

TEST(IngestPredictions, FourRows) {
  std::string text = std::string(kPredHeader) +
                     "t,attmil,uni,1,none,low,p4,0.8,1\n"
                     "t,attmil,uni,1,none,low,p1,0.1,0\n"
                     "t,attmil,uni,1,none,low,p3,0.35,1\n"
                     "t,attmil,uni,1,none,low,p2,0.4,0\n";
  auto sets = parse_predictions(text);
  ASSERT_EQ(sets.size(), 1u);
  ASSERT_EQ(sets[0].samples.size(), 4u);
  EXPECT_EQ(sets[0].samples[0].sample_id, "p1");
  EXPECT_EQ(sets[0].positives(), 2u);
}

TEST(IngestPredictions, SingleClassAndDuplicates) {
  std::string single = std::string(kPredHeader) +
                       "t,attmil,uni,1,none,low,a,0.8,1\n"
                       "t,attmil,uni,1,none,low,b,0.1,1\n"
                       "t,attmil,uni,1,none,low,c,0.3,1\n"
                       "t,attmil,uni,1,none,low,d,0.4,1\n";
  EXPECT_EQ(kind_of([&] { parse_predictions(single); }), ErrorKind::SingleClassRun);
  std::string dup = std::string(kPredHeader) +
                    "t,attmil,uni,1,none,low,a,0.8,1\n"
                    "t,attmil,uni,1,none,low,a,0.1,0\n";
  EXPECT_EQ(kind_of([&] { parse_predictions(dup); }), ErrorKind::MalformedRow);
  std::string badlabel = std::string(kPredHeader) + "t,attmil,uni,1,none,low,a,0.8,2\n";
  EXPECT_EQ(kind_of([&] { parse_predictions(badlabel); }), ErrorKind::MalformedRow);
}

}  // namespace
}  // namespace wsibench
