// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "wsibench/csv.hpp"
#include "wsibench/error.hpp"
#include "wsibench/matrix.hpp"

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

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.master_seed = 77;
  TaskSpec t{"tiny", 16, 12, {}};
  t.slides.grid_rows = 2;
  t.slides.grid_cols = 3;
  t.slides.min_signal = 1;
  t.slides.max_signal = 2;
  c.tasks = {t};
  c.extractors = {{"ex-a", 1, 16, 4, 0.0, 0.2}, {"ex-b", 2, 16, 4, 3.0, 0.2}};
  c.models = {ModelKind::AttMil};
  c.augment_groups = {Augmentation::None};
  c.seeds = {1, 2};
  c.train.max_epochs = 4;
  c.train.t_max = 4;
  c.train.lr = 5e-3;
  c.train.val_fraction = 0.25;
  c.shape = {8, 4, 2, 8, 1, 0.5, 0.1};
  c.bootstrap_resamples = 5;
  return c;
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) { fs::remove_all(path_); }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

TEST(Matrix, TwoExtractorsTwoSeedsGiveFourScoreRows) {
  TempDir dir("wsibench_matrix_rows");
  const auto r = run_matrix(tiny_config(), {1, dir.path()});
  EXPECT_EQ(r.cells.size(), 4u);
  const auto t = csv::parse(csv::read_text(dir.path() / "scores.csv"));
  EXPECT_EQ(csv::join(t.header), kScoresHeader);
  EXPECT_EQ(t.rows.size(), 4u);
  for (const auto& c : r.cells) {
    EXPECT_GE(c.auroc, 0.0);
    EXPECT_LE(c.auroc, 1.0);
    EXPECT_EQ(c.predictions.samples.size(), 12u);
  }
  EXPECT_TRUE(fs::exists(dir.path() / "nds" / "attmil_none_low.md"));
  EXPECT_TRUE(fs::exists(dir.path() / "cache" / "tiny__ex-a.wbk"));
  // A single group has nothing to compare against.
  EXPECT_FALSE(fs::exists(dir.path() / "bootstrap.json"));
}

std::map<std::string, std::string> read_outputs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = csv::read_text(e.path());
  return out;
}

TEST(Matrix, RerunsAndThreadCountsAreByteIdentical) {
  auto c = tiny_config();
  c.augment_groups = {Augmentation::None, Augmentation::RotateFlip};
  TempDir a("wsibench_matrix_a"), b("wsibench_matrix_b"), d("wsibench_matrix_d");
  run_matrix(c, {1, a.path()});
  run_matrix(c, {1, b.path()});
  run_matrix(c, {3, d.path()});
  const auto oa = read_outputs(a.path()), ob = read_outputs(b.path()), od = read_outputs(d.path());
  for (const char* f : {"scores.csv", "predictions.csv", "bootstrap.json", "bootstrap.csv", "nds/attmil_none_low.csv",
                        "nds/attmil_rotate_flip_low.json"})
    EXPECT_TRUE(oa.contains(f)) << f;
  EXPECT_EQ(oa, ob);
  EXPECT_EQ(oa, od);
}

TEST(Matrix, CachedAndDirectFeaturesTrainIdentically) {
  auto c = tiny_config();
  c.augment_groups = {Augmentation::All};
  c.seeds = {1};
  TempDir dir("wsibench_matrix_cache");
  const auto cached = run_matrix(c, {1, dir.path()});
  const auto direct = run_matrix(c, {1, {}});
  ASSERT_EQ(cached.cells.size(), direct.cells.size());
  for (std::size_t i = 0; i < cached.cells.size(); ++i) {
    const auto& x = cached.cells[i];
    const auto& y = direct.cells[i];
    ASSERT_EQ(x.history.epochs.size(), y.history.epochs.size());
    for (std::size_t e = 0; e < x.history.epochs.size(); ++e) {
      EXPECT_EQ(x.history.epochs[e].train_loss, y.history.epochs[e].train_loss);
      EXPECT_EQ(x.history.epochs[e].val_loss, y.history.epochs[e].val_loss);
    }
    ASSERT_EQ(x.predictions.samples.size(), y.predictions.samples.size());
    for (std::size_t k = 0; k < x.predictions.samples.size(); ++k)
      EXPECT_EQ(x.predictions.samples[k].score, y.predictions.samples[k].score);
  }
}

TEST(Matrix, RotateFlipDrawsOneOfFiveUniformly) {
  const auto c = tiny_config();
  const auto task = generate_task(c.tasks[0], c.master_seed);
  const auto fs = extract_features(task, c.extractors[0], {Augmentation::RotateFlip}, {3, default_reference_profile(), 1, {}});
  EXPECT_EQ(training_variants(Augmentation::RotateFlip),
            (std::vector<std::string>{"flip_h", "flip_v", "rotate90", "rotate180", "rotate270"}));
  const auto bags = make_bags(task.pool, fs, Augmentation::RotateFlip, true);
  for (std::size_t k = 0; k < bags.size(); ++k) {
    ASSERT_EQ(bags[k].variants.size(), 5u);
    EXPECT_EQ(bags[k].variants[2], fs.get(task.pool[k].id, "rotate90"));
  }
  for (const auto& b : make_bags(task.test, fs, Augmentation::RotateFlip, false)) EXPECT_TRUE(b.variants.empty());

  auto [train_bags, val_bags] = mil::split_train_val(bags, 0.25, 5);
  auto tc = c.train;
  tc.max_epochs = 4;
  tc.early_stop_patience = 100;
  std::map<int, std::array<double, 5>> per_epoch;
  std::array<double, 5> total{};
  std::size_t per_epoch_draws = 0;
  for (const auto& b : train_bags) per_epoch_draws += static_cast<std::size_t>(b.patches.rows());
  mil::train(train_bags, val_bags, tc, ModelKind::AttMil, mil::default_shape(16),
             [&](int epoch, std::size_t bag, const std::vector<std::size_t>& choice) {
               ASSERT_EQ(choice.size(), static_cast<std::size_t>(train_bags[bag].patches.rows()));
               for (std::size_t v : choice) {
                 ASSERT_LT(v, 5u);
                 per_epoch[epoch][v] += 1;
                 total[v] += 1;
               }
             });
  ASSERT_EQ(per_epoch.size(), 4u);
  auto within_3_sigma = [](const std::array<double, 5>& h, double n) {
    const double p = 0.2, sigma = std::sqrt(n * p * (1 - p));
    for (double x : h) EXPECT_LE(std::abs(x - n * p), 3 * sigma) << x << " of " << n;
  };
  for (const auto& [epoch, h] : per_epoch) within_3_sigma(h, static_cast<double>(per_epoch_draws));
  within_3_sigma(total, 4.0 * static_cast<double>(per_epoch_draws));
}

TEST(Matrix, MacenkoGroupsNormaliseEverySplit) {
  const auto c = tiny_config();
  const auto task = generate_task(c.tasks[0], c.master_seed);
  const auto fs = extract_features(task, c.extractors[1],
                                   {Augmentation::MacenkoSlide, Augmentation::MacenkoPatch},
                                   {3, default_reference_profile(), 1, {}});
  EXPECT_EQ(fs.variants, (std::vector<std::string>{"original", "macenko_slide", "macenko_patch"}));
  for (bool training : {true, false}) {
    const auto& slides = training ? task.pool : task.test;
    const auto slide_bags = make_bags(slides, fs, Augmentation::MacenkoSlide, training);
    const auto patch_bags = make_bags(slides, fs, Augmentation::MacenkoPatch, training);
    for (std::size_t k = 0; k < slides.size(); ++k) {
      EXPECT_EQ(slide_bags[k].patches, fs.get(slides[k].id, "macenko_slide"));
      EXPECT_EQ(patch_bags[k].patches, fs.get(slides[k].id, "macenko_patch"));
      EXPECT_NE(slide_bags[k].patches, fs.get(slides[k].id, "original"));
      EXPECT_TRUE(slide_bags[k].variants.empty());
    }
  }
}

TEST(Matrix, AllGroupOffersOriginalPlus27) {
  EXPECT_EQ(training_variants(Augmentation::All).size(), 28u);
  EXPECT_EQ(training_variants(Augmentation::All).front(), "original");
  EXPECT_TRUE(training_variants(Augmentation::None).empty());
  EXPECT_EQ(required_variants({Augmentation::All, Augmentation::MacenkoSlide}).size(), 29u);
}

TEST(ExperimentConfig, RoundTripAndDefaults) {
  const auto c = desk_config();
  validate(c);
  const auto text = serialize_experiment_config(c);
  EXPECT_EQ(serialize_experiment_config(parse_experiment_config(text)), text);
  const auto minimal = parse_experiment_config(
      R"({"tasks":[{"name":"t"}],"extractors":[{"name":"e"}],"models":["attmil"],"augment_groups":["none"],"seeds":[1]})");
  validate(minimal);
  EXPECT_EQ(minimal.tasks[0].train_slides, 48);
}

TEST(ExperimentConfig, Rejects) {
  expect_kind(ErrorKind::InvalidConfig, [] { parse_experiment_config(R"({"bogus":1})"); });
  expect_kind(ErrorKind::InvalidConfig, [] { parse_experiment_config(R"({"models":["svm"]})"); });
  expect_kind(ErrorKind::InvalidConfig, [] { parse_experiment_config("{"); });
  auto c = tiny_config();
  c.seeds.clear();
  expect_kind(ErrorKind::InvalidConfig, [&] { validate(c); });
  c = tiny_config();
  c.augment_groups.clear();
  expect_kind(ErrorKind::InvalidConfig, [&] { validate(c); });
  c = tiny_config();
  c.reference_profile = "/nonexistent/profile.json";
  expect_kind(ErrorKind::InvalidConfig, [&] { validate(c); });
  c = tiny_config();
  c.extractors[1].name = "ex-a";
  expect_kind(ErrorKind::InvalidConfig, [&] { validate(c); });
  c = tiny_config();
  c.tasks[0].name = "a/b";
  expect_kind(ErrorKind::InvalidConfig, [&] { validate(c); });
}

TEST(Matrix, SeedsDriveTrainingButNotGroups) {
  EXPECT_EQ(cell_train_seed(1, "t", "e", ModelKind::AttMil, 1), cell_train_seed(1, "t", "e", ModelKind::AttMil, 1));
  EXPECT_NE(cell_train_seed(1, "t", "e", ModelKind::AttMil, 1), cell_train_seed(1, "t", "e", ModelKind::AttMil, 2));
  EXPECT_NE(cell_train_seed(1, "t", "e", ModelKind::AttMil, 1), cell_train_seed(1, "t", "f", ModelKind::AttMil, 1));
  EXPECT_NE(cell_train_seed(1, "t", "e", ModelKind::AttMil, 1), cell_train_seed(2, "t", "e", ModelKind::AttMil, 1));
}

}  // namespace
}  // namespace wsibench
