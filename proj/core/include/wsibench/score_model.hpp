// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace wsibench {

enum class ModelKind { MeanPool, AttMil, Transformer };
enum class Augmentation { None, MacenkoSlide, MacenkoPatch, RotateFlip, All };
enum class Magnification { Low, High };

std::string_view to_string(ModelKind m) noexcept;
std::string_view to_string(Augmentation a) noexcept;
std::string_view to_string(Magnification m) noexcept;
ModelKind parse_model(std::string_view s);
Augmentation parse_augmentation(std::string_view s);
Magnification parse_magnification(std::string_view s);

struct RunKey {
  std::string task;
  ModelKind model = ModelKind::AttMil;
  std::string extractor;
  int seed = 1;
  Augmentation augmentation = Augmentation::None;
  Magnification magnification = Magnification::Low;

  auto operator<=>(const RunKey&) const = default;
};

// One (task, model, augmentation, magnification) group: test AUROCs for
// every extractor x seed. Rows sorted by extractor name, columns by seed.
struct ScoreGrid {
  std::string task;
  ModelKind model = ModelKind::AttMil;
  Augmentation augmentation = Augmentation::None;
  Magnification magnification = Magnification::Low;
  std::vector<std::string> extractors;
  std::vector<int> seeds;
  Eigen::MatrixXd auroc;  // extractors.size() x seeds.size()

  std::size_t num_extractors() const noexcept { return extractors.size(); }
  std::size_t num_seeds() const noexcept { return seeds.size(); }
};

// Builds a grid with generic row labels; for tests and ad-hoc inputs.
ScoreGrid make_grid(const Eigen::MatrixXd& values, std::vector<std::string> row_names = {});
// Checks the ScoreGrid invariants (non-empty, complete, values in [0, 1]).
void validate(const ScoreGrid& grid);

struct Prediction {
  std::string sample_id;
  double score = 0.0;
  int label = 0;
};

struct PredictionSet {
  RunKey key;
  std::vector<Prediction> samples;  // sorted by sample_id after ingestion

  std::size_t positives() const noexcept;
  std::size_t negatives() const noexcept { return samples.size() - positives(); }
};

// expected_seeds == 0 infers S from the largest seed present in each group.
std::vector<ScoreGrid> parse_scores(std::string_view csv_text, int expected_seeds);
std::vector<ScoreGrid> ingest_scores(const std::filesystem::path& path, int expected_seeds);
std::string emit_scores(const std::vector<ScoreGrid>& grids);

std::vector<PredictionSet> parse_predictions(std::string_view csv_text);
std::vector<PredictionSet> ingest_predictions(const std::filesystem::path& path);
std::string emit_predictions(const std::vector<PredictionSet>& sets);

// Validates label diversity and unique sample ids, and sorts by sample_id.
void normalize(PredictionSet& set);

inline constexpr std::string_view kScoresHeader =
    "task,model,extractor,seed,augmentation,magnification,auroc";
inline constexpr std::string_view kPredictionsHeader =
    "task,model,extractor,seed,augmentation,magnification,sample_id,score,label";

}  // namespace wsibench
