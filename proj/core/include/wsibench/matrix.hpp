// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wsibench/bootstrap.hpp"
#include "wsibench/embedder.hpp"
#include "wsibench/feature_cache.hpp"
#include "wsibench/mil.hpp"
#include "wsibench/nds.hpp"
#include "wsibench/synthetic.hpp"

namespace wsibench {

struct TaskSpec {
  std::string name;
  int train_slides = 48;  // split into train and validation per seed
  int test_slides = 32;
  synth::SlideTaskOptions slides;
};

struct ShapeOverrides {
  Eigen::Index hidden_dim = 32;
  Eigen::Index attention_dim = 16;
  Eigen::Index heads = 4;
  Eigen::Index ff_dim = 64;
  Eigen::Index layers = 2;
  double classifier_dropout = 0.5;
  double transformer_dropout = 0.1;
};

struct ExperimentConfig {
  std::uint64_t master_seed = 0;
  std::vector<TaskSpec> tasks;
  std::vector<EmbedderConfig> extractors;
  std::vector<ModelKind> models;
  std::vector<Augmentation> augment_groups;
  std::vector<int> seeds;
  mil::TrainConfig train;  // rng_seed is replaced per cell
  ShapeOverrides shape;
  int bootstrap_resamples = 25;
  Augmentation bootstrap_baseline = Augmentation::None;
  std::optional<std::filesystem::path> reference_profile;

  std::size_t num_seeds() const noexcept { return seeds.size(); }
  std::size_t num_extractors() const noexcept { return extractors.size(); }
};

// Structure and value checks, plus existence of referenced paths.
void validate(const ExperimentConfig& config);
// Unknown keys raise InvalidConfig; omitted keys keep their defaults.
ExperimentConfig parse_experiment_config(std::string_view json_text);
std::string serialize_experiment_config(const ExperimentConfig& config);
// Small three-extractor, two-task configuration that runs in seconds.
ExperimentConfig desk_config();

struct TaskData {
  TaskSpec spec;
  std::vector<synth::SyntheticSlide> pool;  // train + validation
  std::vector<synth::SyntheticSlide> test;
};
TaskData generate_task(const TaskSpec& spec, std::uint64_t master_seed);

// Variant names a set of groups needs, "original" first.
std::vector<std::string> required_variants(const std::vector<Augmentation>& groups);
// The pixel transforms behind `required_variants`; slide-level Macenko
// profiles are fitted here, once per slide.
std::vector<VariantDef> variant_defs(const std::vector<Augmentation>& groups, const TaskData& task,
                                     const StainProfile& reference);

// One n x d_x matrix per (slide, variant).
struct FeatureSet {
  std::vector<std::string> variants;
  std::map<std::string, std::vector<Eigen::MatrixXd>> by_slide;

  const Eigen::MatrixXd& get(const std::string& slide_id, const std::string& variant) const;
};

struct FeatureOptions {
  std::uint64_t augment_seed = 0;
  StainProfile reference;
  unsigned threads = 1;
  // When set, features go through a cache file at this path and are read back.
  std::optional<std::filesystem::path> cache_path;
};
FeatureSet extract_features(const TaskData& task, const EmbedderConfig& extractor,
                            const std::vector<Augmentation>& groups, const FeatureOptions& options);

// Training bags carry augmented copies for rotate_flip (5) and all (28); the
// Macenko groups replace the features of every split. Evaluation bags are
// otherwise unaugmented.
std::vector<mil::Bag> make_bags(const std::vector<synth::SyntheticSlide>& slides, const FeatureSet& features,
                                Augmentation group, bool training);
std::vector<std::string> training_variants(Augmentation group);

struct CellResult {
  RunKey key;
  mil::TrainHistory history;
  PredictionSet predictions;
  double auroc = 0.0;
};

struct MatrixResult {
  std::vector<CellResult> cells;  // cartesian order task, extractor, model, group, seed
  std::vector<ScoreGrid> grids;
  std::vector<NdsResult> nds;
  std::vector<BootstrapDistribution> bootstrap;
};

struct MatrixOptions {
  unsigned threads = 1;
  // Empty: nothing written and features computed in memory.
  std::filesystem::path out_dir;
};

MatrixResult run_matrix(const ExperimentConfig& config, const MatrixOptions& options = {});

// Training seed of one cell; shared by all augmentation groups.
std::uint64_t cell_train_seed(std::uint64_t master_seed, const std::string& task, const std::string& extractor,
                              ModelKind model, int seed);

// Grids from cell results: one per (task, model, group), rows sorted by name.
std::vector<ScoreGrid> grids_from_cells(const std::vector<CellResult>& cells);
std::vector<NdsResult> nds_for_grids(const std::vector<ScoreGrid>& grids);
// Every non-baseline group against the baseline, per extractor and model.
std::vector<BootstrapDistribution> bootstrap_against(const std::vector<PredictionSet>& sets,
                                                     Augmentation baseline, const BootstrapOptions& options);

std::uint64_t bootstrap_seed(std::uint64_t master_seed);

// Writes nds/ tables and bootstrap.{md,csv,json} under out_dir.
void write_reports(const std::filesystem::path& out_dir, const std::vector<NdsResult>& nds,
                   const std::vector<BootstrapDistribution>& bootstrap);

}  // namespace wsibench
