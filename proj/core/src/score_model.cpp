// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include "wsibench/score_model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "wsibench/csv.hpp"
#include "wsibench/error.hpp"

namespace wsibench {

std::string_view to_string(ModelKind m) noexcept {
  switch (m) {
    case ModelKind::MeanPool: return "mean_pool";
    case ModelKind::AttMil: return "attmil";
    case ModelKind::Transformer: return "transformer";
  }
  return "?";
}

std::string_view to_string(Augmentation a) noexcept {
  switch (a) {
    case Augmentation::None: return "none";
    case Augmentation::MacenkoSlide: return "macenko_slide";
    case Augmentation::MacenkoPatch: return "macenko_patch";
    case Augmentation::RotateFlip: return "rotate_flip";
    case Augmentation::All: return "all";
  }
  return "?";
}

std::string_view to_string(Magnification m) noexcept {
  return m == Magnification::Low ? "low" : "high";
}

ModelKind parse_model(std::string_view s) {
  if (s == "mean_pool") return ModelKind::MeanPool;
  if (s == "attmil") return ModelKind::AttMil;
  if (s == "transformer") return ModelKind::Transformer;
  fail(ErrorKind::MalformedRow, "unknown model '" + std::string(s) + "'");
}

Augmentation parse_augmentation(std::string_view s) {
  for (auto a : {Augmentation::None, Augmentation::MacenkoSlide, Augmentation::MacenkoPatch,
                 Augmentation::RotateFlip, Augmentation::All})
    if (s == to_string(a)) return a;
  fail(ErrorKind::MalformedRow, "unknown augmentation '" + std::string(s) + "'");
}

Magnification parse_magnification(std::string_view s) {
  if (s == "low") return Magnification::Low;
  if (s == "high") return Magnification::High;
  fail(ErrorKind::MalformedRow, "unknown magnification '" + std::string(s) + "'");
}

ScoreGrid make_grid(const Eigen::MatrixXd& values, std::vector<std::string> row_names) {
  ScoreGrid grid;
  grid.task = "task";
  if (row_names.empty())
    for (Eigen::Index i = 0; i < values.rows(); ++i) row_names.push_back("f" + std::to_string(i + 1));
  grid.extractors = std::move(row_names);
  for (Eigen::Index s = 0; s < values.cols(); ++s) grid.seeds.push_back(static_cast<int>(s + 1));
  grid.auroc = values;
  validate(grid);
  return grid;
}

void validate(const ScoreGrid& grid) {
  if (grid.extractors.empty() || grid.seeds.empty())
    fail(ErrorKind::MissingCell, "score grid needs at least one extractor and one seed");
  if (grid.auroc.rows() != static_cast<Eigen::Index>(grid.extractors.size()) ||
      grid.auroc.cols() != static_cast<Eigen::Index>(grid.seeds.size()))
    fail(ErrorKind::DimensionMismatch, "score grid shape does not match its labels");
  for (Eigen::Index i = 0; i < grid.auroc.rows(); ++i)
    for (Eigen::Index j = 0; j < grid.auroc.cols(); ++j) {
      const double v = grid.auroc(i, j);
      if (!(v >= 0.0 && v <= 1.0))
        fail(ErrorKind::ValueOutOfRange, "auroc " + csv::format_double(v) + " for " +
                                             grid.extractors[static_cast<std::size_t>(i)] + " outside [0,1]");
    }
}

namespace {

RunKey read_key(const csv::Table& t, const std::vector<std::string>& row, std::size_t line) {
  RunKey key;
  key.task = row[t.column("task")];
  key.model = parse_model(row[t.column("model")]);
  key.extractor = row[t.column("extractor")];
  key.seed = static_cast<int>(csv::parse_int(row[t.column("seed")], line));
  key.augmentation = parse_augmentation(row[t.column("augmentation")]);
  key.magnification = parse_magnification(row[t.column("magnification")]);
  if (key.task.empty() || key.extractor.empty())
    fail(ErrorKind::MalformedRow, "line " + std::to_string(line) + ": empty task or extractor");
  if (key.seed < 1) fail(ErrorKind::ValueOutOfRange, "line " + std::to_string(line) + ": seed must be >= 1");
  return key;
}

void require_header(const csv::Table& t, std::string_view expected) {
  std::string got;
  for (std::size_t i = 0; i < t.header.size(); ++i) got += (i ? "," : "") + t.header[i];
  if (got != expected) fail(ErrorKind::MalformedRow, "unexpected header '" + got + "'");
}

using GroupKey = std::tuple<std::string, ModelKind, Augmentation, Magnification>;

}  // namespace

std::vector<ScoreGrid> parse_scores(std::string_view csv_text, int expected_seeds) {
  const csv::Table t = csv::parse(csv_text);
  require_header(t, kScoresHeader);
  const std::size_t auroc_col = t.column("auroc");

  std::map<GroupKey, std::map<std::pair<std::string, int>, double>> groups;
  for (const auto& [line, row] : t.rows) {
    RunKey key = read_key(t, row, line);
    const double v = csv::parse_double(row[auroc_col], line);
    if (!(v >= 0.0 && v <= 1.0))
      fail(ErrorKind::ValueOutOfRange, "line " + std::to_string(line) + ": auroc " + row[auroc_col] +
                                           " outside [0,1]");
    if (expected_seeds > 0 && key.seed > expected_seeds)
      fail(ErrorKind::ValueOutOfRange, "line " + std::to_string(line) + ": seed " +
                                           std::to_string(key.seed) + " exceeds S=" +
                                           std::to_string(expected_seeds));
    auto& cells = groups[{key.task, key.model, key.augmentation, key.magnification}];
    if (!cells.emplace(std::pair{key.extractor, key.seed}, v).second)
      fail(ErrorKind::DuplicateRow, "line " + std::to_string(line) + ": duplicate run for " +
                                        key.extractor + " seed " + std::to_string(key.seed));
  }

  std::vector<ScoreGrid> out;
  for (const auto& [gk, cells] : groups) {
    ScoreGrid grid;
    std::tie(grid.task, grid.model, grid.augmentation, grid.magnification) = gk;
    std::set<std::string> extractors;
    int max_seed = 0;
    for (const auto& [cell, v] : cells) {
      extractors.insert(cell.first);
      max_seed = std::max(max_seed, cell.second);
    }
    const int S = expected_seeds > 0 ? expected_seeds : max_seed;
    grid.extractors.assign(extractors.begin(), extractors.end());
    for (int s = 1; s <= S; ++s) grid.seeds.push_back(s);
    grid.auroc.resize(static_cast<Eigen::Index>(grid.extractors.size()), S);
    for (std::size_t i = 0; i < grid.extractors.size(); ++i)
      for (int s = 1; s <= S; ++s) {
        auto it = cells.find({grid.extractors[i], s});
        if (it == cells.end())
          fail(ErrorKind::MissingCell, "task " + grid.task + " model " + std::string(to_string(grid.model)) +
                                           ": no run for (extractor " + grid.extractors[i] + ", seed " +
                                           std::to_string(s) + ")");
        grid.auroc(static_cast<Eigen::Index>(i), s - 1) = it->second;
      }
    out.push_back(std::move(grid));
  }
  return out;
}

std::vector<ScoreGrid> ingest_scores(const std::filesystem::path& path, int expected_seeds) {
  return parse_scores(csv::read_text(path), expected_seeds);
}

std::string emit_scores(const std::vector<ScoreGrid>& grids) {
  std::string out(kScoresHeader);
  out += '\n';
  for (const auto& g : grids)
    for (std::size_t i = 0; i < g.extractors.size(); ++i)
      for (std::size_t s = 0; s < g.seeds.size(); ++s) {
        out += csv::join({g.task, std::string(to_string(g.model)), g.extractors[i],
                          std::to_string(g.seeds[s]), std::string(to_string(g.augmentation)),
                          std::string(to_string(g.magnification)),
                          csv::format_double(g.auroc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)))});
        out += '\n';
      }
  return out;
}

std::size_t PredictionSet::positives() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const Prediction& p) { return p.label == 1; }));
}

void normalize(PredictionSet& set) {
  std::sort(set.samples.begin(), set.samples.end(),
            [](const Prediction& a, const Prediction& b) { return a.sample_id < b.sample_id; });
  for (std::size_t i = 1; i < set.samples.size(); ++i)
    if (set.samples[i].sample_id == set.samples[i - 1].sample_id)
      fail(ErrorKind::MalformedRow, "duplicate sample_id '" + set.samples[i].sample_id + "' in run " +
                                        set.key.task + "/" + set.key.extractor + "/seed " +
                                        std::to_string(set.key.seed));
  const std::size_t pos = set.positives();
  if (pos == 0 || pos == set.samples.size())
    fail(ErrorKind::SingleClassRun, "run " + set.key.task + "/" + set.key.extractor + "/seed " +
                                        std::to_string(set.key.seed) + " has a single label class");
}

std::vector<PredictionSet> parse_predictions(std::string_view csv_text) {
  const csv::Table t = csv::parse(csv_text);
  require_header(t, kPredictionsHeader);
  const std::size_t id_col = t.column("sample_id");
  const std::size_t score_col = t.column("score");
  const std::size_t label_col = t.column("label");

  std::map<RunKey, PredictionSet> runs;
  for (const auto& [line, row] : t.rows) {
    RunKey key = read_key(t, row, line);
    Prediction p;
    p.sample_id = row[id_col];
    p.score = csv::parse_double(row[score_col], line);
    const long long label = csv::parse_int(row[label_col], line);
    if (label != 0 && label != 1)
      fail(ErrorKind::MalformedRow, "line " + std::to_string(line) + ": label must be 0 or 1");
    if (!std::isfinite(p.score))
      fail(ErrorKind::MalformedRow, "line " + std::to_string(line) + ": non-finite score");
    p.label = static_cast<int>(label);
    auto& set = runs[key];
    set.key = key;
    set.samples.push_back(std::move(p));
  }
  std::vector<PredictionSet> out;
  out.reserve(runs.size());
  for (auto& [key, set] : runs) {
    normalize(set);
    out.push_back(std::move(set));
  }
  return out;
}

std::vector<PredictionSet> ingest_predictions(const std::filesystem::path& path) {
  return parse_predictions(csv::read_text(path));
}

std::string emit_predictions(const std::vector<PredictionSet>& sets) {
  std::string out(kPredictionsHeader);
  out += '\n';
  for (const auto& set : sets)
    for (const auto& p : set.samples) {
      out += csv::join({set.key.task, std::string(to_string(set.key.model)), set.key.extractor,
                        std::to_string(set.key.seed), std::string(to_string(set.key.augmentation)),
                        std::string(to_string(set.key.magnification)), p.sample_id,
                        csv::format_double(p.score), std::to_string(p.label)});
      out += '\n';
    }
  return out;
}

}  // namespace wsibench
