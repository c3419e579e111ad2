// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include "wsibench/matrix.hpp"

#include <json.hpp>

#include <algorithm>
#include <memory>
#include <set>

#include "wsibench/auroc.hpp"
#include "wsibench/csv.hpp"
#include "wsibench/error.hpp"
#include "wsibench/parallel.hpp"
#include "wsibench/report.hpp"

namespace wsibench {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool is_safe_name(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

template <class T, class Key>
void require_unique(const std::vector<T>& items, Key key, const char* what) {
  std::set<decltype(key(items.front()))> seen;
  for (const auto& i : items)
    if (!seen.insert(key(i)).second) fail(ErrorKind::InvalidConfig, std::string("duplicate ") + what);
}

mil::ModelShape build_shape(const ShapeOverrides& o, Eigen::Index input_dim) {
  mil::ModelShape s = mil::default_shape(input_dim, 2);
  s.hidden_dim = o.hidden_dim;
  s.attention_dim = o.attention_dim;
  s.heads = o.heads;
  s.ff_dim = o.ff_dim;
  s.layers = o.layers;
  s.classifier_dropout = o.classifier_dropout;
  s.transformer_dropout = o.transformer_dropout;
  return s;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::InvalidConfig, where + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      fail(ErrorKind::InvalidConfig, "unknown key '" + key + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_range(const json& j, const char* key, double (&out)[2]) {
  if (!j.contains(key)) return;
  const auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 2) fail(ErrorKind::InvalidConfig, std::string(key) + " must hold two numbers");
  out[0] = v[0];
  out[1] = v[1];
}

}  // namespace

void validate(const ExperimentConfig& c) {
  if (c.tasks.empty() || c.extractors.empty() || c.models.empty() || c.augment_groups.empty() || c.seeds.empty())
    fail(ErrorKind::InvalidConfig, "tasks, extractors, models, augment_groups and seeds must all be non-empty");
  for (const auto& t : c.tasks) {
    if (!is_safe_name(t.name)) fail(ErrorKind::InvalidConfig, "task name '" + t.name + "' must match [A-Za-z0-9_.-]+");
    if (t.train_slides < 4 || t.test_slides < 2)
      fail(ErrorKind::InvalidConfig, "task " + t.name + " needs >= 4 training and >= 2 test slides");
    synth::validate(t.slides);
  }
  for (const auto& e : c.extractors) {
    if (!is_safe_name(e.name))
      fail(ErrorKind::InvalidConfig, "extractor name '" + e.name + "' must match [A-Za-z0-9_.-]+");
    if (e.output_dim < 1 || e.grid < 1) fail(ErrorKind::InvalidConfig, "extractor " + e.name + " has a bad shape");
  }
  require_unique(c.tasks, [](const TaskSpec& t) { return t.name; }, "task name");
  require_unique(c.extractors, [](const EmbedderConfig& e) { return e.name; }, "extractor name");
  require_unique(c.models, [](ModelKind m) { return m; }, "model");
  require_unique(c.augment_groups, [](Augmentation a) { return a; }, "augmentation group");
  require_unique(c.seeds, [](int s) { return s; }, "seed");
  mil::validate(c.train);
  for (const auto& e : c.extractors) mil::validate(build_shape(c.shape, e.output_dim));
  if (c.bootstrap_resamples < 1) fail(ErrorKind::InvalidConfig, "bootstrap resamples must be >= 1");
  if (c.reference_profile && !fs::exists(*c.reference_profile))
    fail(ErrorKind::InvalidConfig, "reference profile " + c.reference_profile->string() + " does not exist");
}

ExperimentConfig parse_experiment_config(std::string_view text) {
  ExperimentConfig c;
  try {
    const json j = json::parse(text);
    check_keys(j,
               {"master_seed", "tasks", "extractors", "models", "augment_groups", "seeds", "train", "model_shape",
                "bootstrap", "reference_profile"},
               "experiment config");
    read(j, "master_seed", c.master_seed);
    if (j.contains("tasks"))
      for (const auto& t : j.at("tasks")) {
        check_keys(t,
                   {"name", "train_slides", "test_slides", "patch_size", "grid_rows", "grid_cols", "min_signal",
                    "max_signal", "signal_nuclei", "base_nuclei", "stain_jitter", "strength"},
                   "task");
        TaskSpec s;
        read(t, "name", s.name);
        read(t, "train_slides", s.train_slides);
        read(t, "test_slides", s.test_slides);
        read(t, "patch_size", s.slides.patch_size);
        read(t, "grid_rows", s.slides.grid_rows);
        read(t, "grid_cols", s.slides.grid_cols);
        read(t, "min_signal", s.slides.min_signal);
        read(t, "max_signal", s.slides.max_signal);
        read(t, "signal_nuclei", s.slides.signal_nuclei);
        read_range(t, "base_nuclei", s.slides.base_nuclei);
        read(t, "stain_jitter", s.slides.stain_jitter);
        read_range(t, "strength", s.slides.strength);
        c.tasks.push_back(std::move(s));
      }
    if (j.contains("extractors"))
      for (const auto& e : j.at("extractors")) {
        check_keys(e, {"name", "seed", "output_dim", "grid", "signal_gain", "signal_center"}, "extractor");
        EmbedderConfig x;
        read(e, "name", x.name);
        read(e, "seed", x.seed);
        read(e, "output_dim", x.output_dim);
        read(e, "grid", x.grid);
        read(e, "signal_gain", x.signal_gain);
        read(e, "signal_center", x.signal_center);
        c.extractors.push_back(std::move(x));
      }
    if (j.contains("models"))
      for (const auto& m : j.at("models")) c.models.push_back(parse_model(m.get<std::string>()));
    if (j.contains("augment_groups"))
      for (const auto& a : j.at("augment_groups")) c.augment_groups.push_back(parse_augmentation(a.get<std::string>()));
    read(j, "seeds", c.seeds);
    if (j.contains("train")) c.train = mil::parse_config(j.at("train").dump());
    if (j.contains("model_shape")) {
      const auto& s = j.at("model_shape");
      check_keys(s,
                 {"hidden_dim", "attention_dim", "heads", "ff_dim", "layers", "classifier_dropout",
                  "transformer_dropout"},
                 "model_shape");
      read(s, "hidden_dim", c.shape.hidden_dim);
      read(s, "attention_dim", c.shape.attention_dim);
      read(s, "heads", c.shape.heads);
      read(s, "ff_dim", c.shape.ff_dim);
      read(s, "layers", c.shape.layers);
      read(s, "classifier_dropout", c.shape.classifier_dropout);
      read(s, "transformer_dropout", c.shape.transformer_dropout);
    }
    if (j.contains("bootstrap")) {
      const auto& b = j.at("bootstrap");
      check_keys(b, {"resamples", "baseline"}, "bootstrap");
      read(b, "resamples", c.bootstrap_resamples);
      if (b.contains("baseline")) c.bootstrap_baseline = parse_augmentation(b.at("baseline").get<std::string>());
    }
    if (j.contains("reference_profile")) c.reference_profile = j.at("reference_profile").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("experiment config: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidConfig) throw;
    fail(ErrorKind::InvalidConfig, std::string("experiment config: ") + e.what());
  }
  return c;
}

std::string serialize_experiment_config(const ExperimentConfig& c) {
  ordered_json j;
  j["master_seed"] = c.master_seed;
  auto& tasks = j["tasks"] = json::array();
  for (const auto& t : c.tasks) {
    const auto& s = t.slides;
    tasks.push_back(ordered_json{{"name", t.name},
                                 {"train_slides", t.train_slides},
                                 {"test_slides", t.test_slides},
                                 {"patch_size", s.patch_size},
                                 {"grid_rows", s.grid_rows},
                                 {"grid_cols", s.grid_cols},
                                 {"min_signal", s.min_signal},
                                 {"max_signal", s.max_signal},
                                 {"signal_nuclei", s.signal_nuclei},
                                 {"base_nuclei", {s.base_nuclei[0], s.base_nuclei[1]}},
                                 {"stain_jitter", s.stain_jitter},
                                 {"strength", {s.strength[0], s.strength[1]}}});
  }
  auto& ex = j["extractors"] = json::array();
  for (const auto& e : c.extractors)
    ex.push_back(ordered_json{{"name", e.name},
                              {"seed", e.seed},
                              {"output_dim", e.output_dim},
                              {"grid", e.grid},
                              {"signal_gain", e.signal_gain},
                              {"signal_center", e.signal_center}});
  auto& models = j["models"] = json::array();
  for (auto m : c.models) models.push_back(std::string(to_string(m)));
  auto& groups = j["augment_groups"] = json::array();
  for (auto a : c.augment_groups) groups.push_back(std::string(to_string(a)));
  j["seeds"] = c.seeds;
  j["train"] = ordered_json::parse(mil::serialize_config(c.train));
  j["model_shape"] = ordered_json{{"hidden_dim", c.shape.hidden_dim},
                                  {"attention_dim", c.shape.attention_dim},
                                  {"heads", c.shape.heads},
                                  {"ff_dim", c.shape.ff_dim},
                                  {"layers", c.shape.layers},
                                  {"classifier_dropout", c.shape.classifier_dropout},
                                  {"transformer_dropout", c.shape.transformer_dropout}};
  j["bootstrap"] = ordered_json{{"resamples", c.bootstrap_resamples},
                                {"baseline", std::string(to_string(c.bootstrap_baseline))}};
  if (c.reference_profile) j["reference_profile"] = c.reference_profile->string();
  return j.dump(2) + "\n";
}

ExperimentConfig desk_config() {
  ExperimentConfig c;
  c.master_seed = 2026;
  TaskSpec a{"sparse", 64, 48, {}};
  a.slides.min_signal = 1;
  a.slides.max_signal = 2;
  TaskSpec b{"dense", 64, 48, {}};
  b.slides.min_signal = 2;
  b.slides.max_signal = 4;
  c.tasks = {a, b};
  c.extractors = {{"rp-weak", 11, 64, 8, 0.0, 0.2}, {"rp-mid", 12, 64, 8, 2.0, 0.2}, {"rp-strong", 13, 64, 8, 6.0, 0.2}};
  c.models = {ModelKind::AttMil, ModelKind::MeanPool};
  c.augment_groups = {Augmentation::None, Augmentation::RotateFlip};
  c.seeds = {1, 2, 3};
  c.train.lr = 5e-3;
  c.train.max_epochs = 30;
  c.train.t_max = 30;
  c.train.val_fraction = 0.25;
  return c;
}

TaskData generate_task(const TaskSpec& spec, std::uint64_t master_seed) {
  const Rng rng = Rng(master_seed).child("task", {fnv1a64(spec.name)});
  Rng pool_rng = rng.child("pool"), test_rng = rng.child("test");
  return {spec, synth::synthetic_slides(static_cast<std::size_t>(spec.train_slides), spec.name + "-train", spec.slides, pool_rng),
          synth::synthetic_slides(static_cast<std::size_t>(spec.test_slides), spec.name + "-test", spec.slides, test_rng)};
}

std::vector<std::string> training_variants(Augmentation group) {
  switch (group) {
    case Augmentation::RotateFlip: {
      std::vector<std::string> v;
      for (AugKind k : kRotateFlipAugmentations) v.emplace_back(to_string(k));
      return v;
    }
    case Augmentation::All: {
      std::vector<std::string> v{kOriginalVariant};
      for (AugKind k : kAllAugmentations) v.emplace_back(to_string(k));
      return v;
    }
    default: return {};
  }
}

std::vector<std::string> required_variants(const std::vector<Augmentation>& groups) {
  std::set<std::string> need;
  for (Augmentation g : groups) {
    if (g == Augmentation::MacenkoSlide) need.insert("macenko_slide");
    if (g == Augmentation::MacenkoPatch) need.insert(std::string(to_string(AugKind::MacenkoPatch)));
    for (const auto& v : training_variants(g)) need.insert(v);
  }
  std::vector<std::string> out{kOriginalVariant};
  if (need.contains("macenko_slide")) out.emplace_back("macenko_slide");
  for (AugKind k : kAllAugmentations)
    if (need.contains(std::string(to_string(k)))) out.emplace_back(to_string(k));
  return out;
}

std::vector<VariantDef> variant_defs(const std::vector<Augmentation>& groups, const TaskData& task,
                                     const StainProfile& reference) {
  std::vector<VariantDef> defs;
  for (const auto& name : required_variants(groups)) {
    if (name == kOriginalVariant) {
      defs.push_back({name, std::nullopt, false, {}});
    } else if (name == "macenko_slide") {
      using Key = std::pair<std::string, GridPos>;
      auto normalised = std::make_shared<std::map<Key, Image>>();
      for (const auto* slides : {&task.pool, &task.test})
        for (const auto& s : *slides) {
          std::vector<Patch> out;
          try {
            out = normalise_slidewise(s.image, s.patches, reference);
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::InsufficientTissue && e.kind() != ErrorKind::DegenerateCovariance) throw;
            out = s.patches;
          }
          for (auto& p : out) (*normalised)[{s.id, p.grid_pos}] = std::move(p.pixels);
        }
      defs.push_back({name, std::nullopt, false, [normalised](const Patch& p) {
                        return normalised->at({p.slide_id, p.grid_pos});
                      }});
    } else {
      defs.push_back({name, parse_aug_kind(name), false, {}});
    }
  }
  return defs;
}

const Eigen::MatrixXd& FeatureSet::get(const std::string& slide_id, const std::string& variant) const {
  const auto it = by_slide.find(slide_id);
  const auto v = std::find(variants.begin(), variants.end(), variant);
  if (it == by_slide.end() || v == variants.end())
    fail(ErrorKind::KeyMissing, "no features for " + slide_id + "/" + variant);
  return it->second[static_cast<std::size_t>(v - variants.begin())];
}

FeatureSet extract_features(const TaskData& task, const EmbedderConfig& extractor,
                            const std::vector<Augmentation>& groups, const FeatureOptions& options) {
  const auto defs = variant_defs(groups, task, options.reference);
  std::vector<const synth::SyntheticSlide*> slides;
  std::vector<Patch> patches;
  for (const auto* set : {&task.pool, &task.test})
    for (const auto& s : *set) {
      slides.push_back(&s);
      patches.insert(patches.end(), s.patches.begin(), s.patches.end());
    }
  const Embedder embedder(extractor);
  const auto d = static_cast<std::uint32_t>(embedder.dim());
  const CacheBuildOptions cache_options{options.augment_seed, options.reference, options.threads};
  const std::size_t V = defs.size();

  // vectors[patch * V + variant]
  std::vector<std::vector<float>> vectors(patches.size() * V);
  if (options.cache_path) {
    cache_build(*options.cache_path, patches, defs, [&](const Image& im) { return embedder.embed(im); }, d,
                cache_options);
    const auto cache = FeatureCache::open(*options.cache_path);
    for (std::size_t j = 0; j < vectors.size(); ++j) {
      const auto& p = patches[j / V];
      const auto f = cache.get(p.slide_id, p.grid_pos, static_cast<std::uint16_t>(j % V));
      vectors[j].assign(f.begin(), f.end());
    }
  } else {
    parallel_for(vectors.size(), options.threads, [&](std::size_t j) {
      vectors[j] = embedder.embed(variant_pixels(patches[j / V], defs[j % V], cache_options));
    });
  }

  FeatureSet fs;
  for (const auto& def : defs) fs.variants.push_back(def.name);
  std::size_t offset = 0;
  for (const auto* s : slides) {
    const auto n = static_cast<Eigen::Index>(s->patches.size());
    auto& mats = fs.by_slide[s->id];
    mats.assign(V, Eigen::MatrixXd(n, d));
    for (Eigen::Index i = 0; i < n; ++i)
      for (std::size_t v = 0; v < V; ++v) {
        const auto& f = vectors[(offset + static_cast<std::size_t>(i)) * V + v];
        for (std::uint32_t k = 0; k < d; ++k) mats[v](i, k) = f[k];
      }
    offset += s->patches.size();
  }
  return fs;
}

std::vector<mil::Bag> make_bags(const std::vector<synth::SyntheticSlide>& slides, const FeatureSet& features,
                                Augmentation group, bool training) {
  const std::string base = group == Augmentation::MacenkoSlide   ? "macenko_slide"
                           : group == Augmentation::MacenkoPatch ? std::string(to_string(AugKind::MacenkoPatch))
                                                                 : std::string(kOriginalVariant);
  const auto extra = training ? training_variants(group) : std::vector<std::string>{};
  std::vector<mil::Bag> bags;
  for (const auto& s : slides) {
    mil::Bag b{s.id, features.get(s.id, base), s.label, {}};
    for (const auto& v : extra) b.variants.push_back(features.get(s.id, v));
    bags.push_back(std::move(b));
  }
  return bags;
}

std::uint64_t cell_train_seed(std::uint64_t master_seed, const std::string& task, const std::string& extractor,
                              ModelKind model, int seed) {
  return Rng(master_seed)
      .child("train", {fnv1a64(task), fnv1a64(extractor), static_cast<std::uint64_t>(model),
                       static_cast<std::uint64_t>(static_cast<std::int64_t>(seed))})
      .next_u64();
}

std::uint64_t bootstrap_seed(std::uint64_t master_seed) { return Rng(master_seed).child("bootstrap").next_u64(); }

namespace {

std::uint64_t split_seed(std::uint64_t master_seed, const std::string& task, int seed) {
  return Rng(master_seed)
      .child("split", {fnv1a64(task), static_cast<std::uint64_t>(static_cast<std::int64_t>(seed))})
      .next_u64();
}

std::uint64_t augment_seed(std::uint64_t master_seed, const std::string& task) {
  return Rng(master_seed).child("augment", {fnv1a64(task)}).next_u64();
}

std::string cells_csv(const std::vector<CellResult>& cells) {
  std::string out = "task,model,extractor,seed,augmentation,magnification,epochs,best_epoch,stopped_early,auroc\n";
  for (const auto& c : cells)
    out += csv::join({c.key.task, std::string(to_string(c.key.model)), c.key.extractor, std::to_string(c.key.seed),
                      std::string(to_string(c.key.augmentation)), std::string(to_string(c.key.magnification)),
                      std::to_string(c.history.epochs.size()), std::to_string(c.history.best_epoch),
                      c.history.stopped_early ? "1" : "0", csv::format_double(c.auroc)}) +
           "\n";
  return out;
}

}  // namespace

std::vector<ScoreGrid> grids_from_cells(const std::vector<CellResult>& cells) {
  using GroupKey = std::tuple<std::string, ModelKind, Augmentation, Magnification>;
  std::map<GroupKey, std::map<std::pair<std::string, int>, double>> groups;
  for (const auto& c : cells)
    groups[{c.key.task, c.key.model, c.key.augmentation, c.key.magnification}][{c.key.extractor, c.key.seed}] = c.auroc;
  std::vector<ScoreGrid> grids;
  for (const auto& [key, values] : groups) {
    ScoreGrid g;
    std::tie(g.task, g.model, g.augmentation, g.magnification) = key;
    std::set<std::string> ex;
    std::set<int> seeds;
    for (const auto& [k, _] : values) {
      ex.insert(k.first);
      seeds.insert(k.second);
    }
    g.extractors.assign(ex.begin(), ex.end());
    g.seeds.assign(seeds.begin(), seeds.end());
    g.auroc.resize(static_cast<Eigen::Index>(ex.size()), static_cast<Eigen::Index>(seeds.size()));
    for (std::size_t i = 0; i < g.extractors.size(); ++i)
      for (std::size_t j = 0; j < g.seeds.size(); ++j) {
        const auto it = values.find({g.extractors[i], g.seeds[j]});
        if (it == values.end())
          fail(ErrorKind::MissingCell, g.task + ": no result for " + g.extractors[i] + " seed " + std::to_string(g.seeds[j]));
        g.auroc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = it->second;
      }
    grids.push_back(std::move(g));
  }
  return grids;
}

std::vector<NdsResult> nds_for_grids(const std::vector<ScoreGrid>& grids) {
  std::vector<NdsResult> out;
  for (const auto& g : grids) out.push_back(nds_exact(g));
  return out;
}

std::vector<BootstrapDistribution> bootstrap_against(const std::vector<PredictionSet>& sets, Augmentation baseline,
                                                     const BootstrapOptions& options) {
  std::set<std::string> extractors;
  std::set<ModelKind> models;
  std::set<Augmentation> groups;
  for (const auto& s : sets) {
    extractors.insert(s.key.extractor);
    models.insert(s.key.model);
    groups.insert(s.key.augmentation);
  }
  std::vector<BootstrapDistribution> out;
  if (!groups.contains(baseline)) return out;
  for (const auto& e : extractors)
    for (ModelKind m : models)
      for (Augmentation g : groups) {
        if (g == baseline) continue;
        const auto runs = pair_runs(sets, e, m, ConditionField::Augmentation, std::string(to_string(g)),
                                    std::string(to_string(baseline)));
        auto dist = bootstrap_diff(runs, options);
        dist.extractor = e + "/" + std::string(to_string(m));
        out.push_back(std::move(dist));
      }
  return out;
}

void write_reports(const fs::path& out_dir, const std::vector<NdsResult>& nds,
                   const std::vector<BootstrapDistribution>& bootstrap) {
  using GroupKey = std::tuple<ModelKind, Augmentation, Magnification>;
  std::map<GroupKey, std::vector<NdsResult>> by_group;
  for (const auto& r : nds) by_group[{r.model, r.augmentation, r.magnification}].push_back(r);
  for (const auto& [key, results] : by_group) {
    const auto& [m, a, mag] = key;
    const std::string stem =
        std::string(to_string(m)) + "_" + std::string(to_string(a)) + "_" + std::string(to_string(mag));
    const Report r = report_nds(results);
    csv::write_text(out_dir / "nds" / (stem + ".md"), r.human);
    csv::write_text(out_dir / "nds" / (stem + ".csv"), r.csv);
    csv::write_text(out_dir / "nds" / (stem + ".json"), r.json);
  }
  if (!bootstrap.empty()) {
    const Report r = report_bootstrap(bootstrap);
    csv::write_text(out_dir / "bootstrap.md", r.human);
    csv::write_text(out_dir / "bootstrap.csv", r.csv);
    csv::write_text(out_dir / "bootstrap.json", r.json);
  }
}

MatrixResult run_matrix(const ExperimentConfig& config, const MatrixOptions& options) {
  validate(config);
  const StainProfile reference = config.reference_profile
                                     ? parse_profile(csv::read_text(*config.reference_profile))
                                     : default_reference_profile();
  const std::uint64_t M = config.master_seed;

  std::vector<TaskData> tasks;
  std::vector<std::vector<FeatureSet>> features;  // [task][extractor]
  for (const auto& spec : config.tasks) {
    tasks.push_back(generate_task(spec, M));
    auto& row = features.emplace_back();
    for (const auto& e : config.extractors) {
      FeatureOptions fo{augment_seed(M, spec.name), reference, options.threads, std::nullopt};
      if (!options.out_dir.empty()) fo.cache_path = options.out_dir / "cache" / (spec.name + "__" + e.name + ".wbk");
      row.push_back(extract_features(tasks.back(), e, config.augment_groups, fo));
    }
  }

  struct Cell {
    std::size_t t, e;
    ModelKind model;
    Augmentation group;
    int seed;
  };
  std::vector<Cell> cells;
  for (std::size_t t = 0; t < tasks.size(); ++t)
    for (std::size_t e = 0; e < config.extractors.size(); ++e)
      for (ModelKind m : config.models)
        for (Augmentation g : config.augment_groups)
          for (int s : config.seeds) cells.push_back({t, e, m, g, s});

  MatrixResult result;
  result.cells.resize(cells.size());
  parallel_for(cells.size(), options.threads, [&](std::size_t i) {
    const Cell& c = cells[i];
    const TaskData& task = tasks[c.t];
    const FeatureSet& fs = features[c.t][c.e];
    const EmbedderConfig& ex = config.extractors[c.e];
    auto [train_bags, val_bags] = mil::split_train_val(make_bags(task.pool, fs, c.group, true),
                                                       config.train.val_fraction, split_seed(M, task.spec.name, c.seed));
    for (auto& b : val_bags) b.variants.clear();
    const auto test_bags = make_bags(task.test, fs, c.group, false);

    mil::TrainConfig tc = config.train;
    tc.rng_seed = cell_train_seed(M, task.spec.name, ex.name, c.model, c.seed);
    const auto trained = mil::train(train_bags, val_bags, tc, c.model, build_shape(config.shape, ex.output_dim));

    CellResult& out = result.cells[i];
    out.key = RunKey{task.spec.name, c.model, ex.name, c.seed, c.group, Magnification::Low};
    out.history = trained.history;
    out.predictions = mil::evaluate(trained.params, test_bags, out.key);
    normalize(out.predictions);
    out.auroc = auroc(out.predictions).value;
  });

  result.grids = grids_from_cells(result.cells);
  result.nds = nds_for_grids(result.grids);
  std::vector<PredictionSet> sets;
  for (const auto& c : result.cells) sets.push_back(c.predictions);
  BootstrapOptions bo;
  bo.resamples = config.bootstrap_resamples;
  bo.rng_seed = bootstrap_seed(M);
  bo.threads = options.threads;
  result.bootstrap = bootstrap_against(sets, config.bootstrap_baseline, bo);

  if (!options.out_dir.empty()) {
    csv::write_text(options.out_dir / "config.json", serialize_experiment_config(config));
    csv::write_text(options.out_dir / "scores.csv", emit_scores(result.grids));
    csv::write_text(options.out_dir / "predictions.csv", emit_predictions(sets));
    csv::write_text(options.out_dir / "cells.csv", cells_csv(result.cells));
    write_reports(options.out_dir, result.nds, result.bootstrap);
  }
  return result;
}

}  // namespace wsibench
