// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

// wsi-benchkit: command-line front end for every wsibench module.
// Exit codes: 0 success, 2 validation error, 3 runtime error.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "wsibench/auroc.hpp"
#include "wsibench/csv.hpp"
#include "wsibench/error.hpp"
#include "wsibench/feature_cache.hpp"
#include "wsibench/image.hpp"
#include "wsibench/latent.hpp"
#include "wsibench/macenko.hpp"
#include "wsibench/matrix.hpp"
#include "wsibench/mil.hpp"
#include "wsibench/report.hpp"

namespace fs = std::filesystem;
using namespace wsibench;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string config;
  std::string out = ".";

  std::uint64_t seed_or(std::uint64_t fallback) const { return seed.value_or(fallback); }
  fs::path out_dir() const { return out; }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

void write_report(const fs::path& dir, const std::string& stem, const Report& r) {
  csv::write_text(dir / (stem + ".md"), r.human);
  csv::write_text(dir / (stem + ".csv"), r.csv);
  csv::write_text(dir / (stem + ".json"), r.json);
  std::cout << r.human;
}

StainProfile load_reference(const std::string& path) {
  return path.empty() ? default_reference_profile() : parse_profile(csv::read_text(path));
}

std::string patch_file_name(const Patch& p) {
  return p.slide_id + "_r" + std::to_string(p.grid_pos.row) + "_c" + std::to_string(p.grid_pos.col) + ".png";
}

void write_patches(const fs::path& dir, const std::vector<Patch>& patches) {
  std::string manifest = "slide_id,row,col,path\n";
  for (const auto& p : patches) {
    const fs::path rel = fs::path("patches") / patch_file_name(p);
    write_image(dir / rel, p.pixels);
    manifest += csv::join({p.slide_id, std::to_string(p.grid_pos.row), std::to_string(p.grid_pos.col), rel.string()}) +
                "\n";
  }
  csv::write_text(dir / "manifest.csv", manifest);
}

std::vector<Patch> read_manifest(const fs::path& manifest) {
  const auto t = csv::read_file(manifest);
  const auto c_slide = t.column("slide_id"), c_row = t.column("row"), c_col = t.column("col"),
             c_path = t.column("path");
  std::vector<Patch> patches;
  for (const auto& [line, row] : t.rows) {
    fs::path p = row.at(c_path);
    if (p.is_relative()) p = manifest.parent_path() / p;
    patches.push_back({read_image(p), row.at(c_slide),
                       {static_cast<int>(csv::parse_int(row.at(c_row), line)),
                        static_cast<int>(csv::parse_int(row.at(c_col), line))}});
  }
  return patches;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

// ---------------------------------------------------------------------------
// preproc

void add_preproc(CLI::App& app, const Globals& g, std::function<void()>& action) {
  auto* pre = app.add_subcommand("preproc", "Tiling, stain normalisation, augmentation and feature caching");
  pre->require_subcommand(1);

  {
    auto* cmd = pre->add_subcommand("tile", "Cut a slide raster into non-overlapping square patches");
    auto input = std::make_shared<std::string>();
    auto size = std::make_shared<int>(224);
    auto id = std::make_shared<std::string>();
    cmd->add_option("--input", *input, "Slide image (.png or .ppm)")->required();
    cmd->add_option("--patch-size", *size, "Patch edge length in pixels");
    cmd->add_option("--slide-id", *id, "Slide identifier (default: file stem)");
    cmd->callback([&, input, size, id] {
      action = [&, input, size, id] {
        const auto patches = tile(read_image(*input), *size, id->empty() ? stem_of(*input) : *id);
        write_patches(g.out_dir(), patches);
        std::cout << "wrote " << patches.size() << " patches and manifest.csv to " << g.out << "\n";
      };
    });
  }
  {
    auto* cmd = pre->add_subcommand("macenko", "Macenko stain normalisation of a slide, slidewise or patchwise");
    auto input = std::make_shared<std::string>();
    auto size = std::make_shared<int>(224);
    auto mode = std::make_shared<std::string>("slide");
    auto reference = std::make_shared<std::string>();
    auto fit_only = std::make_shared<bool>(false);
    cmd->add_option("--input", *input, "Slide image")->required();
    cmd->add_option("--patch-size", *size, "Patch edge length in pixels");
    cmd->add_option("--mode", *mode, "slide or patch")->check(CLI::IsMember({"slide", "patch"}));
    cmd->add_option("--reference", *reference, "Reference stain profile JSON (default: built-in)");
    cmd->add_flag("--fit-only", *fit_only, "Only write the fitted profile of the input");
    cmd->callback([&, input, size, mode, reference, fit_only] {
      action = [&, input, size, mode, reference, fit_only] {
        const Image slide = read_image(*input);
        if (*fit_only) {
          csv::write_text(g.out_dir() / "profile.json", serialize_profile(macenko_fit(slide)) + "\n");
          std::cout << "wrote profile.json to " << g.out << "\n";
          return;
        }
        const auto patches = tile(slide, *size, stem_of(*input));
        const StainProfile ref = load_reference(*reference);
        const auto out = *mode == "slide" ? normalise_slidewise(slide, patches, ref) : normalise_patchwise(patches, ref);
        if (*mode == "slide") csv::write_text(g.out_dir() / "source_profile.json", serialize_profile(macenko_fit(slide)) + "\n");
        write_patches(g.out_dir(), out);
        std::cout << "normalised " << out.size() << " patches (" << *mode << "wise) into " << g.out << "\n";
      };
    });
  }
  {
    auto* cmd = pre->add_subcommand("augment", "Apply one catalogue augmentation (or all) to a patch");
    auto input = std::make_shared<std::string>();
    auto kind = std::make_shared<std::string>("all");
    auto crop = std::make_shared<bool>(false);
    auto reference = std::make_shared<std::string>();
    cmd->add_option("--input", *input, "Patch image")->required();
    cmd->add_option("--kind", *kind, "Augmentation name, or 'all'");
    cmd->add_flag("--center-crop", *crop, "Follow with a 1.5x centre zoom");
    cmd->add_option("--reference", *reference, "Reference stain profile for macenko_patch");
    cmd->callback([&, input, kind, crop, reference] {
      action = [&, input, kind, crop, reference] {
        const Image img = read_image(*input);
        std::vector<AugKind> kinds;
        if (*kind == "all")
          kinds.assign(kAllAugmentations.begin(), kAllAugmentations.end());
        else
          kinds.push_back(parse_aug_kind(*kind));
        const StainProfile ref = load_reference(*reference);
        for (AugKind k : kinds) {
          AugmentationSpec spec = make_spec(k, g.seed_or(0), img.width, img.height, ref);
          spec.center_crop = *crop;
          write_image(g.out_dir() / (stem_of(*input) + "_" + std::string(to_string(k)) + ".png"),
                      apply_augmentation(img, spec));
        }
        std::cout << "wrote " << kinds.size() << " augmented images to " << g.out << "\n";
      };
    });
  }
  {
    auto* cmd = pre->add_subcommand("cache", "Embed every (patch, variant) pair into a WBK1 feature cache");
    auto manifest = std::make_shared<std::string>();
    auto input = std::make_shared<std::string>();
    auto size = std::make_shared<int>(224);
    auto variants = std::make_shared<std::string>("all");
    auto ecfg = std::make_shared<EmbedderConfig>();
    auto reference = std::make_shared<std::string>();
    cmd->add_option("--manifest", *manifest, "Patch manifest CSV from 'preproc tile'");
    cmd->add_option("--input", *input, "Slide image to tile instead of a manifest");
    cmd->add_option("--patch-size", *size, "Patch edge length when tiling --input");
    cmd->add_option("--variants", *variants, "'all', 'original', or a comma list of augmentation names");
    cmd->add_option("--name", ecfg->name, "Extractor name");
    cmd->add_option("--extractor-seed", ecfg->seed, "Projection seed of the stand-in embedder");
    cmd->add_option("--dim", ecfg->output_dim, "Feature width");
    cmd->add_option("--grid", ecfg->grid, "Downsampling grid");
    cmd->add_option("--gain", ecfg->signal_gain, "Weight of the stain descriptor");
    cmd->add_option("--reference", *reference, "Reference stain profile for macenko_patch");
    cmd->callback([&, manifest, input, size, variants, ecfg, reference] {
      action = [&, manifest, input, size, variants, ecfg, reference] {
        if (manifest->empty() == input->empty())
          fail(ErrorKind::InvalidConfig, "give exactly one of --manifest or --input");
        const auto patches = manifest->empty() ? tile(read_image(*input), *size, stem_of(*input)) : read_manifest(*manifest);
        std::vector<VariantDef> defs;
        if (*variants == "all") {
          defs = all_variants();
        } else {
          defs.push_back({kOriginalVariant, std::nullopt, false, {}});
          if (*variants != "original")
            for (const auto& name : split_list(*variants))
              if (name != kOriginalVariant) defs.push_back({name, parse_aug_kind(name), false, {}});
        }
        const Embedder embedder(*ecfg);
        const CacheBuildOptions opts{g.seed_or(0), load_reference(*reference), g.threads};
        const auto report = cache_build(g.out_dir() / "features.wbk", patches, defs,
                                        [&](const Image& im) { return embedder.embed(im); },
                                        static_cast<std::uint32_t>(embedder.dim()), opts);
        nlohmann::ordered_json j{{"patches", patches.size()},
                                 {"variants", defs.size()},
                                 {"d_x", embedder.dim()},
                                 {"records", report.records},
                                 {"storage_model_bytes",
                                  cache_payload_bytes(patches.size(), defs.size(),
                                                      static_cast<std::size_t>(embedder.dim()))},
                                 {"payload_bytes", report.payload_bytes},
                                 {"header_bytes", report.header_bytes},
                                 {"file_bytes", report.file_bytes}};
        csv::write_text(g.out_dir() / "cache_report.json", j.dump(2) + "\n");
        std::cout << j.dump(2) << "\n";
      };
    });
  }
}

// ---------------------------------------------------------------------------
// mil

struct LabelRow {
  std::string patient;
  std::vector<std::string> slides;
  int label = 0;
  std::string split;
};

std::vector<LabelRow> read_labels(const fs::path& path) {
  const auto t = csv::read_file(path);
  const auto c_patient = t.column("patient_id"), c_slide = t.column("slide_id"), c_label = t.column("label");
  const bool has_split = std::find(t.header.begin(), t.header.end(), "split") != t.header.end();
  std::map<std::string, LabelRow> rows;
  std::vector<std::string> order;
  for (const auto& [line, row] : t.rows) {
    const std::string& p = row.at(c_patient);
    auto [it, fresh] = rows.try_emplace(p);
    LabelRow& r = it->second;
    const int label = static_cast<int>(csv::parse_int(row.at(c_label), line));
    const std::string split = has_split ? row.at(t.column("split")) : "";
    if (fresh) {
      order.push_back(p);
      r = {p, {}, label, split};
    } else if (r.label != label || r.split != split) {
      fail(ErrorKind::MalformedRow, "line " + std::to_string(line) + ": patient " + p + " has conflicting rows");
    }
    r.slides.push_back(row.at(c_slide));
  }
  std::vector<LabelRow> out;
  for (const auto& p : order) out.push_back(rows.at(p));
  return out;
}

mil::Bag bag_from_cache(const FeatureCache& cache, const LabelRow& row, bool with_variants) {
  const auto d = static_cast<Eigen::Index>(cache.d_x());
  std::vector<std::pair<std::string, GridPos>> keys;
  for (const auto& s : row.slides)
    for (const auto& pos : cache.positions(s, 0)) keys.emplace_back(s, pos);
  if (keys.empty()) fail(ErrorKind::KeyMissing, "no cached patches for patient " + row.patient);
  auto matrix_for = [&](std::uint16_t variant) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(keys.size()), d);
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const auto f = cache.get(keys[i].first, keys[i].second, variant);
      for (Eigen::Index k = 0; k < d; ++k) m(static_cast<Eigen::Index>(i), k) = f[static_cast<std::size_t>(k)];
    }
    return m;
  };
  mil::Bag bag{row.patient, matrix_for(cache.variant_index(kOriginalVariant)), row.label, {}};
  if (with_variants)
    for (std::size_t v = 0; v < cache.variants().size(); ++v) bag.variants.push_back(matrix_for(static_cast<std::uint16_t>(v)));
  return bag;
}

struct ShapeFlags {
  Eigen::Index hidden = 512, attention = 256, heads = 8, ff = 2048, layers = 2;
  double classifier_dropout = 0.5, transformer_dropout = 0.1;
};

void add_mil(CLI::App& app, const Globals& g, std::function<void()>& action) {
  auto* mil_cmd = app.add_subcommand("mil", "Train and evaluate MIL aggregators on cached features");
  mil_cmd->require_subcommand(1);
  {
    auto* cmd = mil_cmd->add_subcommand("train", "Train one aggregator; writes model.json and history.csv");
    auto bags = std::make_shared<std::string>();
    auto labels = std::make_shared<std::string>();
    auto model = std::make_shared<std::string>("attmil");
    auto augment = std::make_shared<bool>(false);
    auto shape = std::make_shared<ShapeFlags>();
    cmd->add_option("--bags", *bags, "Feature cache (.wbk)")->required();
    cmd->add_option("--labels", *labels, "CSV patient_id,slide_id,label[,split]")->required();
    cmd->add_option("--model", *model, "mean_pool, attmil or transformer");
    cmd->add_flag("--augment", *augment, "Draw one cached variant per patch per epoch");
    cmd->add_option("--hidden-dim", shape->hidden);
    cmd->add_option("--attention-dim", shape->attention);
    cmd->add_option("--heads", shape->heads);
    cmd->add_option("--ff-dim", shape->ff);
    cmd->add_option("--layers", shape->layers);
    cmd->add_option("--classifier-dropout", shape->classifier_dropout);
    cmd->add_option("--transformer-dropout", shape->transformer_dropout);
    cmd->callback([&, bags, labels, model, augment, shape] {
      action = [&, bags, labels, model, augment, shape] {
        mil::TrainConfig cfg = g.config.empty() ? mil::TrainConfig{} : mil::parse_config(csv::read_text(g.config));
        if (g.seed) cfg.rng_seed = *g.seed;
        mil::validate(cfg);
        const auto cache = FeatureCache::open(*bags);
        std::vector<mil::Bag> train_bags, val_bags, pool;
        bool explicit_split = false;
        for (const auto& row : read_labels(*labels)) {
          if (!row.split.empty()) explicit_split = true;
          if (row.split == "test") continue;
          auto bag = bag_from_cache(cache, row, *augment);
          if (row.split == "val") {
            bag.variants.clear();
            val_bags.push_back(std::move(bag));
          } else if (row.split == "train") {
            train_bags.push_back(std::move(bag));
          } else {
            pool.push_back(std::move(bag));
          }
        }
        if (!explicit_split) {
          std::tie(train_bags, val_bags) = mil::split_train_val(pool, cfg.val_fraction, cfg.rng_seed);
          for (auto& b : val_bags) b.variants.clear();
        }
        mil::ModelShape s = mil::default_shape(static_cast<Eigen::Index>(cache.d_x()));
        s.hidden_dim = shape->hidden;
        s.attention_dim = shape->attention;
        s.heads = shape->heads;
        s.ff_dim = shape->ff;
        s.layers = shape->layers;
        s.classifier_dropout = shape->classifier_dropout;
        s.transformer_dropout = shape->transformer_dropout;
        const auto result = mil::train(train_bags, val_bags, cfg, parse_model(*model), s);
        csv::write_text(g.out_dir() / "model.json", mil::serialize_params(result.params));
        csv::write_text(g.out_dir() / "history.csv", mil::history_csv(result.history));
        csv::write_text(g.out_dir() / "train_config.json", mil::serialize_config(cfg) + "\n");
        std::cout << "trained " << *model << " on " << train_bags.size() << " bags (" << val_bags.size()
                  << " validation) for " << result.history.epochs.size() << " epochs; best epoch "
                  << result.history.best_epoch << "\n";
      };
    });
  }
  {
    auto* cmd = mil_cmd->add_subcommand("eval", "Score bags with a trained model; writes predictions.csv");
    auto bags = std::make_shared<std::string>();
    auto labels = std::make_shared<std::string>();
    auto model_file = std::make_shared<std::string>();
    auto key = std::make_shared<RunKey>();
    auto model = std::make_shared<std::string>("attmil");
    auto aug = std::make_shared<std::string>("none");
    auto mag = std::make_shared<std::string>("low");
    cmd->add_option("--bags", *bags, "Feature cache (.wbk)")->required();
    cmd->add_option("--labels", *labels, "CSV patient_id,slide_id,label[,split]; only split=test rows if present")
        ->required();
    cmd->add_option("--model-file", *model_file, "model.json from 'mil train'")->required();
    cmd->add_option("--task", key->task, "Task label for the predictions file");
    cmd->add_option("--extractor", key->extractor, "Extractor label for the predictions file");
    cmd->add_option("--model", *model, "Model label for the predictions file");
    cmd->add_option("--augmentation", *aug, "Augmentation label for the predictions file");
    cmd->add_option("--magnification", *mag, "Magnification label for the predictions file");
    cmd->callback([&, bags, labels, model_file, key, model, aug, mag] {
      action = [&, bags, labels, model_file, key, model, aug, mag] {
        const auto cache = FeatureCache::open(*bags);
        const auto params = mil::deserialize_params(csv::read_text(*model_file));
        const auto rows = read_labels(*labels);
        const bool has_test = std::any_of(rows.begin(), rows.end(), [](const LabelRow& r) { return r.split == "test"; });
        std::vector<mil::Bag> eval_bags;
        for (const auto& row : rows)
          if (!has_test || row.split == "test") eval_bags.push_back(bag_from_cache(cache, row, false));
        RunKey k = *key;
        if (k.task.empty()) k.task = "task";
        if (k.extractor.empty()) k.extractor = "extractor";
        k.model = parse_model(*model);
        k.augmentation = parse_augmentation(*aug);
        k.magnification = parse_magnification(*mag);
        k.seed = static_cast<int>(g.seed_or(1));
        auto preds = mil::evaluate(params, eval_bags, k);
        normalize(preds);
        csv::write_text(g.out_dir() / "predictions.csv", emit_predictions({preds}));
        std::cout << "AUROC " << csv::format_double(auroc(preds).value) << " on " << preds.samples.size()
                  << " bags\n";
      };
    });
  }
}

// ---------------------------------------------------------------------------
// nds, bootstrap, latent

void add_nds(CLI::App& app, const Globals& g, std::function<void()>& action) {
  auto* cmd = app.add_subcommand("nds", "Normalised differential AUROC tables from a scores CSV");
  auto scores = std::make_shared<std::string>();
  auto seeds = std::make_shared<int>(0);
  auto method = std::make_shared<std::string>("exact");
  auto max_trials = std::make_shared<std::uint64_t>(100'000'000);
  cmd->add_option("--scores", *scores, "Scores CSV")->required();
  cmd->add_option("--seeds", *seeds, "Expected seeds per cell group (0: infer)");
  cmd->add_option("--method", *method, "exact or enumerate")->check(CLI::IsMember({"exact", "enumerate"}));
  cmd->add_option("--max-trials", *max_trials, "Enumeration limit");
  cmd->callback([&, scores, seeds, method, max_trials] {
    action = [&, scores, seeds, method, max_trials] {
      const auto grids = ingest_scores(*scores, *seeds);
      std::vector<NdsResult> results;
      for (const auto& grid : grids) {
        if (*method == "exact") {
          results.push_back(nds_exact(grid));
        } else {
          EnumerateOptions o;
          o.max_trials = *max_trials;
          o.threads = g.threads;
          results.push_back(nds_enumerate(grid, o));
        }
      }
      write_reports(g.out_dir(), results, {});
      std::map<std::tuple<ModelKind, Augmentation, Magnification>, std::vector<NdsResult>> groups;
      for (const auto& r : results) groups[{r.model, r.augmentation, r.magnification}].push_back(r);
      for (const auto& [key, rs] : groups) {
        std::cout << "## " << to_string(std::get<0>(key)) << " / " << to_string(std::get<1>(key)) << " / "
                  << to_string(std::get<2>(key)) << "\n\n"
                  << report_nds(rs).human << "\n";
      }
    };
  });
}

void add_bootstrap(CLI::App& app, const Globals& g, std::function<void()>& action) {
  auto* cmd = app.add_subcommand("bootstrap", "Paired bootstrap of AUROC differences between conditions");
  auto predictions = std::make_shared<std::string>();
  auto baseline = std::make_shared<std::string>("none");
  auto field = std::make_shared<std::string>("augmentation");
  auto a = std::make_shared<std::string>();
  auto b = std::make_shared<std::string>();
  auto resamples = std::make_shared<int>(25);
  cmd->add_option("--predictions", *predictions, "Predictions CSV")->required();
  cmd->add_option("--baseline", *baseline, "Augmentation group every other group is compared with");
  cmd->add_option("--field", *field, "augmentation or magnification, used with --a/--b")
      ->check(CLI::IsMember({"augmentation", "magnification"}));
  cmd->add_option("--a", *a, "Condition A (difference is A - B)");
  cmd->add_option("--b", *b, "Condition B");
  cmd->add_option("--resamples", *resamples, "Resamples per (task, seed) pair");
  cmd->callback([&, predictions, baseline, field, a, b, resamples] {
    action = [&, predictions, baseline, field, a, b, resamples] {
      const auto sets = ingest_predictions(*predictions);
      BootstrapOptions o;
      o.resamples = *resamples;
      o.rng_seed = g.seed_or(0);
      o.threads = g.threads;
      std::vector<BootstrapDistribution> dists;
      if (a->empty() != b->empty()) fail(ErrorKind::InvalidConfig, "--a and --b go together");
      if (a->empty()) {
        dists = bootstrap_against(sets, parse_augmentation(*baseline), o);
      } else {
        std::set<std::pair<std::string, ModelKind>> combos;
        for (const auto& s : sets) combos.insert({s.key.extractor, s.key.model});
        const auto f = *field == "augmentation" ? ConditionField::Augmentation : ConditionField::Magnification;
        for (const auto& [e, m] : combos) {
          auto d = bootstrap_diff(pair_runs(sets, e, m, f, *a, *b), o);
          d.extractor = e + "/" + std::string(to_string(m));
          dists.push_back(std::move(d));
        }
      }
      write_report(g.out_dir(), "bootstrap", report_bootstrap(dists));
    };
  });
}

void add_latent(CLI::App& app, const Globals& g, std::function<void()>& action) {
  auto* cmd = app.add_subcommand("latent", "Embedding displacement and class-pair baselines");
  auto embeddings = std::make_shared<std::string>();
  auto cache = std::make_shared<std::string>();
  auto manifest = std::make_shared<std::string>();
  auto pairs = std::make_shared<std::size_t>(10000);
  cmd->add_option("--embeddings", *embeddings, "CSV id,class_label,variant,v0,...");
  cmd->add_option("--cache", *cache, "Feature cache (.wbk), with --manifest");
  cmd->add_option("--manifest", *manifest, "CSV id,class_label,slide_id,row,col");
  cmd->add_option("--pairs", *pairs, "Random pairs per baseline");
  cmd->callback([&, embeddings, cache, manifest, pairs] {
    action = [&, embeddings, cache, manifest, pairs] {
      if (embeddings->empty() == cache->empty())
        fail(ErrorKind::InvalidConfig, "give exactly one of --embeddings or --cache");
      if (!cache->empty() && manifest->empty()) fail(ErrorKind::InvalidConfig, "--cache needs --manifest");
      const EmbeddingTable table = embeddings->empty()
                                       ? embedding_table_from_cache(FeatureCache::open(*cache), csv::read_text(*manifest))
                                       : read_embedding_csv(*embeddings);
      const auto analysis = analyse_latent(table, {*pairs, g.seed_or(0), g.threads});
      csv::write_text(g.out_dir() / "latent_distances.csv", distances_csv(analysis));
      write_report(g.out_dir(), "latent", report_latent(analysis.summary));
    };
  });
}

// ---------------------------------------------------------------------------
// matrix

void add_matrix(CLI::App& app, const Globals& g, std::function<void()>& action) {
  auto* m = app.add_subcommand("matrix", "Synthetic end-to-end benchmark matrix");
  m->require_subcommand(1);
  {
    auto* cmd = m->add_subcommand("run", "Train every cell of the configured cartesian product");
    cmd->callback([&] {
      action = [&] {
        ExperimentConfig cfg = g.config.empty() ? desk_config() : parse_experiment_config(csv::read_text(g.config));
        if (g.seed) cfg.master_seed = *g.seed;
        const auto r = run_matrix(cfg, {g.threads, g.out_dir()});
        std::cout << "trained " << r.cells.size() << " cells; wrote scores.csv, predictions.csv, nds/ and "
                  << (r.bootstrap.empty() ? "no bootstrap summary" : "bootstrap.*") << " to " << g.out << "\n";
      };
    });
  }
  {
    auto* cmd = m->add_subcommand("report", "Rebuild NDS and bootstrap reports from a run directory");
    auto from = std::make_shared<std::string>();
    cmd->add_option("--from", *from, "Directory written by 'matrix run'")->required();
    cmd->callback([&, from] {
      action = [&, from] {
        const fs::path dir = *from;
        ExperimentConfig cfg;
        if (fs::exists(dir / "config.json")) cfg = parse_experiment_config(csv::read_text(dir / "config.json"));
        if (!g.config.empty()) cfg = parse_experiment_config(csv::read_text(g.config));
        if (g.seed) cfg.master_seed = *g.seed;
        const auto grids = ingest_scores(dir / "scores.csv", 0);
        const auto nds = nds_for_grids(grids);
        std::vector<BootstrapDistribution> boot;
        if (fs::exists(dir / "predictions.csv")) {
          BootstrapOptions o;
          o.resamples = cfg.bootstrap_resamples;
          o.rng_seed = bootstrap_seed(cfg.master_seed);
          o.threads = g.threads;
          boot = bootstrap_against(ingest_predictions(dir / "predictions.csv"), cfg.bootstrap_baseline, o);
        }
        write_reports(g.out_dir(), nds, boot);
        std::cout << "wrote " << nds.size() << " NDS results and " << boot.size() << " bootstrap distributions to "
                  << g.out << "\n";
      };
    });
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wsi-benchkit: weakly supervised WSI benchmarking toolkit"};
  app.set_version_flag("--version", "wsi-benchkit 0.1.0");
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Master seed")->option_text("UINT");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--config", g.config, "JSON config (TrainConfig for mil train, ExperimentConfig for matrix)");
  app.add_option("--out", g.out, "Output directory");

  std::function<void()> action;
  add_preproc(app, g, action);
  add_mil(app, g, action);
  add_nds(app, g, action);
  add_bootstrap(app, g, action);
  add_latent(app, g, action);
  add_matrix(app, g, action);
  for (auto* sub : app.get_subcommands({})) {
    sub->fallthrough();
    for (auto* leaf : sub->get_subcommands({})) leaf->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_validation_error(e.kind()) ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
