// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include "wsibench/latent.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "wsibench/csv.hpp"
#include "wsibench/error.hpp"
#include "wsibench/feature_cache.hpp"
#include "wsibench/parallel.hpp"
#include "wsibench/rng.hpp"

namespace wsibench {

double cosine_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) fail(ErrorKind::DimensionMismatch, "vectors differ in width");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) fail(ErrorKind::ZeroVector, "cosine distance of a zero-norm vector");
  // sqrt(fl(x * x)) == x, so u == v gives exactly 0.
  const double prod = uu * vv;
  const double norm = std::isnormal(prod) ? std::sqrt(prod) : std::sqrt(uu) * std::sqrt(vv);
  return std::clamp(1.0 - dot / norm, 0.0, 2.0);
}

EmbeddingTable::EmbeddingTable(std::vector<EmbeddingEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) return;
  dim_ = entries_.front().vector.size();
  if (dim_ == 0) fail(ErrorKind::DimensionMismatch, "embeddings must have at least one component");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.vector.size() != dim_)
      fail(ErrorKind::DimensionMismatch, "embedding " + e.id + "/" + e.variant + " has width " +
                                             std::to_string(e.vector.size()) + ", expected " + std::to_string(dim_));
    if (std::all_of(e.vector.begin(), e.vector.end(), [](double x) { return x == 0.0; }))
      fail(ErrorKind::ZeroVector, "embedding " + e.id + "/" + e.variant + " is all zeros");
    if (!index_.emplace(std::pair{e.id, e.variant}, i).second)
      fail(ErrorKind::DuplicateRow, "duplicate embedding " + e.id + "/" + e.variant);
  }
  for (const auto& e : entries_) {
    if (!has(e.id, kOriginalVariant))
      fail(ErrorKind::VariantMissing, "id " + e.id + " has no original embedding");
    if (at(e.id, kOriginalVariant).class_label != e.class_label)
      fail(ErrorKind::MalformedRow, "id " + e.id + " carries more than one class label");
  }
}

std::vector<std::string> EmbeddingTable::ids() const {
  std::vector<std::string> out;
  for (const auto& [key, _] : index_)
    if (key.second == kOriginalVariant) out.push_back(key.first);
  return out;
}

std::vector<std::string> EmbeddingTable::variants() const {
  std::set<std::string> names;
  for (const auto& e : entries_) names.insert(e.variant);
  return {names.begin(), names.end()};
}

bool EmbeddingTable::has(const std::string& id, const std::string& variant) const {
  return index_.contains({id, variant});
}

const EmbeddingEntry& EmbeddingTable::at(const std::string& id, const std::string& variant) const {
  const auto it = index_.find({id, variant});
  if (it == index_.end()) fail(ErrorKind::VariantMissing, "no embedding " + id + "/" + variant);
  return entries_[it->second];
}

EmbeddingTable parse_embedding_csv(std::string_view text) {
  const auto t = csv::parse(text);
  if (t.header.size() < 4 || t.header[0] != "id" || t.header[1] != "class_label" || t.header[2] != "variant")
    fail(ErrorKind::MalformedRow, "embedding CSV header must be id,class_label,variant,v0,...");
  const std::size_t d = t.header.size() - 3;
  std::vector<EmbeddingEntry> entries;
  for (const auto& [line, row] : t.rows) {
    if (row.size() != t.header.size())
      fail(ErrorKind::MalformedRow, "line " + std::to_string(line) + ": expected " +
                                        std::to_string(t.header.size()) + " fields");
    EmbeddingEntry e{row[0], row[1], row[2], std::vector<double>(d)};
    for (std::size_t k = 0; k < d; ++k) e.vector[k] = csv::parse_double(row[3 + k], line);
    entries.push_back(std::move(e));
  }
  return EmbeddingTable(std::move(entries));
}

EmbeddingTable read_embedding_csv(const std::filesystem::path& path) {
  return parse_embedding_csv(csv::read_text(path));
}

std::string embedding_csv(const EmbeddingTable& table) {
  std::vector<std::string> header{"id", "class_label", "variant"};
  for (std::size_t k = 0; k < table.dim(); ++k) header.push_back("v" + std::to_string(k));
  std::string out = csv::join(header) + "\n";
  for (const auto& e : table.entries()) {
    std::vector<std::string> row{e.id, e.class_label, e.variant};
    for (double x : e.vector) row.push_back(csv::format_double(x));
    out += csv::join(row) + "\n";
  }
  return out;
}

EmbeddingTable embedding_table_from_cache(const FeatureCache& cache, std::string_view manifest_csv) {
  const auto t = csv::parse(manifest_csv);
  const std::size_t c_id = t.column("id"), c_label = t.column("class_label"), c_slide = t.column("slide_id"),
                    c_row = t.column("row"), c_col = t.column("col");
  std::vector<EmbeddingEntry> entries;
  for (const auto& [line, row] : t.rows) {
    const GridPos pos{static_cast<int>(csv::parse_int(row.at(c_row), line)),
                      static_cast<int>(csv::parse_int(row.at(c_col), line))};
    for (std::size_t v = 0; v < cache.variants().size(); ++v) {
      const auto variant = static_cast<std::uint16_t>(v);
      if (!cache.contains(row.at(c_slide), pos, variant)) continue;
      const auto f = cache.get(row.at(c_slide), pos, variant);
      entries.push_back({row.at(c_id), row.at(c_label), cache.variants()[v], {f.begin(), f.end()}});
    }
  }
  return EmbeddingTable(std::move(entries));
}

Displacement displacement_stats(const EmbeddingTable& table, const std::string& variant, unsigned threads) {
  Displacement d;
  d.variant = variant;
  for (const auto& id : table.ids()) {
    if (table.has(id, variant))
      d.ids.push_back(id);
    else
      ++d.skipped;
  }
  if (d.ids.empty()) fail(ErrorKind::VariantMissing, "no id carries variant '" + variant + "'");
  d.distances.resize(d.ids.size());
  parallel_for(d.ids.size(), threads, [&](std::size_t i) {
    d.distances[i] = cosine_distance(table.at(d.ids[i], kOriginalVariant).vector, table.at(d.ids[i], variant).vector);
  });
  return d;
}

namespace {

using Pair = std::pair<std::size_t, std::size_t>;

// Draws min(k, eligible) distinct unordered pairs i < j accepted by `keep`.
template <class Keep>
std::vector<Pair> sample_pairs(std::size_t n, std::size_t eligible, std::size_t k, Keep keep, Rng& rng) {
  k = std::min(k, eligible);
  std::vector<Pair> out;
  if (k == 0) return out;
  if (2 * k >= eligible) {
    std::vector<Pair> all;
    all.reserve(eligible);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (keep(i, j)) all.emplace_back(i, j);
    for (std::size_t i = 0; i < k; ++i) std::swap(all[i], all[i + rng.below(all.size() - i)]);
    all.resize(k);
    return all;
  }
  std::unordered_set<std::uint64_t> used;
  out.reserve(k);
  while (out.size() < k) {
    std::size_t i = rng.below(n), j = rng.below(n);
    if (i == j) continue;
    if (i > j) std::swap(i, j);
    if (!keep(i, j) || !used.insert(static_cast<std::uint64_t>(i) * n + j).second) continue;
    out.emplace_back(i, j);
  }
  return out;
}

struct Originals {
  std::vector<const EmbeddingEntry*> rows;
  std::map<std::string, std::size_t> class_sizes;
};

Originals originals(const EmbeddingTable& table) {
  Originals o;
  for (const auto& id : table.ids()) {
    o.rows.push_back(&table.at(id, kOriginalVariant));
    ++o.class_sizes[o.rows.back()->class_label];
  }
  return o;
}

std::vector<double> pair_distances(const Originals& o, const std::vector<Pair>& pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& [i, j] : pairs) out.push_back(cosine_distance(o.rows[i]->vector, o.rows[j]->vector));
  return out;
}

}  // namespace

ClassBaselines class_pair_baselines(const EmbeddingTable& table, std::size_t n_pairs, std::uint64_t rng_seed) {
  const Originals o = originals(table);
  if (o.class_sizes.size() < 2)
    fail(ErrorKind::InsufficientClasses, "need at least two classes, found " + std::to_string(o.class_sizes.size()));
  std::size_t same = 0;
  for (const auto& [_, size] : o.class_sizes) same += size * (size - 1) / 2;
  if (same == 0) fail(ErrorKind::InsufficientClasses, "no class has two ids");
  const std::size_t n = o.rows.size();
  const std::size_t cross = n * (n - 1) / 2 - same;

  const Rng master(rng_seed);
  Rng same_rng = master.child("same_class"), cross_rng = master.child("cross_class");
  auto same_label = [&](std::size_t i, std::size_t j) { return o.rows[i]->class_label == o.rows[j]->class_label; };
  ClassBaselines b;
  b.same_class = pair_distances(o, sample_pairs(n, same, n_pairs, same_label, same_rng));
  b.cross_class = pair_distances(
      o, sample_pairs(n, cross, n_pairs, [&](std::size_t i, std::size_t j) { return !same_label(i, j); }, cross_rng));
  return b;
}

double dispersion(const EmbeddingTable& table, std::size_t n_pairs, std::uint64_t rng_seed) {
  const Originals o = originals(table);
  const std::size_t n = o.rows.size();
  if (n < 2) fail(ErrorKind::InsufficientClasses, "dispersion needs at least two ids");
  Rng rng = Rng(rng_seed).child("dispersion");
  const auto d = pair_distances(o, sample_pairs(n, n * (n - 1) / 2, n_pairs, [](auto, auto) { return true; }, rng));
  if (d.empty()) return 0.0;
  WelfordAccumulator acc;
  for (double x : d) acc.push(x);
  return acc.mean();
}

DistanceStats distance_stats(std::span<const double> distances) {
  DistanceStats s;
  s.n = distances.size();
  if (s.n > 0) s.spread = summarize(distances);
  return s;
}

LatentAnalysis analyse_latent(const EmbeddingTable& table, const LatentOptions& options) {
  LatentAnalysis a;
  auto& s = a.summary;
  s.n_pairs = options.n_pairs;
  s.rng_seed = options.rng_seed;
  a.baselines = class_pair_baselines(table, options.n_pairs, options.rng_seed);
  s.same_class = distance_stats(a.baselines.same_class);
  s.cross_class = distance_stats(a.baselines.cross_class);
  s.dispersion = dispersion(table, options.n_pairs, options.rng_seed);
  for (const auto& variant : table.variants()) {
    if (variant == kOriginalVariant) continue;
    a.displacements.push_back(displacement_stats(table, variant, options.threads));
    const auto& d = a.displacements.back();
    VariantDisplacement v{variant, distance_stats(d.distances), std::nullopt, d.ids.size(), d.skipped};
    if (s.dispersion > 0.0) {
      std::vector<double> scaled(d.distances);
      for (double& x : scaled) x /= s.dispersion;
      v.normalised = distance_stats(scaled);
    }
    s.variants.push_back(std::move(v));
  }
  return a;
}

namespace {

nlohmann::json to_json(const DistanceStats& s) {
  nlohmann::json j{{"n", s.n}};
  if (s.n == 0) return j;
  j["p2_5"] = s.spread.p2_5;
  j["q1"] = s.spread.q1;
  j["median"] = s.spread.median;
  j["q3"] = s.spread.q3;
  j["p97_5"] = s.spread.p97_5;
  j["mean"] = s.spread.mean;
  return j;
}

}  // namespace

std::string summary_json(const DisplacementSummary& s) {
  nlohmann::ordered_json j;
  j["distance"] = "cosine";
  j["whiskers"] = "2.5th and 97.5th percentiles";
  j["n_pairs"] = s.n_pairs;
  j["rng_seed"] = s.rng_seed;
  j["dispersion"] = s.dispersion;
  j["same_class_random"] = to_json(s.same_class);
  j["cross_class_random"] = to_json(s.cross_class);
  auto& vs = j["variants"] = nlohmann::json::array();
  for (const auto& v : s.variants) {
    nlohmann::ordered_json e;
    e["variant"] = v.variant;
    e["covered"] = v.covered;
    e["skipped"] = v.skipped;
    e["raw"] = to_json(v.raw);
    e["normalised"] = v.normalised ? to_json(*v.normalised) : nlohmann::json(nullptr);
    vs.push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

std::string distances_csv(const LatentAnalysis& a) {
  std::string out = "kind,variant,id,distance\n";
  for (const auto& d : a.displacements)
    for (std::size_t i = 0; i < d.ids.size(); ++i)
      out += csv::join({"displacement", d.variant, d.ids[i], csv::format_double(d.distances[i])}) + "\n";
  for (std::size_t i = 0; i < a.baselines.same_class.size(); ++i)
    out += csv::join({"same_class", kOriginalVariant, std::to_string(i), csv::format_double(a.baselines.same_class[i])}) +
           "\n";
  for (std::size_t i = 0; i < a.baselines.cross_class.size(); ++i)
    out += csv::join({"cross_class", kOriginalVariant, std::to_string(i),
                      csv::format_double(a.baselines.cross_class[i])}) +
           "\n";
  return out;
}

}  // namespace wsibench
