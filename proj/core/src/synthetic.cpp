// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include "wsibench/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wsibench/error.hpp"

namespace wsibench::synth {

namespace {

void check(const PlantedSignalOptions& o) {
  if (o.d_x < 1 || o.min_patches < 1 || o.max_patches < o.min_patches || o.min_signal < 1 ||
      o.max_signal < o.min_signal || o.max_signal > o.min_patches)
    fail(ErrorKind::InvalidConfig, "planted-signal options are inconsistent");
}

Eigen::Index uniform_between(Rng& rng, Eigen::Index lo, Eigen::Index hi) {
  return lo + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace

std::vector<mil::Bag> planted_signal_bags(std::size_t count, const Eigen::VectorXd& direction,
                                          const PlantedSignalOptions& o, Rng& rng, const char* prefix) {
  check(o);
  std::vector<mil::Bag> bags;
  bags.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    mil::Bag b;
    b.patient_id = std::string(prefix) + "-" + std::to_string(i);
    b.label = static_cast<int>(i % 2);
    const Eigen::Index n = uniform_between(rng, o.min_patches, o.max_patches);
    b.patches.resize(n, o.d_x);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < o.d_x; ++c) b.patches(r, c) = rng.normal();
    if (b.label == 1) {
      const Eigen::Index k = uniform_between(rng, o.min_signal, o.max_signal);
      std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
      std::iota(rows.begin(), rows.end(), Eigen::Index{0});
      rng.shuffle(std::span<Eigen::Index>(rows));
      for (Eigen::Index j = 0; j < k; ++j)
        b.patches.row(rows[static_cast<std::size_t>(j)]) += o.shift * direction.transpose();
    }
    bags.push_back(std::move(b));
  }
  return bags;
}

PlantedSignalTask planted_signal_task(std::size_t n_train, std::size_t n_val, std::size_t n_test,
                                      const PlantedSignalOptions& o, std::uint64_t seed) {
  check(o);
  const Rng master(seed);
  Rng dir_rng = master.child("direction");
  PlantedSignalTask task;
  task.direction.resize(o.d_x);
  for (Eigen::Index c = 0; c < o.d_x; ++c) task.direction(c) = dir_rng.normal();
  task.direction.normalize();
  Rng a = master.child("train"), b = master.child("val"), c = master.child("test");
  task.train = planted_signal_bags(n_train, task.direction, o, a, "train");
  task.val = planted_signal_bags(n_val, task.direction, o, b, "val");
  task.test = planted_signal_bags(n_test, task.direction, o, c, "test");
  return task;
}

}  // namespace wsibench::synth

namespace wsibench::synth {

Eigen::Matrix<double, 3, 2> random_stain_matrix(Rng& rng, double jitter) {
  Eigen::Matrix<double, 3, 2> s;
  s << 0.65, 0.07,  //
      0.70, 0.99,   //
      0.29, 0.11;
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = std::max(0.02, s.data()[i] + jitter * rng.normal());
  s.col(0).normalize();
  s.col(1).normalize();
  if (s(0, 0) < s(0, 1)) s.col(0).swap(s.col(1));
  return s;
}

namespace {

enum class Region : std::uint8_t { Mixed, Nucleus, Stroma, Background };

void paint_disks(std::vector<Region>& map, int w, int h, Region region, double fraction, double r_lo, double r_hi,
                 Rng& rng) {
  const auto target = static_cast<std::size_t>(std::ceil(fraction * w * h));
  auto covered = static_cast<std::size_t>(std::count(map.begin(), map.end(), region));
  while (covered < target) {
    const double cx = rng.uniform(0.0, w), cy = rng.uniform(0.0, h), r = rng.uniform(r_lo, r_hi);
    for (int y = std::max(0, static_cast<int>(cy - r)); y <= std::min(h - 1, static_cast<int>(cy + r)); ++y)
      for (int x = std::max(0, static_cast<int>(cx - r)); x <= std::min(w - 1, static_cast<int>(cx + r)); ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        auto& cell = map[static_cast<std::size_t>(y) * w + x];
        if (dx * dx + dy * dy <= r * r && cell != region) {
          cell = region;
          ++covered;
        }
      }
  }
}

}  // namespace

TwoStainImage two_stain_image(const Eigen::Matrix<double, 3, 2>& stains, const TwoStainOptions& o, Rng& rng) {
  if (o.width < 8 || o.height < 8 || o.nuclei_fraction + o.stroma_fraction + o.background_fraction > 0.9)
    fail(ErrorKind::InvalidConfig, "two-stain options are inconsistent");
  const int w = o.width, h = o.height;
  std::vector<Region> map(static_cast<std::size_t>(w) * h, Region::Mixed);
  const double scale = std::max(w, h) / 128.0;
  paint_disks(map, w, h, Region::Stroma, o.stroma_fraction, 4 * scale, 12 * scale, rng);
  paint_disks(map, w, h, Region::Background, o.background_fraction, 3 * scale, 9 * scale, rng);
  paint_disks(map, w, h, Region::Nucleus, o.nuclei_fraction, 1.5 * scale, 4 * scale, rng);

  TwoStainImage out{Image(w, h), stains, Eigen::Matrix2Xd::Zero(2, static_cast<Eigen::Index>(map.size()))};
  for (std::size_t i = 0; i < map.size(); ++i) {
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    switch (map[i]) {
      case Region::Nucleus: c(0) = rng.uniform(o.h_range[0], o.h_range[1]); break;
      case Region::Stroma: c(1) = rng.uniform(o.e_range[0], o.e_range[1]); break;
      case Region::Mixed:
        c << rng.uniform(o.mixed_range[0], o.mixed_range[1]), rng.uniform(o.mixed_range[0], o.mixed_range[1]);
        break;
      case Region::Background: break;
    }
    out.concentrations.col(static_cast<Eigen::Index>(i)) = c;
    const Eigen::Vector3d od = stains * c;
    for (int ch = 0; ch < 3; ++ch) out.image.pixels[i * 3 + ch] = intensity_from_od(od(ch));
  }
  return out;
}

std::vector<EmbeddingEntry> two_class_embeddings(std::size_t per_class, std::size_t d_x, double separation,
                                                 Rng& rng) {
  if (d_x < 2) fail(ErrorKind::InvalidConfig, "two_class_embeddings needs d_x >= 2");
  const double a = separation / std::sqrt(2.0);
  std::vector<EmbeddingEntry> out;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      EmbeddingEntry e{std::string(c == 0 ? "a-" : "b-") + std::to_string(i), c == 0 ? "a" : "b", kOriginalVariant,
                       std::vector<double>(d_x)};
      for (auto& x : e.vector) x = rng.normal();
      e.vector[c] += a;
      out.push_back(e);
      e.variant = "identity";
      out.push_back(std::move(e));
    }
  return out;
}

void validate(const SlideTaskOptions& o) {
  if (o.patch_size < 16 || o.grid_rows < 1 || o.grid_cols < 1)
    fail(ErrorKind::InvalidConfig, "slides need patch_size >= 16 and a non-empty grid");
  if (o.min_signal < 1 || o.max_signal < o.min_signal || o.max_signal > o.grid_rows * o.grid_cols)
    fail(ErrorKind::InvalidConfig, "signal patch count must satisfy 1 <= min <= max <= patches per slide");
  if (!(o.base_nuclei[0] >= 0 && o.base_nuclei[0] <= o.base_nuclei[1] && o.signal_nuclei <= 0.6 &&
        o.base_nuclei[1] <= 0.6 && o.strength[0] > 0 && o.strength[0] <= o.strength[1] && o.stain_jitter >= 0))
    fail(ErrorKind::InvalidConfig, "slide nuclei fractions, strengths or jitter out of range");
}

SyntheticSlide synthetic_slide(const std::string& id, int label, const SlideTaskOptions& o, Rng& rng) {
  validate(o);
  const int n = o.grid_rows * o.grid_cols;
  SyntheticSlide slide{id, label, Image(o.patch_size * o.grid_cols, o.patch_size * o.grid_rows), {}, {}};
  const auto stains = random_stain_matrix(rng, o.stain_jitter);
  const double strength = rng.uniform(o.strength[0], o.strength[1]);

  slide.signal.assign(static_cast<std::size_t>(n), false);
  if (label == 1) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(std::span<int>(idx));
    const auto k = static_cast<std::size_t>(uniform_between(rng, o.min_signal, o.max_signal));
    for (std::size_t i = 0; i < k; ++i) slide.signal[static_cast<std::size_t>(idx[i])] = true;
  }
  for (int p = 0; p < n; ++p) {
    TwoStainOptions t;
    t.width = t.height = o.patch_size;
    t.nuclei_fraction = slide.signal[static_cast<std::size_t>(p)] ? o.signal_nuclei
                                                                  : rng.uniform(o.base_nuclei[0], o.base_nuclei[1]);
    for (double* r : {t.h_range, t.e_range, t.mixed_range}) {
      r[0] *= strength;
      r[1] *= strength;
    }
    const auto tileimg = two_stain_image(stains, t, rng).image;
    const int ox = (p % o.grid_cols) * o.patch_size, oy = (p / o.grid_cols) * o.patch_size;
    for (int y = 0; y < o.patch_size; ++y)
      for (int x = 0; x < o.patch_size; ++x)
        for (int c = 0; c < 3; ++c) slide.image.at(ox + x, oy + y, c) = tileimg.at(x, y, c);
  }
  slide.patches = tile(slide.image, o.patch_size, id);
  return slide;
}

std::vector<SyntheticSlide> synthetic_slides(std::size_t count, const std::string& prefix, const SlideTaskOptions& o,
                                             Rng& rng) {
  std::vector<SyntheticSlide> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(synthetic_slide(prefix + "-" + std::to_string(i), static_cast<int>(i % 2), o, rng));
  return out;
}

}  // namespace wsibench::synth
