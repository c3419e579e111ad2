// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wsibench/image.hpp"
#include "wsibench/latent.hpp"
#include "wsibench/macenko.hpp"
#include "wsibench/mil.hpp"
#include "wsibench/rng.hpp"

namespace wsibench::synth {

// Feature-level MIL task. Negative bags hold N(0, I) patches; positive bags
// additionally replace between `min_signal` and `max_signal` patches with
// draws from N(shift * u, I), u a fixed random unit direction.
struct PlantedSignalOptions {
  Eigen::Index d_x = 16;
  Eigen::Index min_patches = 8;
  Eigen::Index max_patches = 24;
  Eigen::Index min_signal = 1;
  Eigen::Index max_signal = 3;
  double shift = 4.0;
};

struct PlantedSignalTask {
  Eigen::VectorXd direction;
  std::vector<mil::Bag> train, val, test;
};

// Balanced labels per split; ids are "<split>-<index>".
std::vector<mil::Bag> planted_signal_bags(std::size_t count, const Eigen::VectorXd& direction,
                                          const PlantedSignalOptions& options, Rng& rng, const char* prefix);
PlantedSignalTask planted_signal_task(std::size_t n_train, std::size_t n_val, std::size_t n_test,
                                      const PlantedSignalOptions& options, std::uint64_t seed);

// Tissue-like raster composed from two known stains. Nuclei (pure H),
// stroma (pure E), mixed cytoplasm and background holes are painted as
// disks; each region type covers at least its requested area fraction.
struct TwoStainOptions {
  int width = 128;
  int height = 128;
  double nuclei_fraction = 0.12;
  double stroma_fraction = 0.12;
  double background_fraction = 0.08;
  double h_range[2] = {0.35, 0.9};
  double e_range[2] = {0.25, 0.7};
  double mixed_range[2] = {0.08, 0.45};
};

struct TwoStainImage {
  Image image;
  Eigen::Matrix<double, 3, 2> stains;
  Eigen::Matrix2Xd concentrations;  // ground truth per pixel, before quantisation
};

// H and E directions jittered around conventional values; unit norm, positive.
Eigen::Matrix<double, 3, 2> random_stain_matrix(Rng& rng, double jitter = 0.08);
TwoStainImage two_stain_image(const Eigen::Matrix<double, 3, 2>& stains, const TwoStainOptions& options, Rng& rng);

// Slide-level binary task on raster images. Every slide is a grid of
// two-stain patches drawn with a slide-specific stain matrix and staining
// strength. Positive slides replace between min_signal and max_signal
// patches with nuclei-rich ones.
struct SlideTaskOptions {
  int patch_size = 32;
  int grid_rows = 3;
  int grid_cols = 4;
  int min_signal = 1;
  int max_signal = 3;
  double signal_nuclei = 0.5;
  double base_nuclei[2] = {0.03, 0.10};
  double stain_jitter = 0.08;
  double strength[2] = {0.85, 1.15};
};

struct SyntheticSlide {
  std::string id;
  int label = 0;
  Image image;
  std::vector<Patch> patches;  // row-major tiles of `image`
  std::vector<bool> signal;    // per patch
};

void validate(const SlideTaskOptions& options);
SyntheticSlide synthetic_slide(const std::string& id, int label, const SlideTaskOptions& options, Rng& rng);
// Labels alternate 0, 1, ...; ids are "<prefix>-<index>".
std::vector<SyntheticSlide> synthetic_slides(std::size_t count, const std::string& prefix,
                                             const SlideTaskOptions& options, Rng& rng);

// Two Gaussian classes "a" and "b" with unit per-axis spread and centres
// `separation` apart on orthogonal axes (e1 and e2 scaled by separation/sqrt 2).
// Each id gets an "original" row plus an exact copy named "identity".
std::vector<EmbeddingEntry> two_class_embeddings(std::size_t per_class, std::size_t d_x, double separation, Rng& rng);

}  // namespace wsibench::synth
