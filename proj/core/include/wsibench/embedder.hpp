// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "wsibench/image.hpp"

namespace wsibench {

struct EmbedderConfig {
  std::string name = "rp";
  std::uint64_t seed = 0;
  int output_dim = 384;
  int grid = 8;              // patches are area-averaged to grid x grid x 3
  double signal_gain = 0.0;  // weight of the hematoxylin-density descriptor
  double signal_center = 0.2;  // descriptor value that injects nothing
};

// Frozen stand-in feature extractor: a seeded random projection of the
// downsampled patch plus gain * (descriptor - center) along a seeded
// direction, then ReLU.
class Embedder {
 public:
  explicit Embedder(EmbedderConfig config);

  const EmbedderConfig& config() const noexcept { return config_; }
  int dim() const noexcept { return config_.output_dim; }

  std::vector<float> embed(const Image& patch) const;

  // Area-averaged grid x grid x 3 intensities scaled to [0, 1], row-major.
  Eigen::VectorXd downsample(const Image& patch) const;
  // Mean red-channel optical density over the grid cells.
  static double descriptor(const Eigen::VectorXd& cells);

 private:
  EmbedderConfig config_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
  Eigen::VectorXd direction_;
};

}  // namespace wsibench
