// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include "wsibench/embedder.hpp"

#include <cmath>

#include "wsibench/error.hpp"
#include "wsibench/rng.hpp"

namespace wsibench {

Embedder::Embedder(EmbedderConfig config) : config_(std::move(config)) {
  if (config_.output_dim < 1 || config_.grid < 1)
    fail(ErrorKind::InvalidConfig, "embedder dimensions must be positive");
  const Eigen::Index in = 3 * config_.grid * config_.grid;
  const Rng root(config_.seed);
  Rng w_rng = root.child("weights"), b_rng = root.child("bias"), d_rng = root.child("direction");
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  weights_.resize(config_.output_dim, in);
  for (Eigen::Index i = 0; i < weights_.size(); ++i) weights_.data()[i] = scale * w_rng.normal();
  bias_.resize(config_.output_dim);
  for (Eigen::Index i = 0; i < bias_.size(); ++i) bias_(i) = 0.1 * b_rng.normal();
  direction_.resize(config_.output_dim);
  for (Eigen::Index i = 0; i < direction_.size(); ++i) direction_(i) = d_rng.normal();
}

Eigen::VectorXd Embedder::downsample(const Image& patch) const {
  const int g = config_.grid;
  if (patch.width < g || patch.height < g) fail(ErrorKind::DimensionMismatch, "patch smaller than the embedder grid");
  Eigen::VectorXd cells = Eigen::VectorXd::Zero(3 * g * g);
  for (int gy = 0; gy < g; ++gy) {
    const int y0 = gy * patch.height / g, y1 = (gy + 1) * patch.height / g;
    for (int gx = 0; gx < g; ++gx) {
      const int x0 = gx * patch.width / g, x1 = (gx + 1) * patch.width / g;
      double sum[3] = {0.0, 0.0, 0.0};
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x)
          for (int c = 0; c < 3; ++c) sum[c] += patch.at(x, y, c);
      const double n = static_cast<double>((x1 - x0) * (y1 - y0)) * 255.0;
      for (int c = 0; c < 3; ++c) cells((gy * g + gx) * 3 + c) = sum[c] / n;
    }
  }
  return cells;
}

double Embedder::descriptor(const Eigen::VectorXd& cells) {
  double sum = 0.0;
  const Eigen::Index n = cells.size() / 3;
  for (Eigen::Index i = 0; i < n; ++i) sum += -std::log10((cells(i * 3) * 255.0 + 1.0) / 256.0);
  return sum / static_cast<double>(n);
}

std::vector<float> Embedder::embed(const Image& patch) const {
  const Eigen::VectorXd cells = downsample(patch);
  Eigen::VectorXd z = weights_ * (cells.array() - 0.5).matrix() + bias_;
  if (config_.signal_gain != 0.0) z += config_.signal_gain * (descriptor(cells) - config_.signal_center) * direction_;
  std::vector<float> out(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(std::max(0.0, z(i)));
  return out;
}

}  // namespace wsibench
