// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "oracles/oracles.hpp"
#include "wsibench/mil.hpp"

namespace wsibench::oracle {

struct GradCheckCase {
  mil::AggregatorParams params;
  Eigen::MatrixXd patches;
  int label = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  Eigen::Index components = 0;
};

// |a - n| / max(|a|, |n|, floor); the floor keeps exact zeros from dividing 0 by 0.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Random small configuration with d_x <= 16, n <= 8, c <= 4. Inputs are
// redrawn until every ReLU pre-activation sits at least `kink_margin` away
// from zero so a step of h cannot cross the kink.
inline GradCheckCase random_gradcheck_case(ModelKind kind, Rng& rng, double kink_margin = 1e-3) {
  mil::ModelShape s;
  s.input_dim = 2 + static_cast<Eigen::Index>(rng.below(15));
  s.classes = 2 + static_cast<Eigen::Index>(rng.below(3));
  s.heads = 1 + static_cast<Eigen::Index>(rng.below(3));
  s.hidden_dim = s.heads * (1 + static_cast<Eigen::Index>(rng.below(3)));
  s.attention_dim = 2 + static_cast<Eigen::Index>(rng.below(5));
  s.ff_dim = 2 + static_cast<Eigen::Index>(rng.below(7));
  s.layers = 1 + static_cast<Eigen::Index>(rng.below(2));
  const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.below(8));
  for (;;) {
    GradCheckCase c{mil::init_params(kind, s, rng), Eigen::MatrixXd(n, s.input_dim),
                    static_cast<int>(rng.below(static_cast<std::uint64_t>(s.classes)))};
    for (Eigen::Index i = 0; i < c.patches.size(); ++i) c.patches.data()[i] = rng.normal();
    // Non-unit LayerNorm affine parameters exercise their gradients fully.
    for (auto& layer : c.params.layers)
      for (Eigen::MatrixXd* t : {&layer.ln1_gamma, &layer.ln1_beta, &layer.ln2_gamma, &layer.ln2_beta})
        for (Eigen::Index i = 0; i < t->size(); ++i) t->data()[i] += 0.3 * rng.normal();
    const Eigen::MatrixXd pre = (c.patches * c.params.proj_w.transpose()).rowwise() +
                                c.params.proj_b.col(0).transpose();
    if (pre.cwiseAbs().minCoeff() > kink_margin) return c;
  }
}

inline GradCheckReport gradient_check(GradCheckCase& c, double h = 1e-5) {
  const auto analytic = mil::loss_and_grad(c.params, c.patches, c.label, nullptr);
  auto tensors = c.params.tensors();
  const auto grads = analytic.grads.tensors();
  const auto names = c.params.tensor_names();
  GradCheckReport report;
  auto f = [&] { return mil::eval_loss(c.params, c.patches, c.label); };
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    for (Eigen::Index i = 0; i < tensors[t]->size(); ++i) {
      const double numeric = central_difference(f, tensors[t]->data()[i], h);
      const double err = relative_error(grads[t]->data()[i], numeric);
      ++report.components;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_tensor = names[t];
      }
    }
  }
  return report;
}

}  // namespace wsibench::oracle
