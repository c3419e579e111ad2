// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wsibench/rng.hpp"
#include "wsibench/score_model.hpp"

namespace wsibench::mil {

// Layer widths. The defaults are the published configuration; tests and
// desk-scale runs shrink them.
struct ModelShape {
  Eigen::Index input_dim = 768;
  Eigen::Index hidden_dim = 512;
  Eigen::Index attention_dim = 256;
  Eigen::Index heads = 8;
  Eigen::Index ff_dim = 2048;
  Eigen::Index layers = 2;
  Eigen::Index classes = 2;
  double classifier_dropout = 0.5;
  double transformer_dropout = 0.1;
};

ModelShape default_shape(Eigen::Index input_dim, Eigen::Index classes = 2);
void validate(const ModelShape& shape);

// Pre-norm encoder block: x += Attn(LN1(x)); x += FF(LN2(x)). Biases and
// norm parameters are stored as column matrices.
struct TransformerLayer {
  Eigen::MatrixXd ln1_gamma, ln1_beta;
  Eigen::MatrixXd wq, bq, wk, bk, wv, bv, wo, bo;
  Eigen::MatrixXd ln2_gamma, ln2_beta;
  Eigen::MatrixXd ff1_w, ff1_b, ff2_w, ff2_b;
};

struct AggregatorParams {
  ModelKind variant = ModelKind::AttMil;
  ModelShape shape;
  Eigen::MatrixXd proj_w, proj_b;              // hidden x d_x, hidden x 1
  Eigen::MatrixXd att_w1, att_b1;              // attention x hidden, attention x 1
  Eigen::MatrixXd att_w2, att_b2;              // 1 x attention, 1 x 1
  std::vector<TransformerLayer> layers;
  Eigen::MatrixXd cls_w, cls_b;                // classes x hidden, classes x 1

  // Every trainable tensor in a fixed order; used by optimisers and checks.
  std::vector<Eigen::MatrixXd*> tensors();
  std::vector<const Eigen::MatrixXd*> tensors() const;
  std::vector<std::string> tensor_names() const;
  AggregatorParams zeros_like() const;
  Eigen::Index parameter_count() const;
  bool all_finite() const;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases; layer
// norms start at gamma = 1, beta = 0.
AggregatorParams init_params(ModelKind variant, const ModelShape& shape, Rng& rng);

std::string serialize_params(const AggregatorParams& params);
AggregatorParams deserialize_params(std::string_view json_text);

// One patient: n x d_x patch features and a class label. `variants` holds
// optional augmented copies (each n x d_x, row-aligned with `patches`) from
// which training draws one per patch per epoch.
struct Bag {
  std::string patient_id;
  Eigen::MatrixXd patches;
  int label = 0;
  std::vector<Eigen::MatrixXd> variants;
};

struct ForwardResult {
  Eigen::VectorXd probs;
  std::optional<Eigen::VectorXd> alphas;  // AttMIL only
  Eigen::VectorXd slide_embedding;
};

// Dropout is active only in train mode and then draws its masks from `rng`.
ForwardResult forward(const AggregatorParams& params, const Eigen::MatrixXd& patches, bool train_mode,
                      Rng* rng = nullptr);
ForwardResult forward(const AggregatorParams& params, const Bag& bag, bool train_mode, Rng* rng = nullptr);

struct LossAndGrad {
  double loss = 0.0;
  Eigen::VectorXd probs;
  AggregatorParams grads;
};

// Cross-entropy of the softmax output against `label` and its exact
// gradient. A null `dropout_rng` disables dropout (gradient-check mode).
LossAndGrad loss_and_grad(const AggregatorParams& params, const Eigen::MatrixXd& patches, int label,
                          Rng* dropout_rng = nullptr);
double eval_loss(const AggregatorParams& params, const Eigen::MatrixXd& patches, int label);

// ---------------------------------------------------------------------------
// Optimisation

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
  // true: AdamW (decay applied to weights); false: Adam with L2 in the gradient.
  bool decoupled = true;
};

class Adam {
 public:
  Adam(const AggregatorParams& like, AdamOptions options);
  void step(AggregatorParams& params, const AggregatorParams& grads, double lr);
  long steps() const noexcept { return steps_; }

 private:
  AdamOptions options_;
  AggregatorParams m_;
  AggregatorParams v_;
  long steps_ = 0;
};

double cosine_annealing_lr(int epoch, double base_lr, int t_max, double eta_min);

// Tracks the best validation loss; an epoch improves only if strictly lower.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  // Returns true if this epoch is the new best.
  bool update(double val_loss);
  bool should_stop() const noexcept { return epochs_ - best_epoch_ >= patience_; }
  int best_epoch() const noexcept { return best_epoch_; }  // 1-based, 0 before any update
  int epochs() const noexcept { return epochs_; }
  double best_loss() const noexcept { return best_loss_; }

 private:
  int patience_;
  int epochs_ = 0;
  int best_epoch_ = 0;
  double best_loss_ = 0.0;
};

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-2;
  int max_epochs = 30;
  int early_stop_patience = 10;
  int grad_accum = 4;
  int batch_size = 1;
  int t_max = 30;
  double eta_min = 0.0;
  Eigen::Index max_patches = 8192;
  std::uint64_t rng_seed = 0;
  double val_fraction = 0.2;
};

void validate(const TrainConfig& config);
std::string serialize_config(const TrainConfig& config);
TrainConfig parse_config(std::string_view json_text);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool stopped_early = false;
};

std::string history_csv(const TrainHistory& history);

struct TrainResult {
  AggregatorParams params;
  TrainHistory history;
};

// Per-patch variant choice for one epoch: index into bag.variants.
std::vector<std::size_t> draw_variants(Eigen::Index n_patches, std::size_t n_variants, Rng& rng);
// The training view of a bag for one epoch: variant draw, then subsampling.
// `choice`, if given, receives the per-patch variant indices (empty when the
// bag has no variants).
Eigen::MatrixXd sample_training_patches(const Bag& bag, Eigen::Index max_patches, Rng& rng,
                                        std::vector<std::size_t>* choice = nullptr);

// Sees every epoch's variant draw: 1-based epoch, training-bag index, choice.
using VariantObserver = std::function<void(int, std::size_t, const std::vector<std::size_t>&)>;

// Batch size one, gradients averaged over `grad_accum` bags per update (a
// trailing partial group is flushed at epoch end), cosine-annealed lr set
// per epoch, early stopping on validation loss. Returns the parameters of
// the best validation epoch.
TrainResult train(const std::vector<Bag>& train_bags, const std::vector<Bag>& val_bags, const TrainConfig& config,
                  ModelKind variant, const ModelShape& shape, const VariantObserver& observer = {});

// Seeded stratified split; each class keeps at least one bag on each side
// when it has two or more.
std::pair<std::vector<Bag>, std::vector<Bag>> split_train_val(const std::vector<Bag>& bags, double val_fraction,
                                                              std::uint64_t seed);

// Eval mode, all patches. Score = probability of class 1.
PredictionSet evaluate(const AggregatorParams& params, const std::vector<Bag>& bags, const RunKey& key = {});

}  // namespace wsibench::mil
