// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <map>
#include <numbers>
#include <numeric>

#include "wsibench/csv.hpp"
#include "wsibench/error.hpp"
#include "wsibench/mil.hpp"

namespace wsibench::mil {

using Mat = Eigen::MatrixXd;

Adam::Adam(const AggregatorParams& like, AdamOptions options)
    : options_(options), m_(like.zeros_like()), v_(like.zeros_like()) {}

void Adam::step(AggregatorParams& params, const AggregatorParams& grads, double lr) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  auto ps = params.tensors();
  auto gs = grads.tensors();
  auto ms = m_.tensors();
  auto vs = v_.tensors();
  for (std::size_t t = 0; t < ps.size(); ++t) {
    double* p = ps[t]->data();
    const double* g = gs[t]->data();
    double* m = ms[t]->data();
    double* v = vs[t]->data();
    for (Eigen::Index i = 0; i < ps[t]->size(); ++i) {
      double grad = g[i];
      if (options_.decoupled) {
        p[i] *= 1.0 - lr * options_.weight_decay;
      } else {
        grad += options_.weight_decay * p[i];
      }
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * grad;
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * grad * grad;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

double cosine_annealing_lr(int epoch, double base_lr, int t_max, double eta_min) {
  return eta_min + (base_lr - eta_min) *
                       (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(t_max))) /
                       2.0;
}

bool EarlyStopping::update(double val_loss) {
  ++epochs_;
  if (best_epoch_ == 0 || val_loss < best_loss_) {
    best_loss_ = val_loss;
    best_epoch_ = epochs_;
    return true;
  }
  return false;
}

void validate(const TrainConfig& c) {
  if (!(c.lr > 0.0) || c.weight_decay < 0.0 || c.max_epochs < 1 || c.early_stop_patience < 1 ||
      c.grad_accum < 1 || c.t_max < 1 || c.max_patches < 1 || c.eta_min < 0.0)
    fail(ErrorKind::InvalidConfig, "training hyperparameters must be positive");
  if (c.batch_size != 1) fail(ErrorKind::InvalidConfig, "only batch_size 1 is supported (variable bag sizes)");
  if (!(c.val_fraction > 0.0 && c.val_fraction < 1.0))
    fail(ErrorKind::InvalidConfig, "val_fraction must lie in (0, 1)");
}

std::string serialize_config(const TrainConfig& c) {
  nlohmann::json j = {{"lr", c.lr},
                      {"weight_decay", c.weight_decay},
                      {"max_epochs", c.max_epochs},
                      {"early_stop_patience", c.early_stop_patience},
                      {"grad_accum", c.grad_accum},
                      {"batch_size", c.batch_size},
                      {"cosine_anneal", {{"T_max", c.t_max}, {"eta_min", c.eta_min}}},
                      {"max_patches", c.max_patches},
                      {"rng_seed", c.rng_seed},
                      {"val_fraction", c.val_fraction}};
  return j.dump(2);
}

TrainConfig parse_config(std::string_view json_text) {
  TrainConfig c;
  try {
    const auto j = nlohmann::json::parse(json_text);
    for (const auto& [key, value] : j.items()) {
      if (key == "lr") c.lr = value.get<double>();
      else if (key == "weight_decay") c.weight_decay = value.get<double>();
      else if (key == "max_epochs") c.max_epochs = value.get<int>();
      else if (key == "early_stop_patience") c.early_stop_patience = value.get<int>();
      else if (key == "grad_accum") c.grad_accum = value.get<int>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "cosine_anneal") {
        if (value.contains("T_max")) c.t_max = value.at("T_max").get<int>();
        if (value.contains("eta_min")) c.eta_min = value.at("eta_min").get<double>();
      } else if (key == "max_patches") c.max_patches = value.get<Eigen::Index>();
      else if (key == "rng_seed") c.rng_seed = value.get<std::uint64_t>();
      else if (key == "val_fraction") c.val_fraction = value.get<double>();
      else fail(ErrorKind::InvalidConfig, "unknown training option '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("bad training config: ") + e.what());
  }
  validate(c);
  return c;
}

std::string history_csv(const TrainHistory& history) {
  std::string out = "epoch,train_loss,val_loss,lr\n";
  for (const auto& e : history.epochs)
    out += csv::join({std::to_string(e.epoch), csv::format_double(e.train_loss), csv::format_double(e.val_loss),
                      csv::format_double(e.lr)}) +
           "\n";
  return out;
}

std::vector<std::size_t> draw_variants(Eigen::Index n_patches, std::size_t n_variants, Rng& rng) {
  std::vector<std::size_t> choice(static_cast<std::size_t>(n_patches));
  for (auto& c : choice) c = static_cast<std::size_t>(rng.below(n_variants));
  return choice;
}

Mat sample_training_patches(const Bag& bag, Eigen::Index max_patches, Rng& rng, std::vector<std::size_t>* choice_out) {
  const Eigen::Index n = bag.patches.rows();
  Mat x;
  if (choice_out) choice_out->clear();
  if (bag.variants.empty()) {
    x = bag.patches;
  } else {
    const auto choice = draw_variants(n, bag.variants.size(), rng);
    if (choice_out) *choice_out = choice;
    x.resize(n, bag.patches.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      const Mat& src = bag.variants[choice[static_cast<std::size_t>(i)]];
      if (src.rows() != n || src.cols() != bag.patches.cols())
        fail(ErrorKind::DimensionMismatch, "variant matrix of bag " + bag.patient_id + " is misaligned");
      x.row(i) = src.row(i);
    }
  }
  if (n <= max_patches) return x;
  // Partial Fisher-Yates for a uniform subset, kept in original order.
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < max_patches; ++i) {
    const auto j = i + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  std::sort(idx.begin(), idx.begin() + max_patches);
  Mat sub(max_patches, x.cols());
  for (Eigen::Index i = 0; i < max_patches; ++i) sub.row(i) = x.row(idx[static_cast<std::size_t>(i)]);
  return sub;
}

namespace {

void check_bags(const std::vector<Bag>& bags, const ModelShape& shape, const char* split) {
  for (const auto& b : bags) {
    if (b.patches.rows() < 1) fail(ErrorKind::DimensionMismatch, "bag " + b.patient_id + " has no patches");
    if (b.patches.cols() != shape.input_dim)
      fail(ErrorKind::DimensionMismatch, std::string(split) + " bag " + b.patient_id + " has the wrong feature width");
    if (b.label < 0 || b.label >= shape.classes)
      fail(ErrorKind::DimensionMismatch, "bag " + b.patient_id + " label outside [0, classes)");
    if (!b.patches.allFinite()) fail(ErrorKind::DimensionMismatch, "bag " + b.patient_id + " has non-finite features");
  }
}

void add_into(AggregatorParams& acc, const AggregatorParams& g) {
  auto as = acc.tensors();
  auto gs = g.tensors();
  for (std::size_t t = 0; t < as.size(); ++t) *as[t] += *gs[t];
}

void scale_and_clear(AggregatorParams& acc, double factor) {
  for (Mat* t : acc.tensors()) *t *= factor;
}

}  // namespace

TrainResult train(const std::vector<Bag>& train_bags, const std::vector<Bag>& val_bags, const TrainConfig& config,
                  ModelKind variant, const ModelShape& shape, const VariantObserver& observer) {
  validate(config);
  validate(shape);
  if (train_bags.empty()) fail(ErrorKind::EmptySplit, "training split is empty");
  if (val_bags.empty()) fail(ErrorKind::EmptySplit, "validation split is empty");
  check_bags(train_bags, shape, "training");
  check_bags(val_bags, shape, "validation");
  for (Eigen::Index c = 0; c < shape.classes; ++c)
    if (std::none_of(train_bags.begin(), train_bags.end(), [&](const Bag& b) { return b.label == c; }))
      fail(ErrorKind::ClassMissing, "class " + std::to_string(c) + " absent from the training split");

  const Rng master(config.rng_seed);
  Rng init_rng = master.child("init");
  AggregatorParams params = init_params(variant, shape, init_rng);
  Adam optimiser(params, AdamOptions{.weight_decay = config.weight_decay});
  EarlyStopping stopper(config.early_stop_patience);
  TrainResult result{params, {}};

  AggregatorParams accum = params.zeros_like();
  std::vector<std::size_t> choice;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double lr = cosine_annealing_lr(epoch, config.lr, config.t_max, config.eta_min);
    const Rng epoch_rng = master.child("epoch", {static_cast<std::uint64_t>(epoch)});
    std::vector<std::size_t> order(train_bags.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng order_rng = epoch_rng.child("order");
    order_rng.shuffle(std::span<std::size_t>(order));

    int pending = 0;
    double loss_sum = 0.0;
    auto apply_update = [&] {
      scale_and_clear(accum, 1.0 / pending);
      optimiser.step(params, accum, lr);
      scale_and_clear(accum, 0.0);
      pending = 0;
    };
    for (std::size_t k : order) {
      const Bag& bag = train_bags[k];
      const Rng bag_rng = epoch_rng.child({static_cast<std::uint64_t>(k)});
      Rng sample_rng = bag_rng.child("sample");
      Rng dropout_rng = bag_rng.child("dropout");
      const Mat x = sample_training_patches(bag, config.max_patches, sample_rng, observer ? &choice : nullptr);
      if (observer) observer(epoch + 1, k, choice);
      auto lg = loss_and_grad(params, x, bag.label, &dropout_rng);
      add_into(accum, lg.grads);
      loss_sum += lg.loss;
      if (++pending == config.grad_accum) apply_update();
    }
    if (pending > 0) apply_update();
    if (!params.all_finite()) fail(ErrorKind::NonFiniteLoss, "parameters diverged in epoch " + std::to_string(epoch + 1));

    double val_loss = 0.0;
    for (const auto& b : val_bags) val_loss += eval_loss(params, b.patches, b.label);
    val_loss /= static_cast<double>(val_bags.size());
    if (!std::isfinite(val_loss)) fail(ErrorKind::NonFiniteLoss, "validation loss is not finite");

    if (stopper.update(val_loss)) result.params = params;
    result.history.epochs.push_back(
        {epoch + 1, loss_sum / static_cast<double>(train_bags.size()), val_loss, lr});
    if (stopper.should_stop()) {
      result.history.stopped_early = epoch + 1 < config.max_epochs;
      break;
    }
  }
  result.history.best_epoch = stopper.best_epoch();
  return result;
}

std::pair<std::vector<Bag>, std::vector<Bag>> split_train_val(const std::vector<Bag>& bags, double val_fraction,
                                                              std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) fail(ErrorKind::InvalidConfig, "val_fraction must lie in (0, 1)");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < bags.size(); ++i) by_class[bags[i].label].push_back(i);
  std::vector<bool> to_val(bags.size(), false);
  Rng rng = Rng(seed).child("split");
  for (auto& [label, idx] : by_class) {
    rng.shuffle(std::span<std::size_t>(idx));
    auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(idx.size())));
    if (idx.size() >= 2) n_val = std::clamp<std::size_t>(n_val, 1, idx.size() - 1);
    else n_val = 0;
    for (std::size_t i = 0; i < n_val; ++i) to_val[idx[i]] = true;
  }
  std::pair<std::vector<Bag>, std::vector<Bag>> out;
  for (std::size_t i = 0; i < bags.size(); ++i) (to_val[i] ? out.second : out.first).push_back(bags[i]);
  return out;
}

PredictionSet evaluate(const AggregatorParams& params, const std::vector<Bag>& bags, const RunKey& key) {
  PredictionSet set;
  set.key = key;
  set.samples.reserve(bags.size());
  for (const auto& b : bags) {
    const auto f = forward(params, b.patches, false);
    set.samples.push_back({b.patient_id, f.probs[1], b.label});
  }
  return set;
}

}  // namespace wsibench::mil
