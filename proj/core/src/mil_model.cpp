// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <json.hpp>
#include <numbers>

#include "wsibench/error.hpp"
#include "wsibench/mil.hpp"

namespace wsibench::mil {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

ModelShape default_shape(Eigen::Index input_dim, Eigen::Index classes) {
  ModelShape s;
  s.input_dim = input_dim;
  s.classes = classes;
  return s;
}

void validate(const ModelShape& s) {
  if (s.input_dim < 1 || s.hidden_dim < 1 || s.attention_dim < 1 || s.heads < 1 || s.ff_dim < 1 || s.layers < 0 ||
      s.classes < 2)
    fail(ErrorKind::InvalidConfig, "model shape dimensions must be positive and classes >= 2");
  if (s.hidden_dim % s.heads != 0) fail(ErrorKind::InvalidConfig, "hidden_dim must be divisible by heads");
  if (!(s.classifier_dropout >= 0.0 && s.classifier_dropout < 1.0) ||
      !(s.transformer_dropout >= 0.0 && s.transformer_dropout < 1.0))
    fail(ErrorKind::InvalidConfig, "dropout rates must lie in [0, 1)");
}

// ---------------------------------------------------------------------------
// Parameter container

std::vector<Mat*> AggregatorParams::tensors() {
  std::vector<Mat*> out{&proj_w, &proj_b};
  if (variant == ModelKind::AttMil) out.insert(out.end(), {&att_w1, &att_b1, &att_w2, &att_b2});
  if (variant == ModelKind::Transformer)
    for (auto& l : layers)
      out.insert(out.end(), {&l.ln1_gamma, &l.ln1_beta, &l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo,
                             &l.ln2_gamma, &l.ln2_beta, &l.ff1_w, &l.ff1_b, &l.ff2_w, &l.ff2_b});
  out.insert(out.end(), {&cls_w, &cls_b});
  return out;
}

std::vector<const Mat*> AggregatorParams::tensors() const {
  auto mut = const_cast<AggregatorParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

std::vector<std::string> AggregatorParams::tensor_names() const {
  std::vector<std::string> out{"proj_w", "proj_b"};
  if (variant == ModelKind::AttMil) out.insert(out.end(), {"att_w1", "att_b1", "att_w2", "att_b2"});
  if (variant == ModelKind::Transformer)
    for (std::size_t i = 0; i < layers.size(); ++i)
      for (const char* n : {"ln1_gamma", "ln1_beta", "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln2_gamma",
                            "ln2_beta", "ff1_w", "ff1_b", "ff2_w", "ff2_b"})
        out.push_back("layer" + std::to_string(i) + "." + n);
  out.insert(out.end(), {"cls_w", "cls_b"});
  return out;
}

AggregatorParams AggregatorParams::zeros_like() const {
  AggregatorParams z = *this;
  for (Mat* t : z.tensors()) t->setZero();
  return z;
}

Eigen::Index AggregatorParams::parameter_count() const {
  Eigen::Index n = 0;
  for (const Mat* t : tensors()) n += t->size();
  return n;
}

bool AggregatorParams::all_finite() const {
  for (const Mat* t : tensors())
    if (!t->allFinite()) return false;
  return true;
}

namespace {

Mat uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

void init_linear(Mat& w, Mat& b, Eigen::Index out, Eigen::Index in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  w = uniform_matrix(out, in, bound, rng);
  b = uniform_matrix(out, 1, bound, rng);
}

}  // namespace

AggregatorParams init_params(ModelKind variant, const ModelShape& shape, Rng& rng) {
  validate(shape);
  AggregatorParams p;
  p.variant = variant;
  p.shape = shape;
  const Eigen::Index D = shape.hidden_dim;
  init_linear(p.proj_w, p.proj_b, D, shape.input_dim, rng);
  if (variant == ModelKind::AttMil) {
    init_linear(p.att_w1, p.att_b1, shape.attention_dim, D, rng);
    init_linear(p.att_w2, p.att_b2, 1, shape.attention_dim, rng);
  }
  if (variant == ModelKind::Transformer) {
    p.layers.resize(static_cast<std::size_t>(shape.layers));
    for (auto& l : p.layers) {
      l.ln1_gamma = Mat::Ones(D, 1);
      l.ln1_beta = Mat::Zero(D, 1);
      init_linear(l.wq, l.bq, D, D, rng);
      init_linear(l.wk, l.bk, D, D, rng);
      init_linear(l.wv, l.bv, D, D, rng);
      init_linear(l.wo, l.bo, D, D, rng);
      l.ln2_gamma = Mat::Ones(D, 1);
      l.ln2_beta = Mat::Zero(D, 1);
      init_linear(l.ff1_w, l.ff1_b, shape.ff_dim, D, rng);
      init_linear(l.ff2_w, l.ff2_b, D, shape.ff_dim, rng);
    }
  }
  init_linear(p.cls_w, p.cls_b, shape.classes, D, rng);
  return p;
}

std::string serialize_params(const AggregatorParams& params) {
  nlohmann::json j;
  j["variant"] = std::string(to_string(params.variant));
  const auto& s = params.shape;
  j["shape"] = {{"input_dim", s.input_dim},
                {"hidden_dim", s.hidden_dim},
                {"attention_dim", s.attention_dim},
                {"heads", s.heads},
                {"ff_dim", s.ff_dim},
                {"layers", s.layers},
                {"classes", s.classes},
                {"classifier_dropout", s.classifier_dropout},
                {"transformer_dropout", s.transformer_dropout}};
  const auto names = params.tensor_names();
  const auto ts = params.tensors();
  nlohmann::json tensors = nlohmann::json::object();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const Mat& m = *ts[i];
    std::vector<double> data(m.data(), m.data() + m.size());
    tensors[names[i]] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
  }
  j["tensors"] = std::move(tensors);
  return j.dump();
}

AggregatorParams deserialize_params(std::string_view json_text) {
  try {
    const auto j = nlohmann::json::parse(json_text);
    ModelShape s;
    const auto& js = j.at("shape");
    s.input_dim = js.at("input_dim").get<Eigen::Index>();
    s.hidden_dim = js.at("hidden_dim").get<Eigen::Index>();
    s.attention_dim = js.at("attention_dim").get<Eigen::Index>();
    s.heads = js.at("heads").get<Eigen::Index>();
    s.ff_dim = js.at("ff_dim").get<Eigen::Index>();
    s.layers = js.at("layers").get<Eigen::Index>();
    s.classes = js.at("classes").get<Eigen::Index>();
    s.classifier_dropout = js.at("classifier_dropout").get<double>();
    s.transformer_dropout = js.at("transformer_dropout").get<double>();
    Rng scratch(0);
    AggregatorParams p = init_params(parse_model(j.at("variant").get<std::string>()), s, scratch);
    const auto names = p.tensor_names();
    auto ts = p.tensors();
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const auto& jt = j.at("tensors").at(names[i]);
      const auto data = jt.at("data").get<std::vector<double>>();
      if (jt.at("rows").get<Eigen::Index>() != ts[i]->rows() || jt.at("cols").get<Eigen::Index>() != ts[i]->cols() ||
          static_cast<Eigen::Index>(data.size()) != ts[i]->size())
        fail(ErrorKind::DimensionMismatch, "tensor " + names[i] + " has the wrong shape");
      std::copy(data.begin(), data.end(), ts[i]->data());
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::MalformedRow, std::string("bad parameter file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

constexpr double kNormEps = 1e-5;

Mat linear(const Mat& x, const Mat& w, const Mat& b) {
  Mat y = x * w.transpose();
  y.rowwise() += b.col(0).transpose();
  return y;
}

void linear_backward(const Mat& dy, const Mat& x, const Mat& w, Mat& dw, Mat& db, Mat* dx) {
  dw.noalias() += dy.transpose() * x;
  db.col(0) += dy.colwise().sum().transpose();
  if (dx) *dx = dy * w;
}

struct NormCache {
  Mat xhat;
  Vec inv_std;
};

Mat layer_norm(const Mat& x, const Mat& gamma, const Mat& beta, NormCache& c) {
  const Eigen::Index n = x.rows();
  c.xhat.resize(n, x.cols());
  c.inv_std.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = x.row(r).mean();
    const Eigen::RowVectorXd centered = x.row(r).array() - mu;
    const double var = centered.squaredNorm() / static_cast<double>(x.cols());
    c.inv_std[r] = 1.0 / std::sqrt(var + kNormEps);
    c.xhat.row(r) = centered * c.inv_std[r];
  }
  Mat y = c.xhat.array().rowwise() * gamma.col(0).transpose().array();
  y.rowwise() += beta.col(0).transpose();
  return y;
}

Mat layer_norm_backward(const Mat& dy, const NormCache& c, const Mat& gamma, Mat& dgamma, Mat& dbeta) {
  dgamma.col(0) += (dy.array() * c.xhat.array()).colwise().sum().transpose().matrix();
  dbeta.col(0) += dy.colwise().sum().transpose();
  const Mat dxhat = dy.array().rowwise() * gamma.col(0).transpose().array();
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double m1 = dxhat.row(r).mean();
    const double m2 = dxhat.row(r).dot(c.xhat.row(r)) / static_cast<double>(dy.cols());
    dx.row(r) = c.inv_std[r] * (dxhat.row(r).array() - m1 - c.xhat.row(r).array() * m2);
  }
  return dx;
}

// Scalar libm exp underflows cleanly to 0; the vectorised path does not.
constexpr auto scalar_exp = [](double v) { return std::exp(v); };

void softmax_rows(Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - mx).unaryExpr(scalar_exp);
    m.row(r) /= m.row(r).sum();
  }
}

Vec softmax(const Vec& v) {
  const double mx = v.maxCoeff();
  Vec e = (v.array() - mx).unaryExpr(scalar_exp);
  return e / e.sum();
}

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;
constexpr double kInvSqrt2Pi = std::numbers::inv_sqrtpi * kInvSqrt2;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }
double gelu_grad(double x) { return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * std::exp(-0.5 * x * x) * kInvSqrt2Pi; }

// Inverted dropout mask; empty when dropout is inactive.
Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng* rng) {
  if (!rng || p <= 0.0) return {};
  Mat m(rows, cols);
  const double keep = 1.0 / (1.0 - p);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng->uniform() < p ? 0.0 : keep;
  return m;
}

struct LayerCache {
  Mat input;
  NormCache ln1;
  Mat u, q, k, v;
  std::vector<Mat> attn;
  Mat concat;
  Mat mask1;
  Mat mid;
  NormCache ln2;
  Mat u2, f1, g;
  Mat mask2;
};

struct Cache {
  Mat x, pre, z;
  Mat att_hidden;
  Vec alphas;
  std::vector<LayerCache> layers;
  Mat tokens;
  Vec slide;
  Vec cls_mask;
  Vec slide_dropped;
  Vec logits;
  Vec probs;
};

void forward_pass(const AggregatorParams& p, const Mat& x, Rng* rng, Cache& c) {
  const auto& s = p.shape;
  if (x.cols() != s.input_dim)
    fail(ErrorKind::DimensionMismatch, "bag has " + std::to_string(x.cols()) + " features, model expects " +
                                           std::to_string(s.input_dim));
  if (x.rows() < 1) fail(ErrorKind::DimensionMismatch, "bag has no patches");
  const Eigen::Index n = x.rows();
  c.x = x;
  c.pre = linear(x, p.proj_w, p.proj_b);
  c.z = c.pre.cwiseMax(0.0);

  switch (p.variant) {
    case ModelKind::MeanPool:
      c.slide = c.z.colwise().mean().transpose();
      break;
    case ModelKind::AttMil: {
      c.att_hidden = linear(c.z, p.att_w1, p.att_b1).array().tanh();
      Vec e = c.att_hidden * p.att_w2.row(0).transpose();
      e.array() += p.att_b2(0, 0);
      c.alphas = softmax(e);
      c.slide = c.z.transpose() * c.alphas;
      break;
    }
    case ModelKind::Transformer: {
      const Eigen::Index heads = s.heads;
      const Eigen::Index dh = s.hidden_dim / heads;
      const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
      Mat t = c.z;
      c.layers.resize(p.layers.size());
      for (std::size_t li = 0; li < p.layers.size(); ++li) {
        const auto& L = p.layers[li];
        auto& lc = c.layers[li];
        lc.input = t;
        lc.u = layer_norm(t, L.ln1_gamma, L.ln1_beta, lc.ln1);
        lc.q = linear(lc.u, L.wq, L.bq);
        lc.k = linear(lc.u, L.wk, L.bk);
        lc.v = linear(lc.u, L.wv, L.bv);
        lc.concat.resize(n, s.hidden_dim);
        lc.attn.resize(static_cast<std::size_t>(heads));
        for (Eigen::Index h = 0; h < heads; ++h) {
          Mat scores = lc.q.middleCols(h * dh, dh) * lc.k.middleCols(h * dh, dh).transpose() * scale;
          softmax_rows(scores);
          lc.concat.middleCols(h * dh, dh) = scores * lc.v.middleCols(h * dh, dh);
          lc.attn[static_cast<std::size_t>(h)] = std::move(scores);
        }
        Mat att_out = linear(lc.concat, L.wo, L.bo);
        lc.mask1 = dropout_mask(n, s.hidden_dim, s.transformer_dropout, rng);
        if (lc.mask1.size()) att_out.array() *= lc.mask1.array();
        lc.mid = t + att_out;
        lc.u2 = layer_norm(lc.mid, L.ln2_gamma, L.ln2_beta, lc.ln2);
        lc.f1 = linear(lc.u2, L.ff1_w, L.ff1_b);
        lc.g = lc.f1.unaryExpr([](double v) { return gelu(v); });
        Mat ff_out = linear(lc.g, L.ff2_w, L.ff2_b);
        lc.mask2 = dropout_mask(n, s.hidden_dim, s.transformer_dropout, rng);
        if (lc.mask2.size()) ff_out.array() *= lc.mask2.array();
        t = lc.mid + ff_out;
      }
      c.tokens = t;
      c.slide = t.colwise().mean().transpose();
      break;
    }
  }

  Mat mask = dropout_mask(s.hidden_dim, 1, s.classifier_dropout, rng);
  c.cls_mask = mask.size() ? Vec(mask.col(0)) : Vec();
  c.slide_dropped = c.cls_mask.size() ? Vec(c.slide.array() * c.cls_mask.array()) : c.slide;
  c.logits = p.cls_w * c.slide_dropped + p.cls_b.col(0);
  c.probs = softmax(c.logits);
}

void backward_pass(const AggregatorParams& p, const Cache& c, int label, AggregatorParams& g) {
  const auto& s = p.shape;
  const Eigen::Index n = c.x.rows();
  Vec dlogits = c.probs;
  dlogits[label] -= 1.0;
  g.cls_w.noalias() += dlogits * c.slide_dropped.transpose();
  g.cls_b.col(0) += dlogits;
  Vec dslide = p.cls_w.transpose() * dlogits;
  if (c.cls_mask.size()) dslide.array() *= c.cls_mask.array();

  Mat dz;
  switch (p.variant) {
    case ModelKind::MeanPool:
      dz = Mat::Ones(n, 1) * (dslide.transpose() / static_cast<double>(n));
      break;
    case ModelKind::AttMil: {
      dz = c.alphas * dslide.transpose();
      const Vec dalpha = c.z * dslide;
      const Vec de = c.alphas.array() * (dalpha.array() - c.alphas.dot(dalpha));
      g.att_w2.row(0) += (c.att_hidden.transpose() * de).transpose();
      g.att_b2(0, 0) += de.sum();
      const Mat dpre = (de * p.att_w2.row(0)).array() * (1.0 - c.att_hidden.array().square());
      Mat dz_att;
      linear_backward(dpre, c.z, p.att_w1, g.att_w1, g.att_b1, &dz_att);
      dz += dz_att;
      break;
    }
    case ModelKind::Transformer: {
      const Eigen::Index heads = s.heads;
      const Eigen::Index dh = s.hidden_dim / heads;
      const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
      Mat dt = Mat::Ones(n, 1) * (dslide.transpose() / static_cast<double>(n));
      for (std::size_t li = p.layers.size(); li-- > 0;) {
        const auto& L = p.layers[li];
        auto& G = g.layers[li];
        const auto& lc = c.layers[li];

        Mat dff = dt;
        if (lc.mask2.size()) dff.array() *= lc.mask2.array();
        Mat dgelu;
        linear_backward(dff, lc.g, L.ff2_w, G.ff2_w, G.ff2_b, &dgelu);
        const Mat df1 = dgelu.array() * lc.f1.unaryExpr([](double v) { return gelu_grad(v); }).array();
        Mat du2;
        linear_backward(df1, lc.u2, L.ff1_w, G.ff1_w, G.ff1_b, &du2);
        Mat dmid = dt + layer_norm_backward(du2, lc.ln2, L.ln2_gamma, G.ln2_gamma, G.ln2_beta);

        Mat datt = dmid;
        if (lc.mask1.size()) datt.array() *= lc.mask1.array();
        Mat dconcat;
        linear_backward(datt, lc.concat, L.wo, G.wo, G.bo, &dconcat);
        Mat dq(n, s.hidden_dim), dk(n, s.hidden_dim), dv(n, s.hidden_dim);
        for (Eigen::Index h = 0; h < heads; ++h) {
          const Mat& P = lc.attn[static_cast<std::size_t>(h)];
          const Mat dO = dconcat.middleCols(h * dh, dh);
          const Mat dP = dO * lc.v.middleCols(h * dh, dh).transpose();
          dv.middleCols(h * dh, dh) = P.transpose() * dO;
          Mat dS = P.array() * (dP.array().colwise() - (dP.array() * P.array()).rowwise().sum());
          dS *= scale;
          dq.middleCols(h * dh, dh) = dS * lc.k.middleCols(h * dh, dh);
          dk.middleCols(h * dh, dh) = dS.transpose() * lc.q.middleCols(h * dh, dh);
        }
        Mat du, du_k, du_v;
        linear_backward(dq, lc.u, L.wq, G.wq, G.bq, &du);
        linear_backward(dk, lc.u, L.wk, G.wk, G.bk, &du_k);
        linear_backward(dv, lc.u, L.wv, G.wv, G.bv, &du_v);
        du += du_k + du_v;
        dt = dmid + layer_norm_backward(du, lc.ln1, L.ln1_gamma, G.ln1_gamma, G.ln1_beta);
      }
      dz = std::move(dt);
      break;
    }
  }
  const Mat dpre = dz.array() * (c.pre.array() > 0.0).cast<double>();
  linear_backward(dpre, c.x, p.proj_w, g.proj_w, g.proj_b, nullptr);
}

double cross_entropy(const Vec& logits, int label) {
  const double mx = logits.maxCoeff();
  return mx + std::log((logits.array() - mx).unaryExpr(scalar_exp).sum()) - logits[label];
}

void check_label(const AggregatorParams& p, int label) {
  if (label < 0 || label >= p.shape.classes)
    fail(ErrorKind::DimensionMismatch, "label " + std::to_string(label) + " outside [0, classes)");
}

}  // namespace

ForwardResult forward(const AggregatorParams& params, const Mat& patches, bool train_mode, Rng* rng) {
  Cache c;
  forward_pass(params, patches, train_mode ? rng : nullptr, c);
  ForwardResult r;
  r.probs = c.probs;
  if (params.variant == ModelKind::AttMil) r.alphas = c.alphas;
  r.slide_embedding = c.slide;
  return r;
}

ForwardResult forward(const AggregatorParams& params, const Bag& bag, bool train_mode, Rng* rng) {
  return forward(params, bag.patches, train_mode, rng);
}

LossAndGrad loss_and_grad(const AggregatorParams& params, const Mat& patches, int label, Rng* dropout_rng) {
  check_label(params, label);
  Cache c;
  forward_pass(params, patches, dropout_rng, c);
  LossAndGrad out;
  out.loss = cross_entropy(c.logits, label);
  if (!std::isfinite(out.loss)) fail(ErrorKind::NonFiniteLoss, "cross-entropy is not finite");
  out.probs = c.probs;
  out.grads = params.zeros_like();
  backward_pass(params, c, label, out.grads);
  return out;
}

double eval_loss(const AggregatorParams& params, const Mat& patches, int label) {
  check_label(params, label);
  Cache c;
  forward_pass(params, patches, nullptr, c);
  return cross_entropy(c.logits, label);
}

}  // namespace wsibench::mil
