#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "emphasis/errors.hpp"
#include "emphasis/features.hpp"
#include "emphasis/rng.hpp"
#include "emphasis/subword.hpp"

namespace emphasis {

inline double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Sigmoid kept strictly inside (0, 1): saturated values are pulled in by one ulp.
inline double bounded_sigmoid(double x) noexcept {
  constexpr double kHi = 1.0 - 0x1.0p-53;
  return std::clamp(sigmoid(x), std::numeric_limits<double>::min(), kHi);
}

struct ModelDims {
  std::size_t vocab_size = 0;
  std::size_t d_e = 64;
  std::size_t d_h = 64;

  static constexpr std::size_t kFeatureWidth = LexicalFeatures::kWidth;

  std::size_t head_width() const noexcept { return 2 * d_h + kFeatureWidth; }

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

enum class Direction : std::size_t { forward = 0, backward = 1 };

/// All trainable parameters in one flat buffer:
///   embedding      vocab_size x d_e
///   per direction  W (3 d_h x d_e), U (3 d_h x d_h), b (3 d_h); gates ordered update, reset, candidate
///   head           weight (2 d_h + 3), bias
/// Gradients use the same type.
class ModelParams {
 public:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;
  using VectorMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

  ModelParams() = default;

  explicit ModelParams(const ModelDims& dims) : dims_(dims), data_(total_size(dims), 0.0) {}

  const ModelDims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  MatrixMap embedding() { return {data_.data(), rows(dims_.vocab_size), cols(dims_.d_e)}; }
  ConstMatrixMap embedding() const { return {data_.data(), rows(dims_.vocab_size), cols(dims_.d_e)}; }

  MatrixMap gru_w(Direction d) { return {data_.data() + gru_offset(d), rows(3 * dims_.d_h), cols(dims_.d_e)}; }
  ConstMatrixMap gru_w(Direction d) const {
    return {data_.data() + gru_offset(d), rows(3 * dims_.d_h), cols(dims_.d_e)};
  }
  MatrixMap gru_u(Direction d) { return {data_.data() + gru_u_offset(d), rows(3 * dims_.d_h), cols(dims_.d_h)}; }
  ConstMatrixMap gru_u(Direction d) const {
    return {data_.data() + gru_u_offset(d), rows(3 * dims_.d_h), cols(dims_.d_h)};
  }
  VectorMap gru_b(Direction d) { return {data_.data() + gru_b_offset(d), rows(3 * dims_.d_h)}; }
  ConstVectorMap gru_b(Direction d) const { return {data_.data() + gru_b_offset(d), rows(3 * dims_.d_h)}; }

  VectorMap head_w() { return {data_.data() + head_offset(), rows(dims_.head_width())}; }
  ConstVectorMap head_w() const { return {data_.data() + head_offset(), rows(dims_.head_width())}; }
  double& head_b() { return data_.back(); }
  double head_b() const { return data_.back(); }

  void set_zero() noexcept { std::fill(data_.begin(), data_.end(), 0.0); }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  /// Named blocks in buffer order, for serialization.
  struct Block {
    std::string name;
    std::size_t offset;
    std::size_t size;
  };

  std::vector<Block> blocks() const {
    const std::size_t h3 = 3 * dims_.d_h;
    return {
        {"embedding", 0, dims_.vocab_size * dims_.d_e},
        {"forward.W", gru_offset(Direction::forward), h3 * dims_.d_e},
        {"forward.U", gru_u_offset(Direction::forward), h3 * dims_.d_h},
        {"forward.b", gru_b_offset(Direction::forward), h3},
        {"backward.W", gru_offset(Direction::backward), h3 * dims_.d_e},
        {"backward.U", gru_u_offset(Direction::backward), h3 * dims_.d_h},
        {"backward.b", gru_b_offset(Direction::backward), h3},
        {"head.w", head_offset(), dims_.head_width()},
        {"head.b", head_offset() + dims_.head_width(), 1},
    };
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  static Eigen::Index rows(std::size_t n) { return static_cast<Eigen::Index>(n); }
  static Eigen::Index cols(std::size_t n) { return static_cast<Eigen::Index>(n); }

  static std::size_t direction_size(const ModelDims& d) { return 3 * d.d_h * (d.d_e + d.d_h + 1); }
  static std::size_t total_size(const ModelDims& d) {
    return d.vocab_size * d.d_e + 2 * direction_size(d) + d.head_width() + 1;
  }

  std::size_t gru_offset(Direction d) const {
    return dims_.vocab_size * dims_.d_e + static_cast<std::size_t>(d) * direction_size(dims_);
  }
  std::size_t gru_u_offset(Direction d) const { return gru_offset(d) + 3 * dims_.d_h * dims_.d_e; }
  std::size_t gru_b_offset(Direction d) const { return gru_u_offset(d) + 3 * dims_.d_h * dims_.d_h; }
  std::size_t head_offset() const { return dims_.vocab_size * dims_.d_e + 2 * direction_size(dims_); }

  ModelDims dims_;
  std::vector<double> data_;
};

/// Embedding and recurrent weights uniform in [-0.1, 0.1]; recurrent biases
/// and the head start at zero, so a fresh model scores every token 0.5.
inline ModelParams init_params(std::size_t vocab_size, std::size_t d_e, std::size_t d_h, std::uint64_t seed) {
  if (vocab_size == 0 || d_e == 0 || d_h == 0) {
    throw ArgumentError("model dimensions must be positive (vocab_size=" + std::to_string(vocab_size) +
                        ", d_e=" + std::to_string(d_e) + ", d_h=" + std::to_string(d_h) + ")");
  }
  ModelParams p(ModelDims{vocab_size, d_e, d_h});
  Rng rng(hash64(seed, {0x696e6974ULL}));
  auto fill = [&](auto&& block) {
    for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] = rng.uniform(-0.1, 0.1);
  };
  fill(p.embedding());
  for (auto d : {Direction::forward, Direction::backward}) {
    fill(p.gru_w(d));
    fill(p.gru_u(d));
  }
  return p;
}

struct ForwardOptions {
  bool use_features = true;
  double dropout = 0.0;   // applied to the encoder output; needs rng when > 0
  Rng* rng = nullptr;
};

/// Activations of one recurrent direction, by step. h[0] is the zero initial state.
struct GruTrace {
  std::vector<Eigen::VectorXd> h, z, r, n, un;
};

struct EncoderTrace {
  GruTrace fwd, bwd;
  std::vector<Eigen::VectorXd> hidden;  // per token, after dropout: [fwd; bwd]
  std::vector<Eigen::VectorXd> mask;    // empty without dropout
  bool use_features = true;
};

/// Model output for one sequence. logits are the pre-sigmoid head outputs.
struct Prediction {
  std::vector<double> logits;
  std::vector<double> scores;
  std::vector<double> word_scores;
  EncoderTrace trace;
};

namespace detail {

inline Eigen::VectorXd sigmoid(const Eigen::VectorXd& v) {
  return v.unaryExpr([](double x) { return emphasis::sigmoid(x); });
}

inline void gru_step(const ModelParams& p, Direction dir, const Eigen::VectorXd& x, GruTrace& tr) {
  const Eigen::Index dh = static_cast<Eigen::Index>(p.dims().d_h);
  const Eigen::VectorXd& h = tr.h.back();
  const Eigen::VectorXd gx = p.gru_w(dir) * x + p.gru_b(dir);
  const Eigen::VectorXd gh = p.gru_u(dir) * h;
  Eigen::VectorXd z = sigmoid(gx.segment(0, dh) + gh.segment(0, dh));
  Eigen::VectorXd r = sigmoid(gx.segment(dh, dh) + gh.segment(dh, dh));
  Eigen::VectorXd un = gh.segment(2 * dh, dh);
  Eigen::VectorXd n = (gx.segment(2 * dh, dh) + r.cwiseProduct(un)).array().tanh().matrix();
  Eigen::VectorXd h_next = (Eigen::VectorXd::Ones(dh) - z).cwiseProduct(n) + z.cwiseProduct(h);
  tr.z.push_back(std::move(z));
  tr.r.push_back(std::move(r));
  tr.un.push_back(std::move(un));
  tr.n.push_back(std::move(n));
  tr.h.push_back(std::move(h_next));
}

/// Backprop through step s. dh is the total gradient on h[s+1]; returns the
/// gradient on h[s] and adds the input gradient into dx.
inline Eigen::VectorXd gru_step_backward(const ModelParams& p, ModelParams& g, Direction dir, const GruTrace& tr,
                                         std::size_t s, const Eigen::VectorXd& x, const Eigen::VectorXd& dh,
                                         Eigen::Ref<Eigen::VectorXd> dx) {
  const Eigen::Index d = static_cast<Eigen::Index>(p.dims().d_h);
  const auto& h_prev = tr.h[s];
  const auto& z = tr.z[s];
  const auto& r = tr.r[s];
  const auto& n = tr.n[s];
  const auto& un = tr.un[s];

  const Eigen::ArrayXd dn = dh.array() * (1.0 - z.array());
  const Eigen::ArrayXd dz = dh.array() * (h_prev.array() - n.array());
  const Eigen::ArrayXd da_n = dn * (1.0 - n.array().square());
  const Eigen::ArrayXd da_z = dz * z.array() * (1.0 - z.array());
  const Eigen::ArrayXd da_r = da_n * un.array() * r.array() * (1.0 - r.array());

  Eigen::VectorXd dgx(3 * d);
  dgx << da_z.matrix(), da_r.matrix(), da_n.matrix();
  Eigen::VectorXd dgh(3 * d);
  dgh << da_z.matrix(), da_r.matrix(), (da_n * r.array()).matrix();

  g.gru_w(dir).noalias() += dgx * x.transpose();
  g.gru_b(dir) += dgx;
  g.gru_u(dir).noalias() += dgh * h_prev.transpose();
  dx.noalias() += p.gru_w(dir).transpose() * dgx;

  Eigen::VectorXd dh_prev = (dh.array() * z.array()).matrix();
  dh_prev.noalias() += p.gru_u(dir).transpose() * dgh;
  return dh_prev;
}

}  // namespace detail

/// Bidirectional gated-recurrent encoder, then a linear head over
/// [forward state; backward state; lexical features] and a sigmoid.
inline Prediction forward(const ModelParams& params, const SubwordSequence& seq, const ForwardOptions& opts = {}) {
  const auto& dims = params.dims();
  const std::size_t T = seq.size();
  if (T == 0) throw ArgumentError("forward: empty sequence");
  if (seq.features.size() != T) throw ArgumentError("forward: feature rows do not match tokens");
  for (auto id : seq.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= dims.vocab_size) {
      throw ArgumentError("forward: token id " + std::to_string(id) + " outside vocab of size " +
                          std::to_string(dims.vocab_size));
    }
  }
  if (opts.dropout < 0.0 || opts.dropout >= 1.0) throw ArgumentError("forward: dropout must lie in [0, 1)");
  if (opts.dropout > 0.0 && opts.rng == nullptr) throw ArgumentError("forward: dropout requires an rng");

  const Eigen::Index dh = static_cast<Eigen::Index>(dims.d_h);
  const auto emb = params.embedding();
  auto x_of = [&](std::size_t t) -> Eigen::VectorXd { return emb.row(seq.ids[t]).transpose(); };

  Prediction pred;
  auto& tr = pred.trace;
  tr.use_features = opts.use_features;
  tr.fwd.h.push_back(Eigen::VectorXd::Zero(dh));
  tr.bwd.h.push_back(Eigen::VectorXd::Zero(dh));
  for (std::size_t t = 0; t < T; ++t) detail::gru_step(params, Direction::forward, x_of(t), tr.fwd);
  for (std::size_t s = 0; s < T; ++s) detail::gru_step(params, Direction::backward, x_of(T - 1 - s), tr.bwd);

  const auto w = params.head_w();
  const double keep = 1.0 - opts.dropout;
  pred.logits.resize(T);
  pred.scores.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    Eigen::VectorXd hidden(2 * dh);
    hidden << tr.fwd.h[t + 1], tr.bwd.h[T - t];
    if (opts.dropout > 0.0) {
      Eigen::VectorXd mask(2 * dh);
      for (Eigen::Index i = 0; i < mask.size(); ++i) mask[i] = opts.rng->bernoulli(keep) ? 1.0 / keep : 0.0;
      hidden = hidden.cwiseProduct(mask);
      tr.mask.push_back(std::move(mask));
    }
    double logit = w.head(2 * dh).dot(hidden);
    if (opts.use_features) {
      double f = 0.0;
      for (std::size_t k = 0; k < ModelDims::kFeatureWidth; ++k) {
        f += w[2 * dh + static_cast<Eigen::Index>(k)] * seq.features[t][k];
      }
      logit += f;
    }
    logit += params.head_b();
    pred.logits[t] = logit;
    pred.scores[t] = bounded_sigmoid(logit);
    tr.hidden.push_back(std::move(hidden));
  }
  pred.word_scores = aggregate_scores(seq, pred.scores);
  return pred;
}

/// Adds the exact reverse-mode gradient of sum_t loss_grad[t] * logit[t]
/// (scaled by `scale`) into grad.
inline void backward_into(ModelParams& grad, const ModelParams& params, const SubwordSequence& seq,
                          const Prediction& pred, std::span<const double> loss_grad, double scale = 1.0) {
  const auto& dims = params.dims();
  const std::size_t T = seq.size();
  if (loss_grad.size() != T || pred.logits.size() != T || pred.trace.hidden.size() != T) {
    throw ArgumentError("backward: loss gradient has " + std::to_string(loss_grad.size()) + " entries for " +
                        std::to_string(T) + " tokens");
  }
  if (!(grad.dims() == dims)) throw ArgumentError("backward: gradient buffer shape mismatch");

  const auto& tr = pred.trace;
  const Eigen::Index dh = static_cast<Eigen::Index>(dims.d_h);
  const auto w = params.head_w();
  auto gw = grad.head_w();

  std::vector<Eigen::VectorXd> d_fwd(T), d_bwd(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double g = scale * loss_grad[t];
    gw.head(2 * dh) += g * tr.hidden[t];
    if (tr.use_features) {
      for (std::size_t k = 0; k < ModelDims::kFeatureWidth; ++k) {
        gw[2 * dh + static_cast<Eigen::Index>(k)] += g * seq.features[t][k];
      }
    }
    grad.head_b() += g;
    Eigen::VectorXd dhidden = g * w.head(2 * dh);
    if (!tr.mask.empty()) dhidden = dhidden.cwiseProduct(tr.mask[t]);
    d_fwd[t] = dhidden.head(dh);
    d_bwd[t] = dhidden.tail(dh);
  }

  const auto emb = params.embedding();
  auto gemb = grad.embedding();
  Eigen::VectorXd dx(static_cast<Eigen::Index>(dims.d_e));

  Eigen::VectorXd carry = Eigen::VectorXd::Zero(dh);
  for (std::size_t t = T; t-- > 0;) {
    const Eigen::VectorXd x = emb.row(seq.ids[t]).transpose();
    dx.setZero();
    carry = detail::gru_step_backward(params, grad, Direction::forward, tr.fwd, t, x, d_fwd[t] + carry, dx);
    gemb.row(seq.ids[t]) += dx.transpose();
  }
  carry.setZero();
  for (std::size_t s = T; s-- > 0;) {
    const std::size_t t = T - 1 - s;
    const Eigen::VectorXd x = emb.row(seq.ids[t]).transpose();
    dx.setZero();
    carry = detail::gru_step_backward(params, grad, Direction::backward, tr.bwd, s, x, d_bwd[t] + carry, dx);
    gemb.row(seq.ids[t]) += dx.transpose();
  }
}

inline ModelParams backward(const ModelParams& params, const SubwordSequence& seq, const Prediction& pred,
                            std::span<const double> loss_grad) {
  ModelParams grad(params.dims());
  backward_into(grad, params, seq, pred, loss_grad);
  return grad;
}

}  // namespace emphasis
