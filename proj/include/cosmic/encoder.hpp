#pragma once

#include "cosmic/ppr.hpp"
#include "cosmic/rng.hpp"

#include <cmath>
#include <cstdint>

namespace cosmic {

/// Encoder weights plus the N-way classification head used during
/// meta-training. `generation` changes whenever the values change so that
/// stale forward caches can be detected.
template <typename Scalar>
struct ModelParams {
  Mat<Scalar> weight;       // d x hidden
  Mat<Scalar> head_weight;  // hidden x n_way
  Vec<Scalar> head_bias;    // n_way
  std::uint64_t generation = 0;

  Eigen::Index input_dim() const { return weight.rows(); }
  Eigen::Index hidden_dim() const { return weight.cols(); }
  int n_way() const { return static_cast<int>(head_bias.size()); }

  void reset_head(int n_way) {
    head_weight = Mat<Scalar>::Zero(weight.cols(), n_way);
    head_bias = Vec<Scalar>::Zero(n_way);
    ++generation;
  }

  bool all_finite() const {
    return weight.allFinite() && head_weight.allFinite() && head_bias.allFinite();
  }

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> p;
    p.weight = weight.template cast<Other>();
    p.head_weight = head_weight.template cast<Other>();
    p.head_bias = head_bias.template cast<Other>();
    p.generation = generation;
    return p;
  }
};

/// Glorot-uniform encoder weights, zero head.
template <typename Scalar>
ModelParams<Scalar> init_params(Eigen::Index input_dim, Eigen::Index hidden, int n_way, Rng& rng) {
  ModelParams<Scalar> p;
  const double bound = std::sqrt(6.0 / static_cast<double>(input_dim + hidden));
  p.weight.resize(input_dim, hidden);
  for (Eigen::Index j = 0; j < hidden; ++j)
    for (Eigen::Index i = 0; i < input_dim; ++i)
      p.weight(i, j) = static_cast<Scalar>((2.0 * uniform01(rng) - 1.0) * bound);
  p.reset_head(n_way);
  return p;
}

/// Activations kept from a forward pass for the backward pass.
template <typename Scalar>
struct GcnCache {
  Mat<Scalar> propagated;      // Ahat X
  Mat<Scalar> preactivation;   // Ahat X W
  Mat<Scalar> embeddings;      // ReLU(preactivation)
  int num_real = 0;
  std::uint64_t generation = 0;
};

template <typename Scalar>
struct ViewPair {
  Vec<Scalar> central;  // f1: central-node embedding
  Vec<Scalar> pooled;   // f2: mean over real nodes
};

/// One-layer GCN H = ReLU(Ahat X W) on a (possibly mixed) subgraph.
template <typename Scalar>
GcnCache<Scalar> gcn_forward(const Mat<Scalar>& adjacency, const Mat<Scalar>& features, int num_real,
                             const ModelParams<Scalar>& params) {
  if (features.cols() != params.weight.rows())
    throw Error("gcn_forward: feature width " + std::to_string(features.cols()) + " != encoder input " +
                std::to_string(params.weight.rows()));
  if (adjacency.rows() != features.rows()) throw Error("gcn_forward: adjacency/feature row mismatch");
  if (num_real < 1 || num_real > adjacency.rows()) throw Error("gcn_forward: bad real-node count");
  GcnCache<Scalar> c;
  c.propagated = gcn_normalize(adjacency) * features;
  c.preactivation = c.propagated * params.weight;
  c.embeddings = c.preactivation.cwiseMax(Scalar(0));
  c.num_real = num_real;
  c.generation = params.generation;
  return c;
}

template <typename Scalar>
GcnCache<Scalar> gcn_forward(const Subgraph<Scalar>& sub, const ModelParams<Scalar>& params) {
  return gcn_forward(sub.adjacency, sub.features, sub.num_real, params);
}

template <typename Scalar>
ViewPair<Scalar> views(const GcnCache<Scalar>& c) {
  ViewPair<Scalar> v;
  v.central = c.embeddings.row(0).transpose();
  v.pooled = c.embeddings.topRows(c.num_real).colwise().mean().transpose();
  return v;
}

/// dLoss/dW given dLoss/dH.
template <typename Scalar>
Mat<Scalar> encoder_backward(const GcnCache<Scalar>& c, const ModelParams<Scalar>& params,
                             const Mat<Scalar>& grad_embeddings) {
  if (c.generation != params.generation) throw Error("encoder_backward: stale forward cache");
  const Mat<Scalar> grad_pre =
      grad_embeddings.cwiseProduct((c.preactivation.array() > Scalar(0)).template cast<Scalar>().matrix());
  return c.propagated.transpose() * grad_pre;
}

/// dLoss/dW given gradients w.r.t. the two views.
template <typename Scalar>
Mat<Scalar> encoder_backward(const GcnCache<Scalar>& c, const ModelParams<Scalar>& params,
                             const Vec<Scalar>& grad_central, const Vec<Scalar>& grad_pooled) {
  Mat<Scalar> g = Mat<Scalar>::Zero(c.embeddings.rows(), c.embeddings.cols());
  g.row(0) += grad_central.transpose();
  g.topRows(c.num_real).rowwise() += grad_pooled.transpose() / static_cast<Scalar>(c.num_real);
  return encoder_backward(c, params, g);
}

/// Smallest |pre-activation|; used to steer gradient checks away from ReLU kinks.
template <typename Scalar>
Scalar min_abs_preactivation(const GcnCache<Scalar>& c) {
  return c.preactivation.cwiseAbs().minCoeff();
}

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of a single tensor; `t` is the 1-based step.
template <typename P, typename G, typename M>
void adam_update(Eigen::MatrixBase<P>& param, const Eigen::MatrixBase<G>& grad, Eigen::MatrixBase<M>& m,
                 Eigen::MatrixBase<M>& v, const AdamHyper& h, long t) {
  using Scalar = typename P::Scalar;
  if (!grad.allFinite()) throw NonFiniteError("adam: non-finite gradient");
  const auto b1 = static_cast<Scalar>(h.beta1);
  const auto b2 = static_cast<Scalar>(h.beta2);
  m = b1 * m + (Scalar(1) - b1) * grad;
  v = b2 * v + (Scalar(1) - b2) * grad.cwiseAbs2();
  const auto c1 = static_cast<Scalar>(1.0 - std::pow(h.beta1, static_cast<double>(t)));
  const auto c2 = static_cast<Scalar>(1.0 - std::pow(h.beta2, static_cast<double>(t)));
  const auto lr = static_cast<Scalar>(h.lr);
  const auto eps = static_cast<Scalar>(h.eps);
  param.derived().array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

template <typename Scalar>
struct ParamGrads {
  Mat<Scalar> weight;
  Mat<Scalar> head_weight;
  Vec<Scalar> head_bias;

  static ParamGrads zeros_like(const ModelParams<Scalar>& p) {
    return {Mat<Scalar>::Zero(p.weight.rows(), p.weight.cols()),
            Mat<Scalar>::Zero(p.head_weight.rows(), p.head_weight.cols()), Vec<Scalar>::Zero(p.head_bias.size())};
  }
  bool all_finite() const { return weight.allFinite() && head_weight.allFinite() && head_bias.allFinite(); }
  double norm() const {
    return std::sqrt(static_cast<double>(weight.squaredNorm() + head_weight.squaredNorm() + head_bias.squaredNorm()));
  }
};

/// Adam over every tensor in ModelParams, with persistent moments.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamHyper h = {}) : h_(h) {}

  void step(ModelParams<Scalar>& p, const ParamGrads<Scalar>& g) {
    if (!g.all_finite()) throw NonFiniteError("adam: non-finite gradient");
    if (m_.weight.rows() != p.weight.rows() || m_.weight.cols() != p.weight.cols()) {
      reset(p);
    } else if (m_.head_bias.size() != p.head_bias.size()) {
      // A re-initialised head starts with fresh moments.
      const auto fresh = ParamGrads<Scalar>::zeros_like(p);
      m_.head_weight = v_.head_weight = fresh.head_weight;
      m_.head_bias = v_.head_bias = fresh.head_bias;
    }
    ++t_;
    adam_update(p.weight, g.weight, m_.weight, v_.weight, h_, t_);
    adam_update(p.head_weight, g.head_weight, m_.head_weight, v_.head_weight, h_, t_);
    adam_update(p.head_bias, g.head_bias, m_.head_bias, v_.head_bias, h_, t_);
    ++p.generation;
  }

  void reset(const ModelParams<Scalar>& p) {
    m_ = ParamGrads<Scalar>::zeros_like(p);
    v_ = ParamGrads<Scalar>::zeros_like(p);
    t_ = 0;
  }

  long steps() const { return t_; }
  const AdamHyper& hyper() const { return h_; }

 private:
  AdamHyper h_;
  ParamGrads<Scalar> m_, v_;
  long t_ = 0;
};

}  // namespace cosmic
