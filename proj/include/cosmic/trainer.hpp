#pragma once

#include "cosmic/contrastive.hpp"
#include "cosmic/episode.hpp"
#include "cosmic/mixup.hpp"
#include "cosmic/parallel.hpp"

#include <chrono>
#include <functional>
#include <sstream>
#include <string>

namespace cosmic {

enum class InnerOptimizer { Sgd, Adam };

struct TrainConfig {
  int episodes = 1000;
  int n_way = 2;
  int k_shot = 1;
  int query_per_task = 10;
  double lr_mc = 1e-3;
  double lr_ce = 1e-3;
  double tau = 0.5;
  double zeta = 0.15;
  int subgraph_size = 10;  // K_s; subgraphs hold K_s + 1 slots
  int hidden_dim = 1024;
  MixupConfig mixup{};
  bool contrastive = true;  // false skips the inner L_MC step
  InnerOptimizer inner_optimizer = InnerOptimizer::Sgd;
  bool first_order = true;  // second-order adaptation is not implemented
  SelfExclusion self_exclusion = SelfExclusion::SameView;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const {
    if (episodes < 1) throw Error("train config: episodes must be >= 1");
    if (n_way < 2) throw Error("train config: n_way must be >= 2");
    if (k_shot < 1) throw Error("train config: k_shot must be >= 1");
    if (query_per_task < 1) throw Error("train config: query_per_task must be >= 1");
    if (!(lr_mc > 0.0) || !(lr_ce > 0.0)) throw Error("train config: learning rates must be positive");
    if (!(tau > 0.0)) throw Error("train config: tau must be positive");
    if (!(zeta > 0.0 && zeta <= 1.0)) throw Error("train config: zeta must lie in (0, 1]");
    if (subgraph_size < 0) throw Error("train config: subgraph_size must be >= 0");
    if (hidden_dim < 1) throw Error("train config: hidden_dim must be >= 1");
    if (!(mixup.beta > 0.0) || !(mixup.magnitude > 0.0)) throw Error("train config: mixup beta and C must be positive");
    if (!first_order) throw Error("train config: second-order adaptation is not supported");
  }
};

struct EpisodeReport {
  int episode = 0;
  double loss_mc = 0.0;  // 0 when the contrastive step is disabled
  double loss_ce = 0.0;
  double grad_norm_mc = 0.0;
  double grad_norm_ce = 0.0;
  double ms = 0.0;
};

struct CeResult {
  double loss = 0.0;
  MatXd grad_head_weight;
  VecXd grad_head_bias;
  MatXd grad_inputs;  // one row per sample
};

/// Mean softmax cross-entropy of `inputs * head_weight + head_bias` against
/// labels in [0, N), with gradients for chaining.
template <typename Scalar>
CeResult ce_loss(const Mat<Scalar>& head_weight, const Vec<Scalar>& head_bias, const Mat<Scalar>& inputs,
                 const std::vector<int>& labels) {
  const Eigen::Index n = head_bias.size();
  if (head_weight.cols() != n || inputs.cols() != head_weight.rows()) throw Error("ce_loss: shape mismatch");
  if (static_cast<Eigen::Index>(labels.size()) != inputs.rows()) throw Error("ce_loss: label count mismatch");
  const MatXd w = head_weight.template cast<double>();
  const MatXd x = inputs.template cast<double>();
  MatXd logits = x * w;
  logits.rowwise() += head_bias.template cast<double>().transpose();
  const auto rows = static_cast<double>(inputs.rows());
  CeResult r;
  MatXd grad_logits(logits.rows(), n);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= n) throw Error("ce_loss: label " + std::to_string(y) + " out of range");
    const double m = logits.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
    const double z = e.sum();
    r.loss += (std::log(z) + m - logits(i, y)) / rows;
    grad_logits.row(i) = e / z;
    grad_logits(i, y) -= 1.0;
  }
  grad_logits /= rows;
  r.grad_head_weight = x.transpose() * grad_logits;
  r.grad_head_bias = grad_logits.colwise().sum().transpose();
  r.grad_inputs = grad_logits * w.transpose();
  return r;
}

template <typename Scalar>
struct EncoderGrad {
  double loss = 0.0;
  Mat<Scalar> grad_weight;
};

/// L_MC over the support subgraphs (and mixed subgraphs, if any) as a
/// function of the encoder weights, with dL/dW.
template <typename Scalar>
EncoderGrad<Scalar> contrastive_objective(const ModelParams<Scalar>& params, const std::vector<Subgraph<Scalar>>& support,
                                          const std::vector<Subgraph<Scalar>>& mixed, int n_way, int k_shot, double tau,
                                          SelfExclusion excl = SelfExclusion::SameView, int workers = 1) {
  std::vector<const Subgraph<Scalar>*> all;
  for (const auto& s : support) all.push_back(&s);
  for (const auto& s : mixed) all.push_back(&s);
  std::vector<GcnCache<Scalar>> caches(all.size());
  parallel_for(all.size(), workers, [&](std::size_t i) { caches[i] = gcn_forward(*all[i], params); });

  ClassBank<Scalar> bank;
  bank.n_way = n_way;
  bank.k_shot = k_shot;
  bank.tau = tau;
  bank.self_exclusion = excl;
  for (std::size_t i = 0; i < all.size(); ++i) (i < support.size() ? bank.original : bank.mixed).push_back(views(caches[i]));
  const auto res = l_mc(bank);

  std::vector<Mat<Scalar>> grads(all.size());
  parallel_for(all.size(), workers, [&](std::size_t i) {
    const auto& g = i < support.size() ? res.grad_original[i] : res.grad_mixed[i - support.size()];
    grads[i] = encoder_backward(caches[i], params, g.central, g.pooled);
  });
  EncoderGrad<Scalar> out;
  out.loss = res.loss;
  out.grad_weight = Mat<Scalar>::Zero(params.weight.rows(), params.weight.cols());
  for (const auto& g : grads) out.grad_weight += g;  // fixed reduction order
  return out;
}

template <typename Scalar>
struct CeObjective {
  double loss = 0.0;
  ParamGrads<Scalar> grads;
};

/// Cross-entropy of the head applied to the pooled view of each query
/// subgraph, with gradients for the encoder and the head.
template <typename Scalar>
CeObjective<Scalar> ce_objective(const ModelParams<Scalar>& params, const std::vector<Subgraph<Scalar>>& query,
                                 const std::vector<int>& labels, int workers = 1) {
  std::vector<GcnCache<Scalar>> caches(query.size());
  parallel_for(query.size(), workers, [&](std::size_t i) { caches[i] = gcn_forward(query[i], params); });
  Mat<Scalar> pooled(static_cast<Eigen::Index>(query.size()), params.hidden_dim());
  for (std::size_t i = 0; i < query.size(); ++i) pooled.row(static_cast<Eigen::Index>(i)) = views(caches[i]).pooled.transpose();
  const CeResult ce = ce_loss(params.head_weight, params.head_bias, pooled, labels);

  std::vector<Mat<Scalar>> grads(query.size());
  const Vec<Scalar> zero = Vec<Scalar>::Zero(params.hidden_dim());
  parallel_for(query.size(), workers, [&](std::size_t i) {
    const Vec<Scalar> gp = ce.grad_inputs.row(static_cast<Eigen::Index>(i)).transpose().template cast<Scalar>();
    grads[i] = encoder_backward(caches[i], params, zero, gp);
  });
  CeObjective<Scalar> out;
  out.loss = ce.loss;
  out.grads = ParamGrads<Scalar>::zeros_like(params);
  for (const auto& g : grads) out.grads.weight += g;
  out.grads.head_weight = ce.grad_head_weight.template cast<Scalar>();
  out.grads.head_bias = ce.grad_head_bias.template cast<Scalar>();
  return out;
}

/// theta~ = theta - lr * grad, one plain gradient step on the encoder. The
/// input is left untouched.
template <typename Scalar>
ModelParams<Scalar> inner_update(const ModelParams<Scalar>& theta, const Mat<Scalar>& grad_weight, double lr) {
  if (!grad_weight.allFinite()) throw NonFiniteError("inner_update: non-finite gradient");
  ModelParams<Scalar> adapted = theta;
  adapted.weight -= static_cast<Scalar>(lr) * grad_weight;
  ++adapted.generation;
  return adapted;
}

/// Durable update from theta~ with the query cross-entropy gradient taken at
/// theta~ (first order), applied through Adam.
template <typename Scalar>
ModelParams<Scalar> outer_update(ModelParams<Scalar> adapted, const ParamGrads<Scalar>& grads, Adam<Scalar>& adam) {
  adam.step(adapted, grads);
  return adapted;
}

/// Episodic meta-trainer. Each episode samples a task from the training
/// classes, adapts the encoder on the support contrastive loss, then updates
/// encoder and head on the query cross-entropy.
template <typename Scalar>
class MetaTrainer {
 public:
  MetaTrainer(const Graph& g, const ClassSplit& split, TrainConfig cfg)
      : g_(g), split_(split), cfg_(cfg), cache_(g, PprOptions{cfg.zeta}), outer_(AdamHyper{cfg.lr_ce}),
        inner_(AdamHyper{cfg.lr_mc}) {
    cfg_.validate();
    Rng init = make_rng(cfg_.seed, "init");
    params_ = init_params<Scalar>(g.feature_dim(), cfg_.hidden_dim, cfg_.n_way, init);
  }

  const ModelParams<Scalar>& params() const { return params_; }
  ModelParams<Scalar>& mutable_params() { return params_; }
  const PprCache& cache() const { return cache_; }
  const TrainConfig& config() const { return cfg_; }
  int episodes_done() const { return episode_; }

  MetaTask sample_task(int episode) const {
    Rng rng = make_rng(cfg_.seed, "sampler", static_cast<std::uint64_t>(episode));
    return sample_meta_task(g_, split_.train, cfg_.n_way, cfg_.k_shot, cfg_.query_per_task, rng);
  }

  std::vector<Subgraph<Scalar>> subgraphs(const std::vector<LabeledNode>& nodes) const {
    std::vector<Subgraph<Scalar>> out(nodes.size());
    parallel_for(nodes.size(), cfg_.workers,
                 [&](std::size_t i) { out[i] = extract_subgraph<Scalar>(g_, cache_, nodes[i].node, cfg_.subgraph_size); });
    return out;
  }

  EpisodeReport step() {
    const auto start = std::chrono::steady_clock::now();
    const int t = episode_;
    EpisodeReport rep;
    rep.episode = t;
    const MetaTask task = sample_task(t);

    ModelParams<Scalar> adapted = params_;
    if (cfg_.contrastive) {
      const auto support = subgraphs(task.support);
      std::vector<Subgraph<Scalar>> mixed;
      if (cfg_.mixup.enabled) {
        const auto seed = substream_seed(cfg_.seed, "mixup", static_cast<std::uint64_t>(t));
        for (auto& m : build_mixed_classes(g_, cache_, task, support, cfg_.subgraph_size, cfg_.mixup, seed))
          mixed.push_back(std::move(m.graph));
      }
      const auto mc = contrastive_objective(params_, support, mixed, task.n_way, task.k_shot, cfg_.tau,
                                            cfg_.self_exclusion, cfg_.workers);
      rep.loss_mc = mc.loss;
      rep.grad_norm_mc = static_cast<double>(mc.grad_weight.norm());
      check_finite(rep, task, mc.grad_weight.allFinite());
      if (cfg_.inner_optimizer == InnerOptimizer::Sgd) {
        adapted = inner_update(params_, mc.grad_weight, cfg_.lr_mc);
      } else {
        ParamGrads<Scalar> g = ParamGrads<Scalar>::zeros_like(params_);
        g.weight = mc.grad_weight;
        inner_.step(adapted, g);
      }
    }

    if (adapted.n_way() != task.n_way) adapted.reset_head(task.n_way);
    std::vector<int> labels;
    for (const auto& q : task.query) labels.push_back(q.label);
    const auto ce = ce_objective(adapted, subgraphs(task.query), labels, cfg_.workers);
    rep.loss_ce = ce.loss;
    rep.grad_norm_ce = ce.grads.norm();
    check_finite(rep, task, ce.grads.all_finite());

    params_ = outer_update(std::move(adapted), ce.grads, outer_);
    if (!params_.all_finite()) throw NonFiniteError(diagnostic(rep, task) + " (parameters became non-finite)");
    ++episode_;
    rep.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return rep;
  }

  void run(const std::function<void(const EpisodeReport&)>& on_episode = {}) {
    while (episode_ < cfg_.episodes) {
      const auto rep = step();
      if (on_episode) on_episode(rep);
    }
  }

 private:
  static std::string diagnostic(const EpisodeReport& rep, const MetaTask& task) {
    std::ostringstream os;
    os << "episode " << rep.episode << ": loss_mc=" << rep.loss_mc << " loss_ce=" << rep.loss_ce
       << " grad_mc=" << rep.grad_norm_mc << " grad_ce=" << rep.grad_norm_ce << " classes=[";
    for (std::size_t i = 0; i < task.class_ids.size(); ++i) os << (i ? "," : "") << task.class_ids[i];
    os << "]";
    return os.str();
  }

  void check_finite(const EpisodeReport& rep, const MetaTask& task, bool grads_ok) const {
    if (!grads_ok || !std::isfinite(rep.loss_mc) || !std::isfinite(rep.loss_ce))
      throw NonFiniteError(diagnostic(rep, task) + " (non-finite loss or gradient)");
  }

  const Graph& g_;
  ClassSplit split_;
  TrainConfig cfg_;
  PprCache cache_;
  ModelParams<Scalar> params_;
  Adam<Scalar> outer_;
  Adam<Scalar> inner_;
  int episode_ = 0;
};

/// Runs the full meta-training loop and returns the trained parameters.
template <typename Scalar>
ModelParams<Scalar> train(const Graph& g, const ClassSplit& split, const TrainConfig& cfg,
                          const std::function<void(const EpisodeReport&)>& on_episode = {}) {
  MetaTrainer<Scalar> trainer(g, split, cfg);
  trainer.run(on_episode);
  return trainer.params();
}

}  // namespace cosmic
