#pragma once

#include "cosmic/classifier.hpp"
#include "cosmic/clustering.hpp"
#include "cosmic/encoder.hpp"
#include "cosmic/episode.hpp"
#include "cosmic/parallel.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace cosmic {

struct EvalOptions {
  int n_way = 2;
  int k_shot = 1;
  int query_per_task = 10;
  int num_tasks = 100;
  int repetitions = 10;
  std::uint64_t seed = 0;
  LogRegOptions logreg{};
  int workers = 1;
};

struct EvalSummary {
  std::vector<double> accuracies;  // mean accuracy of each repetition
  double mean = 0.0;
  double ci95 = 0.0;
  int tasks_per_repetition = 0;
  std::optional<double> nmi;
  std::optional<double> ari;
};

/// Maps a node to its frozen embedding. Must be safe to call concurrently.
using Embedder = std::function<VecXd(NodeId)>;

/// 1.96 * sample stdev / sqrt(count); zero for fewer than two values.
double ci95_half_width(const std::vector<double>& values);

/// Accuracy of one task: fit logistic regression on the support embeddings
/// and score the query predictions.
double task_accuracy(const MetaTask& task, const Embedder& embed, const LogRegOptions& opt);

/// Meta-test protocol over `classes`: `repetitions` rounds of `num_tasks`
/// tasks each. Task (r, t) draws from its own substream, so results do not
/// depend on evaluation order or worker count.
EvalSummary evaluate_with(const Graph& g, const std::vector<ClassId>& classes, const Embedder& embed,
                          const EvalOptions& opt);

/// Average k-means NMI/ARI over `trials` draws of n_way classes, clustering
/// every node of the drawn classes.
ClusteringScores embedding_quality(const Graph& g, const std::vector<ClassId>& classes, const Embedder& embed,
                                   int n_way, int trials, std::uint64_t seed);

/// `node_id,class,f0..f{d-1}` for every node of `classes`, ascending by node.
/// Values use the shortest round-trip decimal form.
void write_embeddings_csv(const Graph& g, const std::vector<ClassId>& classes, const Embedder& embed,
                          const std::filesystem::path& path);

/// Mean-pooled subgraph embedding under frozen parameters.
template <typename Scalar>
VecXd embed_node(const Graph& g, const PprCache& cache, const ModelParams<Scalar>& params, NodeId v, int k_s) {
  const auto sub = extract_subgraph<Scalar>(g, cache, v, k_s);
  return views(gcn_forward(sub, params)).pooled.template cast<double>();
}

/// Embeds every node of `classes` once up front; the returned embedder is a
/// read-only table lookup.
template <typename Scalar>
Embedder frozen_embedder(const Graph& g, const PprCache& cache, const ModelParams<Scalar>& params,
                         const std::vector<ClassId>& classes, int k_s, int workers = 1) {
  std::vector<NodeId> nodes;
  for (ClassId c : classes)
    for (NodeId v : g.nodes_of_class(c)) nodes.push_back(v);
  auto table = std::make_shared<std::vector<VecXd>>(static_cast<std::size_t>(g.num_nodes()));
  parallel_for(nodes.size(), workers, [&](std::size_t i) {
    (*table)[static_cast<std::size_t>(nodes[i])] = embed_node(g, cache, params, nodes[i], k_s);
  });
  return [table](NodeId v) -> VecXd {
    const auto& e = (*table)[static_cast<std::size_t>(v)];
    if (e.size() == 0) throw Error("embedder: node " + std::to_string(v) + " outside the embedded classes");
    return e;
  };
}

template <typename Scalar>
EvalSummary evaluate(const Graph& g, const std::vector<ClassId>& classes, const ModelParams<Scalar>& params,
                     const PprCache& cache, int k_s, const EvalOptions& opt) {
  return evaluate_with(g, classes, frozen_embedder(g, cache, params, classes, k_s, opt.workers), opt);
}

}  // namespace cosmic
