#pragma once

#include "cosmic/graph.hpp"

#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace cosmic {

struct PprOptions {
  double zeta = 0.15;  // restart probability
  double tol = 1e-8;   // L1 bound on the truncated tail
  int max_iter = 10000;
};

/// Personalised PageRank scores s_v = zeta * sum_k (1-zeta)^k Abar^k e_v,
/// i.e. column v of zeta (I - (1-zeta) Abar)^{-1}, by truncated power series.
/// Throws if the tail bound is still above `tol` after `max_iter` terms.
VecXd compute_ppr(const SpMat& column_normalized, NodeId v, const PprOptions& opt);
VecXd compute_ppr(const Graph& g, NodeId v, const PprOptions& opt);

/// Bounded, thread-safe memo of PPR vectors over one graph.
class PprCache {
 public:
  PprCache(const Graph& g, PprOptions opt, std::size_t capacity = 4096);

  std::shared_ptr<const VecXd> scores(NodeId v) const;
  const PprOptions& options() const { return opt_; }
  std::size_t size() const;

 private:
  SpMat abar_;
  PprOptions opt_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  mutable std::list<NodeId> lru_;
  mutable std::unordered_map<NodeId, std::pair<std::shared_ptr<const VecXd>, std::list<NodeId>::iterator>> map_;
};

struct Neighborhood {
  std::vector<NodeId> nodes;  // descending score, ties by ascending id
  int deficit = 0;            // slots left for padding
};

/// Top-k_s nodes other than `v` by score. Only strictly positive scores are
/// eligible; a shortfall is reported as `deficit`.
Neighborhood extract_neighborhood(const VecXd& scores, NodeId v, int k_s);

/// Fixed-shape subgraph: slot 0 is the central node, slots past `num_real`
/// are zero padding with no incident edges.
template <typename Scalar>
struct Subgraph {
  std::vector<NodeId> nodes;  // -1 marks padding
  Mat<Scalar> adjacency;
  Mat<Scalar> features;
  int num_real = 0;

  int size() const { return static_cast<int>(nodes.size()); }
  bool is_padding(int slot) const { return slot >= num_real; }
};

template <typename Scalar>
Subgraph<Scalar> induce_subgraph(const Graph& g, NodeId v, const std::vector<NodeId>& gamma, int k_s) {
  if (static_cast<int>(gamma.size()) > k_s) throw Error("induce_subgraph: more neighbours than k_s");
  const int slots = k_s + 1;
  Subgraph<Scalar> sub;
  sub.nodes.assign(static_cast<std::size_t>(slots), -1);
  sub.nodes[0] = v;
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    if (gamma[i] == v) throw Error("induce_subgraph: neighbourhood contains the central node");
    sub.nodes[i + 1] = gamma[i];
  }
  sub.num_real = static_cast<int>(gamma.size()) + 1;
  sub.adjacency = Mat<Scalar>::Zero(slots, slots);
  sub.features = Mat<Scalar>::Zero(slots, g.feature_dim());
  const SpMat& a = g.adjacency();
  for (int i = 0; i < sub.num_real; ++i) {
    const NodeId u = sub.nodes[static_cast<std::size_t>(i)];
    sub.features.row(i) = g.features().row(u).template cast<Scalar>();
    for (int j = i + 1; j < sub.num_real; ++j) {
      const double w = a.coeff(u, sub.nodes[static_cast<std::size_t>(j)]);
      sub.adjacency(i, j) = sub.adjacency(j, i) = static_cast<Scalar>(w);
    }
  }
  return sub;
}

/// Scores -> neighbourhood -> induced subgraph, the full per-node pipeline.
template <typename Scalar>
Subgraph<Scalar> extract_subgraph(const Graph& g, const PprCache& cache, NodeId v, int k_s) {
  const auto s = cache.scores(v);
  return induce_subgraph<Scalar>(g, v, extract_neighborhood(*s, v, k_s).nodes, k_s);
}

/// Debug dump: one `slot_i slot_j weight` line per edge plus a node header.
template <typename Scalar>
std::string to_edge_list(const Subgraph<Scalar>& sub) {
  std::string out = "# nodes";
  for (NodeId n : sub.nodes) out += " " + std::to_string(n);
  out += "\n";
  for (int i = 0; i < sub.size(); ++i)
    for (int j = i + 1; j < sub.size(); ++j)
      if (sub.adjacency(i, j) != Scalar(0))
        out += std::to_string(i) + " " + std::to_string(j) + " " +
               std::to_string(static_cast<double>(sub.adjacency(i, j))) + "\n";
  return out;
}

}  // namespace cosmic
