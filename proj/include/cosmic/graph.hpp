#pragma once

#include "cosmic/types.hpp"

#include <filesystem>
#include <utility>
#include <vector>

namespace cosmic {

/// Immutable undirected attributed graph. Adjacency is stored symmetric,
/// without self-loops and without duplicate entries.
class Graph {
 public:
  Graph() = default;

  /// Builds a graph from an edge list over dense ids 0..n-1. Edges are
  /// symmetrised, duplicates collapsed and self-loops dropped.
  static Graph from_edges(NodeId num_nodes, const std::vector<std::pair<NodeId, NodeId>>& edges,
                          MatXd features, std::vector<ClassId> labels);

  NodeId num_nodes() const { return static_cast<NodeId>(labels_.size()); }
  int num_classes() const { return num_classes_; }
  Eigen::Index feature_dim() const { return features_.cols(); }
  std::size_t num_edges() const { return static_cast<std::size_t>(adjacency_.nonZeros()) / 2; }

  const SpMat& adjacency() const { return adjacency_; }
  const MatXd& features() const { return features_; }
  const std::vector<ClassId>& labels() const { return labels_; }
  ClassId label(NodeId v) const { return labels_[static_cast<std::size_t>(v)]; }
  NodeId degree(NodeId v) const { return degree_[static_cast<std::size_t>(v)]; }
  const std::vector<NodeId>& degrees() const { return degree_; }
  const std::vector<NodeId>& nodes_of_class(ClassId c) const {
    return by_class_[static_cast<std::size_t>(c)];
  }

  /// Original identifiers of ingested nodes, indexed by dense id. Empty when
  /// the input already used dense ids.
  const std::vector<NodeId>& original_ids() const { return original_ids_; }
  void set_original_ids(std::vector<NodeId> ids) { original_ids_ = std::move(ids); }

  bool has_edge(NodeId u, NodeId v) const { return adjacency_.coeff(u, v) != 0.0; }

 private:
  SpMat adjacency_;
  MatXd features_;
  std::vector<ClassId> labels_;
  std::vector<NodeId> degree_;
  std::vector<std::vector<NodeId>> by_class_;
  std::vector<NodeId> original_ids_;
  int num_classes_ = 0;
};

/// Reads `edges.tsv`, `features.csv` and `labels.tsv` from a dataset directory.
/// Errors name the offending file and line.
Graph load_graph(const std::filesystem::path& dataset_dir);

/// Writes the `original<TAB>dense` id map for a graph loaded with remapping.
void write_node_map(const Graph& g, const std::filesystem::path& path);

/// Column-normalised adjacency A D^{-1}. Columns of isolated nodes stay zero.
SpMat column_normalize(const Graph& g);

/// D^{-1/2} (A + I) D^{-1/2} with D the degree of A + I.
template <typename Derived>
Mat<typename Derived::Scalar> gcn_normalize(const Eigen::MatrixBase<Derived>& adjacency) {
  using Scalar = typename Derived::Scalar;
  if (adjacency.rows() != adjacency.cols()) throw Error("gcn_normalize: adjacency must be square");
  if ((adjacency.array() < Scalar(0)).any()) throw Error("gcn_normalize: negative edge weight");
  Mat<Scalar> a = adjacency;
  a.diagonal().array() += Scalar(1);
  const Vec<Scalar> inv_sqrt = a.rowwise().sum().array().rsqrt();
  return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

SpMat gcn_normalize(const Graph& g);

struct PlantedPartitionParams {
  int num_classes = 10;
  int nodes_per_class = 50;
  double p_in = 0.2;
  double p_out = 0.02;
  int feat_dim = 16;
  double feat_noise = 0.5;
  std::uint64_t seed = 1;
};

/// Planted-partition graph with Gaussian features centred on one-hot class
/// means. Edge decisions use only the portable integer stream, so edge sets
/// reproduce across standard libraries.
Graph generate_planted_partition(const PlantedPartitionParams& p);

struct ClassSplit {
  std::vector<ClassId> train;
  std::vector<ClassId> val;
  std::vector<ClassId> test;
};

/// Throws unless the three sets are pairwise disjoint and within [0, num_classes).
void validate_split(const ClassSplit& split, int num_classes);

/// Reads `{"train": [...], "val": [...], "test": [...]}`.
ClassSplit load_class_split(const std::filesystem::path& path, int num_classes);

/// Contiguous 60/20/20 split of class ids, used for synthetic graphs.
ClassSplit contiguous_split(int num_classes);

}  // namespace cosmic
