#pragma once

#include "cosmic/types.hpp"

#include <cstdint>
#include <vector>

namespace cosmic {

struct KMeansResult {
  std::vector<int> labels;
  MatXd centroids;
  double inertia = 0.0;
};

/// Lloyd's k-means with k-means++ seeding; the best of `restarts` runs by inertia.
KMeansResult kmeans(const MatXd& points, int k, std::uint64_t seed, int restarts = 10, int max_iter = 300);

/// Normalised mutual information with arithmetic-mean normalisation.
/// Two single-cluster partitions score 1.
double normalized_mutual_info(const std::vector<int>& a, const std::vector<int>& b);

/// Hubert-Arabie adjusted Rand index. Degenerate identical partitions score 1.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

struct ClusteringScores {
  double nmi = 0.0;
  double ari = 0.0;
};

/// k-means on the embeddings, scored against the true labels.
ClusteringScores clustering_quality(const MatXd& embeddings, const std::vector<int>& labels, int k, std::uint64_t seed);

}  // namespace cosmic
