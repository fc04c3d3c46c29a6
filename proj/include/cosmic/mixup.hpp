#pragma once

#include "cosmic/episode.hpp"
#include "cosmic/ppr.hpp"
#include "cosmic/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

namespace cosmic {

struct MixupConfig {
  bool enabled = true;
  double beta = 5.0;        // second Beta shape parameter
  double magnitude = 10.0;  // C, upper bound on alpha
};

inline constexpr double kMinBhattacharyya = 1e-12;

/// sum_k sqrt(a_k b_k) / sqrt(sum a * sum b). Returns a negative value when
/// either vector has zero mass.
double bhattacharyya_coefficient(const VecXd& a, const VecXd& b);

/// C * sigmoid(-ln bc) with bc clamped to [1e-12, 1].
double alpha_from_coefficient(double coefficient, double magnitude);

/// Similarity-sensitive Beta shape: dissimilar score vectors give larger
/// alpha. A zero-mass vector yields alpha = C and logs a warning.
double bhattacharyya_alpha(const VecXd& a, const VecXd& b, double magnitude);

struct RatioMatrices {
  MatXd adjacency;  // slots x slots
  MatXd features;   // slots x d
};

/// Every entry i.i.d. Beta(alpha, beta).
RatioMatrices sample_ratio_matrices(double alpha, double beta, Eigen::Index slots, Eigen::Index feat_dim, Rng& rng);

template <typename Scalar>
struct MixedSubgraph {
  Subgraph<Scalar> graph;
  NodeId source = -1;
  NodeId partner = -1;
  double alpha = 0.0;
};

/// A' = L_A o A_a + (1 - L_A) o A_b, symmetrised as (A' + A'^T) / 2;
/// X' = L_X o X_a + (1 - L_X) o X_b. A slot is real if it is real in either input.
template <typename Scalar>
MixedSubgraph<Scalar> mix_subgraphs(const Subgraph<Scalar>& a, const Subgraph<Scalar>& b, const RatioMatrices& ratios) {
  if (a.adjacency.rows() != b.adjacency.rows() || a.features.rows() != b.features.rows() ||
      a.features.cols() != b.features.cols())
    throw Error("mix_subgraphs: shape mismatch");
  if (ratios.adjacency.rows() != a.adjacency.rows() || ratios.adjacency.cols() != a.adjacency.cols() ||
      ratios.features.rows() != a.features.rows() || ratios.features.cols() != a.features.cols())
    throw Error("mix_subgraphs: ratio matrix shape mismatch");
  const Mat<Scalar> la = ratios.adjacency.template cast<Scalar>();
  const Mat<Scalar> lx = ratios.features.template cast<Scalar>();
  MixedSubgraph<Scalar> m;
  m.source = a.nodes.front();
  m.partner = b.nodes.front();
  m.graph.nodes = a.nodes;
  const Mat<Scalar> raw = la.cwiseProduct(a.adjacency) + (Scalar(1) - la.array()).matrix().cwiseProduct(b.adjacency);
  m.graph.adjacency = (raw + raw.transpose()) / Scalar(2);
  m.graph.features = lx.cwiseProduct(a.features) + (Scalar(1) - lx.array()).matrix().cwiseProduct(b.features);
  m.graph.num_real = std::max(a.num_real, b.num_real);
  return m;
}

/// Mixes `sub` with the subgraph of `partner`; alpha comes from the PPR
/// vectors of the two centres.
template <typename Scalar>
MixedSubgraph<Scalar> mix_with_partner(const Graph& g, const PprCache& cache, const Subgraph<Scalar>& sub,
                                       NodeId partner, int k_s, const MixupConfig& cfg, Rng& rng) {
  const Subgraph<Scalar> other = extract_subgraph<Scalar>(g, cache, partner, k_s);
  const double alpha = bhattacharyya_alpha(*cache.scores(sub.nodes.front()), *cache.scores(partner), cfg.magnitude);
  const RatioMatrices ratios = sample_ratio_matrices(alpha, cfg.beta, sub.adjacency.rows(), sub.features.cols(), rng);
  MixedSubgraph<Scalar> m = mix_subgraphs(sub, other, ratios);
  m.alpha = alpha;
  return m;
}

/// One mixed subgraph per support node, in support order, so that entry
/// i*K + j belongs to mixed class i. Each support slot draws its partner
/// uniformly over all graph nodes from its own substream of `seed`.
template <typename Scalar>
std::vector<MixedSubgraph<Scalar>> build_mixed_classes(const Graph& g, const PprCache& cache, const MetaTask& task,
                                                       const std::vector<Subgraph<Scalar>>& support, int k_s,
                                                       const MixupConfig& cfg, std::uint64_t seed) {
  if (!(cfg.beta > 0.0) || !(cfg.magnitude > 0.0)) throw Error("mixup: beta and C must be positive");
  if (support.size() != task.support.size()) throw Error("mixup: support subgraph count mismatch");
  std::vector<MixedSubgraph<Scalar>> out;
  out.reserve(support.size());
  for (std::size_t s = 0; s < support.size(); ++s) {
    Rng rng = make_rng(seed, "mixup-slot", s);
    const auto partner = static_cast<NodeId>(uniform_index(rng, static_cast<std::uint64_t>(g.num_nodes())));
    out.push_back(mix_with_partner(g, cache, support[s], partner, k_s, cfg, rng));
  }
  return out;
}

}  // namespace cosmic
