#include "cosmic/mixup.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace cosmic {

double bhattacharyya_coefficient(const VecXd& a, const VecXd& b) {
  if (a.size() != b.size()) throw Error("bhattacharyya: score vectors differ in length");
  if ((a.array() < 0.0).any() || (b.array() < 0.0).any()) throw Error("bhattacharyya: negative score");
  const double sa = a.sum();
  const double sb = b.sum();
  if (!(sa > 0.0) || !(sb > 0.0)) return -1.0;
  return (a.array() * b.array()).sqrt().sum() / std::sqrt(sa * sb);
}

double alpha_from_coefficient(double coefficient, double magnitude) {
  const double bc = std::clamp(coefficient, kMinBhattacharyya, 1.0);
  const double distance = -std::log(bc);
  return magnitude / (1.0 + std::exp(-distance));
}

double bhattacharyya_alpha(const VecXd& a, const VecXd& b, double magnitude) {
  const double bc = bhattacharyya_coefficient(a, b);
  if (bc < 0.0) {
    spdlog::warn("bhattacharyya_alpha: zero-mass score vector, using alpha = C");
    return magnitude;
  }
  return alpha_from_coefficient(bc, magnitude);
}

RatioMatrices sample_ratio_matrices(double alpha, double beta, Eigen::Index slots, Eigen::Index feat_dim, Rng& rng) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw Error("sample_ratio_matrices: shape parameters must be positive");
  RatioMatrices r;
  r.adjacency.resize(slots, slots);
  r.features.resize(slots, feat_dim);
  for (Eigen::Index j = 0; j < slots; ++j)
    for (Eigen::Index i = 0; i < slots; ++i) r.adjacency(i, j) = sample_beta(rng, alpha, beta);
  for (Eigen::Index j = 0; j < feat_dim; ++j)
    for (Eigen::Index i = 0; i < slots; ++i) r.features(i, j) = sample_beta(rng, alpha, beta);
  return r;
}

}  // namespace cosmic
