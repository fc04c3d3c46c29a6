#pragma once

#include "cosmic/contrastive.hpp"
#include "cosmic/graph.hpp"
#include "cosmic/rng.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace testing {

using namespace cosmic;

inline Graph make_graph(NodeId n, const std::vector<std::pair<NodeId, NodeId>>& edges, int feat_dim = 0,
                        std::vector<ClassId> labels = {}) {
  MatXd x = feat_dim > 0 ? MatXd(MatXd::Identity(n, feat_dim)) : MatXd(MatXd::Identity(n, n));
  if (labels.empty()) labels.assign(static_cast<std::size_t>(n), 0);
  return Graph::from_edges(n, edges, std::move(x), std::move(labels));
}

inline Graph path3() { return make_graph(3, {{0, 1}, {1, 2}}); }

inline Graph random_graph(NodeId n, double p, Rng& rng, int feat_dim = 4) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v)
      if (uniform01(rng) < p) edges.emplace_back(u, v);
  MatXd x(n, feat_dim);
  for (NodeId i = 0; i < n; ++i)
    for (int j = 0; j < feat_dim; ++j) x(i, j) = uniform01(rng);
  std::vector<ClassId> labels(static_cast<std::size_t>(n));
  for (NodeId i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<ClassId>(i % 2);
  return Graph::from_edges(n, edges, std::move(x), std::move(labels));
}

inline VecXd random_vec(Eigen::Index n, Rng& rng, double scale = 1.0) {
  VecXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * (2.0 * uniform01(rng) - 1.0);
  return v;
}

inline MatXd random_mat(Eigen::Index r, Eigen::Index c, Rng& rng, double scale = 1.0) {
  MatXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * (2.0 * uniform01(rng) - 1.0);
  return m;
}

inline ClassBank<double> random_bank(int n, int k, Eigen::Index dim, bool mixed, Rng& rng, double scale = 0.5) {
  ClassBank<double> b;
  b.n_way = n;
  b.k_shot = k;
  auto fill = [&](std::vector<ViewPair<double>>& pool) {
    for (int i = 0; i < n * k; ++i) pool.push_back({random_vec(dim, rng, scale), random_vec(dim, rng, scale)});
  };
  fill(b.original);
  if (mixed) fill(b.mixed);
  return b;
}

/// Literal nested-loop loss: mean over original anchors of
/// -log(MI(v, C_i) / (sum_{k != i} MI(v, C_k) + sum_k MI(v, mixed C_k))), plus
/// the mirrored mean over mixed anchors when a mixed pool exists.
inline double naive_l_mc(const ClassBank<double>& b) {
  const double nk = b.n_way * b.k_shot;
  double loss = 0.0;
  for (int i = 0; i < b.n_way; ++i)
    for (int j = 0; j < b.k_shot; ++j) {
      double den = 0.0;
      for (int k = 0; k < b.n_way; ++k) {
        if (k != i) den += mi_term(b, i, j, k, false);
        if (b.has_mixed()) den += mi_term(b, i, j, k, true);
      }
      loss += -std::log(mi_term(b, i, j, i, false) / den) / nk;
    }
  if (!b.has_mixed()) return loss;
  for (int i = 0; i < b.n_way; ++i)
    for (int j = 0; j < b.k_shot; ++j) {
      double den = 0.0;
      for (int k = 0; k < b.n_way; ++k) {
        den += mi_term(b, i, j, k, false, true);
        if (k != i) den += mi_term(b, i, j, k, true, true);
      }
      loss += -std::log(mi_term(b, i, j, i, true, true) / den) / nk;
    }
  return loss;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cosmic_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing
