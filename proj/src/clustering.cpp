#include "cosmic/clustering.hpp"

#include "cosmic/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace cosmic {

namespace {

KMeansResult lloyd(const MatXd& x, int k, Rng& rng, int max_iter) {
  const Eigen::Index n = x.rows();
  MatXd c(k, x.cols());
  // k-means++ seeding
  c.row(0) = x.row(static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(n))));
  VecXd d2 = (x.rowwise() - c.row(0)).rowwise().squaredNorm();
  for (int j = 1; j < k; ++j) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double u = uniform01(rng) * total;
      for (pick = 0; pick < n - 1; ++pick) {
        u -= d2(pick);
        if (u < 0.0) break;
      }
    } else {
      pick = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    }
    c.row(j) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - c.row(j)).rowwise().squaredNorm());
  }

  KMeansResult r;
  r.labels.assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    r.inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best;
      const double dist = (c.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      r.inertia += dist;
      if (r.labels[static_cast<std::size_t>(i)] != static_cast<int>(best)) {
        r.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;
    MatXd sums = MatXd::Zero(k, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(r.labels[static_cast<std::size_t>(i)]) += x.row(i);
      ++counts[static_cast<std::size_t>(r.labels[static_cast<std::size_t>(i)])];
    }
    for (int j = 0; j < k; ++j)
      if (counts[static_cast<std::size_t>(j)] > 0) c.row(j) = sums.row(j) / counts[static_cast<std::size_t>(j)];
  }
  r.centroids = std::move(c);
  return r;
}

struct Contingency {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> rows, cols;
  double n = 0.0;
};

Contingency contingency(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw Error("partition comparison: size mismatch");
  Contingency t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    t.joint[{a[i], b[i]}] += 1.0;
    t.rows[a[i]] += 1.0;
    t.cols[b[i]] += 1.0;
  }
  t.n = static_cast<double>(a.size());
  return t;
}

double entropy(const std::map<int, double>& counts, double n) {
  double h = 0.0;
  for (const auto& [_, c] : counts) h -= (c / n) * std::log(c / n);
  return h;
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

KMeansResult kmeans(const MatXd& points, int k, std::uint64_t seed, int restarts, int max_iter) {
  if (k < 1) throw Error("kmeans: k must be positive");
  if (points.rows() < k) throw Error("kmeans: fewer points than clusters");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    Rng rng = make_rng(seed, "kmeans", static_cast<std::uint64_t>(r));
    auto res = lloyd(points, k, rng, max_iter);
    if (res.inertia < best.inertia) best = std::move(res);
  }
  return best;
}

double normalized_mutual_info(const std::vector<int>& a, const std::vector<int>& b) {
  const auto t = contingency(a, b);
  if (t.n == 0.0) throw Error("normalized_mutual_info: empty partitions");
  const double ha = entropy(t.rows, t.n);
  const double hb = entropy(t.cols, t.n);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  // Same partition up to relabelling.
  if (t.joint.size() == t.rows.size() && t.joint.size() == t.cols.size()) return 1.0;
  double mi = 0.0;
  for (const auto& [key, c] : t.joint)
    mi += (c / t.n) * (std::log(c / t.n) - std::log(t.rows.at(key.first) / t.n) - std::log(t.cols.at(key.second) / t.n));
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  const auto t = contingency(a, b);
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [_, c] : t.joint) index += comb2(c);
  for (const auto& [_, c] : t.rows) sa += comb2(c);
  for (const auto& [_, c] : t.cols) sb += comb2(c);
  const double total = comb2(t.n);
  if (total == 0.0) return 1.0;
  const double expected = sa * sb / total;
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

ClusteringScores clustering_quality(const MatXd& embeddings, const std::vector<int>& labels, int k, std::uint64_t seed) {
  if (static_cast<Eigen::Index>(labels.size()) != embeddings.rows())
    throw Error("clustering_quality: label count mismatch");
  const auto km = kmeans(embeddings, k, seed);
  return {normalized_mutual_info(labels, km.labels), adjusted_rand_index(labels, km.labels)};
}

}  // namespace cosmic
