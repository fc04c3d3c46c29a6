#include "cosmic/ppr.hpp"

#include <algorithm>
#include <numeric>

namespace cosmic {

VecXd compute_ppr(const SpMat& abar, NodeId v, const PprOptions& opt) {
  if (!(opt.zeta > 0.0 && opt.zeta <= 1.0)) throw Error("compute_ppr: zeta must lie in (0, 1]");
  const Eigen::Index n = abar.rows();
  if (v < 0 || v >= n) throw Error("compute_ppr: node out of range");

  VecXd term = VecXd::Zero(n);
  term(v) = opt.zeta;
  VecXd scores = term;
  const double decay = 1.0 - opt.zeta;
  // Abar is column sub-stochastic, so the tail after term k has L1 mass at
  // most |term_k| * (1-zeta) / zeta.
  auto tail = [&](const VecXd& t) { return opt.zeta == 1.0 ? 0.0 : t.lpNorm<1>() * decay / opt.zeta; };
  // Half the budget is kept back for rounding in the running sum.
  const double stop = 0.5 * opt.tol;
  double residual = tail(term);
  int iter = 0;
  while (residual >= stop) {
    if (++iter > opt.max_iter)
      throw Error("compute_ppr: no convergence after " + std::to_string(opt.max_iter) +
                  " iterations (residual " + std::to_string(residual) + ")");
    term = decay * (abar * term);
    scores += term;
    residual = tail(term);
  }
  return scores;
}

VecXd compute_ppr(const Graph& g, NodeId v, const PprOptions& opt) {
  return compute_ppr(column_normalize(g), v, opt);
}

PprCache::PprCache(const Graph& g, PprOptions opt, std::size_t capacity)
    : abar_(column_normalize(g)), opt_(opt), capacity_(std::max<std::size_t>(capacity, 1)) {}

std::shared_ptr<const VecXd> PprCache::scores(NodeId v) const {
  {
    std::lock_guard lock(mu_);
    auto it = map_.find(v);
    if (it != map_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.second);
      return it->second.first;
    }
  }
  // Computed outside the lock; a concurrent miss on the same node computes
  // the same deterministic vector and the first insert wins.
  auto fresh = std::make_shared<const VecXd>(compute_ppr(abar_, v, opt_));
  std::lock_guard lock(mu_);
  auto it = map_.find(v);
  if (it != map_.end()) return it->second.first;
  lru_.push_front(v);
  map_.emplace(v, std::make_pair(fresh, lru_.begin()));
  while (map_.size() > capacity_) {
    map_.erase(lru_.back());
    lru_.pop_back();
  }
  return fresh;
}

std::size_t PprCache::size() const {
  std::lock_guard lock(mu_);
  return map_.size();
}

Neighborhood extract_neighborhood(const VecXd& scores, NodeId v, int k_s) {
  if (k_s < 0) throw Error("extract_neighborhood: negative k_s");
  std::vector<NodeId> candidates;
  for (Eigen::Index u = 0; u < scores.size(); ++u)
    if (u != v && scores(u) > 0.0) candidates.push_back(u);
  auto better = [&](NodeId a, NodeId b) {
    if (scores(a) != scores(b)) return scores(a) > scores(b);
    return a < b;
  };
  const auto take = std::min<std::size_t>(candidates.size(), static_cast<std::size_t>(k_s));
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(), better);
  candidates.resize(take);
  Neighborhood nb;
  nb.deficit = k_s - static_cast<int>(take);
  nb.nodes = std::move(candidates);
  return nb;
}

}  // namespace cosmic
