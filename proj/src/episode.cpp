#include "cosmic/episode.hpp"

#include <algorithm>

namespace cosmic {

MetaTask sample_meta_task(const Graph& g, const std::vector<ClassId>& classes, int n, int k,
                          int q_per_task, Rng& rng) {
  if (n < 1 || k < 1 || q_per_task < 0) throw Error("sample_meta_task: invalid n/k/q");
  if (static_cast<int>(classes.size()) < n)
    throw Error("sample_meta_task: " + std::to_string(classes.size()) + " classes available, need " +
                std::to_string(n));
  for (ClassId c : classes)
    if (c < 0 || c >= g.num_classes()) throw Error("sample_meta_task: unknown class " + std::to_string(c));

  const int per_class_query = (q_per_task + n - 1) / n;
  const std::size_t need = static_cast<std::size_t>(k + per_class_query);

  std::vector<ClassId> chosen;
  for (int attempt = 0;; ++attempt) {
    if (attempt == kMaxClassRedraws)
      throw Error("sample_meta_task: infeasible split, no class draw has " + std::to_string(need) +
                  " nodes in every class after " + std::to_string(kMaxClassRedraws) + " attempts");
    std::vector<ClassId> pool = classes;
    chosen.clear();
    for (int i = 0; i < n; ++i) {
      const auto j = uniform_index(rng, pool.size());
      chosen.push_back(pool[j]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
    }
    const bool ok = std::all_of(chosen.begin(), chosen.end(),
                                [&](ClassId c) { return g.nodes_of_class(c).size() >= need; });
    if (ok) break;
  }
  // Local labels follow ascending class id so a head shared across episodes
  // sees a consistent target for each class.
  std::sort(chosen.begin(), chosen.end());

  MetaTask task;
  task.n_way = n;
  task.k_shot = k;
  task.class_ids = chosen;
  std::vector<LabeledNode> remainder;
  for (int i = 0; i < n; ++i) {
    std::vector<NodeId> nodes = g.nodes_of_class(chosen[static_cast<std::size_t>(i)]);
    portable_shuffle(nodes.begin(), nodes.end(), rng);
    for (int j = 0; j < k; ++j) task.support.push_back({nodes[static_cast<std::size_t>(j)], i});
    for (std::size_t j = static_cast<std::size_t>(k); j < nodes.size(); ++j) remainder.push_back({nodes[j], i});
  }
  for (int q = 0; q < q_per_task; ++q) {
    const auto j = uniform_index(rng, remainder.size());
    task.query.push_back(remainder[j]);
    remainder[j] = remainder.back();
    remainder.pop_back();
  }
  return task;
}

}  // namespace cosmic
