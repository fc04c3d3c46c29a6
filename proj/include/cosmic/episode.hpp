#pragma once

#include "cosmic/graph.hpp"
#include "cosmic/rng.hpp"

#include <vector>

namespace cosmic {

struct LabeledNode {
  NodeId node;
  int label;  // local label in [0, n_way)

  bool operator==(const LabeledNode&) const = default;
};

/// One N-way K-shot task. `support` is grouped by local class: entries
/// [i*K, (i+1)*K) belong to class_ids[i].
struct MetaTask {
  int n_way = 0;
  int k_shot = 0;
  std::vector<ClassId> class_ids;
  std::vector<LabeledNode> support;
  std::vector<LabeledNode> query;

  bool operator==(const MetaTask&) const = default;
};

inline constexpr int kMaxClassRedraws = 100;

/// Draws n classes uniformly without replacement from `classes`, K support
/// nodes per class, then `q_per_task` query nodes uniformly from the pooled
/// remainder. A draw containing a class with fewer than k + ceil(q/n) nodes
/// is redrawn, up to kMaxClassRedraws times, after which this throws.
MetaTask sample_meta_task(const Graph& g, const std::vector<ClassId>& classes, int n, int k,
                          int q_per_task, Rng& rng);

}  // namespace cosmic
