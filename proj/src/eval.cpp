#include "cosmic/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

namespace cosmic {

double ci95_half_width(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) return 0.0;
  const auto n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

namespace {

MatXd stack(const std::vector<LabeledNode>& nodes, const Embedder& embed) {
  MatXd x;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const VecXd e = embed(nodes[i].node);
    if (i == 0) x.resize(static_cast<Eigen::Index>(nodes.size()), e.size());
    x.row(static_cast<Eigen::Index>(i)) = e.transpose();
  }
  return x;
}

std::vector<int> labels_of(const std::vector<LabeledNode>& nodes) {
  std::vector<int> y;
  for (const auto& n : nodes) y.push_back(n.label);
  return y;
}

}  // namespace

double task_accuracy(const MetaTask& task, const Embedder& embed, const LogRegOptions& opt) {
  const auto clf = fit_task_classifier(stack(task.support, embed), labels_of(task.support), task.n_way, opt);
  const auto pred = predict_labels(clf, stack(task.query, embed));
  int correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == task.query[i].label;
  return static_cast<double>(correct) / static_cast<double>(task.query.size());
}

EvalSummary evaluate_with(const Graph& g, const std::vector<ClassId>& classes, const Embedder& embed,
                          const EvalOptions& opt) {
  if (opt.num_tasks < 1 || opt.repetitions < 1) throw Error("evaluate: need at least one task and repetition");
  const auto total = static_cast<std::size_t>(opt.num_tasks) * static_cast<std::size_t>(opt.repetitions);
  std::vector<double> acc(total);
  parallel_for(total, opt.workers, [&](std::size_t idx) {
    Rng rng = make_rng(opt.seed, "eval-task", idx);
    const auto task = sample_meta_task(g, classes, opt.n_way, opt.k_shot, opt.query_per_task, rng);
    acc[idx] = task_accuracy(task, embed, opt.logreg);
  });

  EvalSummary s;
  s.tasks_per_repetition = opt.num_tasks;
  for (int r = 0; r < opt.repetitions; ++r) {
    double sum = 0.0;
    for (int t = 0; t < opt.num_tasks; ++t) sum += acc[static_cast<std::size_t>(r * opt.num_tasks + t)];
    s.accuracies.push_back(sum / opt.num_tasks);
  }
  s.mean = std::accumulate(s.accuracies.begin(), s.accuracies.end(), 0.0) / static_cast<double>(opt.repetitions);
  s.ci95 = ci95_half_width(s.accuracies);
  return s;
}

ClusteringScores embedding_quality(const Graph& g, const std::vector<ClassId>& classes, const Embedder& embed,
                                   int n_way, int trials, std::uint64_t seed) {
  if (static_cast<int>(classes.size()) < n_way) throw Error("embedding_quality: not enough classes");
  ClusteringScores mean;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng = make_rng(seed, "cluster-trial", static_cast<std::uint64_t>(trial));
    std::vector<ClassId> pool = classes;
    portable_shuffle(pool.begin(), pool.end(), rng);
    std::vector<NodeId> nodes;
    std::vector<int> labels;
    for (int i = 0; i < n_way; ++i)
      for (NodeId v : g.nodes_of_class(pool[static_cast<std::size_t>(i)])) {
        nodes.push_back(v);
        labels.push_back(i);
      }
    MatXd x;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const VecXd e = embed(nodes[i]);
      if (i == 0) x.resize(static_cast<Eigen::Index>(nodes.size()), e.size());
      x.row(static_cast<Eigen::Index>(i)) = e.transpose();
    }
    const auto s = clustering_quality(x, labels, n_way, substream_seed(seed, "cluster-kmeans", static_cast<std::uint64_t>(trial)));
    mean.nmi += s.nmi / trials;
    mean.ari += s.ari / trials;
  }
  return mean;
}

void write_embeddings_csv(const Graph& g, const std::vector<ClassId>& classes, const Embedder& embed,
                          const std::filesystem::path& path) {
  std::vector<NodeId> nodes;
  for (ClassId c : classes)
    for (NodeId v : g.nodes_of_class(c)) nodes.push_back(v);
  std::sort(nodes.begin(), nodes.end());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const auto& ids = g.original_ids();
  bool header = false;
  char buf[64];
  for (NodeId v : nodes) {
    const VecXd e = embed(v);
    if (!header) {
      out << "node_id,class";
      for (Eigen::Index j = 0; j < e.size(); ++j) out << ",f" << j;
      out << '\n';
      header = true;
    }
    out << (ids.empty() ? v : ids[static_cast<std::size_t>(v)]) << ',' << g.label(v);
    for (Eigen::Index j = 0; j < e.size(); ++j) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, e(j));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  }
  if (!out) throw Error("I/O error writing " + path.string());
}

}  // namespace cosmic
