#include "cosmic/graph.hpp"

#include "cosmic/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace cosmic {

namespace fs = std::filesystem;

Graph Graph::from_edges(NodeId num_nodes, const std::vector<std::pair<NodeId, NodeId>>& edges,
                        MatXd features, std::vector<ClassId> labels) {
  if (num_nodes < 0) throw Error("graph: negative node count");
  if (static_cast<NodeId>(labels.size()) != num_nodes)
    throw Error("graph: label count " + std::to_string(labels.size()) + " != node count " +
                std::to_string(num_nodes));
  if (features.rows() != num_nodes)
    throw Error("graph: feature rows " + std::to_string(features.rows()) + " != node count " +
                std::to_string(num_nodes));

  Graph g;
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes)
      throw Error("graph: edge (" + std::to_string(u) + "," + std::to_string(v) + ") out of range");
    if (u == v) continue;
    triplets.emplace_back(u, v, 1.0);
    triplets.emplace_back(v, u, 1.0);
  }
  g.adjacency_.resize(num_nodes, num_nodes);
  // Duplicates collapse to a single unit-weight entry.
  g.adjacency_.setFromTriplets(triplets.begin(), triplets.end(),
                               [](double a, double) { return a; });
  g.adjacency_.makeCompressed();

  g.degree_.assign(static_cast<std::size_t>(num_nodes), 0);
  for (Eigen::Index k = 0; k < g.adjacency_.outerSize(); ++k)
    g.degree_[static_cast<std::size_t>(k)] =
        static_cast<NodeId>(g.adjacency_.outerIndexPtr()[k + 1] - g.adjacency_.outerIndexPtr()[k]);

  int max_label = -1;
  for (ClassId c : labels) {
    if (c < 0) throw Error("graph: negative class id");
    max_label = std::max(max_label, c);
  }
  g.num_classes_ = max_label + 1;
  g.by_class_.assign(static_cast<std::size_t>(g.num_classes_), {});
  for (NodeId v = 0; v < num_nodes; ++v)
    g.by_class_[static_cast<std::size_t>(labels[static_cast<std::size_t>(v)])].push_back(v);

  g.features_ = std::move(features);
  g.labels_ = std::move(labels);
  return g;
}

namespace {

struct LineReader {
  fs::path path;
  std::ifstream in;
  std::size_t line_no = 0;

  explicit LineReader(const fs::path& p) : path(p), in(p) {
    if (!in) throw Error("missing file: " + p.string());
  }

  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(path.filename().string() + ":" + std::to_string(line_no) + ": " + what);
  }
};

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

template <typename Int>
bool parse_int(const std::string& tok, Int& out) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_double(const std::string& tok, double& out) {
  std::size_t b = tok.find_first_not_of(" \t");
  std::size_t e = tok.find_last_not_of(" \t");
  if (b == std::string::npos) return false;
  const char* first = tok.data() + b;
  const char* last = tok.data() + e + 1;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

Graph load_graph(const fs::path& dataset_dir) {
  if (!fs::is_directory(dataset_dir)) throw Error("dataset directory not found: " + dataset_dir.string());

  // labels.tsv defines the node universe.
  std::vector<std::pair<NodeId, ClassId>> raw_labels;
  {
    LineReader r(dataset_dir / "labels.tsv");
    std::string line;
    while (r.next(line)) {
      const auto toks = split_ws(line);
      if (toks.size() != 2) r.fail("expected 'node_id<TAB>class_id'");
      NodeId id;
      ClassId c;
      if (!parse_int(toks[0], id)) r.fail("non-integer node id '" + toks[0] + "'");
      if (!parse_int(toks[1], c)) r.fail("non-integer class id '" + toks[1] + "'");
      if (c < 0) r.fail("label out of range: " + toks[1]);
      raw_labels.emplace_back(id, c);
    }
  }
  std::sort(raw_labels.begin(), raw_labels.end());
  for (std::size_t i = 1; i < raw_labels.size(); ++i)
    if (raw_labels[i].first == raw_labels[i - 1].first)
      throw Error("labels.tsv: duplicate label for node " + std::to_string(raw_labels[i].first));

  const auto n = static_cast<NodeId>(raw_labels.size());
  bool dense = true;
  for (NodeId i = 0; i < n; ++i) dense = dense && raw_labels[static_cast<std::size_t>(i)].first == i;

  std::unordered_map<NodeId, NodeId> to_dense;
  std::vector<NodeId> original;
  std::vector<ClassId> labels(static_cast<std::size_t>(n));
  for (NodeId i = 0; i < n; ++i) {
    const auto& [id, c] = raw_labels[static_cast<std::size_t>(i)];
    labels[static_cast<std::size_t>(i)] = c;
    if (!dense) {
      to_dense.emplace(id, i);
      original.push_back(id);
    }
  }
  auto lookup = [&](NodeId id, NodeId& out) {
    if (dense) {
      out = id;
      return id >= 0 && id < n;
    }
    auto it = to_dense.find(id);
    if (it == to_dense.end()) return false;
    out = it->second;
    return true;
  };

  std::vector<std::vector<double>> rows;
  {
    LineReader r(dataset_dir / "features.csv");
    std::string line;
    while (r.next(line)) {
      std::vector<double> row;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) {
        double x;
        if (!parse_double(cell, x)) r.fail("non-numeric feature '" + cell + "'");
        row.push_back(x);
      }
      if (!rows.empty() && row.size() != rows.front().size())
        r.fail("ragged feature row: " + std::to_string(row.size()) + " columns, expected " +
               std::to_string(rows.front().size()));
      rows.push_back(std::move(row));
    }
    if (static_cast<NodeId>(rows.size()) != n)
      r.fail("feature row count " + std::to_string(rows.size()) + " does not match " +
             std::to_string(n) + " labelled nodes");
  }
  const auto d = rows.empty() ? Eigen::Index(0) : static_cast<Eigen::Index>(rows.front().size());
  MatXd features(n, d);
  for (NodeId i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) features(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];

  std::vector<std::pair<NodeId, NodeId>> edges;
  {
    LineReader r(dataset_dir / "edges.tsv");
    std::string line;
    while (r.next(line)) {
      const auto toks = split_ws(line);
      if (toks.size() != 2) r.fail("expected two node ids");
      NodeId a, b, u, v;
      if (!parse_int(toks[0], a)) r.fail("non-integer node id '" + toks[0] + "'");
      if (!parse_int(toks[1], b)) r.fail("non-integer node id '" + toks[1] + "'");
      if (!lookup(a, u)) r.fail("unknown node id " + toks[0]);
      if (!lookup(b, v)) r.fail("unknown node id " + toks[1]);
      edges.emplace_back(u, v);
    }
  }

  Graph g = Graph::from_edges(n, edges, std::move(features), std::move(labels));
  g.set_original_ids(std::move(original));
  return g;
}

void write_node_map(const Graph& g, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  const auto& ids = g.original_ids();
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    out << (ids.empty() ? v : ids[static_cast<std::size_t>(v)]) << '\t' << v << '\n';
}

SpMat column_normalize(const Graph& g) {
  SpMat a = g.adjacency();
  for (Eigen::Index col = 0; col < a.outerSize(); ++col) {
    double sum = 0.0;
    for (SpMat::InnerIterator it(a, col); it; ++it) sum += it.value();
    if (sum == 0.0) continue;
    for (SpMat::InnerIterator it(a, col); it; ++it) it.valueRef() /= sum;
  }
  return a;
}

SpMat gcn_normalize(const Graph& g) {
  const NodeId n = g.num_nodes();
  SpMat eye(n, n);
  eye.setIdentity();
  SpMat a = g.adjacency() + eye;
  VecXd inv_sqrt(n);
  for (NodeId v = 0; v < n; ++v) inv_sqrt(v) = 1.0 / std::sqrt(static_cast<double>(g.degree(v)) + 1.0);
  return inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

Graph generate_planted_partition(const PlantedPartitionParams& p) {
  if (!(p.p_out >= 0.0 && p.p_out < p.p_in && p.p_in <= 1.0))
    throw Error("planted partition: need 0 <= p_out < p_in <= 1");
  if (p.num_classes < 1 || p.nodes_per_class < 1) throw Error("planted partition: empty graph");
  if (p.feat_dim < p.num_classes) throw Error("planted partition: feat_dim must be >= num_classes");
  if (p.feat_noise < 0.0) throw Error("planted partition: negative feature noise");

  const NodeId n = static_cast<NodeId>(p.num_classes) * p.nodes_per_class;
  std::vector<ClassId> labels(static_cast<std::size_t>(n));
  for (NodeId v = 0; v < n; ++v) labels[static_cast<std::size_t>(v)] = static_cast<ClassId>(v / p.nodes_per_class);

  Rng edge_rng = make_rng(p.seed, "edges");
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId u = 0; u < n; ++u)
    for (NodeId v = u + 1; v < n; ++v) {
      const double prob = labels[static_cast<std::size_t>(u)] == labels[static_cast<std::size_t>(v)] ? p.p_in : p.p_out;
      if (uniform01(edge_rng) < prob) edges.emplace_back(u, v);
    }

  Rng feat_rng = make_rng(p.seed, "features");
  std::normal_distribution<double> noise(0.0, 1.0);
  MatXd x = MatXd::Zero(n, p.feat_dim);
  for (NodeId v = 0; v < n; ++v) {
    x(v, labels[static_cast<std::size_t>(v)]) = 1.0;
    for (int j = 0; j < p.feat_dim; ++j) x(v, j) += p.feat_noise * noise(feat_rng);
  }
  return Graph::from_edges(n, edges, std::move(x), std::move(labels));
}

void validate_split(const ClassSplit& split, int num_classes) {
  std::set<ClassId> seen;
  auto add = [&](const std::vector<ClassId>& part, const char* name) {
    for (ClassId c : part) {
      if (c < 0 || c >= num_classes)
        throw Error(std::string("class split: unknown class id ") + std::to_string(c) + " in '" + name + "'");
      if (!seen.insert(c).second)
        throw Error(std::string("class split: class ") + std::to_string(c) + " overlaps in '" + name + "'");
    }
  };
  add(split.train, "train");
  add(split.val, "val");
  add(split.test, "test");
}

ClassSplit load_class_split(const fs::path& path, int num_classes) {
  std::ifstream in(path);
  if (!in) throw Error("missing file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.filename().string() + ": " + e.what());
  }
  ClassSplit s;
  try {
    s.train = j.at("train").get<std::vector<ClassId>>();
    s.val = j.at("val").get<std::vector<ClassId>>();
    s.test = j.at("test").get<std::vector<ClassId>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.filename().string() + ": " + e.what());
  }
  validate_split(s, num_classes);
  return s;
}

ClassSplit contiguous_split(int num_classes) {
  if (num_classes < 3) throw Error("contiguous_split: need at least 3 classes");
  int n_train = static_cast<int>(std::lround(0.6 * num_classes));
  int n_val = std::max(1, static_cast<int>(std::lround(0.2 * num_classes)));
  n_train = std::clamp(n_train, 1, num_classes - n_val - 1);
  ClassSplit s;
  for (int c = 0; c < num_classes; ++c) {
    if (c < n_train)
      s.train.push_back(c);
    else if (c < n_train + n_val)
      s.val.push_back(c);
    else
      s.test.push_back(c);
  }
  return s;
}

}  // namespace cosmic
