#include "helpers.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <thread>

using namespace cosmic;
using namespace testing;

namespace {

// zeta (I - (1 - zeta) Abar)^{-1}, column v.
VecXd dense_ppr(const Graph& g, NodeId v, double zeta) {
  const MatXd abar = column_normalize(g);
  const auto n = abar.rows();
  const MatXd s = zeta * (MatXd::Identity(n, n) - (1.0 - zeta) * abar).inverse();
  return s.col(v);
}

}  // namespace

TEST_CASE("compute_ppr closed forms") {
  SUBCASE("isolated node keeps zeta on itself") {
    for (double zeta : {0.1, 0.5, 0.9}) {
      const VecXd s = compute_ppr(make_graph(1, {}), 0, {zeta});
      REQUIRE(s.size() == 1);
      CHECK(s(0) == doctest::Approx(zeta).epsilon(1e-12));
    }
  }
  SUBCASE("zeta = 1 does not diffuse") {
    const VecXd s = compute_ppr(make_graph(2, {{0, 1}}), 1, {1.0});
    CHECK(s(0) == 0.0);
    CHECK(s(1) == 1.0);
  }
  SUBCASE("path P3 from node 0") {
    const Graph g = path3();
    const VecXd s = compute_ppr(g, 0, {0.15});
    CHECK(s(1) > s(2));
    CHECK(s(2) > 0.0);
    CHECK((s - dense_ppr(g, 0, 0.15)).cwiseAbs().maxCoeff() < 1e-8);
    // Hand solve of the 3x3 system, zeta = 0.15, c = 0.85:
    // s0 = 0.15 + c s1 / 2, s1 = c (s0 + s2), s2 = c s1 / 2.
    const double c = 0.85;
    const double s1 = c * 0.15 / (1.0 - c * c);
    CHECK(s(1) == doctest::Approx(s1).epsilon(1e-8));
    CHECK(s(2) == doctest::Approx(c * s1 / 2.0).epsilon(1e-8));
  }
}

TEST_CASE("compute_ppr matches the dense inverse") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<NodeId>(2 + uniform_index(rng, 49));
    const Graph g = random_graph(n, 0.1, rng);
    for (double zeta : {0.1, 0.15, 0.5, 0.9}) {
      const auto v = static_cast<NodeId>(uniform_index(rng, static_cast<std::uint64_t>(n)));
      const VecXd s = compute_ppr(g, v, {zeta});
      CHECK((s - dense_ppr(g, v, zeta)).cwiseAbs().maxCoeff() < 1e-6);
      CHECK(s.minCoeff() >= 0.0);
      if (g.degree(v) > 0) {
        // Mass leaks only through isolated columns, which the walk cannot reach.
        CHECK(std::abs(s.sum() - 1.0) < 1e-8);
      }
    }
  }
}

TEST_CASE("self score tends to one as zeta tends to one") {
  const Graph g = path3();
  double prev = 0.0;
  for (double zeta : {0.5, 0.9, 0.99, 0.999}) {
    const VecXd s = compute_ppr(g, 1, {zeta});
    CHECK(s(1) > prev);
    prev = s(1);
  }
  CHECK(prev > 0.998);
}

TEST_CASE("compute_ppr reports non-convergence") {
  PprOptions opt{0.01, 1e-12, 3};
  CHECK_THROWS_AS(compute_ppr(path3(), 0, opt), Error);
}

TEST_CASE("extract_neighborhood") {
  SUBCASE("large k_s takes every other node of a connected graph") {
    const Graph g = make_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
    const auto nb = extract_neighborhood(compute_ppr(g, 2, {0.15}), 2, 10);
    auto sorted = nb.nodes;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<NodeId>{0, 1, 3, 4});
    CHECK(nb.deficit == 6);
  }
  SUBCASE("ties go to the lower id") {
    VecXd s(4);
    s << 0.5, 0.2, 0.2, 0.1;
    CHECK(extract_neighborhood(s, 0, 1).nodes == std::vector<NodeId>{1});
    CHECK(extract_neighborhood(s, 0, 3).nodes == std::vector<NodeId>{1, 2, 3});
  }
  SUBCASE("star centre picks the lowest-id leaves") {
    const Graph g = make_graph(6, {{0, 5}, {0, 3}, {0, 1}, {0, 4}, {0, 2}});
    const VecXd s = compute_ppr(g, 0, {0.15});
    CHECK(extract_neighborhood(s, 0, 2).nodes == std::vector<NodeId>{1, 2});
    // Oracle: full stable sort by (-score, id).
    std::vector<NodeId> order{1, 2, 3, 4, 5};
    std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return s(a) > s(b); });
    CHECK(extract_neighborhood(s, 0, 5).nodes == order);
  }
  SUBCASE("zero scores are never selected") {
    const Graph g = make_graph(4, {{0, 1}});
    const auto nb = extract_neighborhood(compute_ppr(g, 0, {0.15}), 0, 3);
    CHECK(nb.nodes == std::vector<NodeId>{1});
    CHECK(nb.deficit == 2);
  }
  SUBCASE("pure function of its inputs") {
    Rng rng(4);
    const VecXd s = random_vec(30, rng).cwiseAbs();
    CHECK(extract_neighborhood(s, 7, 6).nodes == extract_neighborhood(s, 7, 6).nodes);
  }
}

TEST_CASE("induce_subgraph") {
  SUBCASE("isolated node is padded") {
    const Graph g = make_graph(3, {{1, 2}});
    PprCache cache(g, {0.15});
    const auto sub = extract_subgraph<double>(g, cache, 0, 2);
    CHECK(sub.size() == 3);
    CHECK(sub.num_real == 1);
    CHECK(sub.nodes == std::vector<NodeId>{0, -1, -1});
    CHECK(sub.adjacency.isZero());
    CHECK(sub.features.bottomRows(2).isZero());
    CHECK(sub.features.row(0) == g.features().row(0));
  }
  SUBCASE("triangle closes") {
    const Graph g = make_graph(3, {{0, 1}, {1, 2}, {0, 2}});
    const auto sub = induce_subgraph<double>(g, 0, {1, 2}, 2);
    CHECK(sub.adjacency == (MatXd::Ones(3, 3) - MatXd::Identity(3, 3)));
  }
  SUBCASE("P3 keeps only induced edges") {
    const auto sub = induce_subgraph<double>(path3(), 0, {1, 2}, 2);
    CHECK(sub.adjacency(0, 1) == 1.0);
    CHECK(sub.adjacency(1, 2) == 1.0);
    CHECK(sub.adjacency(0, 2) == 0.0);
    CHECK(to_edge_list(sub) == "# nodes 0 1 2\n0 1 1.000000\n1 2 1.000000\n");
  }
  SUBCASE("random graphs keep exactly the induced edges") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      const Graph g = random_graph(25, 0.15, rng);
      PprCache cache(g, {0.15});
      const auto v = static_cast<NodeId>(uniform_index(rng, 25));
      const auto sub = extract_subgraph<double>(g, cache, v, 6);
      CHECK(sub.size() == 7);
      CHECK(sub.adjacency == sub.adjacency.transpose());
      for (int i = 0; i < sub.size(); ++i)
        for (int j = 0; j < sub.size(); ++j) {
          const bool real = i < sub.num_real && j < sub.num_real && i != j;
          const double expected = real && g.has_edge(sub.nodes[i], sub.nodes[j]) ? 1.0 : 0.0;
          CHECK(sub.adjacency(i, j) == expected);
        }
    }
  }
  SUBCASE("rejects bad neighbourhoods") {
    CHECK_THROWS_AS(induce_subgraph<double>(path3(), 0, {1, 2}, 1), Error);
    CHECK_THROWS_AS(induce_subgraph<double>(path3(), 0, {0}, 2), Error);
  }
}

TEST_CASE("PprCache is safe under concurrent queries") {
  Rng rng(2);
  const Graph g = random_graph(60, 0.1, rng);
  PprCache cache(g, {0.15}, 16);
  std::vector<std::thread> threads;
  std::vector<int> mismatches(4, 0);
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&, t] {
      for (NodeId v = 0; v < 60; ++v) {
        const auto s = cache.scores((v * (t + 1)) % 60);
        if ((*s - compute_ppr(g, (v * (t + 1)) % 60, {0.15})).cwiseAbs().maxCoeff() != 0.0) ++mismatches[t];
      }
    });
  for (auto& th : threads) th.join();
  CHECK(mismatches == std::vector<int>(4, 0));
  CHECK(cache.size() <= 16);
}
