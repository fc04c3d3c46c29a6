#include "helpers.hpp"

#include "cosmic/checkpoint.hpp"
#include "cosmic/eval.hpp"
#include "cosmic/gradcheck.hpp"

#include <doctest.h>

#include <Eigen/Dense>

using namespace cosmic;
using namespace testing;

namespace {

VecXd pack(const MatXd& w, const VecXd& b) {
  VecXd x(w.size() + b.size());
  x << Eigen::Map<const VecXd>(w.data(), w.size()), b;
  return x;
}

// Damped Newton iterations on the same objective, an independent solver.
double newton_oracle(const MatXd& x, const std::vector<int>& y, int c, double wd) {
  const auto d = x.cols();
  const auto n = x.rows();
  const Eigen::Index dim = (d + 1) * c;
  VecXd theta = VecXd::Zero(dim);
  auto unpack = [&](const VecXd& t, MatXd& w, VecXd& b) {
    w = Eigen::Map<const MatXd>(t.data(), d, c);
    b = t.tail(c);
  };
  for (int it = 0; it < 100; ++it) {
    MatXd w;
    VecXd b;
    unpack(theta, w, b);
    MatXd gw;
    VecXd gb;
    logreg_objective(x, y, w, b, wd, &gw, &gb);
    const VecXd grad = pack(gw, gb);
    if (grad.norm() < 1e-12) break;
    MatXd h = wd * MatXd::Identity(dim, dim);
    MatXd logits = x * w;
    logits.rowwise() += b.transpose();
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::RowVectorXd p = (logits.row(i).array() - logits.row(i).maxCoeff()).exp();
      p /= p.sum();
      VecXd phi(d + 1);
      phi << x.row(i).transpose(), 1.0;
      const MatXd s = MatXd(p.transpose().asDiagonal()) - p.transpose() * p;
      for (int a = 0; a < c; ++a)
        for (int bb = 0; bb < c; ++bb) {
          const MatXd block = s(a, bb) / static_cast<double>(n) * phi * phi.transpose();
          for (Eigen::Index r = 0; r <= d; ++r)
            for (Eigen::Index q = 0; q <= d; ++q) {
              const Eigen::Index ri = r < d ? a * d + r : d * c + a;
              const Eigen::Index qi = q < d ? bb * d + q : d * c + bb;
              h(ri, qi) += block(r, q);
            }
        }
    }
    theta -= h.ldlt().solve(grad);
  }
  MatXd w;
  VecXd b;
  unpack(theta, w, b);
  return logreg_objective(x, y, w, b, wd);
}

}  // namespace

TEST_CASE("fit_task_classifier") {
  SUBCASE("two 1-D points are separated") {
    const MatXd x = (MatXd(2, 1) << -1.0, 1.0).finished();
    const auto clf = fit_task_classifier(x, {0, 1}, 2);
    CHECK(predict_labels(clf, x) == std::vector<int>{0, 1});
    CHECK(clf.converged);
  }
  SUBCASE("huge weight decay drives phi to zero") {
    const MatXd x = (MatXd(2, 1) << -1.0, 1.0).finished();
    LogRegOptions opt;
    opt.weight_decay = 1e8;
    const auto clf = fit_task_classifier(x, {0, 1}, 2, opt);
    CHECK(clf.weight.cwiseAbs().maxCoeff() < 1e-7);
    const MatXd p = predict_proba(clf, x);
    CHECK(p.isApprox(MatXd::Constant(2, 2, 0.5), 1e-6));
  }
  SUBCASE("matches a Newton oracle on a separable 3-class set") {
    Rng rng(7);
    MatXd x(30, 4);
    std::vector<int> y;
    for (int i = 0; i < 30; ++i) {
      const int c = i % 3;
      y.push_back(c);
      x.row(i) = random_vec(4, rng, 0.3).transpose();
      x(i, c) += 2.0;
    }
    LogRegOptions opt;
    opt.tol = 1e-10;
    opt.max_iter = 20000;
    const auto clf = fit_task_classifier(x, y, 3, opt);
    CHECK(std::abs(clf.objective - newton_oracle(x, y, 3, 1.0)) < 1e-6);
    CHECK(predict_labels(clf, x) == y);
    for (std::size_t i = 1; i < clf.history.size(); ++i) CHECK(clf.history[i] <= clf.history[i - 1]);
  }
  SUBCASE("objective gradient matches finite differences") {
    Rng rng(8);
    const MatXd x = random_mat(6, 3, rng), w = random_mat(3, 2, rng);
    const VecXd b = random_vec(2, rng);
    const std::vector<int> y{0, 1, 1, 0, 1, 0};
    MatXd gw;
    VecXd gb;
    logreg_objective(x, y, w, b, 0.7, &gw, &gb);
    const auto rep = finite_diff_check(
        [&](const VecXd& t) {
          return logreg_objective(x, y, Eigen::Map<const MatXd>(t.data(), 3, 2), t.tail(2), 0.7);
        },
        pack(w, b), pack(gw, gb));
    CHECK_MESSAGE(rep.passed, rep.max_rel_error);
  }
}

TEST_CASE("predict_labels") {
  TaskClassifier clf;
  clf.weight = MatXd::Zero(3, 4);
  clf.bias = VecXd::Zero(4);
  Rng rng(1);
  const MatXd q = random_mat(5, 3, rng);
  SUBCASE("zero classifier picks class 0") { CHECK(predict_labels(clf, q) == std::vector<int>(5, 0)); }
  SUBCASE("constant logit shift does not change predictions") {
    clf.weight = random_mat(3, 4, rng);
    clf.bias = random_vec(4, rng);
    const auto before = predict_labels(clf, q);
    clf.bias.array() += 3.7;
    CHECK(predict_labels(clf, q) == before);
  }
  SUBCASE("ties go to the lowest index") {
    CHECK(argmax_lowest(Eigen::RowVector3d(0.2, 0.5, 0.5)) == 1);
  }
}

TEST_CASE("ci95") {
  CHECK(ci95_half_width({0.5}) == 0.0);
  CHECK(ci95_half_width({0.7, 0.7, 0.7}) == 0.0);
  // stdev of {0, 1} is sqrt(0.5).
  CHECK(ci95_half_width({0.0, 1.0}) == doctest::Approx(1.96 * std::sqrt(0.5) / std::sqrt(2.0)));
}

TEST_CASE("evaluate") {
  PlantedPartitionParams pp;
  pp.num_classes = 6;
  pp.nodes_per_class = 30;
  pp.feat_dim = 6;
  const Graph g = generate_planted_partition(pp);
  const std::vector<ClassId> classes{4, 5};
  EvalOptions opt;
  opt.num_tasks = 20;
  opt.repetitions = 5;
  opt.seed = 3;

  SUBCASE("label-revealing embedder is perfect") {
    const Embedder oracle = [&](NodeId v) {
      VecXd e = VecXd::Zero(6);
      e(g.label(v)) = 10.0;
      return e;
    };
    const auto s = evaluate_with(g, classes, oracle, opt);
    CHECK(s.mean == 1.0);
    CHECK(s.ci95 == 0.0);
    CHECK(s.accuracies.size() == 5);
  }
  SUBCASE("label-independent embedder is at chance") {
    const Embedder noise = [](NodeId v) {
      Rng r = make_rng(static_cast<std::uint64_t>(v), "noise");
      return random_vec(6, r);
    };
    EvalOptions big = opt;
    big.num_tasks = 100;
    big.repetitions = 10;
    const auto s = evaluate_with(g, classes, noise, big);
    CHECK(std::abs(s.mean - 0.5) < 0.05);
  }
  SUBCASE("deterministic and independent of worker count") {
    Rng rng(2);
    const auto params = init_params<double>(6, 8, 2, rng);
    const PprCache cache(g, {0.15});
    const auto a = evaluate(g, classes, params, cache, 4, opt);
    EvalOptions par = opt;
    par.workers = 4;
    const auto b = evaluate(g, classes, params, cache, 4, par);
    CHECK(a.accuracies == b.accuracies);
    CHECK(a.mean == b.mean);
  }
  SUBCASE("frozen encoder bytes are unchanged") {
    Rng rng(3);
    const auto params = init_params<double>(6, 8, 2, rng);
    const auto copy = params;
    const PprCache cache(g, {0.15});
    evaluate(g, classes, params, cache, 4, opt);
    CHECK(std::memcmp(params.weight.data(), copy.weight.data(), sizeof(double) * params.weight.size()) == 0);
    CHECK(params.generation == copy.generation);
  }
}

TEST_CASE("embedding export") {
  const Graph g = make_graph(5, {{0, 1}, {2, 3}}, 4, {0, 1, 1, 2, 1});
  const auto dir = temp_dir("export");
  Rng rng(4);
  const auto params = init_params<double>(4, 4, 2, rng);
  const PprCache cache(g, {0.15});
  const Embedder embed = frozen_embedder(g, cache, params, {1}, 2);
  write_embeddings_csv(g, {1}, embed, dir / "a.csv");
  write_embeddings_csv(g, {1}, embed, dir / "b.csv");
  const std::string text = read_file(dir / "a.csv");
  CHECK(text == read_file(dir / "b.csv"));

  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  CHECK(line == "node_id,class,f0,f1,f2,f3");
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  REQUIRE(rows.size() == 3);
  const std::vector<NodeId> nodes{1, 2, 4};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::vector<std::string> cells;
    std::stringstream ss(rows[r]);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() == 6);
    CHECK(std::stoll(cells[0]) == nodes[r]);
    const VecXd e = embed_node(g, cache, params, nodes[r], 2);
    for (int j = 0; j < 4; ++j) CHECK(std::strtod(cells[2 + j].c_str(), nullptr) == e(j));
  }
  CHECK_THROWS_AS(embed(0), Error);
}

TEST_CASE("clustering metrics") {
  SUBCASE("perfect partition scores exactly one") {
    const std::vector<int> a{0, 0, 1, 1, 2, 2}, b{2, 2, 0, 0, 1, 1};
    CHECK(normalized_mutual_info(a, b) == 1.0);
    CHECK(adjusted_rand_index(a, b) == 1.0);
  }
  SUBCASE("constant partition has ARI zero") {
    const std::vector<int> labels{0, 0, 0, 1, 1, 1}, one(6, 0);
    CHECK(adjusted_rand_index(labels, one) == 0.0);
    CHECK(normalized_mutual_info(labels, one) == 0.0);
  }
  SUBCASE("random labels have ARI near zero") {
    Rng rng(6);
    std::vector<int> truth(200);
    for (int i = 0; i < 200; ++i) truth[static_cast<std::size_t>(i)] = i % 4;
    double mean = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      auto perm = truth;
      portable_shuffle(perm.begin(), perm.end(), rng);
      const double ari = adjusted_rand_index(truth, perm);
      CHECK(std::abs(ari) < 0.05);
      mean += ari / 50.0;
    }
    CHECK(std::abs(mean) < 0.01);
  }
  SUBCASE("symmetric in their arguments") {
    Rng rng(7);
    std::vector<int> a(50), b(50);
    for (int i = 0; i < 50; ++i) {
      a[static_cast<std::size_t>(i)] = static_cast<int>(uniform_index(rng, 3));
      b[static_cast<std::size_t>(i)] = static_cast<int>(uniform_index(rng, 4));
    }
    CHECK(normalized_mutual_info(a, b) == doctest::Approx(normalized_mutual_info(b, a)).epsilon(1e-15));
    CHECK(adjusted_rand_index(a, b) == doctest::Approx(adjusted_rand_index(b, a)).epsilon(1e-15));
  }
  SUBCASE("NMI against a hand computation") {
    // a = {0,0,1,1}, b = {0,1,1,1}: I = 1.5 ln2 - 0.75 ln3 (nats),
    // H(a) = ln 2, H(b) = 2 ln 2 - 0.75 ln 3.
    const double mi = 1.5 * std::log(2.0) - 0.75 * std::log(3.0);
    const double ha = std::log(2.0), hb = 2.0 * std::log(2.0) - 0.75 * std::log(3.0);
    CHECK(normalized_mutual_info({0, 0, 1, 1}, {0, 1, 1, 1}) == doctest::Approx(mi / (0.5 * (ha + hb))).epsilon(1e-14));
  }
  SUBCASE("k-means recovers well separated blobs") {
    Rng rng(8);
    MatXd x(60, 2);
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) {
      const int c = i % 3;
      labels.push_back(c);
      x.row(i) = random_vec(2, rng, 0.1).transpose();
      x(i, 0) += 10.0 * c;
    }
    const auto q = clustering_quality(x, labels, 3, 1);
    CHECK(q.nmi == 1.0);
    CHECK(q.ari == 1.0);
  }
}

TEST_CASE("checkpoint round trip") {
  const auto dir = temp_dir("ckpt");
  Rng rng(9);
  auto p = init_params<double>(5, 7, 3, rng);
  p.head_weight = random_mat(7, 3, rng);
  p.head_bias = random_vec(3, rng);
  CheckpointMeta meta;
  meta.seed = 42;
  meta.episode = 17;
  meta.config = {{"hidden-dim", 7}};
  save_checkpoint(dir / "a.bin", p, meta);
  save_checkpoint(dir / "b.bin", p, meta);
  CHECK(read_file(dir / "a.bin") == read_file(dir / "b.bin"));

  nlohmann::json header;
  const auto q = load_checkpoint<double>(dir / "a.bin", &header);
  CHECK(q.weight == p.weight);
  CHECK(q.head_weight == p.head_weight);
  CHECK(q.head_bias == p.head_bias);
  CHECK(header["seed"] == 42);
  CHECK(header["episode"] == 17);
  CHECK(header["dtype"] == "f64");
  CHECK(header["config"]["hidden-dim"] == 7);

  const auto f = load_checkpoint<float>(dir / "a.bin");
  CHECK(f.weight.isApprox(p.weight.cast<float>()));
  save_checkpoint(dir / "f.bin", f, meta);
  CHECK(read_checkpoint_header(dir / "f.bin")["dtype"] == "f32");

  write_file(dir / "junk.bin", "not a checkpoint");
  CHECK_THROWS_AS(load_checkpoint<double>(dir / "junk.bin"), Error);
  std::string truncated = read_file(dir / "a.bin");
  truncated.resize(truncated.size() - 8);
  write_file(dir / "short.bin", truncated);
  CHECK_THROWS_AS(load_checkpoint<double>(dir / "short.bin"), Error);
  CHECK_THROWS_AS(load_checkpoint<double>(dir / "missing.bin"), Error);
}
