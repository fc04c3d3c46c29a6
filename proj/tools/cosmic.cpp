#include "cosmic/checkpoint.hpp"
#include "cosmic/eval.hpp"
#include "cosmic/graph.hpp"
#include "cosmic/log.hpp"
#include "cosmic/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cosmic;

namespace {

// Configuration or usage problem detected after flag parsing; exits with 2.
struct UsageError : Error {
  using Error::Error;
};

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Reads either a JSON object (such as a config_echo.json) or key=value lines.
// Keys outside any section belong to the subcommand being run.
class JsonOrTomlConfig : public CLI::ConfigTOML {
 public:
  std::string section;

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::string text((std::istreambuf_iterator<char>(input)), std::istreambuf_iterator<char>());
    const auto first = text.find_first_not_of(" \t\r\n");
    std::vector<CLI::ConfigItem> items;
    if (first == std::string::npos || text[first] != '{') {
      std::istringstream again(text);
      items = CLI::ConfigTOML::from_config(again);
    } else {
      items = from_json(text);
    }
    for (auto& item : items)
      if (item.parents.empty() && !section.empty()) item.parents.push_back(section);
    return items;
  }

 private:
  static std::vector<CLI::ConfigItem> from_json(const std::string& text) {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw CLI::ConversionError("config file is not valid JSON: " + std::string(e.what()));
    }
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : j.items()) {
      CLI::ConfigItem item;
      item.name = key;
      auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
      if (value.is_array())
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      else
        item.inputs.push_back(scalar(value));
      items.push_back(std::move(item));
    }
    return items;
  }
};

std::string find_subcommand(int argc, char** argv, const std::vector<std::string>& names) {
  for (int i = 1; i < argc; ++i)
    if (std::find(names.begin(), names.end(), argv[i]) != names.end()) return argv[i];
  return {};
}

// ---------------------------------------------------------------- data

struct DataOptions {
  std::string dataset_dir;
  std::string split;
  bool synthetic = false;
  PlantedPartitionParams planted{};
};

void add_data_options(CLI::App* app, DataOptions& d) {
  app->add_option("--dataset-dir", d.dataset_dir, "Directory with edges.tsv, features.csv, labels.tsv")
      ->check(CLI::ExistingDirectory);
  app->add_option("--split", d.split, "Class split JSON (default: <dataset-dir>/splits.json, else 60/20/20)")
      ->check(CLI::ExistingFile);
  app->add_flag("--synthetic", d.synthetic, "Use a planted-partition graph");
  app->add_option("--num-classes", d.planted.num_classes, "Synthetic: classes")->capture_default_str();
  app->add_option("--nodes-per-class", d.planted.nodes_per_class, "Synthetic: nodes per class")->capture_default_str();
  app->add_option("--p-in", d.planted.p_in, "Synthetic: intra-class edge probability")->capture_default_str();
  app->add_option("--p-out", d.planted.p_out, "Synthetic: inter-class edge probability")->capture_default_str();
  app->add_option("--feat-dim", d.planted.feat_dim, "Synthetic: feature dimension")->capture_default_str();
  app->add_option("--feat-noise", d.planted.feat_noise, "Synthetic: feature noise stdev")->capture_default_str();
  app->add_option("--graph-seed", d.planted.seed, "Synthetic: generator seed")->capture_default_str();
}

void echo_data(json& j, const DataOptions& d) {
  j["synthetic"] = d.synthetic;
  if (d.synthetic) {
    j["num-classes"] = d.planted.num_classes;
    j["nodes-per-class"] = d.planted.nodes_per_class;
    j["p-in"] = d.planted.p_in;
    j["p-out"] = d.planted.p_out;
    j["feat-dim"] = d.planted.feat_dim;
    j["feat-noise"] = d.planted.feat_noise;
    j["graph-seed"] = d.planted.seed;
  } else {
    j["dataset-dir"] = d.dataset_dir;
  }
  if (!d.split.empty()) j["split"] = d.split;
}

struct Data {
  Graph graph;
  ClassSplit split;
};

Data load_data(const DataOptions& d) {
  if (d.synthetic == !d.dataset_dir.empty())
    throw UsageError("exactly one of --dataset-dir or --synthetic is required");
  if (d.synthetic) {
    const auto& p = d.planted;
    if (p.num_classes < 3 || p.nodes_per_class < 1 || p.feat_dim < 1 || p.feat_noise < 0.0 || p.p_in < 0.0 ||
        p.p_in > 1.0 || p.p_out < 0.0 || p.p_out > 1.0)
      throw UsageError("invalid synthetic graph parameters");
  }
  Data out;
  out.graph = d.synthetic ? generate_planted_partition(d.planted) : load_graph(d.dataset_dir);
  fs::path split = d.split;
  if (split.empty() && !d.synthetic && fs::exists(fs::path(d.dataset_dir) / "splits.json"))
    split = fs::path(d.dataset_dir) / "splits.json";
  out.split = split.empty() ? contiguous_split(out.graph.num_classes())
                            : load_class_split(split, out.graph.num_classes());
  spdlog::info("graph: {} nodes, {} edges, {} classes, {} features", out.graph.num_nodes(), out.graph.num_edges(),
               out.graph.num_classes(), out.graph.feature_dim());
  return out;
}

// Config without output locations, embedded in artifacts that must match
// byte for byte across runs written to different directories.
json portable(json echo) {
  echo.erase("out");
  echo.erase("checkpoint");
  return echo;
}

bool parse_switch(const std::string& v) { return v == "on"; }

// ---------------------------------------------------------------- train

struct TrainArgs {
  DataOptions data;
  TrainConfig cfg;
  std::string mixup = "on";
  std::string contrastive = "on";
  std::string inner_opt = "sgd";
  std::string self_exclusion = "same-view";
  std::string precision = "f32";
  std::string out = "out";
};

json echo_train(const TrainArgs& a) {
  json j;
  echo_data(j, a.data);
  const auto& c = a.cfg;
  j["episodes"] = c.episodes;
  j["n-way"] = c.n_way;
  j["k-shot"] = c.k_shot;
  j["query-per-task"] = c.query_per_task;
  j["subgraph-size"] = c.subgraph_size;
  j["zeta"] = c.zeta;
  j["tau"] = c.tau;
  j["hidden-dim"] = c.hidden_dim;
  j["lr-mc"] = c.lr_mc;
  j["lr-ce"] = c.lr_ce;
  j["mixup"] = a.mixup;
  j["mixup-c"] = c.mixup.magnitude;
  j["mixup-beta"] = c.mixup.beta;
  j["contrastive"] = a.contrastive;
  j["inner-opt"] = a.inner_opt;
  j["self-exclusion"] = a.self_exclusion;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["precision"] = a.precision;
  j["out"] = a.out;
  return j;
}

template <typename Scalar>
void run_train(const TrainArgs& a, const Data& data, const json& echo) {
  const fs::path out(a.out);
  std::ofstream log(out / "episodes.csv", std::ios::binary);
  if (!log) throw Error("cannot write " + (out / "episodes.csv").string());
  log << "episode,loss_mc,loss_ce,grad_norm,ms\n";

  MetaTrainer<Scalar> trainer(data.graph, data.split, a.cfg);
  const int every = std::max(1, a.cfg.episodes / 20);
  trainer.run([&](const EpisodeReport& r) {
    log << r.episode << ',' << num(r.loss_mc) << ',' << num(r.loss_ce) << ',' << num(r.grad_norm_ce) << ','
        << num(std::round(r.ms * 1000.0) / 1000.0) << '\n';
    if ((r.episode + 1) % every == 0 || r.episode + 1 == a.cfg.episodes)
      spdlog::info("episode {}/{}: loss_mc={:.5f} loss_ce={:.5f}", r.episode + 1, a.cfg.episodes, r.loss_mc,
                   r.loss_ce);
  });
  if (!log) throw Error("I/O error writing episodes.csv");

  CheckpointMeta meta;
  meta.seed = a.cfg.seed;
  meta.episode = trainer.episodes_done();
  meta.config = portable(echo);
  save_checkpoint(out / "checkpoint.bin", trainer.params(), meta);
  std::cout << "trained " << trainer.episodes_done() << " episodes; checkpoint written to "
            << (out / "checkpoint.bin").string() << '\n';
}

void cmd_train(const TrainArgs& in) {
  TrainArgs a = in;
  a.cfg.mixup.enabled = parse_switch(a.mixup);
  a.cfg.contrastive = parse_switch(a.contrastive);
  a.cfg.inner_optimizer = a.inner_opt == "adam" ? InnerOptimizer::Adam : InnerOptimizer::Sgd;
  a.cfg.self_exclusion = a.self_exclusion == "first-view" ? SelfExclusion::FirstViewOnly : SelfExclusion::SameView;
  try {
    a.cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const Data data = load_data(a.data);
  if (static_cast<int>(data.split.train.size()) < a.cfg.n_way)
    throw UsageError("n-way " + std::to_string(a.cfg.n_way) + " exceeds the " +
                     std::to_string(data.split.train.size()) + " training classes");

  const fs::path out(a.out);
  ensure_dir(out);
  const json echo = echo_train(a);
  write_json(out / "config_echo.json", echo);
  if (!data.graph.original_ids().empty()) write_node_map(data.graph, out / "node_map.tsv");

  if (a.precision == "f64")
    run_train<double>(a, data, echo);
  else
    run_train<float>(a, data, echo);
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  DataOptions data;
  EvalOptions opt;
  std::string checkpoint;
  int subgraph_size = 10;
  double zeta = 0.15;
  int cluster_trials = 10;
  bool export_embeddings = false;
  std::string precision;
  std::string out;
};

// Fills options the user left unset from the training configuration stored
// in the checkpoint.
void inherit_from_checkpoint(CLI::App* app, EvalArgs& a, const json& train_cfg) {
  auto take = [&](const char* name, auto& field) {
    if (app->count(std::string("--") + name) == 0 && train_cfg.contains(name))
      field = train_cfg.at(name).get<std::remove_reference_t<decltype(field)>>();
  };
  take("subgraph-size", a.subgraph_size);
  take("zeta", a.zeta);
  take("n-way", a.opt.n_way);
  take("k-shot", a.opt.k_shot);
  take("query-per-task", a.opt.query_per_task);
  if (app->count("--seed") == 0 && train_cfg.contains("seed"))
    a.opt.seed = substream_seed(train_cfg.at("seed").get<std::uint64_t>(), "eval");
  if (app->count("--dataset-dir") == 0 && app->count("--synthetic") == 0) {
    a.data.synthetic = train_cfg.value("synthetic", false);
    a.data.dataset_dir = train_cfg.value("dataset-dir", "");
    if (app->count("--split") == 0) a.data.split = train_cfg.value("split", "");
    take("num-classes", a.data.planted.num_classes);
    take("nodes-per-class", a.data.planted.nodes_per_class);
    take("p-in", a.data.planted.p_in);
    take("p-out", a.data.planted.p_out);
    take("feat-dim", a.data.planted.feat_dim);
    take("feat-noise", a.data.planted.feat_noise);
    take("graph-seed", a.data.planted.seed);
  }
}

json echo_eval(const EvalArgs& a) {
  json j;
  echo_data(j, a.data);
  j["checkpoint"] = a.checkpoint;
  j["n-way"] = a.opt.n_way;
  j["k-shot"] = a.opt.k_shot;
  j["query-per-task"] = a.opt.query_per_task;
  j["tasks"] = a.opt.num_tasks;
  j["repetitions"] = a.opt.repetitions;
  j["subgraph-size"] = a.subgraph_size;
  j["zeta"] = a.zeta;
  j["weight-decay"] = a.opt.logreg.weight_decay;
  j["cluster-trials"] = a.cluster_trials;
  j["export-embeddings"] = a.export_embeddings;
  j["seed"] = a.opt.seed;
  j["workers"] = a.opt.workers;
  j["precision"] = a.precision;
  j["out"] = a.out;
  return j;
}

template <typename Scalar>
void run_eval(const EvalArgs& a, const Data& data, const json& echo) {
  const auto params = load_checkpoint<Scalar>(a.checkpoint);
  if (params.input_dim() != data.graph.feature_dim())
    throw Error("checkpoint expects " + std::to_string(params.input_dim()) + "-dimensional features but the graph has " +
                std::to_string(data.graph.feature_dim()));
  const PprCache cache(data.graph, PprOptions{a.zeta});
  const auto& classes = data.split.test;
  const Embedder embed = frozen_embedder(data.graph, cache, params, classes, a.subgraph_size, a.opt.workers);
  EvalSummary s = evaluate_with(data.graph, classes, embed, a.opt);
  if (a.cluster_trials > 0) {
    const auto q = embedding_quality(data.graph, classes, embed, a.opt.n_way, a.cluster_trials,
                                     substream_seed(a.opt.seed, "cluster"));
    s.nmi = q.nmi;
    s.ari = q.ari;
  }

  const fs::path out(a.out);
  {
    std::ofstream csv(out / "results.csv", std::ios::binary);
    if (!csv) throw Error("cannot write " + (out / "results.csv").string());
    csv << "n_way,k_shot,repetition,accuracy\n";
    for (std::size_t r = 0; r < s.accuracies.size(); ++r)
      csv << a.opt.n_way << ',' << a.opt.k_shot << ',' << r << ',' << num(s.accuracies[r]) << '\n';
  }
  json summary;
  summary["n_way"] = a.opt.n_way;
  summary["k_shot"] = a.opt.k_shot;
  summary["subgraph_size"] = a.subgraph_size;
  summary["tasks"] = a.opt.num_tasks;
  summary["repetitions"] = a.opt.repetitions;
  summary["accuracies"] = s.accuracies;
  summary["mean"] = s.mean;
  summary["ci95"] = s.ci95;
  summary["nmi"] = s.nmi ? json(*s.nmi) : json(nullptr);
  summary["ari"] = s.ari ? json(*s.ari) : json(nullptr);
  summary["config"] = portable(echo);
  write_json(out / "summary.json", summary);
  if (a.export_embeddings) write_embeddings_csv(data.graph, classes, embed, out / "embeddings.csv");

  std::cout << std::fixed << std::setprecision(4) << a.opt.n_way << "-way " << a.opt.k_shot
            << "-shot accuracy: " << s.mean << " +/- " << s.ci95;
  if (s.nmi) std::cout << "  nmi " << *s.nmi << "  ari " << *s.ari;
  std::cout << '\n';
}

void cmd_eval(CLI::App* app, const EvalArgs& in) {
  EvalArgs a = in;
  const json header = read_checkpoint_header(a.checkpoint);
  inherit_from_checkpoint(app, a, header.value("config", json::object()));
  if (a.out.empty()) a.out = (fs::path(a.checkpoint).parent_path() / "eval").string();
  if (a.precision.empty()) a.precision = header.value("dtype", "f32");
  if (a.opt.n_way < 2 || a.opt.k_shot < 1 || a.opt.query_per_task < 1 || a.opt.num_tasks < 1 ||
      a.opt.repetitions < 1 || a.subgraph_size < 0 || !(a.zeta > 0.0 && a.zeta <= 1.0) ||
      a.opt.logreg.weight_decay < 0.0 || a.cluster_trials < 0)
    throw UsageError("invalid evaluation settings");
  const Data data = load_data(a.data);
  if (static_cast<int>(data.split.test.size()) < a.opt.n_way)
    throw UsageError("n-way " + std::to_string(a.opt.n_way) + " exceeds the " +
                     std::to_string(data.split.test.size()) + " test classes");

  ensure_dir(a.out);
  const json echo = echo_eval(a);
  write_json(fs::path(a.out) / "config_echo.json", echo);
  if (a.precision == "f64")
    run_eval<double>(a, data, echo);
  else
    run_eval<float>(a, data, echo);
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  std::vector<std::string> summaries;
  std::string out = "report.csv";
};

void cmd_report(const ReportArgs& a) {
  if (a.summaries.empty()) throw UsageError("report needs at least one summary file");
  struct Acc {
    double mean = 0.0, ci95 = 0.0;
    int runs = 0;
  };
  std::map<std::tuple<int, int, int>, Acc> groups;
  for (const auto& path : a.summaries) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    try {
      const json j = json::parse(in);
      auto& g = groups[{j.at("n_way").get<int>(), j.at("k_shot").get<int>(), j.at("subgraph_size").get<int>()}];
      g.mean += j.at("mean").get<double>();
      g.ci95 += j.at("ci95").get<double>();
      ++g.runs;
    } catch (const json::exception& e) {
      throw Error("malformed summary " + path + ": " + e.what());
    }
  }

  std::ofstream csv(a.out, std::ios::binary);
  if (!csv) throw Error("cannot write " + a.out);
  csv << "n_way,k_shot,subgraph_size,mean,ci95,runs\n";
  std::cout << std::setw(6) << "n_way" << std::setw(7) << "k_shot" << std::setw(10) << "subgraph" << std::setw(10)
            << "mean" << std::setw(9) << "ci95" << std::setw(6) << "runs" << '\n';
  for (const auto& [key, g] : groups) {
    const auto [n, k, ks] = key;
    const double mean = g.mean / g.runs, ci = g.ci95 / g.runs;
    csv << n << ',' << k << ',' << ks << ',' << num(mean) << ',' << num(ci) << ',' << g.runs << '\n';
    std::cout << std::setw(6) << n << std::setw(7) << k << std::setw(10) << ks << std::fixed << std::setprecision(4)
              << std::setw(10) << mean << std::setw(9) << ci << std::setw(6) << g.runs << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"Contrastive meta-learning for few-shot node classification"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  app.fallthrough();
  const auto formatter = std::make_shared<JsonOrTomlConfig>();
  formatter->section = find_subcommand(argc, argv, {"train", "eval"});
  app.set_config("--config", "", "key=value or JSON config file; flags take precedence");
  app.config_formatter(formatter);
  app.allow_config_extras(CLI::config_extras_mode::error);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Meta-train an encoder");
  train->allow_config_extras(CLI::config_extras_mode::error);
  add_data_options(train, ta.data);
  train->add_option("--episodes", ta.cfg.episodes, "Meta-training episodes T")->capture_default_str();
  train->add_option("--n-way", ta.cfg.n_way, "Classes per task N")->capture_default_str();
  train->add_option("--k-shot", ta.cfg.k_shot, "Support nodes per class K")->capture_default_str();
  train->add_option("--query-per-task", ta.cfg.query_per_task, "Query nodes per task")->capture_default_str();
  train->add_option("--subgraph-size", ta.cfg.subgraph_size, "PPR neighbours per subgraph K_s")->capture_default_str();
  train->add_option("--zeta", ta.cfg.zeta, "PPR restart probability")->capture_default_str();
  train->add_option("--tau", ta.cfg.tau, "Contrastive temperature")->capture_default_str();
  train->add_option("--hidden-dim", ta.cfg.hidden_dim, "Embedding width")->capture_default_str();
  train->add_option("--lr-mc", ta.cfg.lr_mc, "Inner contrastive step size")->capture_default_str();
  train->add_option("--lr-ce", ta.cfg.lr_ce, "Outer Adam learning rate")->capture_default_str();
  train->add_option("--mixup", ta.mixup, "Mix-up augmentation")->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  train->add_option("--mixup-c", ta.cfg.mixup.magnitude, "Mix-up alpha bound C")->capture_default_str();
  train->add_option("--mixup-beta", ta.cfg.mixup.beta, "Mix-up Beta shape beta")->capture_default_str();
  train->add_option("--contrastive", ta.contrastive, "Inner contrastive step")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  train->add_option("--inner-opt", ta.inner_opt, "Inner optimiser")
      ->check(CLI::IsMember({"sgd", "adam"}))
      ->capture_default_str();
  train->add_option("--self-exclusion", ta.self_exclusion, "Self-pair correction in the MI term")
      ->check(CLI::IsMember({"same-view", "first-view"}))
      ->capture_default_str();
  train->add_option("--seed", ta.cfg.seed, "Master seed")->capture_default_str();
  train->add_option("--workers", ta.cfg.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--out", ta.out, "Output directory")->capture_default_str();
  train->add_option("--precision", ta.precision, "Scalar type")->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate a frozen encoder on meta-test tasks");
  eval->allow_config_extras(CLI::config_extras_mode::error);
  add_data_options(eval, ea.data);
  eval->add_option("--checkpoint", ea.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--n-way", ea.opt.n_way, "Classes per task (default: training value)");
  eval->add_option("--k-shot", ea.opt.k_shot, "Support nodes per class (default: training value)");
  eval->add_option("--query-per-task", ea.opt.query_per_task, "Query nodes per task");
  eval->add_option("--tasks", ea.opt.num_tasks, "Tasks per repetition")->capture_default_str();
  eval->add_option("--repetitions", ea.opt.repetitions, "Repetitions")->capture_default_str();
  eval->add_option("--subgraph-size", ea.subgraph_size, "PPR neighbours (default: training value)");
  eval->add_option("--zeta", ea.zeta, "PPR restart probability (default: training value)");
  eval->add_option("--weight-decay", ea.opt.logreg.weight_decay, "Logistic-regression L2 coefficient")
      ->capture_default_str();
  eval->add_option("--cluster-trials", ea.cluster_trials, "k-means NMI/ARI trials, 0 to skip")->capture_default_str();
  eval->add_flag("--export-embeddings", ea.export_embeddings, "Also write embeddings.csv");
  eval->add_option("--seed", ea.opt.seed, "Evaluation seed (default: derived from the training seed)");
  eval->add_option("--workers", ea.opt.workers, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--out", ea.out, "Output directory (default: <checkpoint dir>/eval)");
  eval->add_option("--precision", ea.precision, "Scalar type (default: checkpoint dtype)")
      ->check(CLI::IsMember({"f32", "f64"}));

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Tabulate summary.json files");
  report->add_option("summaries", ra.summaries, "summary.json files")->check(CLI::ExistingFile);
  report->add_option("--out", ra.out, "Aggregated CSV path")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train) cmd_train(ta);
    if (*eval) cmd_eval(eval, ea);
    if (*report) cmd_report(ra);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
