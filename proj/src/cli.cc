#include "rpdlab/cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "rpdlab/dataset_io.h"
#include "rpdlab/errors.h"
#include "rpdlab/game_theory.h"
#include "rpdlab/rng.h"
#include "rpdlab/sim_engine.h"
#include "rpdlab/stats.h"
#include "rpdlab/textlab.h"

namespace rpdlab {
namespace {

namespace fs = std::filesystem;

std::string fixed4(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << x;
  return os.str();
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void add_versions(RunManifest& m) {
  m.extra.emplace_back("rng_algorithm", std::string(kRngAlgorithm));
  m.extra.emplace_back("version.rpdlab", kVersion);
  for (const char* module : {"game_theory", "sim_engine", "stats", "textlab", "cli_io"}) {
    m.extra.emplace_back(std::string("version.") + module, kVersion);
  }
}

void record_outputs(RunManifest& m, const OutputBatch& batch) {
  for (const auto& [path, content] : batch.files()) {
    m.outputs.emplace_back(path.filename().string(), content_hash(content));
  }
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  double T = 0, R = 0, P = 0, S = 0;
  double delta = 0;
  std::optional<double> p_plus;
};

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
  const StagePayoffs game{a.T, a.R, a.P, a.S};
  const PdValidation check = validate_pd(game);
  out << "payoffs: T=" << a.T << " R=" << a.R << " P=" << a.P << " S=" << a.S << '\n';
  if (!check.valid) {
    out << "pd_valid: no\n";
    for (const auto& v : check.violations) {
      out << "violated: " << v << '\n';
      err << "error: not a prisoner's dilemma, " << v << " violated\n";
    }
    return kExitValidation;
  }
  const DiscountFactor delta(a.delta);
  const NormalizedGame g = normalize(game);
  out << "pd_valid: yes\n";
  out << "gain: " << fixed4(g.gain) << '\n';
  out << "loss: " << fixed4(g.loss) << '\n';
  out << "delta: " << fixed4(delta.value()) << '\n';
  out << "delta_pd: " << fixed4(delta_pd(g)) << '\n';
  out << "delta_rd: " << fixed4(delta_rd(g)) << '\n';
  if (a.p_plus) {
    const Belief p(*a.p_plus);
    out << "delta_plus: " << fixed4(delta_plus(g, p)) << " (p=" << fixed4(p.value()) << ")\n";
    if (!(p.value() > 0.5 && p.value() < 1.0)) {
      err << "note: the communication belief is meant to lie in (0.5, 1)\n";
    }
  }
  const CooperationThreshold th = cooperation_threshold(g, delta);
  out << "cooperation_threshold: " << (th.never() ? std::string("never") : fixed4(*th.belief))
      << '\n';
  out << "grim_at_pareto: " << (delta.value() >= delta_pd(g) ? "yes" : "no") << '\n';
  out << "grim_at_risk_dominance: " << (delta.value() >= delta_rd(g) ? "yes" : "no") << '\n';
  return kExitOk;
}

// --------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const std::string config_bytes = read_bytes(a.config);
  std::istringstream config_in(config_bytes);
  const auto configs = parse_config(config_in, a.config);
  const SessionDataset data = run_treatment_suite(configs, a.seed);

  std::ostringstream csv;
  write_dataset_csv(csv, data);
  OutputBatch batch;
  const fs::path out_path(a.out);
  batch.add(out_path, csv.str());

  RunManifest m;
  m.command = "simulate";
  m.config_hash = content_hash(config_bytes);
  m.master_seed = a.seed;
  m.has_seed = true;
  m.inputs.emplace_back(fs::path(a.config).filename().string(), m.config_hash);
  record_outputs(m, batch);
  add_versions(m);
  m.timestamp_utc = utc_now();
  fs::path manifest_path = out_path;
  manifest_path += ".manifest";
  batch.add(manifest_path, render_manifest(m));
  batch.commit();

  out << "simulated " << configs.size() << " treatment(s), " << data.size() << " rows -> "
      << a.out << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string data;
  std::string out_dir;
  std::string unit = "graph";
};

struct Comparison {
  const char* a;
  const char* b;
};

constexpr Comparison kCooperationPairs[] = {
    {"Comm70", "Comm0"}, {"NoComm70", "NoComm0"}, {"Comm70", "NoComm70"}, {"Comm0", "NoComm0"}};
constexpr Comparison kBeliefPairs[] = {{"Comm70", "NoComm70"}, {"Comm0", "NoComm0"}};

struct TestRow {
  std::string measure;
  std::string supergames;
  std::string a;
  std::string b;
  TestResult result;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  const AggregationUnit unit = parse_unit(a.unit);
  const std::string data_bytes = read_bytes(a.data);
  std::istringstream data_in(data_bytes);
  const SessionDataset data = read_dataset_csv(data_in, a.data);

  const CooperationTable first = cooperation_table(data, RoundScope::kFirst);
  const CooperationTable all = cooperation_table(data, RoundScope::kAll);
  std::optional<BeliefSummary> beliefs;
  const bool has_beliefs =
      std::any_of(data.begin(), data.end(), [](const RoundRecord& r) { return r.belief; });
  if (has_beliefs) {
    beliefs = belief_summary(data);
  } else {
    err << "notice: no elicited beliefs in the data, belief summary skipped\n";
  }

  const auto present = [&](const char* t) {
    return std::find(first.treatments.begin(), first.treatments.end(), t) != first.treatments.end();
  };
  const int last_sg = first.n_supergames;
  std::vector<TestRow> tests;
  for (const auto& [ta, tb] : kCooperationPairs) {
    if (!present(ta) || !present(tb)) continue;
    for (RoundScope scope : {RoundScope::kFirst, RoundScope::kAll}) {
      const std::string measure = std::string("cooperation_") + std::string(scope_name(scope));
      const std::pair<std::string, std::optional<int>> windows[] = {
          {"first", 1}, {"final", last_sg}, {"all", std::nullopt}};
      for (const auto& [label, sg] : windows) {
        const auto xa = cooperation_by_unit(data, ta, scope, sg, unit);
        const auto xb = cooperation_by_unit(data, tb, scope, sg, unit);
        if (xa.empty() || xb.empty()) continue;
        tests.push_back({measure, label, ta, tb, wmw_one_sided(xa, xb, Alternative::kGreater, unit)});
      }
    }
  }
  if (beliefs) {
    int final_belief_sg = 1;
    for (const auto& r : beliefs->rows) final_belief_sg = std::max(final_belief_sg, r.supergame);
    for (const auto& [ta, tb] : kBeliefPairs) {
      if (!present(ta) || !present(tb)) continue;
      for (const auto& [label, sg] :
           {std::pair<std::string, int>{"first", 1}, {"final", final_belief_sg}}) {
        const auto xa = belief_by_unit(data, ta, sg, unit);
        const auto xb = belief_by_unit(data, tb, sg, unit);
        if (xa.empty() || xb.empty()) continue;
        tests.push_back({"belief", label, ta, tb, wmw_one_sided(xa, xb, Alternative::kGreater, unit)});
      }
    }
  }

  write_cooperation_text(out, first);
  out << '\n';
  write_cooperation_text(out, all);
  out << '\n';
  if (beliefs) {
    write_belief_text(out, *beliefs);
    out << '\n';
  }
  out << "One-sided Wilcoxon-Mann-Whitney tests (continuity corrected), unit = "
      << unit_name(unit) << '\n';
  for (const auto& t : tests) {
    out << std::left << std::setw(26) << t.measure << std::setw(7) << t.supergames << t.a
        << " > " << t.b << std::right << "  U=" << fixed4(t.result.u)
        << "  p=" << fixed4(t.result.p) << "  n=" << t.result.n_a << '/' << t.result.n_b
        << (t.result.degenerate ? "  [degenerate]" : "") << '\n';
  }

  if (!a.out_dir.empty()) {
    const fs::path dir(a.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    OutputBatch batch;
    std::ostringstream coop_first, coop_all, belief_csv, test_csv;
    write_cooperation_csv(coop_first, first);
    write_cooperation_csv(coop_all, all);
    batch.add(dir / "cooperation_first_round.csv", coop_first.str());
    batch.add(dir / "cooperation_all_rounds.csv", coop_all.str());
    if (beliefs) {
      write_belief_csv(belief_csv, *beliefs);
      batch.add(dir / "beliefs.csv", belief_csv.str());
    }
    test_csv << std::setprecision(17);
    test_csv << "measure,supergames,treatment_a,treatment_b,alternative,unit,n_a,n_b,u,p,degenerate\n";
    for (const auto& t : tests) {
      test_csv << t.measure << ',' << t.supergames << ',' << t.a << ',' << t.b << ",greater,"
               << unit_name(t.result.unit) << ',' << t.result.n_a << ',' << t.result.n_b << ','
               << t.result.u << ',' << t.result.p << ',' << (t.result.degenerate ? 1 : 0) << '\n';
    }
    batch.add(dir / "tests.csv", test_csv.str());
    RunManifest m;
    m.command = "analyze";
    m.inputs.emplace_back(fs::path(a.data).filename().string(), content_hash(data_bytes));
    m.extra.emplace_back("unit", std::string(unit_name(unit)));
    record_outputs(m, batch);
    add_versions(m);
    m.timestamp_utc = utc_now();
    batch.add(dir / "manifest.txt", render_manifest(m));
    batch.commit();
  }
  return kExitOk;
}

// ---------------------------------------------------------- cluster-chats

struct ClusterArgs {
  std::string corpus;
  std::string embeddings;
  std::string k = "auto";
  std::uint64_t seed = 0;
  std::string out_dir;
  int k_max = 8;
  int restarts = 10;
  std::string spelling;
  std::string lemmas;
  std::string stopwords;
  std::string clusters;
  std::size_t top_n = 30;
  std::string distance = "euclidean";
};

std::optional<std::pair<int, int>> parse_pair(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto comma = text.find(',');
  int a = 0, b = 0;
  try {
    if (comma == std::string::npos) throw std::invalid_argument("no comma");
    std::size_t used_a = 0, used_b = 0;
    a = std::stoi(text.substr(0, comma), &used_a);
    b = std::stoi(text.substr(comma + 1), &used_b);
    if (used_a != comma || used_b != text.size() - comma - 1) throw std::invalid_argument("junk");
  } catch (const std::exception&) {
    throw ValidationError("--clusters expects two cluster ids like 0,2");
  }
  return std::pair{a, b};
}

int cmd_cluster(const ClusterArgs& a, std::ostream& out, std::ostream& err) {
  KMeansOptions options;
  if (a.distance == "cosine") {
    options.distance = Distance::kCosine;
  } else if (a.distance != "euclidean") {
    throw ValidationError("--distance must be euclidean or cosine");
  }
  std::optional<int> fixed_k;
  if (a.k != "auto") {
    try {
      std::size_t used = 0;
      fixed_k = std::stoi(a.k, &used);
      if (used != a.k.size()) throw std::invalid_argument("junk");
    } catch (const std::exception&) {
      throw ValidationError("--k must be a positive integer or 'auto'");
    }
    if (*fixed_k < 1) throw ValidationError("--k must be a positive integer or 'auto'");
  }
  const auto designated = parse_pair(a.clusters);

  const ChatCorpus corpus = load_corpus(a.corpus);
  if (corpus.documents.empty()) throw ValidationError("corpus has no documents");
  const PreprocessResources res = load_resources(a.spelling, a.lemmas, a.stopwords);
  const EmbeddingTable table = load_embeddings(a.embeddings);
  for (const auto& w : table.warnings) err << "warning: " << w << '\n';

  const std::vector<TokenList> tokens = preprocess(corpus, res);
  std::vector<Point> points;
  std::vector<std::string> ids;
  std::size_t empty_docs = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    DocumentVector v = embed_document(corpus.documents[i].id, tokens[i], table);
    if (v.empty) ++empty_docs;
    ids.push_back(v.id);
    points.push_back(std::move(v.values));
  }
  if (empty_docs == points.size()) {
    throw ValidationError("no document shares any token with the embedding vocabulary");
  }
  if (empty_docs > 0) {
    err << "warning: " << empty_docs << " document(s) have no in-vocabulary tokens\n";
  }

  const std::size_t distinct = count_distinct(
      options.distance == Distance::kCosine ? unit_normalized(points) : points);
  const int k_max = std::min<int>(a.k_max, static_cast<int>(distinct));
  if (!fixed_k && k_max < 3) {
    throw ValidationError("k = auto needs at least 3 distinct document vectors and --k-max >= 3");
  }
  const WcssCurve curve = wcss_curve(points, k_max, a.seed, a.restarts, options);
  std::optional<ElbowChoice> elbow;
  if (curve.points.size() >= 3) elbow = select_k(curve.points);
  const int k = fixed_k ? *fixed_k : elbow->k;

  ClusteringResult final_run;
  if (k <= k_max) {
    final_run = curve.best[k - 1];
  } else {
    final_run = wcss_curve(points, k, a.seed, a.restarts, options).best.back();
  }

  std::optional<RankTable> ranks;
  if (designated || k == 2) ranks = rank_and_rrd(final_run, tokens, a.top_n, designated);

  const fs::path dir(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  OutputBatch batch;
  std::ostringstream assign_csv, curve_csv;
  write_assignment_csv(assign_csv, ids, final_run);
  write_curve_csv(curve_csv, curve, elbow ? &*elbow : nullptr);
  batch.add(dir / "assignments.csv", assign_csv.str());
  batch.add(dir / "wcss_curve.csv", curve_csv.str());
  if (ranks) {
    std::ostringstream rrd_csv;
    write_rrd_csv(rrd_csv, *ranks);
    batch.add(dir / "rrd.csv", rrd_csv.str());
  }
  RunManifest m;
  m.command = "cluster-chats";
  m.master_seed = a.seed;
  m.has_seed = true;
  m.inputs.emplace_back("embeddings", content_hash(read_bytes(a.embeddings)));
  m.extra.emplace_back("k", std::to_string(k));
  m.extra.emplace_back("k_mode", fixed_k ? "fixed" : "auto");
  m.extra.emplace_back("k_max", std::to_string(k_max));
  m.extra.emplace_back("restarts", std::to_string(a.restarts));
  m.extra.emplace_back("distance", a.distance);
  record_outputs(m, batch);
  add_versions(m);
  m.timestamp_utc = utc_now();
  batch.add(dir / "manifest.txt", render_manifest(m));
  batch.commit();

  out << "documents: " << ids.size() << '\n';
  out << "wcss_curve:";
  for (const auto& p : curve.points) out << ' ' << p.k << ':' << fixed4(p.wcss);
  out << '\n';
  if (!curve.non_increasing) out << "note: WCSS curve is not monotone; consider more restarts\n";
  if (elbow) {
    out << "elbow_k: " << elbow->k << (elbow->flat ? " (flat curve)" : "") << '\n';
    if (elbow->runner_up) out << "elbow_runner_up: " << *elbow->runner_up << '\n';
  }
  out << "k: " << k << '\n';
  out << "final_wcss: " << fixed4(final_run.wcss) << '\n';
  if (ranks) {
    out << "rrd_clusters: " << ranks->cluster_first << ',' << ranks->cluster_second << '\n';
    std::size_t flagged = 0;
    for (const auto& r : ranks->rows) flagged += r.distinguishing ? 1 : 0;
    out << "distinguishing_tokens: " << flagged << " of " << ranks->rows.size() << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Repeated prisoner's dilemma lab: theory, simulation, statistics, chat clustering"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "Critical discount factors and thresholds");
  predict_cmd->add_option("-T,--temptation", predict.T, "Temptation payoff T")->required();
  predict_cmd->add_option("-R,--reward", predict.R, "Reward payoff R")->required();
  predict_cmd->add_option("-P,--punishment", predict.P, "Punishment payoff P")->required();
  predict_cmd->add_option("-S,--sucker", predict.S, "Sucker's payoff S")->required();
  predict_cmd->add_option("-d,--delta", predict.delta, "Continuation probability")->required();
  predict_cmd->add_option("-p,--p-plus", predict.p_plus, "Belief for the communication criterion");

  SimulateArgs simulate;
  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate the treatments of a config file");
  simulate_cmd->add_option("-c,--config", simulate.config, "Treatment config file")->required();
  simulate_cmd->add_option("-o,--out", simulate.out, "Output CSV path")->required();
  simulate_cmd->add_option("--seed", simulate.seed, "Master seed")->required();

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Tables and tests for a dataset CSV");
  analyze_cmd->add_option("-d,--data", analyze.data, "Dataset CSV")->required();
  analyze_cmd->add_option("-o,--out-dir", analyze.out_dir, "Directory for CSV tables");
  analyze_cmd->add_option("--unit", analyze.unit, "Aggregation unit: graph or subject");

  ClusterArgs cluster;
  auto* cluster_cmd = app.add_subcommand("cluster-chats", "Embedding-sum k-means over a chat corpus");
  cluster_cmd->add_option("--corpus", cluster.corpus, "Directory of .txt files or id,text CSV")
      ->required();
  cluster_cmd->add_option("--embeddings", cluster.embeddings, "word2vec text file")->required();
  cluster_cmd->add_option("--k", cluster.k, "Cluster count or 'auto'");
  cluster_cmd->add_option("--seed", cluster.seed, "Seed")->required();
  cluster_cmd->add_option("-o,--out-dir", cluster.out_dir, "Output directory")->required();
  cluster_cmd->add_option("--k-max", cluster.k_max, "Largest k on the WCSS curve");
  cluster_cmd->add_option("--restarts", cluster.restarts, "Seeded runs per k");
  cluster_cmd->add_option("--spelling", cluster.spelling, "Spelling map file");
  cluster_cmd->add_option("--lemmas", cluster.lemmas, "Lemma map file");
  cluster_cmd->add_option("--stopwords", cluster.stopwords, "Stopword file");
  cluster_cmd->add_option("--clusters", cluster.clusters, "Two cluster ids for the rank report");
  cluster_cmd->add_option("--top-n", cluster.top_n, "Tokens in the rank report");
  cluster_cmd->add_option("--distance", cluster.distance, "euclidean or cosine");

  std::vector<std::string> reversed(args.size() > 0 ? args.rbegin() : args.rend(),
                                    args.size() > 0 ? args.rend() - 1 : args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (predict_cmd->parsed()) return cmd_predict(predict, out, err);
    if (simulate_cmd->parsed()) return cmd_simulate(simulate, out);
    if (analyze_cmd->parsed()) return cmd_analyze(analyze, out, err);
    if (cluster_cmd->parsed()) return cmd_cluster(cluster, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitValidation;
}

}  // namespace rpdlab
