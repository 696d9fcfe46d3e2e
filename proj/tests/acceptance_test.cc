// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rpdlab/cli.h"
#include "rpdlab/dataset_io.h"
#include "rpdlab/game_theory.h"
#include "rpdlab/rng.h"
#include "rpdlab/sim_engine.h"
#include "rpdlab/stats.h"
#include "rpdlab/textlab.h"

using namespace rpdlab;
namespace fs = std::filesystem;

namespace {

const fs::path kData = RPDLAB_DATA_DIR;
constexpr int kReplications = 100;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string cli(std::vector<std::string> args, int* code = nullptr) {
  args.insert(args.begin(), "rpdlab");
  std::ostringstream out, err;
  const int c = run_cli(args, out, err);
  if (code) *code = c;
  return out.str();
}

std::string line_value(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (line.rfind(key + ": ", 0) == 0) return line.substr(key.size() + 2);
  return {};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Manifest without its timestamp line.
std::string manifest_body(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line, out;
  while (std::getline(in, line))
    if (line.rfind("timestamp_utc=", 0) != 0) out += line + '\n';
  return out;
}

// Simpson rule on the untruncated normal density.
double normal_mass(double mean, double sd, double a, double b) {
  constexpr int kSteps = 20000;
  const double h = (b - a) / kSteps;
  const auto pdf = [&](double x) {
    const double z = (x - mean) / sd;
    return std::exp(-0.5 * z * z) / (sd * std::sqrt(2 * std::numbers::pi));
  };
  double s = pdf(a) + pdf(b);
  for (int i = 1; i < kSteps; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(a + i * h);
  return s * h / 3.0;
}

template <typename F>
auto parallel_replications(int n, F f) {
  using R = decltype(f(0));
  std::vector<std::future<R>> jobs;
  for (int i = 0; i < n; ++i) jobs.push_back(std::async(std::launch::async, f, i));
  std::vector<R> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

// ------------------------------------------------------------------ 1

Outcome table_two() {
  const auto run = [](const char* s) {
    return cli({"predict", "-T", "100", "-R", "90", "-P", "80", "-S", s, "-d", "0.75"});
  };
  const auto two = [](const std::string& v) { return v.empty() ? std::string("?") : fmt("%.2f", std::stod(v)); };
  const std::string high = run("70"), low = run("0");
  const std::string got = "S=70: pd " + two(line_value(high, "delta_pd")) + " rd " +
                          two(line_value(high, "delta_rd")) + "; S=0: pd " +
                          two(line_value(low, "delta_pd")) + " rd " + two(line_value(low, "delta_rd"));
  const bool ok = got == "S=70: pd 0.50 rd 0.67; S=0: pd 0.50 rd 0.90";
  return {ok, got};
}

// ------------------------------------------------------------------ 2

double bisect(const NormalizedGame& g, double delta) {
  double lo = 0, hi = 1;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const StrategyValues v = strategy_values(g, Belief(mid), DiscountFactor(delta));
    (v.grim >= v.always_defect ? hi : lo) = mid;
  }
  return hi;
}

Outcome thresholds() {
  std::string detail;
  bool ok = true;
  for (auto [s, expected] : {std::pair{70.0, 1.0 / 3.0}, std::pair{0.0, 0.8}}) {
    const NormalizedGame g = normalize({100, 90, 80, s});
    const CooperationThreshold th = cooperation_threshold(g, DiscountFactor(0.75));
    const double b = bisect(g, 0.75);
    const bool here = !th.never() && std::abs(*th.belief - b) <= 1e-9 &&
                      std::abs(*th.belief - expected) <= 1e-9;
    ok = ok && here;
    detail += fmt("S=%g: ", s) + (th.never() ? std::string("never") : fmt("%.12f", *th.belief)) +
              fmt(" vs bisection %.12f; ", b);
  }
  return {ok, detail};
}

// ------------------------------------------------------------------ 3

Outcome statics() {
  const auto start = std::chrono::steady_clock::now();
  const StaticsReport r = check_comparative_statics(10000, 20240601);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {r.samples == 10000 && r.violations.empty() && secs < 1.0,
          std::to_string(r.samples) + " tuples, " + std::to_string(r.violations.size()) +
              " violations, " + fmt("%.3f s", secs)};
}

// ------------------------------------------------------------------ 4

Outcome continuation() {
  Rng rng(derive_seed(4, 0, 0));
  constexpr int kSupergames = 100000;
  double total = 0;
  for (int i = 0; i < kSupergames; ++i) total += supergame_length(DiscountFactor(0.75), rng);
  const double mean = total / kSupergames;
  return {mean >= 3.9 && mean <= 4.1, fmt("mean length %.4f over 1e5 supergames", mean)};
}

// ------------------------------------------------------------------ 5

Outcome matching() {
  int good = 0;
  for (int seed = 0; seed < kReplications; ++seed) {
    Rng rng(derive_seed(5, seed, 0));
    const MatchSchedule s = shuffled_schedule(6, 5, rng);
    std::map<std::pair<int, int>, int> count;
    bool per_round_ok = true;
    for (const auto& round : s.pairs) {
      std::set<int> seen;
      for (auto [a, b] : round) {
        ++count[{std::min(a, b), std::max(a, b)}];
        seen.insert(a);
        seen.insert(b);
      }
      per_round_ok = per_round_ok && seen.size() == 6 && round.size() == 3;
    }
    bool all_once = count.size() == 15;
    for (auto [p, c] : count) all_once = all_once && c == 1 && p.first >= 0 && p.second < 6;
    good += per_round_ok && all_once;
  }
  return {good == kReplications, std::to_string(good) + "/100 schedules realize all 15 pairs once"};
}

// ------------------------------------------------------------------ 6, 7

const std::vector<std::string> kOrder{"Comm70", "Comm0", "NoComm70", "NoComm0"};

struct Replication {
  // [treatment][supergame-1]: round-1 cooperators and subjects.
  std::map<std::string, std::vector<std::pair<int, int>>> round_one;
  std::map<std::string, double> p;  // hypothesis tests
};

Replication replicate(int rep) {
  const SessionDataset data = run_treatment_suite(calibrated_design(), derive_seed(6, rep, 0));
  Replication r;
  for (const auto& t : kOrder) r.round_one[t].assign(5, {0, 0});
  for (const auto& row : data) {
    if (row.round != 1) continue;
    auto& cell = r.round_one[row.treatment][row.supergame - 1];
    cell.first += row.action == Action::kCooperate;
    ++cell.second;
  }
  const auto test = [](std::vector<double> a, std::vector<double> b) {
    return wmw_one_sided(a, b, Alternative::kGreater, AggregationUnit::kGraph).p;
  };
  const auto beliefs = [&](const char* t, int sg) {
    return belief_by_unit(data, t, sg, AggregationUnit::kGraph);
  };
  const auto coop = [&](const char* t, std::optional<int> sg) {
    return cooperation_by_unit(data, t, RoundScope::kFirst, sg, AggregationUnit::kGraph);
  };
  r.p["H1a beliefs sg1"] = test(beliefs("Comm70", 1), beliefs("NoComm70", 1));
  r.p["H1a beliefs sg5"] = test(beliefs("Comm70", 5), beliefs("NoComm70", 5));
  r.p["H1b beliefs sg1"] = test(beliefs("Comm0", 1), beliefs("NoComm0", 1));
  r.p["H1b beliefs sg5"] = test(beliefs("Comm0", 5), beliefs("NoComm0", 5));
  r.p["H3a round-1 coop sg5"] = test(coop("Comm70", 5), coop("NoComm70", 5));
  r.p["H3a round-1 coop all sg"] = test(coop("Comm70", std::nullopt), coop("NoComm70", std::nullopt));
  r.p["H3b round-1 coop sg5"] = test(coop("Comm0", 5), coop("NoComm0", 5));
  r.p["H3b round-1 coop all sg"] = test(coop("Comm0", std::nullopt), coop("NoComm0", std::nullopt));
  return r;
}

std::vector<Replication>& replications() {
  static std::vector<Replication> reps = parallel_replications(kReplications, replicate);
  return reps;
}

Outcome ordering() {
  const auto& reps = replications();
  int ordered = 0;
  std::map<int, int> ordered_by_sg;
  for (const auto& r : reps) {
    bool all = true;
    for (int sg = 2; sg <= 5; ++sg) {
      bool here = true;
      for (std::size_t i = 0; i + 1 < kOrder.size(); ++i) {
        const auto [c1, n1] = r.round_one.at(kOrder[i])[sg - 1];
        const auto [c2, n2] = r.round_one.at(kOrder[i + 1])[sg - 1];
        here = here && static_cast<double>(c1) / n1 > static_cast<double>(c2) / n2;
      }
      ordered_by_sg[sg] += here;
      all = all && here;
    }
    ordered += all;
  }

  // Analytic oracle: truncated-normal mass above the threshold, pooled over
  // all replications.
  double worst = 0;
  std::string worst_cell;
  std::string rates;
  for (const auto& cfg : calibrated_design()) {
    const CooperationThreshold th = cooperation_threshold(normalize(cfg.payoffs), DiscountFactor(cfg.delta));
    const double cut = th.never() ? 100.0 : 100.0 * *th.belief;
    for (int sg = 1; sg <= 5; ++sg) {
      const BeliefDistribution d = cfg.belief_model.at(sg, cfg.n_supergames);
      const double oracle = th.never() ? 0.0
                                       : normal_mass(d.mean, d.sd, cut, 100.0) /
                                             normal_mass(d.mean, d.sd, 0.0, 100.0);
      int c = 0, n = 0;
      for (const auto& r : reps) {
        c += r.round_one.at(cfg.name)[sg - 1].first;
        n += r.round_one.at(cfg.name)[sg - 1].second;
      }
      const double rate = static_cast<double>(c) / n;
      if (std::abs(rate - oracle) > worst) {
        worst = std::abs(rate - oracle);
        worst_cell = cfg.name + " sg" + std::to_string(sg);
      }
      if (sg == 5) rates += cfg.name + fmt(" %.3f", rate) + fmt("/%.3f ", oracle);
    }
  }
  std::string detail = "ordering held in " + std::to_string(ordered) + "/100 (per supergame 2-5:";
  for (auto [sg, n] : ordered_by_sg) detail += " " + std::to_string(n);
  detail += "); max |rate - analytic mass| " + fmt("%.4f", worst) + " at " + worst_cell +
            "; sg5 simulated/analytic: " + rates;
  return {ordered >= 95 && worst <= 0.03, detail};
}

Outcome hypotheses() {
  const auto& reps = replications();
  std::map<std::string, int> rejected;
  for (const auto& r : reps)
    for (const auto& [name, p] : r.p) rejected[name] += p < 0.05;
  bool ok = true;
  std::string detail;
  for (const auto& [name, n] : rejected) {
    ok = ok && n >= 90;
    detail += name + " " + std::to_string(n) + "/100; ";
  }
  return {ok, detail};
}

// ------------------------------------------------------------------ 8

Outcome wmw_accuracy() {
  std::mt19937_64 gen(8);
  std::uniform_int_distribution<int> size(1, 8);
  std::uniform_real_distribution<double> shift(-1.0, 2.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  double worst = 0, worst_big = 0;
  int worst_n = 0, worst_m = 0, over = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> a(size(gen)), b(size(gen));
    const double d = shift(gen);
    for (auto& x : a) x = noise(gen) + d;
    for (auto& x : b) x = noise(gen);
    const double err = std::abs(wmw_one_sided(a, b).p - wmw_exact_p(a, b));
    over += err > 0.03;
    if (err > worst) worst = err, worst_n = static_cast<int>(a.size()), worst_m = static_cast<int>(b.size());
    if (std::min(a.size(), b.size()) >= 3) worst_big = std::max(worst_big, err);
  }
  return {worst <= 0.03,
          fmt("max |approx - exact| %.4f", worst) + " (n=" + std::to_string(worst_n) +
              ", m=" + std::to_string(worst_m) + "), " + std::to_string(over) +
              "/1000 instances above 0.03" + fmt("; max with n,m >= 3: %.4f", worst_big)};
}

// ------------------------------------------------------------------ 9

Outcome kappa() {
  const double k = cohens_kappa({{20, 5}, {10, 15}});
  const std::vector<int> v{0, 1, 1, 2, 0, 2, 1};
  const double same = cohens_kappa(v, v);
  return {std::abs(k - 0.4) <= 1e-12 && same == 1.0, fmt("kappa %.12f", k) + fmt(", identical %.1f", same)};
}

// ------------------------------------------------------------------ 10

Outcome clustering() {
  constexpr int kDim = 8, kPerCluster = 50;
  constexpr double kSd = 1.0;
  int good = 0;
  bool traces_ok = true;
  std::string failures;
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 gen(derive_seed(10, seed, 0));
    std::normal_distribution<double> noise(0.0, kSd);
    // Topic words sum to the blob centre; one private token per document
    // carries the within-blob noise. Centres are 10 sd apart.
    EmbeddingTable table;
    table.dimension = kDim;
    const std::vector<std::string> topic[2] = {{"vertrauen", "gemeinsam", "kooperieren"},
                                               {"risiko", "vorsicht", "lieber"}};
    for (int c = 0; c < 2; ++c)
      for (int w = 0; w < 3; ++w) {
        std::vector<double> v(kDim, 0.0);
        v[c] = 10.0 * kSd / 4.0 / std::sqrt(2.0);
        table.vectors[topic[c][w]] = v;
      }
    table.vectors["hallo"] = std::vector<double>(kDim, 0.0);
    ChatCorpus corpus;
    std::vector<int> planted;
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < kPerCluster; ++i) {
        const std::string own = "doc" + std::to_string(c) + "x" + std::to_string(i);
        std::vector<double> v(kDim);
        for (auto& x : v) x = noise(gen);
        table.vectors[own] = v;
        corpus.documents.push_back(
            {own, "Hallo " + topic[c][0] + " " + topic[c][1] + " " + topic[c][2] + " " +
                      topic[c][i % 3] + " " + own});
        planted.push_back(c);
      }
    const auto tokens = preprocess(corpus, {});
    std::vector<Point> points;
    for (std::size_t i = 0; i < tokens.size(); ++i)
      points.push_back(embed_document(corpus.documents[i].id, tokens[i], table).values);

    const WcssCurve curve = wcss_curve(points, 8, derive_seed(10, seed, 1), 10);
    for (const auto& run : curve.best)
      for (std::size_t i = 1; i < run.wcss_trace.size(); ++i)
        traces_ok = traces_ok && run.wcss_trace[i] <= run.wcss_trace[i - 1];
    const ElbowChoice elbow = select_k(curve.points);
    bool ok = elbow.k == 2;
    if (ok) {
      const ClusteringResult& two = curve.best[1];
      ok = rand_index(two.assignment, planted) == 1.0;
      const RankTable ranks = rank_and_rrd(two, tokens, 30);
      std::set<std::string> flagged;
      for (const auto& row : ranks.rows)
        if (row.distinguishing) flagged.insert(row.token);
      for (const auto& group : topic)
        for (const auto& w : group) ok = ok && flagged.contains(w);
      ok = ok && !flagged.contains("hallo");
    }
    if (!ok) failures += " seed " + std::to_string(seed) + " (k=" + std::to_string(elbow.k) + ")";
    good += ok;
  }
  return {good == 20 && traces_ok,
          std::to_string(good) + "/20 seeds: elbow k=2, Rand 1.0, topic tokens flagged; traces " +
              (traces_ok ? "non-increasing" : "INCREASED") + failures};
}

// ------------------------------------------------------------------ 11

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "rpdlab_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  bool ok = true;
  std::string detail;
  for (const char* tag : {"a", "b"}) {
    int code = 0;
    cli({"simulate", "-c", (kData / "canonical.cfg").string(), "-o", (dir / (std::string(tag) + ".csv")).string(),
         "--seed", "11"},
        &code);
    ok = ok && code == kExitOk;
    cli({"cluster-chats", "--corpus", (kData / "chats").string(), "--embeddings",
         (kData / "embeddings.vec").string(), "--stopwords", (kData / "stopwords.txt").string(),
         "--seed", "11", "--k-max", "5", "-o", (dir / (std::string("c") + tag)).string()},
        &code);
    ok = ok && code == kExitOk;
  }
  const bool sim = slurp(dir / "a.csv") == slurp(dir / "b.csv") && !slurp(dir / "a.csv").empty() &&
                   manifest_body(dir / "a.csv.manifest") ==
                       manifest_body(dir / "b.csv.manifest").replace(
                           manifest_body(dir / "b.csv.manifest").find("b.csv"), 5, "a.csv");
  bool chats = true;
  for (auto f : {"assignments.csv", "wcss_curve.csv"})
    chats = chats && fs::exists(dir / "ca" / f) && slurp(dir / "ca" / f) == slurp(dir / "cb" / f);
  if (fs::exists(dir / "ca" / "rrd.csv")) chats = chats && slurp(dir / "ca" / "rrd.csv") == slurp(dir / "cb" / "rrd.csv");
  chats = chats && manifest_body(dir / "ca" / "manifest.txt") == manifest_body(dir / "cb" / "manifest.txt");
  fs::remove_all(dir);
  detail = std::string("simulate ") + (sim ? "identical" : "DIFFERENT") + ", cluster-chats " +
           (chats ? "identical" : "DIFFERENT");
  return {ok && sim && chats, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 critical discount factors for both games", table_two},
      {"2 cooperation thresholds vs bisection", thresholds},
      {"3 comparative statics property suite", statics},
      {"4 mean supergame length", continuation},
      {"5 perfect-stranger schedules", matching},
      {"6 round-1 cooperation ordering and analytic mass", ordering},
      {"7 communication effects on beliefs and cooperation", hypotheses},
      {"8 WMW normal approximation vs exact p", wmw_accuracy},
      {"9 Cohen's kappa", kappa},
      {"10 planted two-topic corpus", clustering},
      {"11 byte-identical reruns", determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
