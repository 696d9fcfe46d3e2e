#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "rpdlab/errors.h"
#include "rpdlab/stats.h"

using namespace rpdlab;

namespace {

RoundRecord record(std::string treatment, int graph, int supergame, int round, int subject,
                   Action action, std::optional<double> belief = std::nullopt) {
  RoundRecord r;
  r.session = 1;
  r.treatment = std::move(treatment);
  r.graph = graph;
  r.supergame = supergame;
  r.round = round;
  r.subject = subject;
  r.partner = subject % 2 ? subject + 1 : subject - 1;
  r.action = action;
  r.partner_action = action;
  r.belief = belief;
  return r;
}

// Exact one-sided p by direct pair counting over every relabelling.
double brute_force_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto u_of = [](const std::vector<double>& x, const std::vector<double>& y) {
    double u = 0;
    for (double xi : x)
      for (double yj : y) u += xi > yj ? 1.0 : (xi == yj ? 0.5 : 0.0);
    return u;
  };
  const double observed = u_of(a, b);
  std::vector<bool> mask(pooled.size(), false);
  std::fill(mask.begin(), mask.begin() + a.size(), true);
  std::sort(mask.begin(), mask.end());
  int total = 0, extreme = 0;
  do {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < pooled.size(); ++i) (mask[i] ? x : y).push_back(pooled[i]);
    ++total;
    extreme += u_of(x, y) >= observed - 1e-9;
  } while (std::next_permutation(mask.begin(), mask.end()));
  return static_cast<double>(extreme) / total;
}

}  // namespace

TEST_CASE("cooperation table") {
  SessionDataset data;
  for (int g = 1; g <= 3; ++g)
    for (int sg = 1; sg <= 5; ++sg)
      for (int r = 1; r <= 2; ++r)
        for (int s = 1; s <= 6; ++s)
          data.push_back(record("Comm70", g, sg, r, (g - 1) * 6 + s, Action::kCooperate));
  for (auto scope : {RoundScope::kFirst, RoundScope::kAll}) {
    const CooperationTable t = cooperation_table(data, scope);
    REQUIRE(t.treatments == std::vector<std::string>{"Comm70"});
    REQUIRE(t.n_supergames == 5);
    for (const Cell& c : t.cells[0]) {
      CHECK(c.mean == 1.0);
      CHECK(c.sd == 0.0);
      CHECK(c.units == 3);
    }
    CHECK(t.overall[0].mean == 1.0);
  }

  SessionDataset alt;
  const Action seq[] = {Action::kCooperate, Action::kDefect, Action::kCooperate, Action::kDefect};
  for (int s = 1; s <= 4; ++s) alt.push_back(record("NoComm0", 1, 1, 1, s, seq[s - 1]));
  const CooperationTable t = cooperation_table(alt, RoundScope::kFirst);
  CHECK(t.cells[0][0].mean == 0.5);

  SessionDataset shuffled = data;
  shuffled.push_back(record("NoComm0", 1, 1, 1, 1, Action::kDefect));
  const CooperationTable before = cooperation_table(shuffled, RoundScope::kAll);
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(3));
  const CooperationTable after = cooperation_table(shuffled, RoundScope::kAll);
  REQUIRE(before.cells.size() == after.cells.size());
  for (std::size_t i = 0; i < before.cells.size(); ++i)
    for (std::size_t j = 0; j < before.cells[i].size(); ++j) {
      CHECK(before.cells[i][j].units == after.cells[i][j].units);
      if (before.cells[i][j].units == 0) continue;
      CHECK(before.cells[i][j].mean == after.cells[i][j].mean);
      CHECK(before.cells[i][j].sd == after.cells[i][j].sd);
    }
  CHECK(before.treatments == std::vector<std::string>{"NoComm0", "Comm70"});

  CHECK_THROWS_AS(cooperation_table({}, RoundScope::kFirst), ValidationError);
  SessionDataset unknown = alt;
  unknown[0].treatment = "Mystery";
  CHECK_THROWS_AS(cooperation_table(unknown, RoundScope::kFirst), ValidationError);
}

TEST_CASE("cooperation by unit") {
  SessionDataset data;
  // graph 1 cooperates in supergame 1 only, graph 2 always.
  for (int g = 1; g <= 2; ++g)
    for (int sg = 1; sg <= 2; ++sg)
      for (int s = 1; s <= 2; ++s)
        data.push_back(record("Comm0", g, sg, 1, (g - 1) * 2 + s,
                              g == 2 || sg == 1 ? Action::kCooperate : Action::kDefect));
  auto by_graph = cooperation_by_unit(data, "Comm0", RoundScope::kFirst, std::nullopt,
                                      AggregationUnit::kGraph);
  std::sort(by_graph.begin(), by_graph.end());
  CHECK(by_graph == std::vector<double>{0.5, 1.0});
  auto by_subject = cooperation_by_unit(data, "Comm0", RoundScope::kFirst, 2,
                                        AggregationUnit::kSubject);
  std::sort(by_subject.begin(), by_subject.end());
  CHECK(by_subject == std::vector<double>{0, 0, 1, 1});
  CHECK(parse_unit("graph") == AggregationUnit::kGraph);
  CHECK(parse_unit("subject") == AggregationUnit::kSubject);
  CHECK_THROWS_AS(parse_unit("pair"), ValidationError);
}

TEST_CASE("belief summary") {
  SessionDataset data;
  const double beliefs[] = {10, 20, 30, 40};
  const Action acts[] = {Action::kDefect, Action::kDefect, Action::kCooperate, Action::kCooperate};
  for (int s = 1; s <= 4; ++s) data.push_back(record("NoComm70", 1, 1, 1, s, acts[s - 1], beliefs[s - 1]));
  const BeliefSummary summary = belief_summary(data);
  REQUIRE(summary.rows.size() == 1);
  const BeliefRow& row = summary.rows[0];
  CHECK(row.n == 4);
  CHECK(row.mean == 25.0);
  CHECK(row.median == 25.0);
  CHECK(row.sd == doctest::Approx(std::sqrt(500.0 / 3.0)));
  CHECK(row.above_cooperate == 2);
  CHECK(row.above_defect == 0);
  CHECK(row.below_defect == 2);
  CHECK(row.below_cooperate == 0);
  CHECK(row.at_median == 0);

  SessionDataset flat;
  for (int s = 1; s <= 4; ++s) flat.push_back(record("NoComm70", 1, 5, 1, s, acts[s - 1], 50.0));
  const BeliefRow& tied = belief_summary(flat).rows[0];
  CHECK(tied.above_cooperate + tied.above_defect == 0);
  CHECK(tied.below_cooperate + tied.below_defect == 0);
  CHECK(tied.at_median == 4);

  std::ostringstream csv, text;
  write_belief_csv(csv, summary);
  write_belief_text(text, summary);
  CHECK(csv.str().find("treatment,supergame,n,mean,sd,median") == 0);
  CHECK_FALSE(text.str().empty());

  SessionDataset none = data;
  for (auto& r : none) r.belief.reset();
  CHECK_THROWS_AS(belief_summary(none), ValidationError);
}

TEST_CASE("wmw small example") {
  const std::vector<double> a{3, 4}, b{1, 2};
  const TestResult r = wmw_one_sided(a, b);
  CHECK(r.u == 4.0);
  CHECK(r.n_a == 2);
  CHECK(r.n_b == 2);
  CHECK_FALSE(r.degenerate);
  // z = (4 - 2 - 0.5) / sqrt(5/3)
  const double expected = 0.5 * std::erfc((1.5 / std::sqrt(5.0 / 3.0)) / std::sqrt(2.0));
  CHECK(r.p == doctest::Approx(expected).epsilon(1e-12));
  CHECK(r.p == doctest::Approx(0.1226).epsilon(1e-3));
  CHECK(wmw_exact_p(a, b) == doctest::Approx(1.0 / 6.0));
  CHECK(brute_force_p(a, b) == doctest::Approx(1.0 / 6.0));

  const std::vector<double> five{5};
  const TestResult d = wmw_one_sided(five, five);
  CHECK(d.p == 1.0);
  CHECK(d.degenerate);

  CHECK_THROWS_AS(wmw_one_sided(std::vector<double>{}, b), ValidationError);
}

TEST_CASE("exact p agrees with brute-force enumeration") {
  std::mt19937_64 gen(21);
  std::uniform_int_distribution<int> size(1, 6);
  std::uniform_int_distribution<int> value(0, 5);  // heavy ties
  for (int i = 0; i < 300; ++i) {
    std::vector<double> a(size(gen)), b(size(gen));
    for (auto& x : a) x = value(gen);
    for (auto& x : b) x = value(gen);
    CHECK(wmw_exact_p(a, b) == doctest::Approx(brute_force_p(a, b)).epsilon(1e-12));
    CHECK(wmw_exact_p(b, a, Alternative::kLess) ==
          doctest::Approx(brute_force_p(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("wmw label symmetry and monotonicity") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> size(1, 9);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> a(size(gen)), b(size(gen));
    for (auto& x : a) x = std::round(noise(gen) * 3) / 3;
    for (auto& x : b) x = std::round(noise(gen) * 3) / 3;
    const TestResult ab = wmw_one_sided(a, b, Alternative::kGreater);
    const TestResult ba = wmw_one_sided(b, a, Alternative::kLess);
    CHECK(ab.p == doctest::Approx(ba.p).epsilon(1e-12));
    CHECK(ab.p >= 0.0);
    CHECK(ab.p <= 1.0);
    double prev = ab.p;
    for (double shift : {0.1, 0.5, 1.0, 3.0}) {
      std::vector<double> moved = a;
      for (auto& x : moved) x += shift;
      const TestResult r = wmw_one_sided(moved, b);
      // A shift can make every value tie, which is reported as p = 1.
      if (r.degenerate) continue;
      CHECK(r.p <= prev + 1e-12);
      prev = r.p;
    }
  }
}

TEST_CASE("normal approximation tracks the exact p once both samples reach three") {
  std::mt19937_64 gen(8);
  std::uniform_int_distribution<int> size(3, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> a(size(gen)), b(size(gen));
    for (auto& x : a) x = u(gen) + 0.3;
    for (auto& x : b) x = u(gen);
    worst = std::max(worst, std::abs(wmw_one_sided(a, b).p - wmw_exact_p(a, b)));
  }
  CHECK(worst <= 0.03);
}

TEST_CASE("cohens kappa") {
  CHECK(cohens_kappa({{20, 5}, {10, 15}}) == doctest::Approx(0.4));
  std::vector<int> x{1, 2, 3, 1, 2, 3, 3};
  CHECK(cohens_kappa(x, x) == 1.0);
  CHECK(cohens_kappa(std::vector<int>{4, 4}, std::vector<int>{4, 4}) == 1.0);

  // Expand the confusion matrix into label vectors.
  std::vector<std::string> ra, rb;
  const int counts[2][2] = {{20, 5}, {10, 15}};
  const std::string names[2] = {"coop", "other"};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < counts[i][j]; ++k) {
        ra.push_back(names[i]);
        rb.push_back(names[j]);
      }
  CHECK(cohens_kappa(ra, rb) == doctest::Approx(0.4));
  CHECK(cohens_kappa(rb, ra) == doctest::Approx(0.4));
  std::vector<std::string> relabel_a, relabel_b;
  for (auto& s : ra) relabel_a.push_back(s == "coop" ? "zz" : "aa");
  for (auto& s : rb) relabel_b.push_back(s == "coop" ? "zz" : "aa");
  CHECK(cohens_kappa(relabel_a, relabel_b) == doctest::Approx(0.4));

  std::mt19937_64 gen(2);
  std::uniform_int_distribution<int> label(0, 2);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<int> a(20000), b(20000);
    for (auto& v : a) v = label(gen);
    for (auto& v : b) v = label(gen);
    const double k = cohens_kappa(a, b);
    CHECK(std::abs(k) <= 0.05);
    CHECK(k == doctest::Approx(cohens_kappa(b, a)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(cohens_kappa(std::vector<int>{1}, std::vector<int>{1, 2}), ValidationError);
}
