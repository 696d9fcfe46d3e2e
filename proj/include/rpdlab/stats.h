#ifndef RPDLAB_STATS_H_
#define RPDLAB_STATS_H_

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rpdlab/errors.h"
#include "rpdlab/sim_engine.h"

namespace rpdlab {

enum class RoundScope { kFirst, kAll };
// Unit whose mean becomes one observation in a table cell or a test.
enum class AggregationUnit { kGraph, kSubject };

std::string_view scope_name(RoundScope scope);
std::string_view unit_name(AggregationUnit unit);
AggregationUnit parse_unit(std::string_view name);

struct Cell {
  double mean = 0.0;
  double sd = 0.0;  // sample sd over units, 0 for a single unit
  std::size_t units = 0;
};

// Cooperation rate per treatment and supergame, computed as the mean and
// sd of graph-level rates.
struct CooperationTable {
  RoundScope scope = RoundScope::kFirst;
  std::vector<std::string> treatments;  // canonical order, present ones only
  int n_supergames = 0;
  std::vector<std::vector<Cell>> cells;  // [treatment][supergame - 1]
  std::vector<Cell> overall;             // mean over supergames per graph
};

CooperationTable cooperation_table(const SessionDataset& data, RoundScope scope);

// One cooperation rate per unit. `supergame` = nullopt averages the unit's
// per-supergame rates.
std::vector<double> cooperation_by_unit(const SessionDataset& data, std::string_view treatment,
                                        RoundScope scope, std::optional<int> supergame,
                                        AggregationUnit unit);

// Mean elicited belief per unit in one supergame.
std::vector<double> belief_by_unit(const SessionDataset& data, std::string_view treatment,
                                   int supergame, AggregationUnit unit);

struct BeliefRow {
  std::string treatment;
  int supergame = 0;
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  // Subjects strictly above / below the median, split by their action in
  // the elicitation round. Beliefs equal to the median are counted in
  // at_median only.
  int above_cooperate = 0;
  int above_defect = 0;
  int below_cooperate = 0;
  int below_defect = 0;
  int at_median = 0;
};

struct BeliefSummary {
  std::vector<BeliefRow> rows;
};

// Throws ValidationError when the dataset carries no beliefs.
BeliefSummary belief_summary(const SessionDataset& data);

enum class Alternative { kGreater, kLess };

struct TestResult {
  double u = 0.0;  // Mann-Whitney U of sample a
  double p = 1.0;  // one-sided
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  AggregationUnit unit = AggregationUnit::kGraph;
  // Set when every observation is tied, so the variance vanishes.
  bool degenerate = false;
};

// One-sided Wilcoxon-Mann-Whitney test of `a` against `b` using midranks,
// the tie-corrected normal approximation and a 0.5 continuity correction.
// Inputs are expected to be aggregated to `unit` already.
TestResult wmw_one_sided(std::span<const double> a, std::span<const double> b,
                         Alternative alternative = Alternative::kGreater,
                         AggregationUnit unit = AggregationUnit::kGraph);

// Exact permutation p-value of U over all splits of the pooled midranks.
// Limited to samples of at most 10 each.
double wmw_exact_p(std::span<const double> a, std::span<const double> b,
                   Alternative alternative = Alternative::kGreater);

// Cohen's kappa for two raters over the union of their label alphabets.
// Defined as 1 when both raters use one identical constant label.
template <typename Label>
double cohens_kappa(const std::vector<Label>& a, const std::vector<Label>& b) {
  if (a.size() != b.size()) throw ValidationError("kappa needs equally long label vectors");
  if (a.empty()) throw ValidationError("kappa needs at least one item");
  std::map<Label, std::size_t> index;
  for (const auto& x : a) index.emplace(x, 0);
  for (const auto& x : b) index.emplace(x, 0);
  std::size_t next = 0;
  for (auto& [label, i] : index) i = next++;
  std::vector<double> row(next, 0.0), col(next, 0.0);
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::size_t x = index.at(a[i]);
    const std::size_t y = index.at(b[i]);
    row[x] += 1.0;
    col[y] += 1.0;
    if (x == y) agree += 1.0;
  }
  const double n = static_cast<double>(a.size());
  const double observed = agree / n;
  double expected = 0.0;
  for (std::size_t k = 0; k < next; ++k) expected += (row[k] / n) * (col[k] / n);
  if (expected >= 1.0) return observed >= 1.0 ? 1.0 : 0.0;
  return (observed - expected) / (1.0 - expected);
}

// Kappa from a square confusion matrix (rows: rater a, columns: rater b).
double cohens_kappa(const std::vector<std::vector<double>>& confusion);

void write_cooperation_csv(std::ostream& os, const CooperationTable& table);
void write_cooperation_text(std::ostream& os, const CooperationTable& table);
void write_belief_csv(std::ostream& os, const BeliefSummary& summary);
void write_belief_text(std::ostream& os, const BeliefSummary& summary);

}  // namespace rpdlab

#endif  // RPDLAB_STATS_H_
