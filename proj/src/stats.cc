#include "rpdlab/stats.h"

#include <bit>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

namespace rpdlab {

std::string_view scope_name(RoundScope scope) {
  return scope == RoundScope::kFirst ? "first_round" : "all_rounds";
}

std::string_view unit_name(AggregationUnit unit) {
  return unit == AggregationUnit::kGraph ? "graph" : "subject";
}

AggregationUnit parse_unit(std::string_view name) {
  if (name == "graph") return AggregationUnit::kGraph;
  if (name == "subject") return AggregationUnit::kSubject;
  throw ValidationError("unknown aggregation unit '" + std::string(name) + "'");
}

namespace {

using UnitKey = std::pair<int, int>;

UnitKey unit_key(const RoundRecord& r, AggregationUnit unit) {
  return unit == AggregationUnit::kGraph ? UnitKey{r.session, r.graph}
                                         : UnitKey{r.session, r.subject};
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Cell summarize(const std::vector<double>& v) {
  if (v.empty()) {
    return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(), 0};
  }
  return {mean_of(v), sample_sd(v), v.size()};
}

void check_labels(const SessionDataset& data) {
  if (data.empty()) throw ValidationError("dataset is empty");
  for (const auto& r : data) {
    if (!is_canonical_treatment(r.treatment)) {
      throw ValidationError("unknown treatment label '" + r.treatment + "'");
    }
  }
}

std::vector<std::string> present_treatments(const SessionDataset& data) {
  std::vector<std::string> out;
  for (auto name : kCanonicalTreatments) {
    const bool present = std::any_of(data.begin(), data.end(),
                                     [&](const RoundRecord& r) { return r.treatment == name; });
    if (present) out.emplace_back(name);
  }
  return out;
}

bool in_scope(const RoundRecord& r, RoundScope scope) {
  return scope == RoundScope::kAll || r.round == 1;
}

}  // namespace

std::vector<double> cooperation_by_unit(const SessionDataset& data, std::string_view treatment,
                                        RoundScope scope, std::optional<int> supergame,
                                        AggregationUnit unit) {
  // unit -> supergame -> (cooperations, decisions)
  std::map<UnitKey, std::map<int, std::pair<double, double>>> tally;
  for (const auto& r : data) {
    if (r.treatment != treatment || !in_scope(r, scope)) continue;
    if (supergame && r.supergame != *supergame) continue;
    auto& cell = tally[unit_key(r, unit)][r.supergame];
    cell.first += r.action == Action::kCooperate ? 1.0 : 0.0;
    cell.second += 1.0;
  }
  std::vector<double> out;
  out.reserve(tally.size());
  for (const auto& [key, per_sg] : tally) {
    double sum = 0.0;
    for (const auto& [sg, c] : per_sg) sum += c.first / c.second;
    out.push_back(sum / static_cast<double>(per_sg.size()));
  }
  return out;
}

std::vector<double> belief_by_unit(const SessionDataset& data, std::string_view treatment,
                                   int supergame, AggregationUnit unit) {
  std::map<UnitKey, std::pair<double, double>> tally;
  for (const auto& r : data) {
    if (r.treatment != treatment || r.supergame != supergame || !r.belief) continue;
    auto& t = tally[unit_key(r, unit)];
    t.first += *r.belief;
    t.second += 1.0;
  }
  std::vector<double> out;
  for (const auto& [key, t] : tally) out.push_back(t.first / t.second);
  return out;
}

CooperationTable cooperation_table(const SessionDataset& data, RoundScope scope) {
  check_labels(data);
  CooperationTable table;
  table.scope = scope;
  table.treatments = present_treatments(data);
  for (const auto& r : data) table.n_supergames = std::max(table.n_supergames, r.supergame);
  for (const auto& t : table.treatments) {
    std::vector<Cell> row;
    for (int sg = 1; sg <= table.n_supergames; ++sg) {
      row.push_back(summarize(cooperation_by_unit(data, t, scope, sg, AggregationUnit::kGraph)));
    }
    table.cells.push_back(std::move(row));
    table.overall.push_back(
        summarize(cooperation_by_unit(data, t, scope, std::nullopt, AggregationUnit::kGraph)));
  }
  return table;
}

BeliefSummary belief_summary(const SessionDataset& data) {
  check_labels(data);
  BeliefSummary summary;
  for (const auto& t : present_treatments(data)) {
    std::map<int, std::vector<const RoundRecord*>> by_sg;
    for (const auto& r : data) {
      if (r.treatment == t && r.belief) by_sg[r.supergame].push_back(&r);
    }
    for (const auto& [sg, rows] : by_sg) {
      BeliefRow out;
      out.treatment = t;
      out.supergame = sg;
      out.n = rows.size();
      std::vector<double> beliefs;
      for (const auto* r : rows) beliefs.push_back(*r->belief);
      out.mean = mean_of(beliefs);
      out.sd = sample_sd(beliefs);
      out.median = median_of(beliefs);
      for (const auto* r : rows) {
        const bool coop = r->action == Action::kCooperate;
        if (*r->belief > out.median) {
          ++(coop ? out.above_cooperate : out.above_defect);
        } else if (*r->belief < out.median) {
          ++(coop ? out.below_cooperate : out.below_defect);
        } else {
          ++out.at_median;
        }
      }
      summary.rows.push_back(std::move(out));
    }
  }
  if (summary.rows.empty()) throw ValidationError("dataset contains no elicited beliefs");
  return summary;
}

namespace {

struct Ranked {
  std::vector<double> ranks;  // midranks, pooled order a then b
  double tie_term = 0.0;      // sum over tie groups of t^3 - t
};

Ranked midranks(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size() + b.size();
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return pooled[x] < pooled[y]; });
  Ranked out;
  out.ranks.assign(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) out.ranks[order[k]] = rank;
    const double t = static_cast<double>(j - i + 1);
    out.tie_term += t * t * t - t;
    i = j + 1;
  }
  return out;
}

void check_samples(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("WMW test needs two non-empty samples");
  for (double x : a) {
    if (!std::isfinite(x)) throw ValidationError("WMW sample contains a non-finite value");
  }
  for (double x : b) {
    if (!std::isfinite(x)) throw ValidationError("WMW sample contains a non-finite value");
  }
}

double upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

TestResult wmw_one_sided(std::span<const double> a, std::span<const double> b,
                         Alternative alternative, AggregationUnit unit) {
  check_samples(a, b);
  TestResult out;
  out.n_a = a.size();
  out.n_b = b.size();
  out.unit = unit;
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double n = na + nb;

  const Ranked ranked = midranks(a, b);
  const double rank_sum_a = std::accumulate(ranked.ranks.begin(), ranked.ranks.begin() + a.size(), 0.0);
  out.u = rank_sum_a - na * (na + 1.0) / 2.0;

  const double mean = na * nb / 2.0;
  const double variance = na * nb / 12.0 * ((n + 1.0) - ranked.tie_term / (n * (n - 1.0)));
  if (!(variance > 1e-12 * mean * mean) || n < 2.0) {
    out.degenerate = true;
    out.p = 1.0;
    return out;
  }
  const double sd = std::sqrt(variance);
  if (alternative == Alternative::kGreater) {
    out.p = upper_tail((out.u - mean - 0.5) / sd);
  } else {
    out.p = 1.0 - upper_tail((out.u - mean + 0.5) / sd);
  }
  out.p = std::clamp(out.p, 0.0, 1.0);
  return out;
}

double wmw_exact_p(std::span<const double> a, std::span<const double> b,
                   Alternative alternative) {
  check_samples(a, b);
  if (a.size() > 10 || b.size() > 10) {
    throw ValidationError("exact WMW enumeration limited to samples of at most 10");
  }
  const Ranked ranked = midranks(a, b);
  const std::size_t n = ranked.ranks.size();
  const std::size_t na = a.size();
  const double observed =
      std::accumulate(ranked.ranks.begin(), ranked.ranks.begin() + na, 0.0);
  // Rank sums are multiples of 1/2; compare with a small slack.
  constexpr double kSlack = 1e-9;
  std::size_t hits = 0;
  std::size_t total = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != na) continue;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) sum += ranked.ranks[i];
    }
    ++total;
    if (alternative == Alternative::kGreater ? sum >= observed - kSlack
                                             : sum <= observed + kSlack) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

double cohens_kappa(const std::vector<std::vector<double>>& confusion) {
  const std::size_t k = confusion.size();
  if (k == 0) throw ValidationError("kappa needs a non-empty confusion matrix");
  double n = 0.0;
  std::vector<double> row(k, 0.0), col(k, 0.0);
  double agree = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (confusion[i].size() != k) throw ValidationError("confusion matrix must be square");
    for (std::size_t j = 0; j < k; ++j) {
      const double c = confusion[i][j];
      if (!(c >= 0.0)) throw ValidationError("confusion counts must be non-negative");
      n += c;
      row[i] += c;
      col[j] += c;
      if (i == j) agree += c;
    }
  }
  if (n <= 0.0) throw ValidationError("confusion matrix is empty");
  const double observed = agree / n;
  double expected = 0.0;
  for (std::size_t i = 0; i < k; ++i) expected += (row[i] / n) * (col[i] / n);
  if (expected >= 1.0) return observed >= 1.0 ? 1.0 : 0.0;
  return (observed - expected) / (1.0 - expected);
}

namespace {

void put_cell_csv(std::ostream& os, const Cell& c) {
  if (c.units == 0) {
    os << ",,0";
    return;
  }
  os << ',' << c.mean << ',' << c.sd << ',' << c.units;
}

std::string fixed4(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << x;
  return os.str();
}

}  // namespace

void write_cooperation_csv(std::ostream& os, const CooperationTable& t) {
  os << std::setprecision(17);
  os << "scope,treatment,supergame,mean,sd,graphs\n";
  for (std::size_t i = 0; i < t.treatments.size(); ++i) {
    for (int sg = 1; sg <= t.n_supergames; ++sg) {
      os << scope_name(t.scope) << ',' << t.treatments[i] << ',' << sg;
      put_cell_csv(os, t.cells[i][sg - 1]);
      os << '\n';
    }
    os << scope_name(t.scope) << ',' << t.treatments[i] << ",all";
    put_cell_csv(os, t.overall[i]);
    os << '\n';
  }
}

void write_cooperation_text(std::ostream& os, const CooperationTable& t) {
  os << "Cooperation rate (" << (t.scope == RoundScope::kFirst ? "round one" : "all rounds")
     << "), mean (sd) over graphs\n";
  os << std::left << std::setw(10) << "Supergame";
  for (const auto& name : t.treatments) os << std::right << std::setw(18) << name;
  os << '\n';
  const auto row = [&](const std::string& label, auto cell_of) {
    os << std::left << std::setw(10) << label;
    for (std::size_t i = 0; i < t.treatments.size(); ++i) {
      const Cell& c = cell_of(i);
      const std::string text =
          c.units == 0 ? std::string("-") : fixed4(c.mean) + " (" + fixed4(c.sd) + ")";
      os << std::right << std::setw(18) << text;
    }
    os << '\n';
  };
  for (int sg = 1; sg <= t.n_supergames; ++sg) {
    row(std::to_string(sg), [&](std::size_t i) -> const Cell& { return t.cells[i][sg - 1]; });
  }
  row("Mean", [&](std::size_t i) -> const Cell& { return t.overall[i]; });
}

void write_belief_csv(std::ostream& os, const BeliefSummary& s) {
  os << std::setprecision(17);
  os << "treatment,supergame,n,mean,sd,median,above_cooperate,above_defect,below_cooperate,"
        "below_defect,at_median\n";
  for (const auto& r : s.rows) {
    os << r.treatment << ',' << r.supergame << ',' << r.n << ',' << r.mean << ',' << r.sd << ','
       << r.median << ',' << r.above_cooperate << ',' << r.above_defect << ','
       << r.below_cooperate << ',' << r.below_defect << ',' << r.at_median << '\n';
  }
}

void write_belief_text(std::ostream& os, const BeliefSummary& s) {
  os << "Beliefs (percent) at elicitation supergames\n";
  os << std::left << std::setw(10) << "Treatment" << std::right << std::setw(4) << "SG"
     << std::setw(5) << "N" << std::setw(10) << "Mean" << std::setw(10) << "SD"
     << std::setw(10) << "Median" << std::setw(7) << ">C" << std::setw(5) << ">D"
     << std::setw(5) << "<C" << std::setw(5) << "<D" << std::setw(5) << "=" << '\n';
  for (const auto& r : s.rows) {
    os << std::left << std::setw(10) << r.treatment << std::right << std::setw(4) << r.supergame
       << std::setw(5) << r.n << std::setw(10) << fixed4(r.mean) << std::setw(10) << fixed4(r.sd)
       << std::setw(10) << fixed4(r.median) << std::setw(7) << r.above_cooperate << std::setw(5)
       << r.above_defect << std::setw(5) << r.below_cooperate << std::setw(5) << r.below_defect
       << std::setw(5) << r.at_median << '\n';
  }
}

}  // namespace rpdlab
