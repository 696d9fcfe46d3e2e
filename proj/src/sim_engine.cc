#include "rpdlab/sim_engine.h"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "rpdlab/errors.h"

namespace rpdlab {

char action_code(Action a) { return a == Action::kCooperate ? 'A' : 'B'; }

Action parse_action(char code) {
  switch (code) {
    case 'A': return Action::kCooperate;
    case 'B': return Action::kDefect;
  }
  throw ValidationError(std::string("unknown action code '") + code + "'");
}

std::string_view strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kGrim: return "grim";
    case StrategyKind::kAlwaysDefect: return "always_defect";
    case StrategyKind::kTitForTat: return "tit_for_tat";
  }
  return "grim";
}

StrategyKind parse_strategy(std::string_view name) {
  if (name == "grim") return StrategyKind::kGrim;
  if (name == "always_defect") return StrategyKind::kAlwaysDefect;
  if (name == "tit_for_tat") return StrategyKind::kTitForTat;
  throw ValidationError("unknown strategy '" + std::string(name) + "'");
}

Action StrategyState::act(int round) const {
  switch (kind_) {
    case StrategyKind::kGrim:
      return triggered_ ? Action::kDefect : Action::kCooperate;
    case StrategyKind::kAlwaysDefect:
      return Action::kDefect;
    case StrategyKind::kTitForTat:
      if (round <= 1 || !last_partner_) return Action::kCooperate;
      return *last_partner_;
  }
  return Action::kDefect;
}

void StrategyState::observe(Action partner) {
  last_partner_ = partner;
  if (partner == Action::kDefect) triggered_ = true;
}

MatchSchedule build_schedule(int n_subjects, int n_supergames) {
  if (n_subjects < 2 || n_subjects % 2 != 0) {
    throw ValidationError("perfect-stranger matching needs an even number of subjects, got " +
                          std::to_string(n_subjects));
  }
  if (n_supergames < 1 || n_supergames > n_subjects - 1) {
    throw ValidationError("at most " + std::to_string(n_subjects - 1) +
                          " supergames fit a perfect-stranger plan for " +
                          std::to_string(n_subjects) + " subjects, got " +
                          std::to_string(n_supergames));
  }
  const int rotating = n_subjects - 1;
  MatchSchedule schedule{n_subjects, n_supergames, {}};
  schedule.pairs.resize(n_supergames);
  for (int r = 0; r < n_supergames; ++r) {
    auto& round = schedule.pairs[r];
    round.emplace_back(r, n_subjects - 1);
    for (int i = 1; i < n_subjects / 2; ++i) {
      const int a = (r + i) % rotating;
      const int b = (r - i + rotating) % rotating;
      round.emplace_back(std::min(a, b), std::max(a, b));
    }
    std::sort(round.begin(), round.end());
  }
  return schedule;
}

MatchSchedule shuffled_schedule(int n_subjects, int n_supergames, Rng& rng) {
  MatchSchedule schedule = build_schedule(n_subjects, n_supergames);
  std::vector<int> label(n_subjects);
  std::iota(label.begin(), label.end(), 0);
  // Fisher-Yates with the pinned integer draw.
  for (int i = n_subjects - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(label[i], label[j]);
  }
  for (auto& round : schedule.pairs) {
    for (auto& [a, b] : round) {
      const int x = label[a];
      const int y = label[b];
      a = std::min(x, y);
      b = std::max(x, y);
    }
    std::sort(round.begin(), round.end());
  }
  return schedule;
}

std::string check_schedule(const MatchSchedule& schedule) {
  std::set<SubjectPair> seen;
  if (static_cast<int>(schedule.pairs.size()) != schedule.n_supergames) {
    return "supergame count mismatch";
  }
  for (int s = 0; s < schedule.n_supergames; ++s) {
    std::vector<int> count(schedule.n_subjects, 0);
    for (auto [a, b] : schedule.pairs[s]) {
      if (a < 0 || b < 0 || a >= schedule.n_subjects || b >= schedule.n_subjects || a == b) {
        return "invalid pair in supergame " + std::to_string(s + 1);
      }
      ++count[a];
      ++count[b];
      if (!seen.insert({std::min(a, b), std::max(a, b)}).second) {
        return "pair (" + std::to_string(a) + "," + std::to_string(b) + ") repeats in supergame " +
               std::to_string(s + 1);
      }
    }
    for (int i = 0; i < schedule.n_subjects; ++i) {
      if (count[i] != 1) {
        return "subject " + std::to_string(i) + " appears " + std::to_string(count[i]) +
               " times in supergame " + std::to_string(s + 1);
      }
    }
  }
  return {};
}

int supergame_length(DiscountFactor delta, Rng& rng) {
  int rounds = 1;
  while (rng.uniform() <= delta.value()) ++rounds;
  return rounds;
}

StrategyKind select_strategy(const StagePayoffs& game, DiscountFactor delta,
                             Belief belief) {
  const CooperationThreshold threshold = cooperation_threshold(normalize(game), delta);
  return threshold.cooperates(belief.value()) ? StrategyKind::kGrim
                                              : StrategyKind::kAlwaysDefect;
}

double BeliefDistribution::draw(Rng& rng) const {
  if (sd == 0.0) return mean;
  for (;;) {
    const double x = rng.normal(mean, sd);
    if (x >= 0.0 && x <= 100.0) return x;
  }
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

double BeliefDistribution::mass_at_or_above(double x) const {
  if (sd == 0.0) return mean >= x ? 1.0 : 0.0;
  const double lo = normal_cdf((0.0 - mean) / sd);
  const double hi = normal_cdf((100.0 - mean) / sd);
  const double cut = normal_cdf((std::clamp(x, 0.0, 100.0) - mean) / sd);
  return (hi - cut) / (hi - lo);
}

BeliefDistribution BeliefModel::at(int supergame, int n_supergames) const {
  if (n_supergames <= 1 || supergame <= 1) return first;
  if (supergame >= n_supergames) return last;
  const double w = static_cast<double>(supergame - 1) / (n_supergames - 1);
  return {first.mean + w * (last.mean - first.mean), first.sd + w * (last.sd - first.sd)};
}

bool is_canonical_treatment(std::string_view name) {
  return std::find(std::begin(kCanonicalTreatments), std::end(kCanonicalTreatments), name) !=
         std::end(kCanonicalTreatments);
}

namespace {

int treatment_index(std::string_view name) {
  const auto* it =
      std::find(std::begin(kCanonicalTreatments), std::end(kCanonicalTreatments), name);
  return static_cast<int>(it - std::begin(kCanonicalTreatments));
}

void check_distribution(const BeliefDistribution& d, const std::string& where) {
  if (!std::isfinite(d.mean) || d.mean < 0.0 || d.mean > 100.0) {
    throw ValidationError(where + ": belief mean must lie in [0, 100]");
  }
  if (!std::isfinite(d.sd) || d.sd < 0.0) {
    throw ValidationError(where + ": belief sd must be non-negative");
  }
}

}  // namespace

void validate_config(const TreatmentConfig& c) {
  if (!is_canonical_treatment(c.name)) {
    throw ValidationError("unknown treatment name '" + c.name +
                          "' (expected NoComm70, NoComm0, Comm70 or Comm0)");
  }
  const bool wants_comm = c.name.starts_with("Comm");
  if (c.communication != wants_comm) {
    throw ValidationError(c.name + ": communication flag must be " +
                          (wants_comm ? "true" : "false"));
  }
  const double wants_s = c.name.ends_with("70") ? 70.0 : 0.0;
  if (c.payoffs.S != wants_s) {
    throw ValidationError(c.name + ": sucker's payoff must be " +
                          std::to_string(static_cast<int>(wants_s)));
  }
  const PdValidation pd = validate_pd(c.payoffs);
  if (!pd.valid) {
    std::string msg = c.name + ": payoffs are not a prisoner's dilemma, violated:";
    for (const auto& v : pd.violations) msg += " " + v;
    throw ValidationError(msg);
  }
  DiscountFactor{c.delta};
  if (c.n_graphs < 1) throw ValidationError(c.name + ": graphs must be at least 1");
  build_schedule(c.n_subjects, c.n_supergames);
  check_distribution(c.belief_model.first, c.name + " first supergame");
  check_distribution(c.belief_model.last, c.name + " final supergame");
  if (c.cooperative_strategy == StrategyKind::kAlwaysDefect) {
    throw ValidationError(c.name + ": cooperative strategy cannot be always_defect");
  }
}

TreatmentConfig calibrated_treatment(std::string_view name, std::optional<int> n_graphs) {
  // Mean (sd) of elicited beliefs in the first and final supergame.
  struct Calibration {
    std::string_view name;
    BeliefDistribution first;
    BeliefDistribution last;
    int graphs;
  };
  static constexpr Calibration kTable[] = {
      {"NoComm70", {54.59, 31.16}, {40.56, 28.08}, 5},
      {"NoComm0", {35.42, 29.37}, {15.88, 25.51}, 7},
      {"Comm70", {81.51, 23.83}, {81.80, 23.25}, 5},
      {"Comm0", {84.99, 17.45}, {68.33, 37.76}, 5},
  };
  for (const auto& row : kTable) {
    if (row.name != name) continue;
    TreatmentConfig c;
    c.name = std::string(name);
    c.communication = name.starts_with("Comm");
    c.payoffs = {100.0, 90.0, 80.0, name.ends_with("70") ? 70.0 : 0.0};
    c.delta = 0.75;
    c.n_graphs = n_graphs.value_or(row.graphs);
    c.belief_model = {row.first, row.last};
    return c;
  }
  throw ValidationError("unknown treatment name '" + std::string(name) + "'");
}

std::vector<TreatmentConfig> calibrated_design() {
  std::vector<TreatmentConfig> out;
  for (auto name : kCanonicalTreatments) out.push_back(calibrated_treatment(name));
  return out;
}

double stage_payoff(const StagePayoffs& game, Action own, Action partner) {
  if (own == Action::kCooperate) {
    return partner == Action::kCooperate ? game.R : game.S;
  }
  return partner == Action::kCooperate ? game.T : game.P;
}

SessionDataset run_session(const TreatmentConfig& config, int session,
                           std::uint64_t substream_seed) {
  validate_config(config);
  const DiscountFactor delta(config.delta);
  const CooperationThreshold threshold =
      cooperation_threshold(normalize(config.payoffs), delta);
  const int n = config.n_subjects;
  Rng rng(substream_seed);
  SessionDataset out;

  for (int graph = 1; graph <= config.n_graphs; ++graph) {
    const MatchSchedule schedule = shuffled_schedule(n, config.n_supergames, rng);
    const int id_base = (graph - 1) * n;
    for (int sg = 1; sg <= config.n_supergames; ++sg) {
      const int length = supergame_length(delta, rng);
      const BeliefDistribution dist = config.belief_model.at(sg, config.n_supergames);
      const bool elicited = sg == 1 || sg == config.n_supergames;

      std::vector<double> belief(n);
      std::vector<StrategyState> state;
      state.reserve(n);
      for (int i = 0; i < n; ++i) {
        belief[i] = dist.draw(rng);
        state.emplace_back(threshold.cooperates(belief[i] / 100.0)
                               ? config.cooperative_strategy
                               : StrategyKind::kAlwaysDefect);
      }
      std::vector<int> partner(n);
      for (auto [a, b] : schedule.pairs[sg - 1]) {
        partner[a] = b;
        partner[b] = a;
      }

      for (int round = 1; round <= length; ++round) {
        std::vector<Action> act(n);
        for (int i = 0; i < n; ++i) act[i] = state[i].act(round);
        for (int i = 0; i < n; ++i) {
          RoundRecord rec;
          rec.session = session;
          rec.treatment = config.name;
          rec.graph = graph;
          rec.supergame = sg;
          rec.round = round;
          rec.subject = id_base + i + 1;
          rec.partner = id_base + partner[i] + 1;
          rec.action = act[i];
          rec.partner_action = act[partner[i]];
          rec.payoff = stage_payoff(config.payoffs, act[i], act[partner[i]]);
          if (elicited && round == 1) rec.belief = belief[i];
          out.push_back(std::move(rec));
        }
        for (int i = 0; i < n; ++i) state[i].observe(act[partner[i]]);
      }
    }
  }
  return out;
}

SessionDataset run_treatment_suite(const std::vector<TreatmentConfig>& configs,
                                   std::uint64_t master_seed) {
  std::set<std::string> names;
  for (const auto& c : configs) {
    validate_config(c);
    if (!names.insert(c.name).second) {
      throw ValidationError("duplicate treatment name '" + c.name + "'");
    }
  }
  std::vector<std::future<SessionDataset>> jobs;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const int session = static_cast<int>(i) + 1;
    const std::uint64_t stream =
        derive_seed(derive_seed(master_seed, session, treatment_index(configs[i].name)),
                    configs[i].seed, 0);
    jobs.push_back(std::async(std::launch::async, [&config = configs[i], session, stream] {
      return run_session(config, session, stream);
    }));
  }
  SessionDataset merged;
  for (auto& job : jobs) {
    SessionDataset part = job.get();
    merged.insert(merged.end(), std::make_move_iterator(part.begin()),
                  std::make_move_iterator(part.end()));
  }
  std::stable_sort(merged.begin(), merged.end(), [](const RoundRecord& a, const RoundRecord& b) {
    return std::tie(a.session, a.graph, a.supergame, a.round, a.subject) <
           std::tie(b.session, b.graph, b.supergame, b.round, b.subject);
  });
  return merged;
}

}  // namespace rpdlab
