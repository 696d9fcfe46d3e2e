#ifndef RPDLAB_SIM_ENGINE_H_
#define RPDLAB_SIM_ENGINE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rpdlab/game_theory.h"
#include "rpdlab/rng.h"

namespace rpdlab {

// Serialized with the neutral labels used in the lab: A = cooperate,
// B = defect.
enum class Action { kCooperate, kDefect };

char action_code(Action a);
Action parse_action(char code);

enum class StrategyKind { kGrim, kAlwaysDefect, kTitForTat };

std::string_view strategy_name(StrategyKind kind);
StrategyKind parse_strategy(std::string_view name);

class StrategyState {
 public:
  explicit StrategyState(StrategyKind kind) : kind_(kind) {}

  StrategyKind kind() const { return kind_; }
  bool triggered() const { return triggered_; }
  std::optional<Action> last_partner_action() const { return last_partner_; }

  // Action for `round` (1-based) given the history observed so far.
  Action act(int round) const;
  // Feed the partner's action after every round.
  void observe(Action partner);

 private:
  StrategyKind kind_;
  bool triggered_ = false;
  std::optional<Action> last_partner_;
};

using SubjectPair = std::pair<int, int>;

// Perfect-stranger pairing plan for one matching graph. Subjects are
// numbered 0..n_subjects-1; pairs[s] holds the pairs of supergame s.
struct MatchSchedule {
  int n_subjects = 0;
  int n_supergames = 0;
  std::vector<std::vector<SubjectPair>> pairs;
};

// Circle-method round robin truncated to n_supergames rounds. Requires an
// even subject count and n_supergames <= n_subjects - 1.
MatchSchedule build_schedule(int n_subjects, int n_supergames);

// build_schedule with subject labels randomly permuted.
MatchSchedule shuffled_schedule(int n_subjects, int n_supergames, Rng& rng);

// Empty string if the schedule is a valid perfect-stranger plan, otherwise
// a description of the first problem found.
std::string check_schedule(const MatchSchedule& schedule);

// Round 1 always happens; every further round happens iff a uniform draw
// is <= delta.
int supergame_length(DiscountFactor delta, Rng& rng);

// Grim iff belief >= cooperation threshold of the normalized game, else
// always-defect. Ties go to grim.
StrategyKind select_strategy(const StagePayoffs& game, DiscountFactor delta,
                             Belief belief);

// Normal truncated to [0, 100] (percent), sampled by rejection.
struct BeliefDistribution {
  double mean = 50.0;
  double sd = 0.0;

  double draw(Rng& rng) const;
  // Probability mass of the truncated distribution at or above `x`.
  double mass_at_or_above(double x) const;
};

// Distribution at the first and last supergame; supergames in between
// interpolate both parameters linearly.
struct BeliefModel {
  BeliefDistribution first;
  BeliefDistribution last;

  BeliefDistribution at(int supergame, int n_supergames) const;
};

struct TreatmentConfig {
  std::string name;
  StagePayoffs payoffs;
  bool communication = false;
  double delta = 0.75;
  int n_graphs = 5;
  int n_subjects = 6;
  int n_supergames = 5;
  BeliefModel belief_model;
  // Mixed into the substream seed alongside the master seed.
  std::uint64_t seed = 0;
  // Type played by subjects whose belief clears the threshold. Grim unless
  // the tit-for-tat extension is switched on.
  StrategyKind cooperative_strategy = StrategyKind::kGrim;
};

inline constexpr std::string_view kCanonicalTreatments[] = {"NoComm70", "NoComm0",
                                                            "Comm70", "Comm0"};

bool is_canonical_treatment(std::string_view name);

// Throws ValidationError describing the first inconsistency.
void validate_config(const TreatmentConfig& config);

// Canonical treatment with belief parameters taken from the first and
// final supergame of the lab data. `n_graphs` defaults to the lab's group
// counts (5, or 7 for NoComm0).
TreatmentConfig calibrated_treatment(std::string_view name,
                                     std::optional<int> n_graphs = std::nullopt);
std::vector<TreatmentConfig> calibrated_design();

struct RoundRecord {
  int session = 0;
  std::string treatment;
  int graph = 0;
  int supergame = 0;  // 1-based
  int round = 0;      // 1-based
  int subject = 0;
  int partner = 0;
  Action action = Action::kDefect;
  Action partner_action = Action::kDefect;
  double payoff = 0.0;
  std::optional<double> belief;  // percent, elicited rounds only

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

using SessionDataset = std::vector<RoundRecord>;

double stage_payoff(const StagePayoffs& game, Action own, Action partner);

// Simulates one session of the treatment. Subjects are numbered
// (graph - 1) * n_subjects + local + 1 so ids are unique per session.
SessionDataset run_session(const TreatmentConfig& config, int session,
                           std::uint64_t substream_seed);

// Runs each config as its own session (session = position + 1) on an
// independent substream derived from master_seed. Sessions run in
// parallel; the merged output is sorted by (session, graph, supergame,
// round, subject).
SessionDataset run_treatment_suite(const std::vector<TreatmentConfig>& configs,
                                   std::uint64_t master_seed);

}  // namespace rpdlab

#endif  // RPDLAB_SIM_ENGINE_H_
