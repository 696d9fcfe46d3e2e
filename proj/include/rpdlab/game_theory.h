#ifndef RPDLAB_GAME_THEORY_H_
#define RPDLAB_GAME_THEORY_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rpdlab {

// Row player's stage-game payoffs in points.
struct StagePayoffs {
  double T = 0.0;  // temptation
  double R = 0.0;  // reward
  double P = 0.0;  // punishment
  double S = 0.0;  // sucker's payoff
};

// Two-parameter form of a prisoner's dilemma: mutual cooperation pays 1,
// mutual defection 0, a defector against a cooperator 1 + gain and the
// cooperator -loss.
struct NormalizedGame {
  double gain = 0.0;
  double loss = 0.0;
};

// Probability in [0, 1] that the partner plays grim.
class Belief {
 public:
  explicit Belief(double p);
  double value() const { return p_; }

 private:
  double p_;
};

// Continuation probability in the open interval (0, 1).
class DiscountFactor {
 public:
  explicit DiscountFactor(double delta);
  double value() const { return delta_; }
  // Expected number of rounds, 1 / (1 - delta).
  double expected_rounds() const { return 1.0 / (1.0 - delta_); }

 private:
  double delta_;
};

struct PdValidation {
  bool valid = false;
  std::vector<std::string> violations;
};

// Checks T > R > P > S and 2R > T + S. Throws ValidationError on
// non-finite input.
PdValidation validate_pd(const StagePayoffs& payoffs);

// Throws ValidationError when validate_pd fails.
NormalizedGame normalize(const StagePayoffs& payoffs);

// Smallest discount factor at which grim weakly beats always-defect for a
// player holding `belief`:
//   (p (g - l) + l) / (p (1 + g - l) + l)
// Accepts the degenerate limits g = 0 or l = 0; throws when p = 0 and l = 0.
double delta_star(const NormalizedGame& game, Belief belief);
// delta_star at p = 1. Independent of the loss.
double delta_pd(const NormalizedGame& game);
// delta_star at p = 1/2.
double delta_rd(const NormalizedGame& game);
// delta_star at the communication belief p+. The model requires
// 1/2 < p+ < 1; that is the caller's concern.
double delta_plus(const NormalizedGame& game, Belief p_plus);

struct StrategyValues {
  double grim = 0.0;
  double always_defect = 0.0;
};

StrategyValues strategy_values(const NormalizedGame& game, Belief belief,
                               DiscountFactor delta);

// Smallest belief at which grim weakly beats always-defect. `never` means
// no belief in [0, 1] does.
struct CooperationThreshold {
  std::optional<double> belief;

  bool never() const { return !belief.has_value(); }
  // Grim is chosen on ties.
  bool cooperates(double p) const { return belief.has_value() && p >= *belief; }
};

CooperationThreshold cooperation_threshold(const NormalizedGame& game,
                                           DiscountFactor delta);

// Margins of the three communication inequalities for one tuple:
//   loss_effect:   delta_plus(g, l_high, p+) - delta_plus(g, l_low, p+)
//   comm_effect:   min over l of delta_rd(g, l) - delta_plus(g, l, p+)
//   above_pareto:  min over l of delta_plus(g, l, p+) - delta_pd(g)
// All three are strictly positive for g > 0, 0 < l_low < l_high and
// 1/2 < p+ < 1.
struct StaticsMargins {
  double loss_effect = 0.0;
  double comm_effect = 0.0;
  double above_pareto = 0.0;
};

struct StaticsTuple {
  double gain = 0.0;
  double loss_low = 0.0;
  double loss_high = 0.0;
  double p_plus = 0.0;
};

StaticsMargins statics_margins(const StaticsTuple& tuple);

struct StaticsViolation {
  StaticsTuple tuple;
  std::string inequality;
  double margin = 0.0;
};

struct StaticsReport {
  std::size_t samples = 0;
  std::vector<StaticsViolation> violations;
  // Smallest and largest margin observed for each inequality.
  StaticsMargins min_margin;
  StaticsMargins max_margin;
};

// Draws `sample_count` random tuples (gain, loss_low < loss_high, p+ in
// (1/2, 1)) and records every tuple where one of the inequalities fails.
StaticsReport check_comparative_statics(std::size_t sample_count,
                                        std::uint64_t seed);

}  // namespace rpdlab

#endif  // RPDLAB_GAME_THEORY_H_
