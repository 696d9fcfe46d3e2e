#include "rpdlab/game_theory.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rpdlab/errors.h"
#include "rpdlab/rng.h"

namespace rpdlab {

Belief::Belief(double p) : p_(p) {
  if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
    std::ostringstream os;
    os << "belief must lie in [0, 1], got " << p;
    throw ValidationError(os.str());
  }
}

DiscountFactor::DiscountFactor(double delta) : delta_(delta) {
  if (!std::isfinite(delta) || delta <= 0.0 || delta >= 1.0) {
    std::ostringstream os;
    os << "discount factor must lie in (0, 1), got " << delta;
    throw ValidationError(os.str());
  }
}

PdValidation validate_pd(const StagePayoffs& x) {
  if (!std::isfinite(x.T) || !std::isfinite(x.R) || !std::isfinite(x.P) ||
      !std::isfinite(x.S)) {
    throw ValidationError("stage payoffs must be finite");
  }
  PdValidation out;
  if (!(x.T > x.R)) out.violations.emplace_back("T>R");
  if (!(x.R > x.P)) out.violations.emplace_back("R>P");
  if (!(x.P > x.S)) out.violations.emplace_back("P>S");
  if (!(2.0 * x.R > x.T + x.S)) out.violations.emplace_back("2R>T+S");
  out.valid = out.violations.empty();
  return out;
}

NormalizedGame normalize(const StagePayoffs& x) {
  const PdValidation check = validate_pd(x);
  if (!check.valid) {
    std::string msg = "not a prisoner's dilemma, violated:";
    for (const auto& v : check.violations) msg += " " + v;
    throw ValidationError(msg);
  }
  const double scale = x.R - x.P;
  return {(x.T - x.R) / scale, (x.P - x.S) / scale};
}

double delta_star(const NormalizedGame& game, Belief belief) {
  const double p = belief.value();
  const double g = game.gain;
  const double l = game.loss;
  const double denominator = p * (1.0 + g - l) + l;
  if (p == 0.0 && l == 0.0) {
    throw ValidationError("critical discount factor undefined for p = 0 and l = 0");
  }
  if (!(denominator > 0.0)) {
    throw ValidationError("critical discount factor has non-positive denominator");
  }
  return (p * (g - l) + l) / denominator;
}

double delta_pd(const NormalizedGame& game) { return delta_star(game, Belief(1.0)); }

double delta_rd(const NormalizedGame& game) { return delta_star(game, Belief(0.5)); }

double delta_plus(const NormalizedGame& game, Belief p_plus) {
  return delta_star(game, p_plus);
}

StrategyValues strategy_values(const NormalizedGame& game, Belief belief,
                               DiscountFactor delta) {
  const double p = belief.value();
  return {p * delta.expected_rounds() + (1.0 - p) * (-game.loss),
          p * (1.0 + game.gain)};
}

CooperationThreshold cooperation_threshold(const NormalizedGame& game,
                                           DiscountFactor delta) {
  // Grim weakly wins iff p * (1/(1-delta) - (1+g) + l) >= l.
  const double slope = delta.expected_rounds() - (1.0 + game.gain) + game.loss;
  if (slope > 0.0) {
    const double p = game.loss / slope;
    if (p <= 1.0) return {p};
    return {};
  }
  // slope <= 0 can only be satisfied when l = 0, and then p = 0 works.
  if (game.loss <= 0.0) return {0.0};
  return {};
}

StaticsMargins statics_margins(const StaticsTuple& t) {
  const NormalizedGame low{t.gain, t.loss_low};
  const NormalizedGame high{t.gain, t.loss_high};
  const Belief p(t.p_plus);
  const double plus_low = delta_plus(low, p);
  const double plus_high = delta_plus(high, p);
  StaticsMargins m;
  m.loss_effect = plus_high - plus_low;
  m.comm_effect = std::min(delta_rd(low) - plus_low, delta_rd(high) - plus_high);
  const double pareto = delta_pd(low);
  m.above_pareto = std::min(plus_low, plus_high) - pareto;
  return m;
}

namespace {

// Log-uniform on [1e-2, 1e2] so both tiny and large ratios get exercised.
double draw_positive(Rng& rng) {
  return std::exp(std::log(1e-2) + rng.uniform() * (std::log(1e2) - std::log(1e-2)));
}

// Open interval (1/2, 1).
double draw_p_plus(Rng& rng) {
  double u;
  do {
    u = rng.uniform();
  } while (u == 0.0);
  return 0.5 + 0.5 * u;
}

}  // namespace

StaticsReport check_comparative_statics(std::size_t sample_count, std::uint64_t seed) {
  if (sample_count == 0) throw ValidationError("sample_count must be at least 1");
  Rng rng(derive_seed(seed, 0, 0));
  StaticsReport report;
  report.samples = sample_count;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  report.min_margin = {kInf, kInf, kInf};
  report.max_margin = {-kInf, -kInf, -kInf};

  for (std::size_t i = 0; i < sample_count; ++i) {
    StaticsTuple t;
    t.gain = draw_positive(rng);
    double a = draw_positive(rng);
    double b = draw_positive(rng);
    while (a == b) b = draw_positive(rng);
    t.loss_low = std::min(a, b);
    t.loss_high = std::max(a, b);
    t.p_plus = draw_p_plus(rng);

    const StaticsMargins m = statics_margins(t);
    const auto track = [&](double StaticsMargins::*field, const char* name) {
      const double v = m.*field;
      report.min_margin.*field = std::min(report.min_margin.*field, v);
      report.max_margin.*field = std::max(report.max_margin.*field, v);
      if (!(v > 0.0)) report.violations.push_back({t, name, v});
    };
    track(&StaticsMargins::loss_effect, "delta_plus(l_high) > delta_plus(l_low)");
    track(&StaticsMargins::comm_effect, "delta_rd > delta_plus");
    track(&StaticsMargins::above_pareto, "delta_plus > delta_pd");
  }
  return report;
}

}  // namespace rpdlab
