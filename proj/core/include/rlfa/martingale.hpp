#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "rlfa/population.hpp"
#include "rlfa/sampling.hpp"

namespace rlfa {

// Every realized wealth multiplier stays >= kWealthMargin.
inline constexpr double kWealthMargin = 0.01;
// Floor applied to payoff-support endpoints before dividing by them.
inline constexpr double kDenominatorFloor = 1e-12;
// Residuals |mu_t(m)| below this are rounding noise and treated as 0.
inline constexpr double kResidualSnap = 1e-15;

enum class WealthMode { plain, control_variate };

// One audited draw and its importance-weighted payoff.
struct Observation {
  std::size_t index = 0;
  double f_obs = 0.0;
  double q_prob = 0.0;
  double z = 0.0;  // f(I) pi(I) / q(I)
  double u = 0.0;  // S(I) - E_q[S], 0 without scores
  std::size_t step = 0;
};

// Builds the observation for drawing `index` from `dist` and seeing `f_obs`.
Observation compute_payoff(std::size_t index, double f_obs, const Distribution& dist,
                           const Population& population, std::size_t step = 0);

// mu_t(m) = m - (misstatement mass audited before step t).
double residual_null(double m, double audited_mass);

// Attainable range of Z_t and U_t before the draw is made.
struct PayoffSupport {
  double z_lo = 0.0;
  double z_hi = 0.0;
  double u_lo = 0.0;
  double u_hi = 0.0;
};

// Z ranges over [0, max pi/q] and U over [min S - E_q S, max S - E_q S].
// With a known score accuracy `a` (S/f in [1-a, 1+a]) and a genuine propMS
// distribution, Z is confined to sum(pi S) * [1/(1+a), 1/(1-a)].
PayoffSupport payoff_support(const Distribution& dist, const Population& population,
                             std::optional<double> score_accuracy = std::nullopt);

struct BetBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// Bounds keeping 1 + lambda g >= kWealthMargin for every g in [g_lo, g_hi].
BetBounds bet_bounds(double g_lo, double g_hi);

// Per-null statistics of the betting game against H0: m* = m.
struct NullState {
  double m = 0.0;
  double log_wealth = 0.0;
  double sum_payoff = 0.0;     // A
  double sum_sq_payoff = 0.0;  // V
  double cv_num = 0.0;         // sum (Z - mu) U
  double cv_den = 0.0;         // sum U^2
  double lambda = 0.0;
  double beta = 0.0;
  BetBounds bounds{};
  bool excluded = false;
};

// ApproxKelly: clip(A/V, bounds); 0 before any data.
double approx_kelly_bet(const NullState& state, BetBounds bounds);

// Predictable control-variate weight clip(-cv_num/cv_den, -1, 1).
double beta_update(const NullState& state);

// Quadratic lower bound B = lambda g - (lambda g)^2 and the realized
// log-increment D = log(1 + lambda g) of one bet.
struct GrowthDiagnostics {
  double lower_bound = 0.0;
  double log_increment = 0.0;
};
GrowthDiagnostics growth_terms(double lambda, double payoff);

// What is known about a step before its outcome is revealed.
struct StepContext {
  PayoffSupport support{};
  double audited_mass = 0.0;  // sum of pi f over draws before this one
};

// Fixes lambda (and beta in control-variate mode) for the coming step from
// statistics strictly before it.
void place_bet(NullState& state, const StepContext& ctx, WealthMode mode);

// Applies the outcome to the statistics with the bet already placed and
// returns lambda * g. Throws Error{invariant} if 1 + lambda g <= 0.
double settle_bet(NullState& state, const Observation& obs, const StepContext& ctx);

// Wealth processes for G nulls evenly spaced on [0,1], plus optional
// off-grid probe nulls that are tracked identically but never enter an
// interval (test instrumentation, e.g. a probe at m*).
class NullGrid {
 public:
  explicit NullGrid(std::size_t grid_size = 1001, std::span<const double> probes = {});

  std::size_t size() const noexcept { return points_.size(); }
  std::span<const NullState> points() const noexcept { return points_; }
  std::span<const NullState> probes() const noexcept { return probes_; }
  std::span<const GrowthDiagnostics> probe_growth() const noexcept { return probe_growth_; }

  // One observation: every non-excluded null bets, then settles.
  void update(const Observation& obs, const StepContext& ctx, WealthMode mode);

  // One minibatch round: bets are placed sequentially (each sees earlier
  // in-batch outcomes), wealth moves by the averaged multiplier.
  void update_batch(std::span<const Observation> batch, std::span<const StepContext> contexts,
                    WealthMode mode);

  // Flags nulls outside [lo, hi] (logically impossible); they keep their
  // last wealth and stop updating.
  void exclude_outside(double lo, double hi);

 private:
  std::vector<NullState> points_;
  std::vector<NullState> probes_;
  std::vector<GrowthDiagnostics> probe_growth_;
};

}  // namespace rlfa
