#include "rlfa/martingale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rlfa/errors.hpp"

namespace rlfa {
namespace {

struct ScoreSummary {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// E_q[S] plus the range of S over drawable indices. When every drawable score
// is equal the mean is that score exactly, so U is exactly 0.
ScoreSummary summarize_scores(const Distribution& dist, const Population& population) {
  const auto& s = population.scores();
  ScoreSummary out{0.0, std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity()};
  for (std::size_t k = 0; k < dist.support.size(); ++k) {
    if (dist.probs[k] <= 0.0) continue;
    const double v = s[dist.support[k]];
    out.mean += dist.probs[k] * v;
    out.min = std::min(out.min, v);
    out.max = std::max(out.max, v);
  }
  if (out.min == out.max) out.mean = out.min;
  return out;
}

}  // namespace

Observation compute_payoff(std::size_t index, double f_obs, const Distribution& dist,
                           const Population& population, std::size_t step) {
  if (!(f_obs >= 0.0 && f_obs <= 1.0))
    throw Error(ErrorKind::validation, "observed f must lie in [0,1]");
  const double q = dist.prob_of(index);
  if (!(q > 0.0)) {
    throw Error(ErrorKind::impossible_draw,
                "index " + std::to_string(index) + " has zero sampling probability");
  }
  Observation obs;
  obs.index = index;
  obs.f_obs = f_obs;
  obs.q_prob = q;
  obs.z = f_obs * (population.weights()[index] / q);
  obs.step = step;
  if (population.has_scores()) {
    const ScoreSummary scores = summarize_scores(dist, population);
    obs.u = population.scores()[index] - scores.mean;
  }
  return obs;
}

double residual_null(double m, double audited_mass) {
  const double mu = m - audited_mass;
  return std::abs(mu) <= kResidualSnap ? 0.0 : mu;
}

PayoffSupport payoff_support(const Distribution& dist, const Population& population,
                             std::optional<double> score_accuracy) {
  PayoffSupport support;
  const auto& pi = population.weights();
  for (std::size_t k = 0; k < dist.support.size(); ++k) {
    if (dist.probs[k] <= 0.0) continue;
    support.z_hi = std::max(support.z_hi, pi[dist.support[k]] / dist.probs[k]);
  }
  if (score_accuracy && dist.kind == Strategy::prop_ms && *score_accuracy < 1.0) {
    // q(i) = pi(i) S(i) / sum(pi S), hence Z = (f/S) sum(pi S) <= sum(pi S)/(1-a).
    const auto& s = population.scores();
    double mass = 0.0;
    for (std::size_t i : dist.support) mass += pi[i] * s[i];
    support.z_hi = std::min(support.z_hi, mass / (1.0 - *score_accuracy));
  }
  if (population.has_scores()) {
    const ScoreSummary scores = summarize_scores(dist, population);
    support.u_lo = scores.min - scores.mean;
    support.u_hi = scores.max - scores.mean;
  }
  return support;
}

BetBounds bet_bounds(double g_lo, double g_hi) {
  return BetBounds{-(1.0 - kWealthMargin) / std::max(g_hi, kDenominatorFloor),
                   (1.0 - kWealthMargin) / std::max(-g_lo, kDenominatorFloor)};
}

double approx_kelly_bet(const NullState& state, BetBounds bounds) {
  const double a = state.sum_payoff;
  const double v = state.sum_sq_payoff;
  if (a == 0.0) return 0.0;
  if (v == 0.0) return a > 0.0 ? bounds.upper : bounds.lower;
  return std::clamp(a / v, bounds.lower, bounds.upper);
}

double beta_update(const NullState& state) {
  if (state.cv_den == 0.0) return 0.0;
  return std::clamp(-state.cv_num / state.cv_den, -1.0, 1.0);
}

GrowthDiagnostics growth_terms(double lambda, double payoff) {
  const double x = lambda * payoff;
  return GrowthDiagnostics{x - x * x, std::log1p(x)};
}

void place_bet(NullState& state, const StepContext& ctx, WealthMode mode) {
  const double mu = residual_null(state.m, ctx.audited_mass);
  state.beta = mode == WealthMode::control_variate ? beta_update(state) : 0.0;
  const double cv_lo = std::min(state.beta * ctx.support.u_lo, state.beta * ctx.support.u_hi);
  const double cv_hi = std::max(state.beta * ctx.support.u_lo, state.beta * ctx.support.u_hi);
  state.bounds = bet_bounds(ctx.support.z_lo + cv_lo - mu, ctx.support.z_hi + cv_hi - mu);
  state.lambda = approx_kelly_bet(state, state.bounds);
}

namespace {

// Payoffs within a few ulps of zero are rounding residue (e.g. the oracle
// strategy at m*); a bet clipped at a large bound would otherwise amplify them.
double snap_payoff(double g, double scale) {
  return std::fabs(g) <= 8.0 * std::numeric_limits<double>::epsilon() * scale ? 0.0 : g;
}

double payoff(const NullState& state, const Observation& obs, double mu) {
  const double cv = state.beta * obs.u;
  const double scale = std::max({std::fabs(obs.z), std::fabs(cv), state.m});
  return snap_payoff(obs.z + cv - mu, scale);
}

}  // namespace

double settle_bet(NullState& state, const Observation& obs, const StepContext& ctx) {
  const double mu = residual_null(state.m, ctx.audited_mass);
  const double centered = obs.z - mu;
  const double g = payoff(state, obs, mu);
  const double x = state.lambda * g;
  if (!(1.0 + x > 0.0)) {
    throw Error(ErrorKind::invariant, "wealth multiplier is non-positive (bet clipping failed)");
  }
  state.sum_payoff += g;
  state.sum_sq_payoff += g * g;
  state.cv_num += centered * obs.u;
  state.cv_den += obs.u * obs.u;
  return x;
}

NullGrid::NullGrid(std::size_t grid_size, std::span<const double> probes) {
  if (grid_size < 2) throw Error(ErrorKind::configuration, "grid size must be at least 2");
  points_.resize(grid_size);
  const double spacing = 1.0 / static_cast<double>(grid_size - 1);
  for (std::size_t k = 0; k < grid_size; ++k) points_[k].m = static_cast<double>(k) * spacing;
  points_.back().m = 1.0;
  for (double m : probes) {
    NullState s;
    s.m = m;
    probes_.push_back(s);
  }
  probe_growth_.resize(probes_.size());
}

void NullGrid::update(const Observation& obs, const StepContext& ctx, WealthMode mode) {
  for (auto& state : points_) {
    if (state.excluded) continue;
    place_bet(state, ctx, mode);
    state.log_wealth += std::log1p(settle_bet(state, obs, ctx));
  }
  for (std::size_t p = 0; p < probes_.size(); ++p) {
    auto& state = probes_[p];
    place_bet(state, ctx, mode);
    const double mu = residual_null(state.m, ctx.audited_mass);
    probe_growth_[p] = growth_terms(state.lambda, payoff(state, obs, mu));
    state.log_wealth += std::log1p(settle_bet(state, obs, ctx));
  }
}

void NullGrid::update_batch(std::span<const Observation> batch,
                            std::span<const StepContext> contexts, WealthMode mode) {
  if (batch.empty()) return;
  if (batch.size() != contexts.size())
    throw Error(ErrorKind::invariant, "batch and context sizes differ");
  const double count = static_cast<double>(batch.size());
  auto step = [&](NullState& state) {
    double sum = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      place_bet(state, contexts[i], mode);
      sum += settle_bet(state, batch[i], contexts[i]);
    }
    const double x = sum / count;
    if (!(1.0 + x > 0.0))
      throw Error(ErrorKind::invariant, "averaged wealth multiplier is non-positive");
    state.log_wealth += std::log1p(x);
  };
  for (auto& state : points_) {
    if (!state.excluded) step(state);
  }
  for (auto& state : probes_) step(state);
}

void NullGrid::exclude_outside(double lo, double hi) {
  for (auto& state : points_) {
    if (state.m < lo || state.m > hi) state.excluded = true;
  }
}

}  // namespace rlfa
