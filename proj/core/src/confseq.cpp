#include "rlfa/confseq.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rlfa/errors.hpp"

namespace rlfa {

CsFamily parse_cs_family(std::string_view name) {
  if (name == "betting") return CsFamily::betting;
  if (name == "hoeffding") return CsFamily::hoeffding;
  if (name == "empirical_bernstein") return CsFamily::empirical_bernstein;
  throw Error(ErrorKind::configuration, "unknown CS family '" + std::string(name) + "'");
}

std::string_view to_string(CsFamily family) noexcept {
  switch (family) {
    case CsFamily::betting: return "betting";
    case CsFamily::hoeffding: return "hoeffding";
    case CsFamily::empirical_bernstein: return "empirical_bernstein";
  }
  return "betting";
}

Interval betting_interval(const NullGrid& grid, double delta, bool pad) {
  const double threshold = -std::log(delta);
  const auto points = grid.points();
  bool any_active = false;
  std::size_t first = points.size();
  std::size_t last = 0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (points[k].excluded) continue;
    any_active = true;
    if (points[k].log_wealth < threshold) {
      first = std::min(first, k);
      last = k;
    }
  }
  if (!any_active) return Interval::unit();
  if (first == points.size()) return Interval::none();
  if (pad) {
    if (first > 0) --first;
    if (last + 1 < points.size()) ++last;
  }
  return Interval{points[first].m, points[last].m, false};
}

Interval logical_bounds(double audited_mass, double remaining_weight) {
  const double lo = std::clamp(audited_mass, 0.0, 1.0);
  const double hi = std::clamp(audited_mass + remaining_weight, lo, 1.0);
  return Interval{lo, hi, false};
}

Interval intersect_running(const Interval& prob, const Interval& logical,
                           const Interval& previous) {
  if (prob.empty || logical.empty || previous.empty) return Interval::none();
  Interval out{std::max({prob.lo, logical.lo, previous.lo}),
               std::min({prob.hi, logical.hi, previous.hi}), false};
  if (out.lo > out.hi) out.empty = true;
  return out;
}

double psi_hoeffding(double c, double lambda) { return lambda * lambda * c * c / 8.0; }

double psi_empirical_bernstein(double c, double lambda) {
  const double x = c * lambda;
  return (-std::log1p(-x) - x) / (c * c);
}

double ClosedFormState::Side::mean_estimate() const noexcept {
  return n == 0 ? 1.0 : sum_estimate / static_cast<double>(n);
}

double ClosedFormState::Side::weighted_center() const noexcept {
  return sum_lambda > 0.0 ? sum_lambda_estimate / sum_lambda : 0.5;
}

ClosedFormState::ClosedFormState(CsFamily family, double delta, double horizon)
    : family_(family), delta_(delta), horizon_(horizon) {
  if (family == CsFamily::betting)
    throw Error(ErrorKind::configuration, "betting CS has no closed form");
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorKind::configuration, "delta must lie in (0,1)");
  if (!(horizon > 0.0)) throw Error(ErrorKind::configuration, "lambda horizon must be positive");
}

double ClosedFormState::hoeffding_lambda(double c) const {
  c = std::max(c, kDenominatorFloor);
  return std::min(std::sqrt(8.0 * std::log(2.0 / delta_) / (c * c * horizon_)), 0.5 / c);
}

double ClosedFormState::empirical_bernstein_lambda(const Side& side) const {
  const double c = std::max(side.mean_estimate(), kDenominatorFloor);
  const double variance = (0.25 + side.sum_sq_dev) / static_cast<double>(side.n + 1);
  return std::min(std::sqrt(2.0 * std::log(2.0 / delta_) / (variance * horizon_)), 0.5 / c);
}

void ClosedFormState::record_empirical_bernstein(Side& side, double z, double prior_mass,
                                                 std::optional<double> lambda_override) {
  const double center = side.mean_estimate();
  const double c = std::max(center, kDenominatorFloor);
  double lambda = empirical_bernstein_lambda(side);
  if (lambda_override) {
    lambda = *lambda_override;
    if (!(lambda >= 0.0 && lambda * c < 1.0))
      throw Error(ErrorKind::configuration, "empirical-Bernstein bet must lie in [0, 1/c)");
  }
  const double estimate = z + prior_mass;
  const double dev = z - center;
  side.sum_penalty += dev * dev * psi_empirical_bernstein(c, lambda);
  side.sum_lambda += lambda;
  side.sum_lambda_estimate += lambda * estimate;
  side.sum_estimate += estimate;
  side.sum_sq_dev += dev * dev;
  side.last_c = c;
  side.last_lambda = lambda;
  ++side.n;
}

void ClosedFormState::record(const ClosedFormStep& step, std::optional<double> lambda_override) {
  if (family_ == CsFamily::hoeffding) {
    const double c = step.max_weight_ratio;
    double lambda = hoeffding_lambda(c);
    if (lambda_override) {
      lambda = *lambda_override;
      if (!(lambda >= 0.0)) throw Error(ErrorKind::configuration, "Hoeffding bet must be >= 0");
    }
    const double estimate = step.z + step.audited_mass;
    direct_.sum_lambda += lambda;
    direct_.sum_lambda_estimate += lambda * estimate;
    direct_.sum_penalty += psi_hoeffding(c, lambda);
    direct_.sum_estimate += estimate;
    direct_.last_c = c;
    direct_.last_lambda = lambda;
    ++direct_.n;
    return;
  }
  record_empirical_bernstein(direct_, step.z, step.audited_mass, lambda_override);
  record_empirical_bernstein(mirrored_, step.weight_ratio - step.z,
                             step.audited_weight - step.audited_mass, lambda_override);
}

Interval hoeffding_interval(const ClosedFormState& state, double delta) {
  const auto& side = state.direct();
  if (!(side.sum_lambda > 0.0)) return Interval::unit();
  const double center = side.sum_lambda_estimate / side.sum_lambda;
  const double radius = (std::log(2.0 / delta) + side.sum_penalty) / side.sum_lambda;
  const double lo = std::clamp(center - radius, 0.0, 1.0);
  const double hi = std::clamp(center + radius, 0.0, 1.0);
  if (lo > hi) return Interval::none();
  return Interval{lo, hi, false};
}

namespace {
double eb_lower(const ClosedFormState::Side& side, double delta) {
  return (side.sum_lambda_estimate - std::log(2.0 / delta) - side.sum_penalty) / side.sum_lambda;
}
}  // namespace

Interval empirical_bernstein_interval(const ClosedFormState& state, double delta) {
  const auto& direct = state.direct();
  const auto& mirrored = state.mirrored();
  double lo = 0.0;
  double hi = 1.0;
  if (direct.sum_lambda > 0.0) lo = std::max(lo, eb_lower(direct, delta));
  if (mirrored.sum_lambda > 0.0) hi = std::min(hi, 1.0 - eb_lower(mirrored, delta));
  lo = std::min(lo, 1.0);
  hi = std::max(hi, 0.0);
  if (lo > hi) return Interval::none();
  return Interval{lo, hi, false};
}

}  // namespace rlfa
