#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

#include "rlfa/martingale.hpp"

namespace rlfa {

// Closed interval [lo, hi] or the empty set.
struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool empty = false;

  static Interval unit() { return Interval{0.0, 1.0, false}; }
  static Interval none() { return Interval{1.0, 0.0, true}; }

  double width() const noexcept { return empty ? 0.0 : hi - lo; }
  bool contains(double x, double tol = 0.0) const noexcept {
    return !empty && x >= lo - tol && x <= hi + tol;
  }
  bool subset_of(const Interval& other) const noexcept {
    return empty || (!other.empty && lo >= other.lo && hi <= other.hi);
  }

  friend bool operator==(const Interval&, const Interval&) = default;
};

// C_t (probabilistic), [L, U] (logical) and the running intersection.
struct IntervalState {
  Interval prob = Interval::unit();
  Interval logical = Interval::unit();
  Interval combined = Interval::unit();
};

enum class CsFamily { betting, hoeffding, empirical_bernstein };

// Accepts "betting" | "hoeffding" | "empirical_bernstein".
CsFamily parse_cs_family(std::string_view name);
std::string_view to_string(CsFamily family) noexcept;

// Convex hull of the non-excluded grid nulls with W_t(m) < 1/delta.
// Returns [0,1] when every grid null is excluded (the logical interval then
// falls between grid nodes) and the empty interval when nulls remain but
// none survives. With `pad`, each end moves out to the neighbouring grid
// node so that a boundary crossing between nodes stays covered.
Interval betting_interval(const NullGrid& grid, double delta, bool pad = false);

// [sum of audited pi f, that + remaining weight], clipped to [0,1].
Interval logical_bounds(double audited_mass, double remaining_weight);

// prob ∩ logical ∩ previous; empty if the bounds cross.
Interval intersect_running(const Interval& prob, const Interval& logical,
                           const Interval& previous);

// Hoeffding CGF-like penalty lambda^2 c^2 / 8.
double psi_hoeffding(double c, double lambda);
// Empirical-Bernstein penalty (-log(1 - c lambda) - c lambda) / c^2.
double psi_empirical_bernstein(double c, double lambda);

// Inputs for one step of a closed-form CS.
struct ClosedFormStep {
  double z = 0.0;               // f pi/q of the draw
  double weight_ratio = 0.0;    // pi/q of the draw
  double max_weight_ratio = 0.0;  // max over drawable indices of pi/q
  double audited_mass = 0.0;    // sum pi f before this draw
  double audited_weight = 0.0;  // sum pi before this draw
};

// Running sums for the Hoeffding and empirical-Bernstein CSs. The
// empirical-Bernstein upper bound is 1 minus a lower CS for 1 - m* built
// from the mirrored payoffs (pi/q)(1 - f).
class ClosedFormState {
 public:
  // `horizon` is the t0 the default lambda schedules are tuned for.
  ClosedFormState(CsFamily family, double delta, double horizon);

  CsFamily family() const noexcept { return family_; }
  double delta() const noexcept { return delta_; }
  std::size_t steps() const noexcept { return direct_.n; }

  // Records a step. Without an override the default predictable schedule
  // is used; an override must be a valid predictable bet (>= 0, and
  // < 1/c_t for empirical-Bernstein) and is applied to both sides.
  void record(const ClosedFormStep& step, std::optional<double> lambda_override = std::nullopt);

  // One side of the construction (the direct one, or the mirrored one).
  struct Side {
    std::size_t n = 0;
    double sum_lambda = 0.0;
    double sum_lambda_estimate = 0.0;  // sum lambda_i mhat_i
    double sum_penalty = 0.0;          // sum psi terms
    double sum_estimate = 0.0;         // sum mhat_i
    double sum_sq_dev = 0.0;           // sum (Z_i - muhat_{i-1})^2
    double last_c = 0.0;
    double last_lambda = 0.0;

    // muhat_{n}: running mean of mhat, 1 before any data.
    double mean_estimate() const noexcept;
    // Weighted center sum lambda mhat / sum lambda.
    double weighted_center() const noexcept;
  };

  const Side& direct() const noexcept { return direct_; }
  const Side& mirrored() const noexcept { return mirrored_; }

  // Default Hoeffding bet for support bound c at the next step.
  double hoeffding_lambda(double c) const;
  // Default empirical-Bernstein bet for the given side at the next step.
  double empirical_bernstein_lambda(const Side& side) const;

 private:
  void record_empirical_bernstein(Side& side, double z, double prior_mass,
                                  std::optional<double> lambda_override);

  CsFamily family_;
  double delta_;
  double horizon_;
  Side direct_;
  Side mirrored_;
};

// (center ± (log(2/delta) + sum psi_H) / sum lambda) ∩ [0,1].
Interval hoeffding_interval(const ClosedFormState& state, double delta);
// Direct lower bound and mirrored upper bound, ∩ [0,1].
Interval empirical_bernstein_interval(const ClosedFormState& state, double delta);

}  // namespace rlfa
