#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "rlfa/population.hpp"
#include "rlfa/rng.hpp"

namespace rlfa {

enum class Strategy {
  uniform,
  prop_m,   // q(i) proportional to pi(i)
  prop_ms,  // q(i) proportional to pi(i) S(i)
  oracle,   // q(i) proportional to pi(i) f(i); simulation only
};

// Accepts "uniform" | "propM" | "propMS" | "oracle".
Strategy parse_strategy(std::string_view name);
std::string_view to_string(Strategy strategy) noexcept;

// Throws Error{configuration} if the population lacks what `strategy` needs.
void check_strategy(Strategy strategy, const Population& population);

// Sampling distribution q_t over the unaudited indices.
struct Distribution {
  std::vector<std::size_t> support;  // ascending
  std::vector<double> probs;
  // The rule that actually produced `probs` (differs from the requested
  // strategy after a fallback).
  Strategy kind = Strategy::uniform;

  // Probability of `index`, 0 if it is not in the support.
  double prob_of(std::size_t index) const;
};

// q_t for `strategy` over `remaining` (ascending, non-empty).
// Throws Error{degenerate_distribution} when propMS / oracle numerators are
// all zero over `remaining`.
Distribution make_distribution(Strategy strategy, const Population& population,
                               std::span<const std::size_t> remaining);

// Same as make_distribution, but a degenerate propMS / oracle step falls
// back to propM so an audit can always proceed.
Distribution make_distribution_or_fallback(Strategy strategy, const Population& population,
                                           std::span<const std::size_t> remaining);

// q restricted to its support minus `drawn`, renormalized. Used for the
// in-batch draws of a minibatch round.
Distribution restrict_distribution(const Distribution& dist,
                                   std::span<const std::size_t> drawn);

// Inverse-CDF draw consuming exactly one uniform from `rng`.
std::size_t draw_index(const Distribution& dist, CounterRng& rng);

}  // namespace rlfa
