#include "rlfa/sampling.hpp"

#include <algorithm>
#include <string>

#include "rlfa/errors.hpp"

namespace rlfa {

Strategy parse_strategy(std::string_view name) {
  if (name == "uniform") return Strategy::uniform;
  if (name == "propM") return Strategy::prop_m;
  if (name == "propMS") return Strategy::prop_ms;
  if (name == "oracle") return Strategy::oracle;
  throw Error(ErrorKind::configuration, "unknown sampling strategy '" + std::string(name) + "'");
}

std::string_view to_string(Strategy strategy) noexcept {
  switch (strategy) {
    case Strategy::uniform: return "uniform";
    case Strategy::prop_m: return "propM";
    case Strategy::prop_ms: return "propMS";
    case Strategy::oracle: return "oracle";
  }
  return "uniform";
}

void check_strategy(Strategy strategy, const Population& population) {
  if (strategy == Strategy::prop_ms && !population.has_scores())
    throw Error(ErrorKind::configuration, "propMS sampling requires scores");
  if (strategy == Strategy::oracle && !population.has_truth())
    throw Error(ErrorKind::configuration, "oracle sampling requires true_f values");
}

double Distribution::prob_of(std::size_t index) const {
  auto it = std::lower_bound(support.begin(), support.end(), index);
  if (it == support.end() || *it != index) return 0.0;
  return probs[static_cast<std::size_t>(it - support.begin())];
}

Distribution make_distribution(Strategy strategy, const Population& population,
                               std::span<const std::size_t> remaining) {
  if (remaining.empty()) throw Error(ErrorKind::exhausted, "no unaudited transactions remain");
  check_strategy(strategy, population);

  Distribution dist;
  dist.kind = strategy;
  dist.support.assign(remaining.begin(), remaining.end());
  dist.probs.resize(remaining.size());
  const auto& pi = population.weights();

  auto numerator = [&](std::size_t i) -> double {
    switch (strategy) {
      case Strategy::uniform: return 1.0;
      case Strategy::prop_m: return pi[i];
      case Strategy::prop_ms: return pi[i] * population.scores()[i];
      case Strategy::oracle: return pi[i] * population.truth()[i];
    }
    return 1.0;
  };

  double total = 0.0;
  for (std::size_t k = 0; k < remaining.size(); ++k) {
    dist.probs[k] = numerator(remaining[k]);
    total += dist.probs[k];
  }
  if (!(total > 0.0)) {
    throw Error(ErrorKind::degenerate_distribution,
                std::string(to_string(strategy)) + " numerators are all zero over the remaining set");
  }
  for (double& p : dist.probs) p /= total;
  return dist;
}

Distribution make_distribution_or_fallback(Strategy strategy, const Population& population,
                                           std::span<const std::size_t> remaining) {
  try {
    return make_distribution(strategy, population, remaining);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::degenerate_distribution) throw;
    return make_distribution(Strategy::prop_m, population, remaining);
  }
}

Distribution restrict_distribution(const Distribution& dist,
                                   std::span<const std::size_t> drawn) {
  Distribution out;
  out.kind = dist.kind;
  double total = 0.0;
  for (std::size_t k = 0; k < dist.support.size(); ++k) {
    if (std::find(drawn.begin(), drawn.end(), dist.support[k]) != drawn.end()) continue;
    out.support.push_back(dist.support[k]);
    out.probs.push_back(dist.probs[k]);
    total += dist.probs[k];
  }
  if (out.support.empty()) throw Error(ErrorKind::exhausted, "batch exhausts the remaining set");
  if (!(total > 0.0)) {
    throw Error(ErrorKind::degenerate_distribution,
                "restricted distribution has no probability mass");
  }
  for (double& p : out.probs) p /= total;
  return out;
}

std::size_t draw_index(const Distribution& dist, CounterRng& rng) {
  if (dist.support.empty()) throw Error(ErrorKind::exhausted, "empty distribution");
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = dist.support.size();
  for (std::size_t k = 0; k < dist.support.size(); ++k) {
    if (dist.probs[k] <= 0.0) continue;
    cumulative += dist.probs[k];
    last_positive = k;
    if (u < cumulative) return dist.support[k];
  }
  if (last_positive == dist.support.size())
    throw Error(ErrorKind::degenerate_distribution, "distribution has no probability mass");
  // Rounding left the cumulative sum just below u.
  return dist.support[last_positive];
}

}  // namespace rlfa
