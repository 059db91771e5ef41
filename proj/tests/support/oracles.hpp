#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "rlfa/martingale.hpp"
#include "rlfa/population.hpp"
#include "rlfa/sampling.hpp"

namespace rlfa::testing {

// E[W_t(m)] for t = 0..N by exhaustive enumeration of every draw path.
// Bets come from the library; the path weights and expectation are summed
// here. With batch_size > 1, draws within a round use the restricted
// distribution and wealth moves once per round.
std::vector<long double> expected_wealth(const Population& pop, Strategy strategy,
                                         WealthMode mode, double m, std::size_t batch_size = 1,
                                         std::optional<double> score_accuracy = std::nullopt);

// Same enumeration for the Hoeffding NSM at m with the default schedule.
std::vector<long double> expected_hoeffding_nsm(const Population& pop, Strategy strategy,
                                                double delta, double m);

// Waudby-Smith & Ramdas without-replacement Hoeffding CS for x in [0,1]
// observed in order, with bets lambda (before clipping to [0,1]).
struct WsrInterval {
  double lo;
  double hi;
};
WsrInterval wsr_hoeffding(const std::vector<double>& x, const std::vector<double>& lambda,
                          std::size_t n_total, double delta);

// n p + z sqrt(n p (1 - p)): one-sided normal bound on a binomial count.
double binomial_upper(std::size_t n, double p, double z);

}  // namespace rlfa::testing
