#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "rlfa/confseq.hpp"
#include "rlfa/errors.hpp"

namespace rlfa {
namespace {

TEST(BettingInterval, NothingRejected) {
  NullGrid grid(1001);
  const auto iv = betting_interval(grid, 0.05);
  EXPECT_EQ(iv, Interval::unit());
  EXPECT_EQ(betting_interval(grid, 0.05, true), Interval::unit());
}

// Drives every grid null to a known log wealth by feeding a single
// observation with a constant payoff; nulls with m far from the payoff gain.
NullGrid grid_after(std::size_t grid_size, double z, int steps) {
  NullGrid grid(grid_size);
  Population pop({}, std::vector<double>(steps + 1, 1.0));
  std::vector<std::size_t> remaining(pop.size());
  std::iota(remaining.begin(), remaining.end(), 0);
  long double mass = 0;
  for (int t = 0; t < steps; ++t) {
    const auto d = make_distribution(Strategy::prop_m, pop, remaining);
    const double weight = pop.weights()[remaining.front()] / d.probs.front();
    // Observed f chosen so that Z equals z * remaining weight share.
    const double f = std::min(1.0, z / weight);
    StepContext ctx{payoff_support(d, pop), static_cast<double>(mass)};
    grid.update(compute_payoff(remaining.front(), f, d, pop), ctx, WealthMode::plain);
    mass += pop.weights()[remaining.front()] * f;
    remaining.erase(remaining.begin());
  }
  return grid;
}

TEST(BettingInterval, HullOfSurvivorsAndPadding) {
  const NullGrid grid = grid_after(1001, 0.3, 60);
  const auto hull = betting_interval(grid, 0.05);
  const auto padded = betting_interval(grid, 0.05, true);
  ASSERT_FALSE(hull.empty);
  EXPECT_LT(hull.width(), 1.0);
  // Survivors are exactly the nodes below the threshold.
  const double threshold = std::log(20.0);
  for (const auto& s : grid.points()) {
    if (s.m >= hull.lo && s.m <= hull.hi) continue;
    EXPECT_GE(s.log_wealth, threshold) << s.m;
  }
  double first = 2, last = -1;
  for (const auto& s : grid.points()) {
    if (s.log_wealth < threshold) {
      first = std::min(first, s.m);
      last = std::max(last, s.m);
    }
  }
  EXPECT_EQ(hull.lo, first);
  EXPECT_EQ(hull.hi, last);
  EXPECT_NEAR(padded.lo, hull.lo - 0.001, 1e-12);
  EXPECT_NEAR(padded.hi, hull.hi + 0.001, 1e-12);
}

TEST(BettingInterval, AllExcludedGivesUnit) {
  NullGrid grid(11);
  grid.exclude_outside(0.31, 0.39);
  EXPECT_EQ(betting_interval(grid, 0.05), Interval::unit());
}

TEST(BettingInterval, NoSurvivorIsEmpty) {
  NullGrid grid = grid_after(3, 0.5, 200);
  grid.exclude_outside(0.0, 0.0);  // keeps only m = 0, which is rejected
  const auto iv = betting_interval(grid, 0.05);
  EXPECT_TRUE(iv.empty);
  EXPECT_EQ(iv.width(), 0.0);
}

TEST(LogicalBounds, Examples) {
  EXPECT_EQ(logical_bounds(0.0, 1.0), Interval::unit());
  const auto iv = logical_bounds(0.5 * 0.2, 0.5);
  EXPECT_NEAR(iv.lo, 0.1, 1e-15);
  EXPECT_NEAR(iv.hi, 0.6, 1e-15);
  const auto end = logical_bounds(0.22, 0.0);
  EXPECT_EQ(end.width(), 0.0);
  EXPECT_EQ(end.lo, 0.22);
}

TEST(IntersectRunning, Examples) {
  const auto a = intersect_running({0.2, 0.9}, {0.0, 0.55}, {0.1, 0.6});
  EXPECT_EQ(a, (Interval{0.2, 0.55, false}));
  EXPECT_EQ(intersect_running(Interval::unit(), Interval::unit(), Interval::unit()),
            Interval::unit());
  EXPECT_TRUE(intersect_running({0.6, 0.9}, Interval::unit(), {0.1, 0.5}).empty);
  EXPECT_TRUE(intersect_running(Interval::none(), Interval::unit(), Interval::unit()).empty);
}

TEST(CsFamily, Names) {
  for (auto f : {CsFamily::betting, CsFamily::hoeffding, CsFamily::empirical_bernstein})
    EXPECT_EQ(parse_cs_family(to_string(f)), f);
  EXPECT_THROW(parse_cs_family("bernstein"), Error);
}

TEST(Hoeffding, NoDataIsUnit) {
  ClosedFormState s(CsFamily::hoeffding, 0.05, 10);
  EXPECT_EQ(hoeffding_interval(s, 0.05), Interval::unit());
}

TEST(Hoeffding, ConstantBetHalfWidth) {
  ClosedFormState s(CsFamily::hoeffding, 0.05, 10);
  const double lambda = 0.3, c = 0.8;
  for (int t = 0; t < 7; ++t) s.record(ClosedFormStep{0.4, 0.8, c, 0.0, 0.0}, lambda);
  const auto iv = hoeffding_interval(s, 0.05);
  const double half = (std::log(2.0 / 0.05) + 7 * lambda * lambda * c * c / 8.0) / (7 * lambda);
  EXPECT_NEAR(iv.lo, std::max(0.0, 0.4 - half), 1e-15);
  EXPECT_NEAR(iv.hi, std::min(1.0, 0.4 + half), 1e-15);
}

TEST(Hoeffding, DefaultSchedule) {
  ClosedFormState s(CsFamily::hoeffding, 0.05, 100);
  const double c = 0.5;
  EXPECT_NEAR(s.hoeffding_lambda(c), std::min(std::sqrt(8 * std::log(40.0) / (c * c * 100)), 1.0),
              1e-15);
  EXPECT_NEAR(s.hoeffding_lambda(10.0), 0.05, 1e-15);
}

TEST(Hoeffding, NsmEnumeration) {
  Population p({}, {9, 1, 4, 2, 7}, std::nullopt, std::vector<double>{0.5, 0.0, 0.25, 0.1, 0.8});
  for (auto strategy : {Strategy::uniform, Strategy::prop_m}) {
    const auto e = testing::expected_hoeffding_nsm(p, strategy, 0.05, p.true_misstatement());
    for (auto v : e) EXPECT_LE(static_cast<double>(v), 1.0 + 1e-12);
  }
}

TEST(Hoeffding, RecoversWsrWithoutReplacement) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    CounterRng rng(seed);
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 49);
    std::vector<double> f(n);
    for (auto& v : f) v = rng.uniform();
    Population pop({}, std::vector<double>(n, 1.0), std::nullopt, f);
    ClosedFormState state(CsFamily::hoeffding, 0.05, n / 2.0);
    std::vector<std::size_t> remaining(n);
    std::iota(remaining.begin(), remaining.end(), 0);
    std::vector<double> xs, lambdas;
    long double mass = 0, weight = 0;
    for (std::size_t t = 1; t <= n; ++t) {
      const auto d = make_distribution(Strategy::uniform, pop, remaining);
      const std::size_t i = draw_index(d, rng);
      const auto obs = compute_payoff(i, f[i], d, pop);
      const double lambda = std::min(1.0, std::sqrt(8 * std::log(40.0) / (t * std::log1p(t))));
      const double scaled = lambda * n / static_cast<double>(n - t + 1);
      state.record(ClosedFormStep{obs.z, pop.weights()[i] / obs.q_prob,
                                  payoff_support(d, pop).z_hi, static_cast<double>(mass),
                                  static_cast<double>(weight)},
                   scaled);
      xs.push_back(f[i]);
      lambdas.push_back(lambda);
      const auto ours = hoeffding_interval(state, 0.05);
      const auto wsr = testing::wsr_hoeffding(xs, lambdas, n, 0.05);
      ASSERT_NEAR(ours.lo, wsr.lo, 1e-9) << "seed " << seed << " t " << t;
      ASSERT_NEAR(ours.hi, wsr.hi, 1e-9) << "seed " << seed << " t " << t;
      mass += pop.weights()[i] * f[i];
      weight += pop.weights()[i];
      remaining.erase(std::find(remaining.begin(), remaining.end(), i));
    }
  }
}

TEST(EmpiricalBernstein, NoDataIsUnit) {
  ClosedFormState s(CsFamily::empirical_bernstein, 0.05, 10);
  EXPECT_EQ(empirical_bernstein_interval(s, 0.05), Interval::unit());
}

TEST(EmpiricalBernstein, RejectsInadmissibleBet) {
  ClosedFormState s(CsFamily::empirical_bernstein, 0.05, 10);
  EXPECT_THROW(s.record(ClosedFormStep{0.1, 1.0, 1.0, 0, 0}, 1.0), Error);
  EXPECT_THROW(s.record(ClosedFormStep{0.1, 1.0, 1.0, 0, 0}, -0.1), Error);
}

TEST(EmpiricalBernstein, ScheduleRespectsBound) {
  ClosedFormState s(CsFamily::empirical_bernstein, 0.05, 100);
  for (int t = 0; t < 30; ++t) {
    s.record(ClosedFormStep{0.3, 0.9, 0.9, 0.01 * t, 0.02 * t});
    EXPECT_LT(s.direct().last_lambda * s.direct().last_c, 1.0);
    EXPECT_GE(s.direct().last_c, 0.0);
  }
}

// Runs the EB CS on pop (with f) and on the mirrored population (1 - f)
// over the same draws and bets.
TEST(EmpiricalBernstein, MirroringSymmetry) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CounterRng rng(seed);
    const std::size_t n = 30;
    std::vector<double> m(n), f(n), g(n);
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = 4.0;
      f[i] = rng.uniform() < 0.5 ? 0.0 : 0.5;
      g[i] = 1.0 - f[i];
    }
    // Weights, sums and ratios all stay dyadic, so both runs round identically.
    m[seed % n] = m[(seed * 7 + 3) % n] = 8.0;
    Population a({}, m, std::nullopt, f), b({}, m, std::nullopt, g);
    ClosedFormState sa(CsFamily::empirical_bernstein, 0.05, n / 2.0);
    ClosedFormState sb(CsFamily::empirical_bernstein, 0.05, n / 2.0);
    std::vector<std::size_t> remaining(n);
    std::iota(remaining.begin(), remaining.end(), 0);
    long double ma = 0, mb = 0, w = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const auto d = make_distribution(Strategy::prop_m, a, remaining);
      const std::size_t i = draw_index(d, rng);
      const double ratio = a.weights()[i] / d.prob_of(i);
      const double lambda = 0.25;
      sa.record(ClosedFormStep{f[i] * ratio, ratio, ratio, double(ma), double(w)}, lambda);
      sb.record(ClosedFormStep{g[i] * ratio, ratio, ratio, double(mb), double(w)}, lambda);
      ma += a.weights()[i] * f[i];
      mb += a.weights()[i] * g[i];
      w += a.weights()[i];
      remaining.erase(std::find(remaining.begin(), remaining.end(), i));
      EXPECT_EQ(sa.direct().sum_lambda_estimate, sb.mirrored().sum_lambda_estimate);
      EXPECT_EQ(sa.direct().sum_penalty, sb.mirrored().sum_penalty);
      const auto ia = empirical_bernstein_interval(sa, 0.05);
      const auto ib = empirical_bernstein_interval(sb, 0.05);
      EXPECT_EQ(ia.hi, 1.0 - ib.lo);
      EXPECT_EQ(ib.hi, 1.0 - ia.lo);
    }
  }
}

TEST(EmpiricalBernstein, SupermartingaleMonteCarlo) {
  CounterRng base(123);
  const std::size_t n = 40;
  std::vector<double> m(n), f(n);
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = base.uniform(1, 100);
    f[i] = base.uniform() < 0.3 ? base.uniform(0.3, 0.6) : base.uniform(0, 0.05);
  }
  Population pop({}, m, std::nullopt, f);
  const double m_star = pop.true_misstatement();
  const int runs = 2000;
  std::vector<double> values;
  for (int r = 0; r < runs; ++r) {
    CounterRng rng = CounterRng::split(7, r);
    ClosedFormState s(CsFamily::empirical_bernstein, 0.05, n / 2.0);
    std::vector<std::size_t> remaining(n);
    std::iota(remaining.begin(), remaining.end(), 0);
    long double mass = 0, weight = 0, log_m = 0;
    for (std::size_t t = 0; t < n / 2; ++t) {
      const auto d = make_distribution(Strategy::prop_m, pop, remaining);
      const std::size_t i = draw_index(d, rng);
      const auto obs = compute_payoff(i, f[i], d, pop);
      const double centre = s.direct().mean_estimate();
      const double c = std::max(centre, kDenominatorFloor);
      const double lambda = s.empirical_bernstein_lambda(s.direct());
      s.record(ClosedFormStep{obs.z, pop.weights()[i] / obs.q_prob, 0, double(mass), double(weight)});
      const double dev = obs.z - centre;
      log_m += lambda * (obs.z - (m_star - mass)) - dev * dev * psi_empirical_bernstein(c, lambda);
      mass += pop.weights()[i] * f[i];
      weight += pop.weights()[i];
      remaining.erase(std::find(remaining.begin(), remaining.end(), i));
    }
    values.push_back(static_cast<double>(std::exp(log_m)));
  }
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / runs;
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (runs - 1));
  EXPECT_LE(mean, 1.0 + 3.0 * sd / std::sqrt(double(runs)));
}

TEST(FanLemma, NumericInequality) {
  CounterRng rng(2024);
  for (int k = 0; k < 100000; ++k) {
    const double c = rng.uniform(0.01, 5.0);
    const double lambda = rng.uniform() * (1.0 / c) * 0.999;
    const double xi = -c + rng.uniform() * (c + 10.0);
    const double lhs = 1.0 + lambda * xi;
    const double rhs =
        std::exp(lambda * xi + xi * xi * (std::log1p(-c * lambda) + c * lambda) / (c * c));
    ASSERT_GE(lhs, rhs * (1 - 1e-12)) << c << " " << lambda << " " << xi;
  }
}

TEST(Psi, Values) {
  EXPECT_DOUBLE_EQ(psi_hoeffding(2.0, 0.5), 0.125);
  EXPECT_NEAR(psi_empirical_bernstein(1.0, 0.5), -std::log(0.5) - 0.5, 1e-15);
}

}  // namespace
}  // namespace rlfa
