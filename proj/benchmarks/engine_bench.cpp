#include <benchmark/benchmark.h>

#include "rlfa/audit_session.hpp"
#include "rlfa/simulator.hpp"

namespace {

using namespace rlfa;

std::shared_ptr<const Population> population(std::size_t n) {
  ScenarioConfig s;
  s.n = n;
  CounterRng rng(1);
  const Population p = generate_population(s, rng);
  CounterRng score_rng(2);
  return std::make_shared<const Population>(
      with_scores(p, generate_scores(p, ScoreMode::relative, 0.1, score_rng)));
}

// Full audit of an N-transaction population, one session per iteration.
void BM_FullAudit(benchmark::State& state, CsFamily cs, Strategy strategy, bool cv) {
  const auto pop = population(static_cast<std::size_t>(state.range(0)));
  SessionConfig c;
  c.cs_family = cs;
  c.strategy = strategy;
  c.control_variates = cv;
  c.epsilon = 1e-6;
  std::size_t steps = 0;
  for (auto _ : state) {
    AuditSession s(pop, c);
    while (!s.history().remaining().empty()) {
      std::vector<double> f;
      for (std::size_t i : s.next_draw()) f.push_back(pop->truth()[i]);
      benchmark::DoNotOptimize(s.record_observation(f));
      ++steps;
    }
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(steps));
}

BENCHMARK_CAPTURE(BM_FullAudit, betting_propM, CsFamily::betting, Strategy::prop_m, false)
    ->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_FullAudit, betting_propMS_cv, CsFamily::betting, Strategy::prop_ms, true)
    ->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_FullAudit, hoeffding_propM, CsFamily::hoeffding, Strategy::prop_m, false)
    ->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_FullAudit, eb_propM, CsFamily::empirical_bernstein, Strategy::prop_m, false)
    ->Arg(200)->Unit(benchmark::kMillisecond);

void BM_GridUpdate(benchmark::State& state) {
  NullGrid grid(static_cast<std::size_t>(state.range(0)));
  const auto pop = population(200);
  std::vector<std::size_t> remaining(pop->size());
  for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;
  const auto d = make_distribution(Strategy::prop_m, *pop, remaining);
  const auto obs = compute_payoff(0, pop->truth()[0], d, *pop);
  const StepContext ctx{payoff_support(d, *pop), 0.0};
  for (auto _ : state) {
    NullGrid g = grid;
    g.update(obs, ctx, WealthMode::plain);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_GridUpdate)->Arg(1001)->Arg(10001);

}  // namespace
BENCHMARK_MAIN();
