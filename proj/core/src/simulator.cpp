#include "rlfa/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "rlfa/errors.hpp"

namespace rlfa {

using nlohmann::json;

namespace {

constexpr double kCoverageTolerance = 1e-9;

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return values[lo] + (values[hi] - values[lo]) * (pos - static_cast<double>(lo));
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write '" + path.string() + "'");
  out << contents;
}

}  // namespace

FMode parse_f_mode(std::string_view name) {
  if (name == "prop_pi") return FMode::prop_pi;
  if (name == "inv_prop_pi") return FMode::inv_prop_pi;
  throw Error(ErrorKind::configuration, "unknown f_mode '" + std::string(name) + "'");
}

std::string_view to_string(FMode mode) noexcept {
  return mode == FMode::prop_pi ? "prop_pi" : "inv_prop_pi";
}

ScoreMode parse_score_mode(std::string_view name) {
  if (name == "none") return ScoreMode::none;
  if (name == "relative") return ScoreMode::relative;
  if (name == "mixture") return ScoreMode::mixture;
  throw Error(ErrorKind::configuration, "unknown score_mode '" + std::string(name) + "'");
}

std::string_view to_string(ScoreMode mode) noexcept {
  switch (mode) {
    case ScoreMode::none: return "none";
    case ScoreMode::relative: return "relative";
    case ScoreMode::mixture: return "mixture";
  }
  return "none";
}

std::size_t large_count(const ScenarioConfig& scenario) {
  return static_cast<std::size_t>(std::lround(scenario.n1_frac * static_cast<double>(scenario.n)));
}

void validate_scenario(const ScenarioConfig& s) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::configuration, msg); };
  if (s.n < 1) fail("N must be positive");
  if (!(s.n1_frac >= 0.0 && s.n1_frac <= 1.0)) fail("n1_frac must lie in [0,1]");
  if (!(s.large_lo > 0.0 && s.large_lo <= s.large_hi)) fail("bad large value range");
  if (!(s.small_lo > 0.0 && s.small_lo <= s.small_hi)) fail("bad small value range");
  if (s.weight_ratio && !(*s.weight_ratio >= 10.0 && *s.weight_ratio <= 1000.0))
    fail("weight_ratio must lie in [10, 1000]");
  if (s.trials < 1) fail("trials must be positive");
  if (s.score_mode == ScoreMode::relative && !(s.score_param >= 0.0 && s.score_param < 1.0))
    fail("relative accuracy a must lie in [0,1)");
  if (s.score_mode == ScoreMode::mixture && !(s.score_param >= 0.0 && s.score_param <= 1.0))
    fail("mixture weight c must lie in [0,1]");
  if (s.score_mode == ScoreMode::none &&
      (s.session.strategy == Strategy::prop_ms || s.session.control_variates))
    fail("propMS and control variates need a score_mode");
}

ScenarioConfig scenario_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::validation, "scenario must be a JSON object");
  ScenarioConfig s;
  try {
    s.session = config_from_json(j);
    s.n = j.value("N", s.n);
    s.n1_frac = j.value("n1_frac", s.n1_frac);
    if (j.contains("weight_ratio") && !j["weight_ratio"].is_null())
      s.weight_ratio = j["weight_ratio"].get<double>();
    if (j.contains("large_range")) {
      s.large_lo = j["large_range"].at(0).get<double>();
      s.large_hi = j["large_range"].at(1).get<double>();
    }
    if (j.contains("small_range")) {
      s.small_lo = j["small_range"].at(0).get<double>();
      s.small_hi = j["small_range"].at(1).get<double>();
    }
    if (j.contains("f_mode")) s.f_mode = parse_f_mode(j["f_mode"].get<std::string>());
    if (j.contains("score_mode")) s.score_mode = parse_score_mode(j["score_mode"].get<std::string>());
    s.score_param = j.value("score_param", s.score_param);
    s.trials = j.value("trials", s.trials);
    s.seed = j.value("seed", s.seed);
    s.known_score_accuracy = j.value("known_score_accuracy", s.known_score_accuracy);
    s.stop_at_tau = j.value("stop_at_tau", s.stop_at_tau);
    s.threads = j.value("threads", s.threads);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::validation, std::string("bad scenario field: ") + e.what());
  }
  validate_scenario(s);
  return s;
}

json scenario_to_json(const ScenarioConfig& s) {
  json j = config_to_json(s.session);
  j.erase("seed");
  j["N"] = s.n;
  j["n1_frac"] = s.n1_frac;
  j["large_range"] = {s.large_lo, s.large_hi};
  j["small_range"] = {s.small_lo, s.small_hi};
  if (s.weight_ratio) j["weight_ratio"] = *s.weight_ratio;
  j["f_mode"] = to_string(s.f_mode);
  j["score_mode"] = to_string(s.score_mode);
  j["score_param"] = s.score_param;
  j["trials"] = s.trials;
  j["seed"] = s.seed;
  j["known_score_accuracy"] = s.known_score_accuracy;
  j["stop_at_tau"] = s.stop_at_tau;
  return j;
}

Population generate_population(const ScenarioConfig& scenario, CounterRng& rng) {
  const std::size_t n = scenario.n;
  const std::size_t n1 = std::min(large_count(scenario), n);
  std::vector<std::string> ids(n);
  std::vector<double> reported(n);
  std::vector<double> truth(n);
  const bool prop = scenario.f_mode == FMode::prop_pi;
  const double large_lo = scenario.weight_ratio ? scenario.small_lo * *scenario.weight_ratio
                                                : scenario.large_lo;
  const double large_hi = scenario.weight_ratio ? scenario.small_hi * *scenario.weight_ratio
                                                : scenario.large_hi;
  for (std::size_t i = 0; i < n; ++i) {
    const bool large = i < n1;
    ids[i] = "tx" + std::to_string(i);
    reported[i] = large ? rng.uniform(large_lo, large_hi)
                        : rng.uniform(scenario.small_lo, scenario.small_hi);
    const bool high_f = large == prop;
    truth[i] = high_f ? rng.uniform(0.4, 0.5) : rng.uniform(0.001, 0.01);
  }
  return Population(std::move(ids), std::move(reported), std::nullopt, std::move(truth));
}

std::vector<double> generate_scores(const Population& population, ScoreMode mode, double param,
                                    CounterRng& rng) {
  const auto& f = population.truth();
  std::vector<double> s(f.size(), 0.0);
  switch (mode) {
    case ScoreMode::none:
      break;
    case ScoreMode::relative:
      for (std::size_t i = 0; i < f.size(); ++i)
        s[i] = std::clamp(f[i] * rng.uniform(1.0 - param, 1.0 + param), 0.0, 1.0);
      break;
    case ScoreMode::mixture:
      for (std::size_t i = 0; i < f.size(); ++i)
        s[i] = std::clamp(param * f[i] + (1.0 - param) * rng.uniform(), 0.0, 1.0);
      break;
  }
  return s;
}

Population with_scores(const Population& population, std::vector<double> scores) {
  std::optional<std::vector<double>> truth;
  if (population.has_truth()) truth = population.truth();
  return Population(population.ids(), population.reported(), std::move(scores), std::move(truth));
}

std::string method_label(const SessionConfig& config) {
  std::string label = std::string(to_string(config.strategy)) + "+" +
                      std::string(to_string(config.cs_family));
  if (config.control_variates) label += "+cv";
  return label;
}

TrialSetup make_trial(const ScenarioConfig& scenario, std::size_t trial) {
  const CounterRng base = CounterRng::split(scenario.seed, trial);
  CounterRng pop_rng = base.split(0);
  CounterRng score_rng = base.split(1);
  CounterRng seed_rng = base.split(2);
  Population pop = generate_population(scenario, pop_rng);
  if (scenario.score_mode != ScoreMode::none) {
    pop = with_scores(pop, generate_scores(pop, scenario.score_mode, scenario.score_param, score_rng));
  }
  return TrialSetup{std::make_shared<const Population>(std::move(pop)), seed_rng()};
}

TrialResult run_trial(const ScenarioConfig& scenario, const TrialSetup& setup) {
  const Population& pop = *setup.population;
  const double m_star = pop.true_misstatement();
  SessionConfig config = scenario.session;
  config.seed = setup.session_seed;
  if (config.strategy == Strategy::prop_ms && scenario.score_mode == ScoreMode::relative &&
      scenario.known_score_accuracy && !config.score_accuracy) {
    config.score_accuracy = scenario.score_param;
  }
  if (config.cs_family == CsFamily::betting) config.probes = {m_star};

  AuditSession session(setup.population, config);
  TrialResult result;
  result.m_star = m_star;
  result.widths.push_back(session.intervals().combined.width());
  const auto& truth = pop.truth();
  while (!session.history().remaining().empty()) {
    const auto drawn = session.next_draw();
    std::vector<double> f;
    f.reserve(drawn.size());
    for (std::size_t i : drawn) f.push_back(truth[i]);
    const SessionUpdate update = session.record_observation(f);
    result.widths.push_back(update.width);
    if (!update.combined.contains(m_star, kCoverageTolerance)) result.miscovered = true;
    if (const NullGrid* grid = session.grid()) {
      const double wealth = std::exp(grid->probes().front().log_wealth);
      result.max_wealth_deviation = std::max(result.max_wealth_deviation, std::abs(wealth - 1.0));
      result.max_wealth = std::max(result.max_wealth, wealth);
    }
    if (scenario.stop_at_tau && update.stopped) break;
  }
  result.tau = session.stopped_at().value_or(session.t());
  result.empty_events = session.empty_events();
  return result;
}

ExperimentResult run_trials(const ScenarioConfig& scenario) {
  validate_scenario(scenario);
  ExperimentResult result;
  result.method = method_label(scenario.session);
  result.trials.resize(scenario.trials);
  parallel_for(scenario.trials, scenario.threads, [&](std::size_t k) {
    result.trials[k] = run_trial(scenario, make_trial(scenario, k));
  });

  std::vector<double> taus;
  std::size_t longest = 0;
  for (const auto& t : result.trials) {
    taus.push_back(static_cast<double>(t.tau));
    if (t.miscovered) ++result.miscoverage_count;
    longest = std::max(longest, t.widths.size());
  }
  result.mean_tau = std::accumulate(taus.begin(), taus.end(), 0.0) / static_cast<double>(taus.size());
  result.median_tau = quantile(taus, 0.5);
  for (std::size_t t = 0; t < longest; ++t) {
    std::vector<double> column;
    for (const auto& trial : result.trials) {
      if (t < trial.widths.size()) column.push_back(trial.widths[t]);
    }
    result.widths.push_back(
        WidthQuantiles{t, quantile(column, 0.5), quantile(column, 0.1), quantile(column, 0.9)});
  }
  return result;
}

std::vector<CvGainPoint> cv_gain_sweep(const ScenarioConfig& scenario,
                                       const std::vector<double>& c_values) {
  if (scenario.score_mode != ScoreMode::mixture)
    throw Error(ErrorKind::configuration, "cv_gain_sweep needs score_mode = mixture");
  std::vector<CvGainPoint> points;
  for (double c : c_values) {
    if (!(c > 0.0 && c < 1.0)) throw Error(ErrorKind::configuration, "c values must lie in (0,1)");
    ScenarioConfig s = scenario;
    s.score_param = c;
    s.stop_at_tau = true;
    ScenarioConfig with_cv = s;
    with_cv.session.control_variates = true;
    ScenarioConfig without_cv = s;
    without_cv.session.control_variates = false;
    validate_scenario(with_cv);

    CvGainPoint point;
    point.c = c;
    point.ratios.resize(s.trials);
    parallel_for(s.trials, s.threads, [&](std::size_t k) {
      const TrialSetup setup = make_trial(s, k);
      const double tau_cv = static_cast<double>(run_trial(with_cv, setup).tau);
      const double tau_plain = static_cast<double>(run_trial(without_cv, setup).tau);
      point.ratios[k] = tau_cv / tau_plain;
    });
    const double n = static_cast<double>(point.ratios.size());
    point.mean_ratio = std::accumulate(point.ratios.begin(), point.ratios.end(), 0.0) / n;
    double ss = 0.0;
    for (double r : point.ratios) ss += (r - point.mean_ratio) * (r - point.mean_ratio);
    point.std_ratio = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
    point.q10 = quantile(point.ratios, 0.1);
    point.q90 = quantile(point.ratios, 0.9);
    points.push_back(std::move(point));
  }
  return points;
}

json summary_json(const ExperimentResult& result, const ScenarioConfig& scenario) {
  std::size_t empties = 0;
  double max_dev = 0.0;
  for (const auto& t : result.trials) {
    empties += t.empty_events;
    max_dev = std::max(max_dev, t.max_wealth_deviation);
  }
  std::vector<double> taus;
  for (const auto& t : result.trials) taus.push_back(static_cast<double>(t.tau));
  return json{{"method", result.method},
              {"scenario", scenario_to_json(scenario)},
              {"trials", result.trials.size()},
              {"mean_tau", result.mean_tau},
              {"median_tau", result.median_tau},
              {"tau_q10", quantile(taus, 0.1)},
              {"tau_q90", quantile(taus, 0.9)},
              {"miscoverage_count", result.miscoverage_count},
              {"miscoverage_rate",
               static_cast<double>(result.miscoverage_count) /
                   static_cast<double>(result.trials.size())},
              {"empty_cs_events", empties},
              {"max_wealth_deviation_at_m_star", max_dev}};
}

void write_results(const ExperimentResult& result, const ScenarioConfig& scenario,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "summary.json", summary_json(result, scenario).dump(2) + "\n");

  std::string trials = "trial,tau,miscovered\n";
  for (std::size_t k = 0; k < result.trials.size(); ++k) {
    trials += std::to_string(k) + ',' + std::to_string(result.trials[k].tau) + ',' +
              (result.trials[k].miscovered ? "1" : "0") + '\n';
  }
  write_file(dir / "trials.csv", trials);

  std::string widths = "t,method,width_median,width_q10,width_q90\n";
  for (const auto& w : result.widths) {
    widths += std::to_string(w.t) + ',' + result.method + ',' + format_double(w.median) + ',' +
              format_double(w.q10) + ',' + format_double(w.q90) + '\n';
  }
  write_file(dir / "widths.csv", widths);
}

void write_sweep(const std::vector<CvGainPoint>& points, const ScenarioConfig& scenario,
                 const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json arr = json::array();
  std::string csv = "c,mean_ratio,std_ratio,q10,q90\n";
  for (const auto& p : points) {
    arr.push_back({{"c", p.c},
                   {"mean_ratio", p.mean_ratio},
                   {"std_ratio", p.std_ratio},
                   {"q10", p.q10},
                   {"q90", p.q90}});
    csv += format_double(p.c) + ',' + format_double(p.mean_ratio) + ',' +
           format_double(p.std_ratio) + ',' + format_double(p.q10) + ',' + format_double(p.q90) +
           '\n';
  }
  write_file(dir / "summary.json",
             json{{"scenario", scenario_to_json(scenario)}, {"points", arr}}.dump(2) + "\n");
  write_file(dir / "sweep.csv", csv);
}

}  // namespace rlfa
