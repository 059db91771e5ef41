#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rlfa/audit_session.hpp"
#include "rlfa/population.hpp"
#include "rlfa/rng.hpp"

namespace rlfa {

// How true misstated fractions are assigned to large and small transactions.
enum class FMode {
  prop_pi,      // large pi -> f in [0.4, 0.5], small pi -> f in [0.001, 0.01]
  inv_prop_pi,  // ranges swapped
};

enum class ScoreMode {
  none,
  relative,  // S = f * U[1-a, 1+a], clamped to [0,1]
  mixture,   // S = c f + (1-c) R, R ~ U[0,1]
};

FMode parse_f_mode(std::string_view name);
std::string_view to_string(FMode mode) noexcept;
ScoreMode parse_score_mode(std::string_view name);
std::string_view to_string(ScoreMode mode) noexcept;

struct ScenarioConfig {
  std::size_t n = 200;
  double n1_frac = 0.2;
  // Reported-value ranges for "large" and "small" transactions.
  double large_lo = 100.0;
  double large_hi = 1000.0;
  double small_lo = 1.0;
  double small_hi = 10.0;
  // When set, large values are drawn from the small range scaled by this
  // factor, so the mean large/small ratio equals it. Must lie in [10, 1000].
  std::optional<double> weight_ratio;
  FMode f_mode = FMode::prop_pi;
  ScoreMode score_mode = ScoreMode::none;
  double score_param = 0.0;  // a for relative, c for mixture
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  // Per-trial session settings; its seed is replaced by a derived one.
  SessionConfig session;
  // Hand the relative-accuracy bound a to propMS sessions.
  bool known_score_accuracy = true;
  // Stop each trial at tau instead of auditing to N.
  bool stop_at_tau = false;
  // Worker threads (0 = hardware concurrency). Results do not depend on it.
  std::size_t threads = 0;
};

// Throws Error{configuration} on invalid scenarios.
void validate_scenario(const ScenarioConfig& scenario);
ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& scenario);

std::size_t large_count(const ScenarioConfig& scenario);

// N1 large and N - N1 small reported values with truth per `f_mode`.
// Large transactions occupy indices [0, N1).
Population generate_population(const ScenarioConfig& scenario, CounterRng& rng);

// Side information for a truth-bearing population.
std::vector<double> generate_scores(const Population& population, ScoreMode mode, double param,
                                    CounterRng& rng);

// Copy of `population` with `scores` attached.
Population with_scores(const Population& population, std::vector<double> scores);

struct TrialResult {
  std::size_t tau = 0;
  bool miscovered = false;
  std::size_t empty_events = 0;
  double m_star = 0.0;
  // max_t |W_t(m*) - 1| (betting only; 0 otherwise).
  double max_wealth_deviation = 0.0;
  // max_t W_t(m*) (betting only).
  double max_wealth = 1.0;
  // Combined CS width at t = 0, 1, ...
  std::vector<double> widths;
};

struct WidthQuantiles {
  std::size_t t = 0;
  double median = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
};

struct ExperimentResult {
  std::string method;
  std::vector<TrialResult> trials;
  std::vector<WidthQuantiles> widths;
  std::size_t miscoverage_count = 0;
  double mean_tau = 0.0;
  double median_tau = 0.0;
};

// Label "<strategy>+<cs>[+cv]" used in result files.
std::string method_label(const SessionConfig& config);

// Population, scores and session seed used by trial `trial`.
struct TrialSetup {
  std::shared_ptr<const Population> population;
  std::uint64_t session_seed = 0;
};
TrialSetup make_trial(const ScenarioConfig& scenario, std::size_t trial);

// Runs one trial, answering draws from the population's truth.
TrialResult run_trial(const ScenarioConfig& scenario, const TrialSetup& setup);

ExperimentResult run_trials(const ScenarioConfig& scenario);

struct CvGainPoint {
  double c = 0.0;
  double mean_ratio = 0.0;
  double std_ratio = 0.0;
  double q10 = 0.0;
  double q90 = 0.0;
  std::vector<double> ratios;
};

// For each c: paired trials (same population, same draw stream) with and
// without control variates; tau_CV / tau_noCV statistics.
std::vector<CvGainPoint> cv_gain_sweep(const ScenarioConfig& scenario,
                                       const std::vector<double>& c_values);

// Writes summary.json, trials.csv and widths.csv into `dir`.
void write_results(const ExperimentResult& result, const ScenarioConfig& scenario,
                   const std::filesystem::path& dir);
void write_sweep(const std::vector<CvGainPoint>& points, const ScenarioConfig& scenario,
                 const std::filesystem::path& dir);

nlohmann::json summary_json(const ExperimentResult& result, const ScenarioConfig& scenario);

}  // namespace rlfa
