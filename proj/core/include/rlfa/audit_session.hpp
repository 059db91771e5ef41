#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rlfa/confseq.hpp"
#include "rlfa/martingale.hpp"
#include "rlfa/population.hpp"
#include "rlfa/rng.hpp"
#include "rlfa/sampling.hpp"

namespace rlfa {

struct SessionConfig {
  double epsilon = 0.05;
  double delta = 0.05;
  Strategy strategy = Strategy::prop_m;
  CsFamily cs_family = CsFamily::betting;
  bool control_variates = false;
  std::size_t batch_size = 1;
  std::size_t grid_size = 1001;
  std::uint64_t seed = 0;
  // Known bound a with S/f in [1-a, 1+a]; tightens the propMS payoff support.
  std::optional<double> score_accuracy;
  // Horizon t0 of the closed-form lambda schedules (default N/2).
  std::optional<double> lambda_horizon;
  // Off-grid nulls whose wealth is tracked for diagnostics only. Not persisted.
  std::vector<double> probes;
};

// Throws Error{configuration} on invalid values or unmet strategy
// prerequisites.
void validate_config(const SessionConfig& config, const Population& population);

nlohmann::json config_to_json(const SessionConfig& config);
SessionConfig config_from_json(const nlohmann::json& j);

enum class SessionStatus { running, stopped, exhausted };
std::string_view to_string(SessionStatus status) noexcept;

enum class Decision { reject, confirm, continue_auditing };
std::string_view to_string(Decision decision) noexcept;

struct HistoryEntry {
  std::size_t step = 0;
  std::size_t index = 0;
  double q_prob = 0.0;
  double f_obs = 0.0;
};

// Ordered record of audited draws; its order is the filtration.
class AuditHistory {
 public:
  explicit AuditHistory(const Population& population);

  void append(std::size_t index, double q_prob, double f_obs);

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<HistoryEntry>& entries() const noexcept { return entries_; }
  bool is_audited(std::size_t index) const { return audited_.at(index); }
  // Unaudited indices, ascending.
  const std::vector<std::size_t>& remaining() const noexcept { return remaining_; }

  // sum over audited of pi f (compensated accumulation).
  double audited_mass() const noexcept { return static_cast<double>(audited_mass_); }
  // sum over audited of pi.
  double audited_weight() const noexcept { return static_cast<double>(audited_weight_); }
  // sum over unaudited of pi, summed afresh (exactly 0 once empty).
  double remaining_weight() const;

 private:
  const std::vector<double>* weights_;
  std::vector<HistoryEntry> entries_;
  std::vector<bool> audited_;
  std::vector<std::size_t> remaining_;
  long double audited_mass_ = 0.0L;
  long double audited_weight_ = 0.0L;
};

struct TraceEntry {
  std::size_t t = 0;
  IntervalState intervals;
};

struct SessionUpdate {
  Interval combined;
  double width = 1.0;
  bool stopped = false;
  std::size_t t = 0;
};

// One (epsilon, delta) risk-limiting audit: draw, observe, update, stop.
class AuditSession {
 public:
  AuditSession(std::shared_ptr<const Population> population, SessionConfig config,
               std::string id = {});

  const std::string& id() const noexcept { return id_; }
  const SessionConfig& config() const noexcept { return config_; }
  const Population& population() const noexcept { return *population_; }
  const std::shared_ptr<const Population>& population_ptr() const noexcept { return population_; }
  const AuditHistory& history() const noexcept { return history_; }
  const IntervalState& intervals() const noexcept { return intervals_; }
  const std::vector<TraceEntry>& trace() const noexcept { return trace_; }
  SessionStatus status() const noexcept { return status_; }
  std::optional<std::size_t> stopped_at() const noexcept { return stopped_at_; }
  std::size_t t() const noexcept { return history_.size(); }
  const std::vector<std::size_t>& pending() const noexcept { return pending_; }
  const RngState& rng_state() const noexcept { return rng_.state(); }
  // Number of rounds whose combined CS came out empty.
  std::size_t empty_events() const noexcept { return empty_events_; }

  // Betting state; null for the closed-form families.
  const NullGrid* grid() const noexcept { return grid_ ? &*grid_ : nullptr; }
  const ClosedFormState* closed_form() const noexcept {
    return closed_form_ ? &*closed_form_ : nullptr;
  }

  // Draws the next min(B, remaining) indices and marks them pending.
  std::vector<std::size_t> next_draw();

  // f values for the pending draw, in draw order.
  SessionUpdate record_observation(std::span<const double> f_values);
  // (index, f) pairs covering the pending draw in any order.
  SessionUpdate record_observation(std::span<const std::pair<std::size_t, double>> observations);

  // Testing variant for the assertion m* <= epsilon.
  Decision test_assertion(double epsilon) const;

  // Combined CS for the not-yet-corrected misstatement: shifted down by the
  // audited mass and floored at 0.
  Interval remaining_fraction_interval() const;

  nlohmann::json to_json(bool embed_population = true) const;
  // Rebuilds a session by replaying its history. Uses the embedded
  // population when present, else `population`.
  static AuditSession from_json(const nlohmann::json& j,
                                std::shared_ptr<const Population> population = nullptr);

 private:
  Distribution in_batch_distribution(const Distribution& base,
                                     std::span<const std::size_t> drawn) const;
  void rebuild_pending_distributions();

  std::string id_;
  std::shared_ptr<const Population> population_;
  SessionConfig config_;
  AuditHistory history_;
  CounterRng rng_;
  std::optional<NullGrid> grid_;
  std::optional<ClosedFormState> closed_form_;
  IntervalState intervals_;
  std::vector<TraceEntry> trace_;
  std::vector<std::size_t> pending_;
  std::vector<Distribution> pending_dists_;
  SessionStatus status_ = SessionStatus::running;
  std::optional<std::size_t> stopped_at_;
  std::size_t empty_events_ = 0;
};

nlohmann::json population_to_json(const Population& population);
Population population_from_json(const nlohmann::json& j);

}  // namespace rlfa
