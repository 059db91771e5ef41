#include "rlfa/audit_session.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rlfa/errors.hpp"

namespace rlfa {

using nlohmann::json;

void validate_config(const SessionConfig& config, const Population& population) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::configuration, msg); };
  if (!(config.epsilon > 0.0 && config.epsilon <= 1.0)) fail("epsilon must lie in (0,1]");
  if (!(config.delta > 0.0 && config.delta < 1.0)) fail("delta must lie in (0,1)");
  if (config.batch_size < 1) fail("batch size must be at least 1");
  if (config.batch_size > population.size())
    fail("batch size exceeds the population size");
  if (config.grid_size < 2) fail("grid size must be at least 2");
  if (config.score_accuracy && !(*config.score_accuracy >= 0.0 && *config.score_accuracy < 1.0))
    fail("score accuracy must lie in [0,1)");
  if (config.lambda_horizon && !(*config.lambda_horizon > 0.0))
    fail("lambda horizon must be positive");
  if (config.control_variates && config.cs_family != CsFamily::betting)
    fail("control variates are only available with the betting CS");
  check_strategy(config.strategy, population);
}

json config_to_json(const SessionConfig& config) {
  json j = {{"epsilon", config.epsilon},
            {"delta", config.delta},
            {"strategy", to_string(config.strategy)},
            {"cs_family", to_string(config.cs_family)},
            {"control_variates", config.control_variates},
            {"batch_size", config.batch_size},
            {"grid_size", config.grid_size},
            {"seed", config.seed}};
  if (config.score_accuracy) j["score_accuracy"] = *config.score_accuracy;
  if (config.lambda_horizon) j["lambda_horizon"] = *config.lambda_horizon;
  return j;
}

SessionConfig config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::validation, "config must be a JSON object");
  SessionConfig c;
  try {
    c.epsilon = j.value("epsilon", c.epsilon);
    c.delta = j.value("delta", c.delta);
    if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy").get<std::string>());
    if (j.contains("cs_family"))
      c.cs_family = parse_cs_family(j.at("cs_family").get<std::string>());
    c.control_variates = j.value("control_variates", c.control_variates);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.grid_size = j.value("grid_size", c.grid_size);
    c.seed = j.value("seed", c.seed);
    if (j.contains("score_accuracy") && !j["score_accuracy"].is_null())
      c.score_accuracy = j["score_accuracy"].get<double>();
    if (j.contains("lambda_horizon") && !j["lambda_horizon"].is_null())
      c.lambda_horizon = j["lambda_horizon"].get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::validation, std::string("bad config field: ") + e.what());
  }
  return c;
}

std::string_view to_string(SessionStatus status) noexcept {
  switch (status) {
    case SessionStatus::running: return "running";
    case SessionStatus::stopped: return "stopped";
    case SessionStatus::exhausted: return "exhausted";
  }
  return "running";
}

std::string_view to_string(Decision decision) noexcept {
  switch (decision) {
    case Decision::reject: return "reject";
    case Decision::confirm: return "confirm";
    case Decision::continue_auditing: return "continue";
  }
  return "continue";
}

AuditHistory::AuditHistory(const Population& population)
    : weights_(&population.weights()), audited_(population.size(), false) {
  remaining_.resize(population.size());
  for (std::size_t i = 0; i < remaining_.size(); ++i) remaining_[i] = i;
}

void AuditHistory::append(std::size_t index, double q_prob, double f_obs) {
  if (index >= audited_.size()) throw Error(ErrorKind::validation, "index out of range");
  if (audited_[index])
    throw Error(ErrorKind::invariant, "index " + std::to_string(index) + " audited twice");
  audited_[index] = true;
  remaining_.erase(std::lower_bound(remaining_.begin(), remaining_.end(), index));
  const double w = (*weights_)[index];
  audited_mass_ += static_cast<long double>(w) * f_obs;
  audited_weight_ += w;
  entries_.push_back(HistoryEntry{entries_.size() + 1, index, q_prob, f_obs});
}

double AuditHistory::remaining_weight() const {
  double total = 0.0;
  for (std::size_t i : remaining_) total += (*weights_)[i];
  return total;
}

AuditSession::AuditSession(std::shared_ptr<const Population> population, SessionConfig config,
                           std::string id)
    : id_(std::move(id)),
      population_(std::move(population)),
      config_(std::move(config)),
      history_(*population_),
      rng_(config_.seed) {
  if (!population_) throw Error(ErrorKind::configuration, "session needs a population");
  validate_config(config_, *population_);
  if (config_.cs_family == CsFamily::betting) {
    grid_.emplace(config_.grid_size, config_.probes);
  } else {
    const double horizon =
        config_.lambda_horizon.value_or(static_cast<double>(population_->size()) / 2.0);
    closed_form_.emplace(config_.cs_family, config_.delta, horizon);
  }
  trace_.push_back(TraceEntry{0, intervals_});
}

Distribution AuditSession::in_batch_distribution(const Distribution& base,
                                                 std::span<const std::size_t> drawn) const {
  if (drawn.empty()) return base;
  try {
    return restrict_distribution(base, drawn);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::degenerate_distribution) throw;
  }
  // Every leftover index had q_t = 0 (propMS / oracle); continue with propM.
  std::vector<std::size_t> left;
  for (std::size_t i : base.support) {
    if (std::find(drawn.begin(), drawn.end(), i) == drawn.end()) left.push_back(i);
  }
  return make_distribution(Strategy::prop_m, *population_, left);
}

std::vector<std::size_t> AuditSession::next_draw() {
  if (!pending_.empty())
    throw Error(ErrorKind::sequencing, "a draw is already pending observation");
  const auto& remaining = history_.remaining();
  if (remaining.empty()) throw Error(ErrorKind::exhausted, "every transaction has been audited");

  const std::size_t count = std::min(config_.batch_size, remaining.size());
  const Distribution base =
      make_distribution_or_fallback(config_.strategy, *population_, remaining);
  std::vector<std::size_t> drawn;
  std::vector<Distribution> dists;
  for (std::size_t j = 0; j < count; ++j) {
    Distribution dist = in_batch_distribution(base, drawn);
    drawn.push_back(draw_index(dist, rng_));
    dists.push_back(std::move(dist));
  }
  pending_ = drawn;
  pending_dists_ = std::move(dists);
  return drawn;
}

void AuditSession::rebuild_pending_distributions() {
  pending_dists_.clear();
  if (pending_.empty()) return;
  const Distribution base =
      make_distribution_or_fallback(config_.strategy, *population_, history_.remaining());
  for (std::size_t j = 0; j < pending_.size(); ++j) {
    pending_dists_.push_back(
        in_batch_distribution(base, std::span<const std::size_t>(pending_.data(), j)));
  }
}

SessionUpdate AuditSession::record_observation(std::span<const double> f_values) {
  if (pending_.empty()) throw Error(ErrorKind::sequencing, "no draw is pending");
  if (f_values.size() != pending_.size()) {
    throw Error(ErrorKind::validation, "expected " + std::to_string(pending_.size()) +
                                           " observations, got " +
                                           std::to_string(f_values.size()));
  }
  for (double f : f_values) {
    if (!(f >= 0.0 && f <= 1.0)) throw Error(ErrorKind::validation, "f must lie in [0,1]");
  }

  const auto& pop = *population_;
  const auto score_accuracy =
      config_.strategy == Strategy::prop_ms ? config_.score_accuracy : std::nullopt;
  const WealthMode mode =
      config_.control_variates ? WealthMode::control_variate : WealthMode::plain;

  std::vector<Observation> batch;
  std::vector<StepContext> contexts;
  for (std::size_t j = 0; j < pending_.size(); ++j) {
    const Distribution& dist = pending_dists_[j];
    const std::size_t index = pending_[j];
    const Observation obs = compute_payoff(index, f_values[j], dist, pop, history_.size() + 1);
    if (grid_) {
      StepContext ctx;
      ctx.support = payoff_support(dist, pop, score_accuracy);
      ctx.audited_mass = history_.audited_mass();
      batch.push_back(obs);
      contexts.push_back(ctx);
    } else {
      ClosedFormStep step;
      step.z = obs.z;
      step.weight_ratio = pop.weights()[index] / obs.q_prob;
      step.max_weight_ratio = payoff_support(dist, pop).z_hi;
      step.audited_mass = history_.audited_mass();
      step.audited_weight = history_.audited_weight();
      closed_form_->record(step);
    }
    history_.append(index, obs.q_prob, f_values[j]);
  }

  intervals_.logical = logical_bounds(history_.audited_mass(), history_.remaining_weight());
  if (grid_) {
    if (batch.size() == 1) {
      grid_->update(batch.front(), contexts.front(), mode);
    } else {
      grid_->update_batch(batch, contexts, mode);
    }
    grid_->exclude_outside(intervals_.logical.lo, intervals_.logical.hi);
    intervals_.prob = betting_interval(*grid_, config_.delta, true);
  } else if (config_.cs_family == CsFamily::hoeffding) {
    intervals_.prob = hoeffding_interval(*closed_form_, config_.delta);
  } else {
    intervals_.prob = empirical_bernstein_interval(*closed_form_, config_.delta);
  }
  const Interval previous = intervals_.combined;
  intervals_.combined = intersect_running(intervals_.prob, intervals_.logical, previous);
  if (intervals_.combined.empty) ++empty_events_;

  pending_.clear();
  pending_dists_.clear();
  trace_.push_back(TraceEntry{history_.size(), intervals_});

  if (!stopped_at_ && intervals_.combined.width() <= config_.epsilon) {
    stopped_at_ = history_.size();
  }
  if (history_.remaining().empty()) {
    status_ = SessionStatus::exhausted;
  } else if (stopped_at_) {
    status_ = SessionStatus::stopped;
  }

  return SessionUpdate{intervals_.combined, intervals_.combined.width(), stopped_at_.has_value(),
                       history_.size()};
}

SessionUpdate AuditSession::record_observation(
    std::span<const std::pair<std::size_t, double>> observations) {
  if (pending_.empty()) throw Error(ErrorKind::sequencing, "no draw is pending");
  if (observations.size() != pending_.size()) {
    throw Error(ErrorKind::validation, "expected " + std::to_string(pending_.size()) +
                                           " observations, got " +
                                           std::to_string(observations.size()));
  }
  std::vector<double> f(pending_.size());
  std::vector<bool> seen(pending_.size(), false);
  for (const auto& [index, value] : observations) {
    auto it = std::find(pending_.begin(), pending_.end(), index);
    if (it == pending_.end())
      throw Error(ErrorKind::validation, "index " + std::to_string(index) + " is not pending");
    const auto k = static_cast<std::size_t>(it - pending_.begin());
    if (seen[k]) throw Error(ErrorKind::validation, "index " + std::to_string(index) + " repeated");
    seen[k] = true;
    f[k] = value;
  }
  return record_observation(f);
}

Decision AuditSession::test_assertion(double epsilon) const {
  const Interval& c = intervals_.combined;
  if (c.empty) return Decision::continue_auditing;
  if (c.lo > epsilon) return Decision::reject;
  if (c.hi <= epsilon) return Decision::confirm;
  return Decision::continue_auditing;
}

Interval AuditSession::remaining_fraction_interval() const {
  const Interval& c = intervals_.combined;
  if (c.empty) return c;
  const double shift = history_.audited_mass();
  return Interval{std::max(0.0, c.lo - shift), std::max(0.0, c.hi - shift), false};
}

json population_to_json(const Population& population) {
  json j = {{"ids", population.ids()}, {"reported", population.reported()}};
  if (population.has_scores()) j["scores"] = population.scores();
  if (population.has_truth()) j["truth"] = population.truth();
  return j;
}

Population population_from_json(const json& j) {
  try {
    std::optional<std::vector<double>> scores, truth;
    if (j.contains("scores")) scores = j.at("scores").get<std::vector<double>>();
    if (j.contains("truth")) truth = j.at("truth").get<std::vector<double>>();
    return Population(j.at("ids").get<std::vector<std::string>>(),
                      j.at("reported").get<std::vector<double>>(), std::move(scores),
                      std::move(truth));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("bad population document: ") + e.what());
  }
}

json AuditSession::to_json(bool embed_population) const {
  json history = json::array();
  for (const auto& e : history_.entries()) {
    history.push_back(
        {{"step", e.step}, {"index", e.index}, {"q_prob", e.q_prob}, {"f_obs", e.f_obs}});
  }
  json j = {{"id", id_},
            {"config", config_to_json(config_)},
            {"history", std::move(history)},
            {"rng_state", {{"key", rng_.state().key}, {"counter", rng_.state().counter}}},
            {"status", to_string(status_)},
            {"stopped_at", stopped_at_ ? json(*stopped_at_) : json(nullptr)},
            {"pending", pending_},
            {"accumulated",
             {{"audited_mass", history_.audited_mass()},
              {"audited_weight", history_.audited_weight()},
              {"remaining_weight", history_.remaining_weight()}}}};
  if (embed_population) j["population"] = population_to_json(*population_);
  return j;
}

AuditSession AuditSession::from_json(const json& j, std::shared_ptr<const Population> population) {
  if (!j.is_object()) throw Error(ErrorKind::format, "session document must be a JSON object");
  if (j.contains("population")) {
    population = std::make_shared<const Population>(population_from_json(j.at("population")));
  }
  if (!population) throw Error(ErrorKind::format, "session document has no population");

  try {
    AuditSession session(population, config_from_json(j.at("config")),
                         j.value("id", std::string{}));
    const auto& entries = j.at("history");
    const std::size_t batch = session.config_.batch_size;
    std::size_t k = 0;
    while (k < entries.size()) {
      const std::size_t count =
          std::min({batch, session.history_.remaining().size(), entries.size() - k});
      session.pending_.clear();
      std::vector<double> f;
      for (std::size_t j2 = 0; j2 < count; ++j2) {
        const auto& e = entries.at(k + j2);
        session.pending_.push_back(e.at("index").get<std::size_t>());
        f.push_back(e.at("f_obs").get<double>());
      }
      for (std::size_t i : session.pending_) {
        if (i >= population->size() || session.history_.is_audited(i))
          throw Error(ErrorKind::format, "history replays an invalid index");
      }
      session.rebuild_pending_distributions();
      for (std::size_t j2 = 0; j2 < count; ++j2) {
        const double recorded = entries.at(k + j2).at("q_prob").get<double>();
        const double q = session.pending_dists_[j2].prob_of(session.pending_[j2]);
        if (q != recorded)
          throw Error(ErrorKind::format, "history q_prob does not match the replayed strategy");
      }
      session.record_observation(f);
      k += count;
    }
    const auto& rng = j.at("rng_state");
    session.rng_ = CounterRng(
        RngState{rng.at("key").get<std::uint64_t>(), rng.at("counter").get<std::uint64_t>()});
    session.pending_ = j.value("pending", std::vector<std::size_t>{});
    for (std::size_t i : session.pending_) {
      if (i >= population->size() || session.history_.is_audited(i))
        throw Error(ErrorKind::format, "pending draw names an invalid index");
    }
    session.rebuild_pending_distributions();
    return session;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, std::string("bad session document: ") + e.what());
  }
}

}  // namespace rlfa
