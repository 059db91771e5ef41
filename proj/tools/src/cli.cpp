#include "rlfa_cli/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

#include "rlfa/api_server.hpp"
#include "rlfa/audit_session.hpp"
#include "rlfa/errors.hpp"
#include "rlfa/simulator.hpp"

namespace rlfa::cli {

namespace {

std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string interval_text(const Interval& iv) {
  if (iv.empty) return "empty";
  return "[" + num(iv.lo) + ", " + num(iv.hi) + "]";
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::format, path + ": " + e.what());
  }
}

struct AuditArgs {
  std::string population;
  double epsilon = 0.05;
  double delta = 0.05;
  std::string strategy = "propM";
  std::string cs = "betting";
  bool control_variates = false;
  std::size_t batch_size = 1;
  std::size_t grid = 1001;
  std::optional<std::uint64_t> seed;
  std::optional<double> score_accuracy;
  bool trace = false;
  std::string save;
};

bool read_f(std::istream& in, double& f) {
  std::string line;
  if (!std::getline(in, line)) return false;
  const auto first = line.find_first_not_of(" \t\r");
  const auto last = line.find_last_not_of(" \t\r");
  if (first == std::string::npos) return read_f(in, f);
  const std::string text = line.substr(first, last - first + 1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), f);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::validation, "'" + text + "' is not a number");
  }
  return true;
}

int run_audit(const AuditArgs& a, std::istream& in, std::ostream& out, std::ostream& err) {
  auto pop = std::make_shared<const Population>(load_population(a.population));
  SessionConfig config;
  config.epsilon = a.epsilon;
  config.delta = a.delta;
  config.strategy = parse_strategy(a.strategy);
  config.cs_family = parse_cs_family(a.cs);
  config.control_variates = a.control_variates;
  config.batch_size = a.batch_size;
  config.grid_size = a.grid;
  config.score_accuracy = a.score_accuracy;
  if (a.seed) {
    config.seed = *a.seed;
  } else {
    config.seed = entropy_seed();
    out << "seed: " << config.seed << "\n";
  }
  AuditSession session(pop, config, "cli");
  const bool batch = pop->has_truth();

  while (!session.stopped_at() && !session.history().remaining().empty()) {
    const auto drawn = session.next_draw();
    std::vector<double> f;
    for (std::size_t j = 0; j < drawn.size(); ++j) {
      const std::size_t i = drawn[j];
      if (batch) {
        f.push_back(pop->truth()[i]);
        continue;
      }
      double value = 0.0;
      for (;;) {
        out << "t=" << session.t() + j + 1 << " audit index " << pop->ids()[i] << " (weight "
            << num(pop->weights()[i]) << "), enter f: " << std::flush;
        try {
          if (!read_f(in, value)) throw Error(ErrorKind::io, "input ended before the audit stopped");
          if (value >= 0.0 && value <= 1.0) break;
          err << "f must lie in [0,1]\n";
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::validation) throw;
          err << e.what() << "\n";
        }
      }
      f.push_back(value);
    }
    const SessionUpdate update = session.record_observation(f);
    if (a.trace) {
      out << "t=" << update.t << " interval " << interval_text(update.combined) << " width "
          << num(update.width) << "\n";
    }
  }

  if (session.stopped_at()) {
    out << "tau: " << *session.stopped_at() << "\n";
  } else {
    out << "tau: none (population exhausted at t=" << session.t() << ")\n";
  }
  out << "interval: " << interval_text(session.intervals().combined) << "\n";
  out << "width: " << num(session.intervals().combined.width()) << "\n";
  if (!a.save.empty()) {
    std::ofstream file(a.save);
    if (!file) throw Error(ErrorKind::io, "cannot write '" + a.save + "'");
    file << session.to_json().dump(2) << "\n";
  }
  return 0;
}

int run_replay(const std::string& path, std::ostream& out) {
  const AuditSession session = AuditSession::from_json(read_json(path));
  out << "session " << session.id() << " t=" << session.t() << " status "
      << to_string(session.status()) << "\n";
  for (const auto& e : session.trace()) {
    out << "t=" << e.t << " interval " << interval_text(e.intervals.combined) << " width "
        << num(e.intervals.combined.width()) << "\n";
  }
  if (session.stopped_at()) out << "tau: " << *session.stopped_at() << "\n";
  return 0;
}

void apply_overrides(ScenarioConfig& s, std::optional<std::size_t> trials,
                     std::optional<std::uint64_t> seed, std::optional<std::size_t> threads) {
  if (trials) s.trials = *trials;
  if (seed) s.seed = *seed;
  if (threads) s.threads = *threads;
  validate_scenario(s);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Risk-limiting financial audits with confidence sequences", "rlfa"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "results";
  std::optional<std::size_t> trials, threads;
  std::optional<std::uint64_t> seed;

  auto* simulate = app.add_subcommand("simulate", "Run simulated audit trials");
  simulate->add_option("--config", config_path, "Scenario JSON file")->required();
  simulate->add_option("--out", out_dir, "Output directory");
  simulate->add_option("--trials", trials, "Override the number of trials");
  simulate->add_option("--seed", seed, "Override the scenario seed");
  simulate->add_option("--threads", threads, "Worker threads (0 = all cores)");

  std::vector<double> c_values{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  auto* sweep = app.add_subcommand("sweep-cv", "Control-variate gain sweep over mixture weights");
  sweep->add_option("--config", config_path, "Scenario JSON file")->required();
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_option("--c", c_values, "Mixture weights in (0,1)");
  sweep->add_option("--trials", trials, "Override the number of trials");
  sweep->add_option("--seed", seed, "Override the scenario seed");
  sweep->add_option("--threads", threads, "Worker threads (0 = all cores)");

  AuditArgs audit_args;
  auto* audit = app.add_subcommand("audit", "Audit a population CSV");
  audit->add_option("--population", audit_args.population, "Population CSV")->required();
  audit->add_option("--epsilon", audit_args.epsilon, "Target width");
  audit->add_option("--delta", audit_args.delta, "Error level");
  audit->add_option("--strategy", audit_args.strategy, "uniform | propM | propMS | oracle");
  audit->add_option("--cs", audit_args.cs, "betting | hoeffding | empirical_bernstein");
  audit->add_flag("--control-variates", audit_args.control_variates, "Use control variates");
  audit->add_option("--batch-size", audit_args.batch_size, "Draws per round");
  audit->add_option("--grid", audit_args.grid, "Null grid size");
  audit->add_option("--seed", audit_args.seed, "Sampling seed");
  audit->add_option("--score-accuracy", audit_args.score_accuracy,
                    "Known relative accuracy a of the scores");
  audit->add_flag("--trace", audit_args.trace, "Print the interval after every round");
  audit->add_option("--save", audit_args.save, "Write the final session JSON here");

  int port = 8080;
  std::string host = "127.0.0.1", persist;
  auto* serve_cmd = app.add_subcommand("serve", "Start the HTTP session service");
  serve_cmd->add_option("--port", port, "TCP port");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--persist", persist, "Directory for session snapshots");

  std::string session_path;
  auto* replay = app.add_subcommand("replay", "Print the interval trace of a saved session");
  replay->add_option("session", session_path, "Session JSON file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (simulate->parsed()) {
      ScenarioConfig s = scenario_from_json(read_json(config_path));
      apply_overrides(s, trials, seed, threads);
      const ExperimentResult result = run_trials(s);
      write_results(result, s, out_dir);
      out << result.method << ": trials " << result.trials.size() << ", mean tau "
          << num(result.mean_tau) << ", miscoverage " << result.miscoverage_count << "\n";
    } else if (sweep->parsed()) {
      ScenarioConfig s = scenario_from_json(read_json(config_path));
      apply_overrides(s, trials, seed, threads);
      const auto points = cv_gain_sweep(s, c_values);
      write_sweep(points, s, out_dir);
      for (const auto& p : points) {
        out << "c=" << num(p.c) << " mean ratio " << num(p.mean_ratio) << "\n";
      }
    } else if (audit->parsed()) {
      return run_audit(audit_args, in, out, err);
    } else if (serve_cmd->parsed()) {
      std::optional<std::filesystem::path> dir;
      if (!persist.empty()) dir = persist;
      SessionStore store(dir);
      out << "listening on " << host << ":" << port << std::endl;
      serve(store, host, port);
    } else if (replay->parsed()) {
      return run_replay(session_path, out);
    }
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace rlfa::cli
