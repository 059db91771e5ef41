#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rlfa_cli/cli.hpp"

namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args, const std::string& input = "") {
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = rlfa::cli::run_cli(args, in, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "rlfa_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

const char* kPopulation =
    "id,reported_value,true_f\n"
    "a,50,0.2\n"
    "b,30,0.4\n"
    "c,20,0\n"
    "d,5,0.1\n"
    "e,15,0.05\n";

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"simulate"}).code, 2);
  auto r = run({"audit", "--population", "x.csv", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, RuntimeErrorsExitOne) {
  auto r = run({"audit", "--population", scratch("missing.csv").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: io:", 0), 0u) << r.err;
  const auto pop = scratch("pop.csv");
  write(pop, kPopulation);
  r = run({"audit", "--population", pop.string(), "--epsilon", "0"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: configuration:", 0), 0u) << r.err;
}

TEST(Cli, BatchAuditIsReproducible) {
  const auto pop = scratch("pop.csv");
  write(pop, kPopulation);
  const std::vector<std::string> args{"audit", "--population", pop.string(), "--seed", "5",
                                      "--epsilon", "0.01", "--trace"};
  const auto a = run(args), b = run(args);
  EXPECT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("tau:"), std::string::npos);
  EXPECT_NE(a.out.find("interval:"), std::string::npos);
  const auto unseeded = run({"audit", "--population", pop.string()});
  EXPECT_EQ(unseeded.out.rfind("seed: ", 0), 0u);
}

TEST(Cli, InteractiveAuditAndReplay) {
  const auto pop = scratch("bare.csv");
  write(pop, "id,reported_value\nonly,12.5\n");
  const auto saved = scratch("session.json");
  auto r = run({"audit", "--population", pop.string(), "--seed", "1", "--save", saved.string()},
               "0.37\n");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("audit index only"), std::string::npos);
  EXPECT_NE(r.out.find("tau: 1"), std::string::npos);
  EXPECT_NE(r.out.find("interval: [0.37, 0.37]"), std::string::npos);
  auto replay = run({"replay", saved.string()});
  EXPECT_EQ(replay.code, 0) << replay.err;
  EXPECT_NE(replay.out.find("t=1 interval [0.37, 0.37] width 0"), std::string::npos) << replay.out;
}

TEST(Cli, InteractiveRejectsBadInput) {
  const auto pop = scratch("bare2.csv");
  write(pop, "reported_value\n1\n2\n");
  auto r = run({"audit", "--population", pop.string(), "--seed", "1"}, "abc\n1.5\n0.5\n0.5\n");
  EXPECT_EQ(r.code, 0) << r.err;
  auto eof = run({"audit", "--population", pop.string(), "--seed", "1"}, "");
  EXPECT_EQ(eof.code, 1);
}

TEST(Cli, SimulateWritesResults) {
  const auto cfg = scratch("scenario.json");
  write(cfg, R"({"N": 40, "trials": 4, "seed": 2, "epsilon": 0.1})");
  const auto out = scratch("sim_out");
  fs::remove_all(out);
  auto r = run({"simulate", "--config", cfg.string(), "--out", out.string(), "--threads", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"summary.json", "trials.csv", "widths.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  EXPECT_NE(r.out.find("propM+betting: trials 4"), std::string::npos) << r.out;
}

TEST(Cli, SweepWritesResults) {
  const auto cfg = scratch("sweep.json");
  write(cfg, R"({"N": 40, "trials": 3, "seed": 2, "score_mode": "mixture", "control_variates": false})");
  const auto out = scratch("sweep_out");
  fs::remove_all(out);
  auto r = run({"sweep-cv", "--config", cfg.string(), "--out", out.string(), "--c", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "sweep.csv"));
}

}  // namespace
