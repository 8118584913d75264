#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "hmpc/config.hpp"
#include "hmpc/io.hpp"
#include "hmpc/report.hpp"
#include "support.hpp"

using namespace hmpc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(HMPC_TEST_CACHE) / "scratch" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + HMPC_CLI + "\" " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

const RunLog& short_run() {
  static const RunLog log = [] {
    Scenario sc = test::scenario_config("two_obstacle").scenario;
    sc.time_limit = 3.0;
    return run_closed_loop(sc, test::ingredients());
  }();
  return log;
}

}  // namespace

TEST_CASE("shipped default config equals the built-in defaults") {
  const Config file = load_config(test::config_path("default"));
  CHECK(dump_config(file) == dump_config(default_config()));
}

TEST_CASE("every shipped value line names its origin") {
  const std::string text = read_file(test::config_path("default"));
  const auto offenders = lint_origin_comments(text);
  for (const auto& o : offenders) MESSAGE(o);
  CHECK(offenders.empty());
  CHECK(lint_origin_comments("schema: 1\nmodel:\n  tau_roll: 0.2\n").size() == 1u);
  CHECK(lint_origin_comments("model:\n  tau_roll: 0.2  # chosen\n").empty());
}

TEST_CASE("dump and parse round-trip") {
  Config c = test::scenario_config("two_obstacle");
  c.scenario.plant.seed = 12345678901ULL;
  c.scenario.schedule.beta = 7;
  c.scenario.pmpc_cost.thrust_reg = ThrustReg::as_written;
  const std::string d = dump_config(c);
  CHECK(dump_config(parse_config(d)) == d);
}

TEST_CASE("scenario files override the defaults") {
  const Config c = load_config(test::config_path("two_obstacle"));
  CHECK(c.scenario.name == "two_obstacle");
  CHECK(c.scenario.obstacles.size() == 2u);
  CHECK(c.scenario.start.x() == -4.5);
  CHECK(c.scenario.model == ModelParams{});
  CHECK(c.design.Q.diagonal() == c.scenario.tmpc.Q);
}

TEST_CASE("malformed configs are rejected with the key path") {
  auto msg = [](const std::string& text) {
    try {
      parse_config(text, "t.yaml");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(msg("model:\n  tau_rol: 0.2\n").find("model.tau_rol") != std::string::npos);
  CHECK(msg("scenario:\n  controller: pid\n").find("scenario.controller") != std::string::npos);
  CHECK(msg("scenario:\n  start: [1, 2]\n").find("scenario.start") != std::string::npos);
  CHECK(msg("tracker:\n  state_weights: [1, 2, 3]\n").find("tracker.state_weights") != std::string::npos);
  CHECK(msg("schema: 2\n").find("schema") != std::string::npos);
  CHECK(msg("model:\n  tau_roll: fast\n").find("model.tau_roll") != std::string::npos);
  CHECK(msg("model: [").find("t.yaml") != std::string::npos);
  CHECK_THROWS_AS(load_config("/nonexistent/x.yaml"), ConfigError);
}

TEST_CASE("tick, cycle and summary files round-trip bit for bit") {
  const RunLog& log = short_run();
  REQUIRE(!log.ticks.empty());
  const fs::path dir = scratch("roundtrip");
  write_run(dir.string(), log);
  const RunLog back = read_run(dir.string());
  REQUIRE(back.ticks.size() == log.ticks.size());
  REQUIRE(back.cycles.size() == log.cycles.size());
  for (std::size_t i = 0; i < log.ticks.size(); ++i) {
    CHECK(back.ticks[i].x == log.ticks[i].x);
    CHECK(back.ticks[i].u == log.ticks[i].u);
    CHECK(back.ticks[i].objective == log.ticks[i].objective);
  }
  std::ostringstream a, b;
  write_ticks(a, log.ticks);
  write_ticks(b, back.ticks);
  CHECK(a.str() == b.str());
  std::ostringstream c, d;
  write_cycles(c, log.cycles);
  write_cycles(d, back.cycles);
  CHECK(c.str() == d.str());
  CHECK(summary_json(back.summary) == summary_json(log.summary));
  CHECK(timing_json(back.timing) == timing_json(log.timing));
}

TEST_CASE("schema mismatches are refused") {
  const RunLog& log = short_run();
  std::ostringstream os;
  write_ticks(os, log.ticks);
  std::string t = os.str();
  t.replace(t.find("schema 1"), 8, "schema 9");
  std::istringstream is(t);
  CHECK_THROWS_AS(read_ticks(is), SchemaError);
  std::string s = summary_json(log.summary);
  s.replace(s.find("\"schema\": 1"), 11, "\"schema\": 0");
  CHECK_THROWS_AS(summary_from_json(s), SchemaError);
  std::istringstream bad("not a log\n");
  CHECK_THROWS_AS(read_cycles(bad), SchemaError);
}

TEST_CASE("reports are reproducible") {
  const RunLog& log = short_run();
  const fs::path d1 = scratch("report1"), d2 = scratch("report2");
  const std::vector<LabeledLog> runs = {{"short", log}};
  const auto files = write_report(runs, d1.string());
  write_report(runs, d2.string());
  CHECK(files.size() == 6u);
  for (const auto& f : files) {
    if (fs::path(f).filename() == "solve_times.csv") continue;
    CHECK(read_file((d1 / fs::path(f).filename()).string()) == read_file((d2 / fs::path(f).filename()).string()));
  }
  CHECK(goal_time_table(runs).find("short") != std::string::npos);
}

TEST_CASE("command-line exit codes") {
  const std::string ti = std::string(HMPC_TEST_CACHE) + "/terminal_ingredients.txt";
  CHECK(cli("run --no-such-flag") == 2);
  CHECK(cli("report") == 2);
  CHECK(cli("run -c /nonexistent/config.yaml") == 2);
  const fs::path dir = scratch("cli");
  write_file((dir / "bad.yaml").string(), "model:\n  tau_rol: 0.2\n");
  CHECK(cli("run -c " + (dir / "bad.yaml").string()) == 2);
  CHECK(cli("verify-terminal --load-external " + ti) == 0);
  std::string text = read_file(ti);
  const auto pos = text.find("\nc_o ");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, text.find('\n', pos + 1) - pos, "\nc_o 1");
  write_file((dir / "tampered.txt").string(), text);
  CHECK(cli("verify-terminal --load-external " + (dir / "tampered.txt").string()) == 1);
  CHECK(cli("decomp -c " + test::config_path("corridor") + " -o " + (dir / "regions.txt").string()) == 0);
  // The straight start-goal line of this map crosses an obstacle.
  CHECK(cli("decomp -c " + test::config_path("two_obstacle")) == 1);
  CHECK(read_file((dir / "regions.txt").string()).rfind("# hmpc-regions schema 1", 0) == 0);
}
