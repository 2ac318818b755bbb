#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "autoloop/live_loop.hpp"
#include "autoloop/rng.hpp"
#include "autoloop/slurm.hpp"

using namespace autoloop;
using namespace autoloop::slurm;
namespace fs = std::filesystem;

namespace {

std::string fixture(const char* name) {
  std::ifstream in(std::string(FIXTURE_DIR) + "/" + name);
  REQUIRE(in);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

constexpr Seconds kT0 = 1714557600;  // 2024-05-01T10:00:00Z

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("slurm_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

class FakeRunner : public CommandRunner {
 public:
  std::string squeue_output;
  std::vector<std::string> issued;
  int fail_exit = 0;

  CommandResult run(const SchedulerCommand& command) override {
    issued.push_back(command.to_string());
    if (command.argv[0] == "squeue") return {0, squeue_output};
    return {fail_exit, ""};
  }
};

std::string squeue_row(JobId id, Seconds start, const std::string& limit, const std::string& nodes) {
  return std::to_string(id) + "|RUNNING|" +
         // kT0-relative ISO stamp; all test starts fall within the same day.
         "2024-05-01T" + [&] {
           const Seconds s = start - kT0 + 10 * 3600;
           char buf[64];
           std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", static_cast<long long>(s / 3600),
                         static_cast<long long>(s % 3600 / 60), static_cast<long long>(s % 60));
           return std::string(buf);
         }() + "|" + limit + "|" + nodes + "|(null)|1\n";
}

}  // namespace

TEST_CASE("format_timelimit") {
  CHECK(format_timelimit(1500) == "0-00:25:00");
  CHECK(format_timelimit(0) == "0-00:00:00");
  CHECK(format_timelimit(90061) == "1-01:01:01");
  CHECK(format_timelimit(1700) == "0-00:28:20");
  CHECK(format_timelimit(100 * 86400) == "100-00:00:00");
  CHECK_THROWS_AS(format_timelimit(-1), ConfigError);
}

TEST_CASE("parse_timelimit accepts every Slurm form") {
  CHECK(parse_timelimit("25:00") == 1500);
  CHECK(parse_timelimit("1-01:01:01") == 90061);
  CHECK(parse_timelimit("25") == 1500);
  CHECK(parse_timelimit("1:02:03") == 3723);
  CHECK(parse_timelimit("2-3") == 2 * 86400 + 3 * 3600);
  CHECK(parse_timelimit("2-3:04") == 2 * 86400 + 3 * 3600 + 4 * 60);
  CHECK(parse_timelimit(" 0-00:28:20 ") == 1700);
  CHECK(parse_timelimit("UNLIMITED") == kUnlimited);
  CHECK(parse_timelimit("INFINITE") == kUnlimited);
  for (const char* bad : {"x", "", "1:2:3:4", "-5", "1-", "1--2", "1-2:3:4:5", "1:-2", "+5", "1.5", "1-x"})
    CHECK_THROWS_AS(parse_timelimit(bad), ParseError);
}

TEST_CASE("timelimit round-trip over sampled seconds") {
  StableRng rng(17);
  for (Seconds s = 0; s <= 200000; ++s) REQUIRE(parse_timelimit(format_timelimit(s)) == s);
  for (int i = 0; i < 200000; ++i) {
    const Seconds s = rng.between(0, 10'000'000);
    REQUIRE(parse_timelimit(format_timelimit(s)) == s);
  }
  CHECK(parse_timelimit(format_timelimit(10'000'000)) == 10'000'000);
}

TEST_CASE("command builders") {
  CHECK(build_update_command(1234, 1700).to_string() == "scontrol update JobId=1234 TimeLimit=0-00:28:20");
  CHECK(build_update_command(1, 60).to_string() == "scontrol update JobId=1 TimeLimit=0-00:01:00");
  CHECK(build_update_command(1234, 1700).argv ==
        std::vector<std::string>{"scontrol", "update", "JobId=1234", "TimeLimit=0-00:28:20"});
  CHECK_THROWS_AS(build_update_command(1, 0), ConfigError);
  CHECK_THROWS_AS(build_update_command(-1, 10), ConfigError);
  CHECK(build_cancel_command(1234).to_string() == "scancel 1234");
  CHECK(build_cancel_command(0).to_string() == "scancel 0");
  CHECK_THROWS_AS(build_cancel_command(-3), ConfigError);
  CHECK(build_squeue_command().to_string() ==
        "squeue --noconvert --states=RUNNING,PENDING --sort=-p "
        "--Format=JobID:|,State:|,StartTime:|,TimeLimit:|,NodeList:|,SchedNodes:|,NumNodes:");
  // Injective in their arguments.
  CHECK(build_update_command(12, 34) != build_update_command(1, 234));
  CHECK(build_update_command(12, 34) != build_update_command(12, 35));
  CHECK(build_cancel_command(12) != build_cancel_command(21));
}

TEST_CASE("hostlists") {
  CHECK(expand_hostlist("node[01-03,07],login1") ==
        std::vector<std::string>{"node01", "node02", "node03", "node07", "login1"});
  CHECK(expand_hostlist("a1") == std::vector<std::string>{"a1"});
  CHECK(expand_hostlist("").empty());
  CHECK(expand_hostlist("r[8-10]x") == std::vector<std::string>{"r8x", "r9x", "r10x"});
  CHECK_THROWS_AS(expand_hostlist("node[01-03"), ParseError);
  CHECK_THROWS_AS(expand_hostlist("node[3-1]"), ParseError);
  const auto table = NodeTable::from_hostlist("node[01-04]");
  CHECK(table.size() == 4);
  CHECK(table.find("node03") == 2);
  CHECK_FALSE(table.find("node05").has_value());
  CHECK_THROWS_AS(NodeTable({"a", "a"}), ConfigError);
}

TEST_CASE("iso timestamps") {
  CHECK(parse_iso_time("2024-05-01T10:00:00") == kT0);
  CHECK(parse_iso_time("2024-02-29T23:59:59") == 1709251199);
  CHECK(parse_iso_time("1970-01-01T00:00:00") == 0);
  CHECK_FALSE(parse_iso_time("N/A").has_value());
  CHECK_FALSE(parse_iso_time("2024-13-01T00:00:00").has_value());
  CHECK_FALSE(parse_iso_time("2024-05-01 10:00:00").has_value());
}

TEST_CASE("squeue fixture parses into the hand-built snapshot") {
  const auto table = NodeTable::from_hostlist("node[01-04]");
  const Seconds now = kT0 + 1800;
  const auto parsed = parse_squeue_output(fixture("squeue_basic.txt"), table, now);
  CHECK(parsed.warnings.empty());

  QueueSnapshot expected;
  expected.now = now;
  expected.node_count = 4;
  expected.running = {{101, kT0, 86400, {0, 1}, 0}, {102, kT0 + 1200, 1440, {3}, 0}};
  expected.pending = {{103, 3, 1800, kT0 + 7200}};
  expected.free_nodes = {2};
  CHECK(parsed.snapshot == expected);
}

TEST_CASE("squeue edge cases") {
  const auto table = NodeTable::from_hostlist("node[01-04]");
  const Seconds now = kT0 + 1800;

  const auto empty = parse_squeue_output(fixture("squeue_empty.txt"), table, now);
  CHECK(empty.snapshot.running.empty());
  CHECK(empty.snapshot.pending.empty());
  CHECK(empty.snapshot.free_nodes == NodeSet{0, 1, 2, 3});
  CHECK(empty.warnings.empty());

  const auto messy = parse_squeue_output(fixture("squeue_messy.txt"), table, now);
  CHECK(messy.snapshot.running.empty());
  REQUIRE(messy.snapshot.pending.size() == 2);
  CHECK(messy.snapshot.pending[0] == PendingJobView{201, 2, 3600, std::nullopt});
  // A planned start in the past is clamped to the query time.
  CHECK(messy.snapshot.pending[1] == PendingJobView{207, 1, 300, now});
  CHECK(messy.warnings.size() == 6);

  CHECK_THROWS_AS(parse_squeue_output(fixture("squeue_noheader.txt"), table, now), ParseError);
  CHECK_THROWS_AS(parse_squeue_output("", table, now), ParseError);
}

TEST_CASE("process runner") {
  TempDir bin("bin");
  const auto script = bin.path / "squeue";
  {
    std::ofstream out(script);
    out << "#!/bin/sh\ncat '" << FIXTURE_DIR << "/squeue_basic.txt'\n";
  }
  fs::permissions(script, fs::perms::owner_all);
  const std::string old_path = std::getenv("PATH") ? std::getenv("PATH") : "";
  setenv("PATH", (bin.path.string() + ":" + old_path).c_str(), 1);

  ProcessRunner runner(std::chrono::seconds(10));
  const auto result = run_checked(runner, build_squeue_command());
  CHECK(result.output == fixture("squeue_basic.txt"));

  CHECK(runner.run({{"sh", "-c", "exit 3"}, 0}).exit_code == 3);
  CHECK_THROWS_AS(run_checked(runner, {{"sh", "-c", "exit 3"}, 0}), SchedulingError);
  CHECK(run_checked(runner, {{"sh", "-c", "exit 3"}, 3}).exit_code == 3);
  CHECK(runner.run({{"definitely-not-a-command-xyz"}, 0}).exit_code == 127);

  ProcessRunner quick(std::chrono::milliseconds(200));
  const auto start = std::chrono::steady_clock::now();
  CHECK(quick.run({{"sleep", "5"}, 0}).exit_code == 124);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(3));

  setenv("PATH", old_path.c_str(), 1);
}

TEST_CASE("live loop extends, then cancels after the extra checkpoint") {
  TempDir spool("spool");
  const Seconds start = kT0 + 7;
  FakeRunner runner;
  DaemonConfig config;
  config.policy = PolicyKind::Hybrid;
  config.spool_dir = spool.path;
  std::ostringstream action_log;
  LiveLoop loop(config, NodeTable::from_hostlist("node[01-02]"), runner, &action_log);

  const std::string header(kSqueueHeader);
  // Job 301 checkpoints every 420 s; job 302 never reports.
  {
    std::ofstream(spool_path(spool.path, 301)) << start + 420 << '\n' << start + 840 << '\n';
  }
  runner.squeue_output = header + "\n" + squeue_row(301, start, "24:00", "node01") +
                         squeue_row(302, start, "10", "node02");
  auto report = loop.tick(start + 900);
  CHECK(report.actions.empty());
  CHECK(runner.issued.size() == 1);

  {
    std::ofstream(spool_path(spool.path, 301), std::ios::app) << start + 1260 << '\n';
  }
  report = loop.tick(start + 1273);
  REQUIRE(report.actions.size() == 1);
  CHECK(report.actions[0].verb == ActionVerb::ExtendTo);
  CHECK(report.actions[0].new_limit == 1700);
  CHECK(runner.issued.back() == "scontrol update JobId=301 TimeLimit=0-00:28:20");
  CHECK(loop.extensions_granted(301) == 1);

  {
    std::ofstream(spool_path(spool.path, 301), std::ios::app) << start + 1680 << '\n';
  }
  runner.squeue_output = header + "\n" + squeue_row(301, start, "0-00:28:20", "node01");
  report = loop.tick(start + 1693);
  REQUIRE(report.actions.size() == 1);
  CHECK(report.actions[0].verb == ActionVerb::CancelNow);
  CHECK(runner.issued.back() == "scancel 301");

  std::istringstream lines(action_log.str());
  std::string line;
  std::vector<std::string> logged;
  while (std::getline(lines, line)) logged.push_back(line);
  REQUIRE(logged.size() == 2);
  CHECK(logged[0].find("\"EXTEND_TO\"") != std::string::npos);
  CHECK(logged[1].find("\"CANCEL_NOW\"") != std::string::npos);

  // Job gone from the queue: its extension count is forgotten.
  runner.squeue_output = header + "\n";
  loop.tick(start + 1713);
  CHECK(loop.extensions_granted(301) == 0);
}

TEST_CASE("live loop under early cancellation and failing commands") {
  TempDir spool("spool_ec");
  const Seconds start = kT0;
  FakeRunner runner;
  DaemonConfig config;
  config.policy = PolicyKind::EarlyCancel;
  config.spool_dir = spool.path;
  LiveLoop loop(config, NodeTable::from_hostlist("node[01-02]"), runner);
  {
    std::ofstream(spool_path(spool.path, 301)) << start + 420 << '\n' << start + 840 << '\n' << start + 1260 << '\n';
  }
  runner.squeue_output = std::string(kSqueueHeader) + "\n" + squeue_row(301, start, "24:00", "node01");
  runner.fail_exit = 1;
  CHECK_THROWS_AS(loop.tick(start + 1280), SchedulingError);
  runner.fail_exit = 0;
  const auto report = loop.tick(start + 1280);
  REQUIRE(report.actions.size() == 1);
  CHECK(runner.issued.back() == "scancel 301");
}

TEST_CASE("daemon config JSON") {
  const auto c = daemon_config_from_json(nlohmann::json::parse(
      R"({"policy":"extend","poll_interval":30,"extension_grace":15,"max_extensions":2,"spool_dir":"/tmp/x"})"));
  CHECK(c.policy == PolicyKind::Extend);
  CHECK(c.poll_interval == 30);
  CHECK(c.extension_grace == 15);
  CHECK(c.max_extensions == 2);
  CHECK(c.spool_dir == fs::path("/tmp/x"));
  CHECK_THROWS_AS(daemon_config_from_json(nlohmann::json{{"policy", "sometimes"}}), ConfigError);
  CHECK_THROWS_AS(daemon_config_from_json(nlohmann::json{{"poll", 3}}), ConfigError);
  CHECK_THROWS_AS(daemon_config_from_json(nlohmann::json{{"poll_interval", 0}}), ConfigError);
}
