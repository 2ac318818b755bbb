#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "autoloop/ckpt_tracker.hpp"
#include "autoloop/rng.hpp"

using namespace autoloop;
namespace fs = std::filesystem;

namespace {

std::size_t error_line(std::string_view text) {
  try {
    parse_checkpoint_file(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ckpt_test_" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("parse_checkpoint_file") {
  CHECK(parse_checkpoint_file("420\n840\n1260\n") == std::vector<Seconds>{420, 840, 1260});
  CHECK(parse_checkpoint_file("").empty());
  CHECK(parse_checkpoint_file("\n  \n420\n\n").size() == 1);
  CHECK(parse_checkpoint_file("420.9\n840.1") == std::vector<Seconds>{420, 840});
  CHECK(error_line("420\n400\n") == 2);
  CHECK(error_line("420\n420\n") == 2);
  CHECK(error_line("420\n\nabc\n") == 3);
  CHECK(error_line("-5\n") == 1);
  // 420.2 and 420.7 both floor to 420.
  CHECK(error_line("420.2\n420.7\n") == 2);
}

TEST_CASE("estimate_interval") {
  CHECK(estimate_interval({0, {420, 840, 1260}}) == 420);
  CHECK(estimate_interval({0, {420}}) == 420);
  CHECK(estimate_interval({0, {400, 860, 1260}}) == 420);
  CHECK(estimate_interval({100, {520, 940}}) == 420);
  // (1 - 0) / 2 rounds half to even: 0, clamped to 1.
  CHECK(estimate_interval({0, {1}}) == 1);
  // 5 / 2 = 2.5 -> 2; 7 / 2 = 3.5 -> 4.
  CHECK(estimate_interval({0, {2, 5}}) == 2);
  CHECK(estimate_interval({0, {3, 7}}) == 4);
  CHECK_THROWS_AS(estimate_interval({0, {}}), NoCheckpointData);
}

TEST_CASE("predict_next") {
  CHECK(predict_next({0, {420, 840}}) == 1260);
  CHECK(predict_next({0, {1260}}) == 2520);
  CHECK(predict_next({0, {420, 840, 1260}}) == 1680);
  CHECK_THROWS_AS(predict_next({0, {}}), NoCheckpointData);
}

TEST_CASE("periodic ledgers predict exactly and predictions move forward") {
  StableRng rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    const Seconds start = rng.between(0, 100000);
    const Seconds k = rng.between(1, 5000);
    const int n = static_cast<int>(rng.between(1, 30));
    LedgerEntry periodic{start, {}};
    for (int i = 1; i <= n; ++i) periodic.timestamps.push_back(start + i * k);
    CHECK(estimate_interval(periodic) == k);
    CHECK(predict_next(periodic) == start + (n + 1) * k);

    LedgerEntry noisy{start, {}};
    Seconds t = start;
    for (int i = 0; i < n; ++i) noisy.timestamps.push_back(t += rng.between(1, 900));
    CHECK(predict_next(noisy) > noisy.timestamps.back());
  }
}

TEST_CASE("ledger appends go through the file parser") {
  CheckpointLedger ledger;
  ledger.open(5, 100);
  ledger.append_report(5, "520");
  ledger.append_report(5, "940.5\n");
  CHECK_THROWS_AS(ledger.append_report(5, "940"), ParseError);
  CHECK_THROWS_AS(ledger.append_report(5, "x"), ParseError);
  CHECK_THROWS_AS(ledger.append_report(5, "1000\n1100"), ParseError);
  CHECK_THROWS_AS(ledger.append_report(6, "1000"), ParseError);
  const auto snap = ledger.snapshot();
  CHECK(snap.at(5) == LedgerEntry{100, {520, 940}});

  CheckpointLedger late;
  late.open(1, 500);
  CHECK_THROWS_AS(late.append_report(1, "499"), ParseError);

  ledger.load_report_file(7, 0, "420\n840\n");
  CHECK(ledger.snapshot().at(7).timestamps.size() == 2);
  CHECK(ledger.contains(7));
  ledger.close(7);
  CHECK_FALSE(ledger.contains(7));
}

TEST_CASE("snapshot readers never see partial entries") {
  CheckpointLedger ledger;
  ledger.open(1, 0);
  std::atomic<bool> done{false};
  std::thread writer([&] {
    for (Seconds t = 1; t <= 5000; ++t) ledger.append_report(1, std::to_string(t));
    done = true;
  });
  std::size_t last = 0;
  bool ok = true;
  while (!done) {
    const auto snap = ledger.snapshot();
    const auto& ts = snap.at(1).timestamps;
    for (std::size_t i = 0; i < ts.size(); ++i) ok = ok && ts[i] == static_cast<Seconds>(i + 1);
    ok = ok && ts.size() >= last;
    last = ts.size();
  }
  writer.join();
  CHECK(ok);
  CHECK(ledger.snapshot().at(1).timestamps.size() == 5000);
}

TEST_CASE("spool files") {
  TempDir dir;
  CHECK(spool_path("/var/spool/x", 42) == fs::path("/var/spool/x/ckpt_42.log"));
  {
    std::ofstream(spool_path(dir.path, 1)) << "1000420\n1000840\n";
    // Writer caught mid-line: the trailing fragment is ignored.
    std::ofstream(spool_path(dir.path, 2)) << "2000420\n20008";
  }
  const auto snap = read_spool(dir.path, {{1, 1000000}, {2, 2000000}, {3, 3000000}});
  CHECK(snap.size() == 2);
  CHECK(snap.at(1) == LedgerEntry{1000000, {1000420, 1000840}});
  CHECK(snap.at(2) == LedgerEntry{2000000, {2000420}});
  CHECK_FALSE(snap.contains(3));
  CHECK_THROWS_AS(read_spool(dir.path, {{1, 1000500}}), ParseError);
}
