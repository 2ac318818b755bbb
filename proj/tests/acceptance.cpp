// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>
#include <string>
#include <vector>

#include "autoloop/daemon.hpp"
#include "autoloop/metrics.hpp"
#include "autoloop/simulator.hpp"
#include "autoloop/slurm.hpp"
#include "autoloop/workload.hpp"
#include "oracles.hpp"

using namespace autoloop;

namespace {

// Pinned tolerances.
constexpr double kMinTailReductionPct = 88.0;
constexpr double kCpuBandLowPct = 1.0;
constexpr double kCpuBandHighPct = 1.6;
constexpr int kPropertyInstances = 1000;
constexpr double kMaxCompareSeconds = 60.0;
constexpr std::uint64_t kSeed = 42;

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
  if (!ok) ++failures;
}

struct Run {
  SimulationResult result;
  MetricsReport metrics;
};

Run simulate(const std::vector<JobSpec>& jobs, const ClusterConfig& cluster, PolicyKind p,
             SimulationHooks hooks = {}) {
  auto result = run_simulation(jobs, cluster, p, std::move(hooks));
  auto metrics = aggregate(result.jobs, p);
  return {std::move(result), metrics};
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double reduction_pct(CoreSeconds base, CoreSeconds other) {
  return base == 0 ? 0.0 : (double(base) - double(other)) / double(base) * 100.0;
}

// Planned start of every pending job under the chosen action must not exceed
// its planned start under an immediate cancel.
struct NoDelayReplay {
  int decisions = 0;
  int extends = 0;
  int violations = 0;

  DecisionObserver observer() {
    return [this](const QueueSnapshot& snap, const AdjustmentAction& a) {
      ++decisions;
      if (a.verb != ActionVerb::ExtendTo) return;
      ++extends;
      const auto chosen = plan_schedule(with_limit(snap, a.job_id, a.new_limit));
      const auto cancelled = plan_schedule(with_cancel(snap, a.job_id));
      for (const auto& [id, planned] : chosen.pending) {
        const auto it = cancelled.pending.find(id);
        if (it == cancelled.pending.end() || planned.start > it->second.start) ++violations;
      }
    };
  }
};

bool timelimit_round_trip(std::string& detail) {
  StableRng rng(7);
  std::vector<Seconds> samples;
  for (Seconds s = 0; s <= 200000; ++s) samples.push_back(s);
  for (int i = 0; i < 200000; ++i) samples.push_back(rng.between(0, 10'000'000));
  samples.push_back(10'000'000);
  for (Seconds s : samples)
    if (slurm::parse_timelimit(slurm::format_timelimit(s)) != s) {
      detail = "round trip broke at " + std::to_string(s);
      return false;
    }
  detail = std::to_string(samples.size()) + " limits round-trip";
  return true;
}

bool squeue_fixture(std::string& detail) {
  constexpr Seconds t0 = 1714557600;  // 2024-05-01T10:00:00Z
  std::ifstream in(std::string(FIXTURE_DIR) + "/squeue_basic.txt");
  std::stringstream text;
  text << in.rdbuf();
  const auto parsed =
      slurm::parse_squeue_output(text.str(), slurm::NodeTable::from_hostlist("node[01-04]"), t0 + 1800);
  QueueSnapshot expected;
  expected.now = t0 + 1800;
  expected.node_count = 4;
  expected.running = {{101, t0, 86400, {0, 1}, 0}, {102, t0 + 1200, 1440, {3}, 0}};
  expected.pending = {{103, 3, 1800, t0 + 7200}};
  expected.free_nodes = {2};
  if (!parsed.warnings.empty() || !(parsed.snapshot == expected)) {
    detail = "squeue fixture does not match the hand-built snapshot";
    return false;
  }
  return true;
}

bool golden_commands(std::string& detail) {
  const std::pair<slurm::SchedulerCommand, std::string> golden[] = {
      {slurm::build_update_command(1234, 1700), "scontrol update JobId=1234 TimeLimit=0-00:28:20"},
      {slurm::build_update_command(7, 90061), "scontrol update JobId=7 TimeLimit=1-01:01:01"},
      {slurm::build_update_command(42, 1500), "scontrol update JobId=42 TimeLimit=0-00:25:00"},
      {slurm::build_cancel_command(1234), "scancel 1234"},
  };
  for (const auto& [cmd, want] : golden)
    if (cmd.to_string() != want) {
      detail = "got '" + cmd.to_string() + "', want '" + want + "'";
      return false;
    }
  return true;
}

}  // namespace

int main() {
  const ClusterConfig cluster;  // 20 nodes x 32 cores, 20 s poll
  const auto jobs = synthesize_workload(kSeed, GeneratorShape{});

  const auto t_start = std::chrono::steady_clock::now();
  std::vector<std::future<Run>> futures;
  for (auto p : kAllPolicies)
    futures.push_back(std::async(std::launch::async, [&, p] { return simulate(jobs, cluster, p); }));
  std::vector<Run> runs;
  for (auto& f : futures) runs.push_back(f.get());
  std::vector<MetricsReport> reports;
  for (const auto& r : runs) reports.push_back(r.metrics);
  const auto table = compare(reports);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

  const auto& base = runs[0].metrics;
  const auto& ec = runs[1].metrics;
  const auto& ext = runs[2].metrics;
  const auto& hyb = runs[3].metrics;

  std::printf("workload: %zu jobs, seed %llu, %d nodes x %d cores\n", jobs.size(),
              static_cast<unsigned long long>(kSeed), cluster.node_count, cluster.cores_per_node);

  // 1. Checkpoint counts.
  report(1, base.total_checkpoints == 327 && ec.total_checkpoints == 327 && ext.total_checkpoints == 436,
         fmt("checkpoints baseline %.0f, early-cancel %.0f, extend %.0f (want 327/327/436)",
             double(base.total_checkpoints), double(ec.total_checkpoints), double(ext.total_checkpoints)));

  // 2. Job outcomes.
  {
    const bool ok = base.timeout == 217 && base.completed == 556 && ec.timeout == 108 &&
                    ec.early_cancelled == 109 && ec.completed == 556 && ext.extended == 109 &&
                    hyb.early_cancelled + hyb.extended == 109;
    std::ostringstream d;
    d << "baseline " << base.timeout << " timeout/" << base.completed << " completed; early-cancel "
      << ec.timeout << "/" << ec.early_cancelled << " cancelled/" << ec.completed << "; extend "
      << ext.extended << " extended; hybrid " << hyb.early_cancelled << " cancelled + " << hyb.extended
      << " extended";
    report(2, ok, d.str());
  }

  // 3. Tail waste reductions.
  {
    const double r_ec = reduction_pct(base.tail_waste, ec.tail_waste);
    const double r_ext = reduction_pct(base.tail_waste, ext.tail_waste);
    const double r_hyb = reduction_pct(base.tail_waste, hyb.tail_waste);
    report(3, r_ec >= kMinTailReductionPct && r_ext >= kMinTailReductionPct && r_hyb >= kMinTailReductionPct,
           fmt("tail waste reduction early-cancel %.1f%%, extend %.1f%%, hybrid %.1f%% (want >= 88%%)", r_ec,
               r_ext, r_hyb));
  }

  // 4. CPU-tail identity and the CPU saving band.
  {
    const CoreSeconds cpu_saved = base.total_cpu - ec.total_cpu;
    const CoreSeconds tail_saved = base.tail_waste - ec.tail_waste;
    const double tail_share = double(base.tail_waste) / double(base.total_cpu) * 100.0;
    const double saving = double(cpu_saved) / double(base.total_cpu) * 100.0;
    const bool in_band = [](double v) { return v >= kCpuBandLowPct && v <= kCpuBandHighPct; }(tail_share) &&
                         saving >= kCpuBandLowPct && saving <= kCpuBandHighPct;
    report(4, cpu_saved == tail_saved && in_band,
           fmt("cpu saved %.0f == tail saved %.0f core-s; baseline tail %.3f%% of CPU", double(cpu_saved),
               double(tail_saved), tail_share) +
               fmt(", early-cancel saves %.3f%% of CPU", saving));
  }

  // 5. Cancellation latency.
  {
    int cancelled = 0;
    int over = 0;
    CoreSeconds worst = 0;
    for (const auto& rt : runs[1].result.jobs) {
      if (rt.state != JobState::CancelledAtCkpt) continue;
      ++cancelled;
      const CoreSeconds w = tail_waste(rt);
      worst = std::max(worst, w);
      if (w > rt.spec.cores() * cluster.poll_interval) ++over;
    }
    report(5, over == 0 && cancelled > 0,
           fmt("%.0f cancelled jobs, %.0f over cores x poll_interval, worst tail %.0f core-s", cancelled, over,
               double(worst)));
  }

  // 6. Hybrid never delays a pending job relative to cancelling.
  {
    NoDelayReplay replay;
    SimulationHooks hooks;
    hooks.on_decision = replay.observer();
    simulate(jobs, cluster, PolicyKind::Hybrid, hooks);
    StableRng rng(606);
    for (int i = 0; i < 500; ++i) {
      auto in = oracle::random_instance(rng);
      SimulationHooks h;
      h.on_decision = replay.observer();
      run_simulation(in.jobs, in.cluster, PolicyKind::Hybrid, h);
    }
    report(6, replay.violations == 0 && replay.extends > 0,
           fmt("%.0f hybrid decisions replayed (%.0f extensions), %.0f delayed pending jobs", replay.decisions,
               replay.extends, replay.violations));
  }

  // 7. Direction checks.
  report(7,
         ec.makespan < base.makespan && base.makespan < ext.makespan && hyb.total_checkpoints >= 327 &&
             hyb.total_checkpoints <= 436,
         fmt("makespan early-cancel %.0f < baseline %.0f < extend %.0f", double(ec.makespan),
             double(base.makespan), double(ext.makespan)) +
             fmt("; hybrid checkpoints %.0f in [327, 436]", double(hyb.total_checkpoints)));

  // 8. Scheduler invariants on random instances.
  {
    const auto stats = oracle::sweep(8, kPropertyInstances);
    const bool ok = stats.first_failure.empty() && stats.instances >= kPropertyInstances;
    report(8, ok,
           ok ? fmt("%.0f instances, %.0f backfill starts, %.0f daemon actions checked", stats.instances,
                    stats.backfills, stats.actions)
              : stats.first_failure);
  }

  // 9. Adapter round trips, fixtures and golden commands.
  {
    std::string d1, d2, d3;
    const bool ok = timelimit_round_trip(d1) & squeue_fixture(d2) & golden_commands(d3);
    report(9, ok, d1 + (d2.empty() ? "" : "; " + d2) + (d3.empty() ? "; fixture and golden commands match" : "; " + d3));
  }

  // 10. Runtime of the four-policy comparison.
  report(10, elapsed < kMaxCompareSeconds,
         fmt("four-policy comparison took %.2f s (limit 60 s), %.0f table rows", elapsed,
             double(table.rows.size())));

  std::printf("%s\n", failures == 0 ? "ALL PASS" : "FAILURES");
  return failures == 0 ? 0 : 1;
}
