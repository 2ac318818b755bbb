#pragma once

// Per-scenario scheduling metrics and the cross-policy comparison table.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoloop/domain.hpp"

namespace autoloop {

/// Core-seconds a job ran past its last checkpoint. Zero for jobs that do
/// not checkpoint and for jobs that completed; a checkpointing job that ends
/// before its first checkpoint loses its whole run.
CoreSeconds tail_waste(const JobRuntime& runtime);

struct WaitStats {
  double avg_wait = 0;
  /// sum(nodes * wait) / sum(nodes), in seconds.
  double weighted_avg_wait = 0;
  /// sum(nodes * wait) / N, in node-seconds.
  double node_weighted_wait = 0;

  friend bool operator==(const WaitStats&, const WaitStats&) = default;
};

/// Throws ConfigError on an empty set and NotFinished for unstarted jobs.
WaitStats waits(std::span<const JobRuntime> runtimes);

struct MetricsReport {
  PolicyKind policy = PolicyKind::Baseline;
  int total_jobs = 0;
  int completed = 0;
  int timeout = 0;
  /// Jobs ended by the daemon's cancel (state CANCELLED_AT_CKPT).
  int cancelled_at_ckpt = 0;
  /// Cancelled without ever being extended.
  int early_cancelled = 0;
  /// Granted at least one extension.
  int extended = 0;
  int sched_main = 0;
  int sched_backfill = 0;
  std::int64_t total_checkpoints = 0;
  WaitStats wait;
  CoreSeconds tail_waste = 0;
  CoreSeconds total_cpu = 0;
  Seconds makespan = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport aggregate(std::span<const JobRuntime> runtimes, PolicyKind policy);

nlohmann::ordered_json to_json(const MetricsReport& report);

struct ComparisonRow {
  std::string metric;
  std::vector<double> values;
  /// Percent change vs the first column; empty when the baseline is 0 and
  /// the value is not.
  std::vector<std::optional<double>> delta_pct;
};

struct Comparison {
  std::vector<PolicyKind> policies;
  std::vector<ComparisonRow> rows;

  const ComparisonRow& row(std::string_view metric) const;
  /// metric,<policy...>,<policy>_delta_pct... (deltas for non-baseline columns).
  std::string to_csv() const;
  std::string to_text() const;
};

/// First report is the baseline. Throws ConfigError on duplicate policies or
/// fewer than two reports.
Comparison compare(std::span<const MetricsReport> reports);

}  // namespace autoloop
