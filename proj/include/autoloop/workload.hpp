#pragma once

// Trace ingestion and the filter -> scale -> mark pipeline that turns a
// production trace into simulator jobs, plus a seeded generator producing a
// workload with the same class structure when no trace is at hand.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoloop/domain.hpp"

namespace autoloop {

enum class FinalState : std::uint8_t { Completed, Timeout, Other };

std::string_view to_string(FinalState state);
/// Strict: only the exact strings COMPLETED and TIMEOUT are recognised.
FinalState parse_final_state(std::string_view text);

struct TraceRecord {
  JobId job_id = 0;
  Seconds submit_time = 0;
  int nodes = 1;
  int cores_per_node = 1;
  Seconds time_limit = 0;
  Seconds run_duration = 0;
  FinalState final_state = FinalState::Other;
  bool exclusive = false;
  std::string partition;
  std::string queue;
  std::string month;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

enum class TraceFormat : std::uint8_t { Csv, Jsonl };

/// Column order of the CSV header (JSON-lines objects use the same keys).
inline constexpr const char* kTraceColumns[] = {
    "job_id", "submit_time", "nodes",     "cores_per_node", "time_limit", "run_duration",
    "final_state", "exclusive", "partition", "queue",        "month"};

/// Parses a whole trace. Errors carry the 1-based line number.
std::vector<TraceRecord> parse_trace(std::istream& in, TraceFormat format);

struct FilterCriteria {
  std::optional<std::string> partition;
  std::optional<std::string> queue;
  std::optional<std::string> month;
  std::set<FinalState> states{FinalState::Completed, FinalState::Timeout};
  Seconds min_run_duration = 3600;
  bool require_exclusive = true;
};

std::vector<TraceRecord> filter_jobs(const std::vector<TraceRecord>& records,
                                     const FilterCriteria& criteria);

/// Positive rational num/den.
struct Ratio {
  std::int64_t num = 1;
  std::int64_t den = 1;
};

/// Divides limits and durations by `factor` (nearest second, ties to even)
/// and releases every job at t = 0.
std::vector<TraceRecord> scale_time(const std::vector<TraceRecord>& records, Ratio factor);

/// x * den / num rounded to nearest, ties to even.
Seconds scale_seconds(Seconds x, Ratio factor);

/// TIMEOUT records at exactly `max_limit` become checkpointing jobs with
/// true_duration = limit + interval + 1; all others do not checkpoint.
std::vector<JobSpec> mark_checkpointing(const std::vector<TraceRecord>& records,
                                        Seconds max_limit, Seconds ckpt_interval);

struct GeneratorShape {
  int completed_count = 556;
  int timeout_count = 108;
  int ckpt_count = 109;
  int cluster_nodes = 20;
  int cores_per_node = 32;
  /// Node counts drawn uniformly for the non-checkpointing classes.
  std::vector<int> node_choices{1, 2, 4, 8};
  /// Node counts drawn uniformly for checkpointing jobs.
  std::vector<int> ckpt_node_choices{1};
  /// Time limits for COMPLETED-destined jobs (durations fall below them).
  std::vector<Seconds> completed_limits{360, 720, 1080, 1440};
  /// Time limits for non-checkpointing TIMEOUT jobs; must stay below
  /// ckpt_limit so they are not mistaken for max-limit jobs.
  std::vector<Seconds> timeout_limits{360, 720, 1080};
  Seconds min_duration = 60;
  Seconds ckpt_limit = 1440;
  Seconds ckpt_interval = 420;

  int total() const { return completed_count + timeout_count + ckpt_count; }
  /// Throws ConfigError on infeasible shapes.
  void validate() const;
};

GeneratorShape shape_from_json(const nlohmann::json& doc);
nlohmann::ordered_json to_json(const GeneratorShape& shape);

/// Deterministic for a given (seed, shape). Job ids are 1..N in a seeded
/// shuffle of the three job classes; all jobs are released at t = 0.
std::vector<JobSpec> synthesize_workload(std::uint64_t seed, const GeneratorShape& shape);

struct WorkloadSummary {
  int completed_destined = 0;
  int timeout_destined = 0;
  int checkpointing = 0;
  int total() const { return completed_destined + timeout_destined + checkpointing; }
};

WorkloadSummary summarize(const std::vector<JobSpec>& jobs);

}  // namespace autoloop
