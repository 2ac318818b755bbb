#pragma once

// Core job/cluster types and the job lifecycle state machine.
//
// All times are integer seconds on a simulation clock (or epoch seconds in
// live mode). Jobs always occupy whole nodes exclusively.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace autoloop {

using Seconds = std::int64_t;
using CoreSeconds = std::int64_t;
using JobId = std::int64_t;
using NodeId = std::int32_t;

/// Sorted, duplicate-free list of node ids.
using NodeSet = std::vector<NodeId>;

inline constexpr JobId kNoJob = -1;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or infeasible input (job larger than the cluster, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed external text. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IllegalTransition : public Error {
 public:
  using Error::Error;
};

class NotFinished : public Error {
 public:
  using Error::Error;
};

/// A scheduler verb (cancel, limit update) was rejected.
class SchedulingError : public Error {
 public:
  using Error::Error;
};

struct JobSpec {
  JobId job_id = 0;
  Seconds submit_time = 0;
  int nodes = 1;
  int cores_per_node = 1;
  Seconds time_limit = 1;
  Seconds true_duration = 1;
  /// Wall-clock period between checkpoint completions, measured from job
  /// start. Present iff the job checkpoints.
  std::optional<Seconds> ckpt_interval;

  bool checkpointing() const noexcept { return ckpt_interval.has_value(); }
  std::int64_t cores() const noexcept {
    return static_cast<std::int64_t>(nodes) * cores_per_node;
  }

  friend bool operator==(const JobSpec&, const JobSpec&) = default;
};

/// Throws ConfigError when a JobSpec invariant does not hold.
void validate(const JobSpec& spec);

enum class JobState : std::uint8_t {
  Pending,
  Running,
  Completed,
  Timeout,
  CancelledAtCkpt,
};

enum class SchedSource : std::uint8_t { Main, Backfill };

std::string_view to_string(JobState state);
std::string_view to_string(SchedSource source);

inline bool is_terminal(JobState s) noexcept {
  return s == JobState::Completed || s == JobState::Timeout ||
         s == JobState::CancelledAtCkpt;
}

struct JobRuntime {
  explicit JobRuntime(JobSpec s) : spec(std::move(s)), current_limit(spec.time_limit) {}

  JobSpec spec;
  JobState state = JobState::Pending;
  std::optional<Seconds> start_time;
  Seconds current_limit;
  NodeSet allocated_nodes;
  /// Absolute checkpoint completion times, strictly increasing.
  std::vector<Seconds> checkpoints;
  std::optional<Seconds> end_time;
  std::optional<SchedSource> sched_source;
  int extensions_granted = 0;

  bool terminal() const noexcept { return is_terminal(state); }
  Seconds expected_end() const { return start_time.value_or(0) + current_limit; }
};

namespace lifecycle {
struct Start {
  Seconds time;
  NodeSet nodes;
  SchedSource source;
};
struct Checkpoint {
  Seconds time;
};
struct Extend {
  Seconds new_limit;
};
/// Natural completion: only legal at start + true_duration.
struct Finish {
  Seconds time;
};
/// Limit expiry: only legal at start + current_limit.
struct LimitReached {
  Seconds time;
};
struct Cancel {
  Seconds time;
};
}  // namespace lifecycle

using LifecycleEvent =
    std::variant<lifecycle::Start, lifecycle::Checkpoint, lifecycle::Extend,
                 lifecycle::Finish, lifecycle::LimitReached, lifecycle::Cancel>;

std::string_view event_name(const LifecycleEvent& event);

/// Applies one lifecycle event. Terminal states are absorbing; any illegal
/// (state, event) pair throws IllegalTransition naming both.
JobRuntime job_transition(JobRuntime runtime, const LifecycleEvent& event);

/// (end - start) * cores. Throws NotFinished for non-terminal jobs.
CoreSeconds cpu_time(const JobRuntime& runtime);

struct ClusterConfig {
  int node_count = 20;
  int cores_per_node = 32;
  Seconds poll_interval = 20;
  Seconds extension_grace = 20;
  int max_extensions_per_job = 1;

  void validate() const;
  friend bool operator==(const ClusterConfig&, const ClusterConfig&) = default;
};

enum class PolicyKind : std::uint8_t { Baseline, EarlyCancel, Extend, Hybrid };

inline constexpr PolicyKind kAllPolicies[] = {
    PolicyKind::Baseline, PolicyKind::EarlyCancel, PolicyKind::Extend,
    PolicyKind::Hybrid};

/// CLI spelling: baseline, early-cancel, extend, hybrid.
std::string_view to_string(PolicyKind policy);
std::optional<PolicyKind> parse_policy(std::string_view text);

}  // namespace autoloop
