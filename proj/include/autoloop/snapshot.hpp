#pragma once

// The daemon's view of the queue (an squeue analog). Built by the simulator
// or parsed from live squeue output; consumed by the planner and the daemon.

#include <optional>
#include <vector>

#include "autoloop/domain.hpp"

namespace autoloop {

struct RunningJobView {
  JobId job_id = 0;
  Seconds start_time = 0;
  Seconds current_limit = 0;
  NodeSet nodes;
  /// Limit extensions this daemon has already granted the job.
  int extensions_granted = 0;

  Seconds expected_end() const noexcept { return start_time + current_limit; }
  friend bool operator==(const RunningJobView&, const RunningJobView&) = default;
};

struct PendingJobView {
  JobId job_id = 0;
  int nodes = 1;
  Seconds time_limit = 0;
  /// Scheduler-reported expected start, when known.
  std::optional<Seconds> planned_start;

  friend bool operator==(const PendingJobView&, const PendingJobView&) = default;
};

struct QueueSnapshot {
  Seconds now = 0;
  int node_count = 0;
  std::vector<RunningJobView> running;
  /// Priority order, highest first.
  std::vector<PendingJobView> pending;
  NodeSet free_nodes;

  const RunningJobView* find_running(JobId job) const;
  friend bool operator==(const QueueSnapshot&, const QueueSnapshot&) = default;
};

/// Copy of `snapshot` with one running job's limit raised to `new_limit`.
QueueSnapshot with_limit(const QueueSnapshot& snapshot, JobId job, Seconds new_limit);

/// Copy of `snapshot` with one running job removed and its nodes freed.
QueueSnapshot with_cancel(const QueueSnapshot& snapshot, JobId job);

}  // namespace autoloop
