#pragma once

// Slurm-like two-path scheduling: a main pass that starts jobs strictly in
// priority order, followed by an EASY backfill pass that holds a node-level
// reservation for the blocked head job. The same pass drives the forward
// planner that predicts start times for every pending job.

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "autoloop/domain.hpp"
#include "autoloop/snapshot.hpp"

namespace autoloop {

struct QueuedJob {
  JobId job_id = 0;
  int nodes = 1;
  Seconds time_limit = 0;
};

struct BusyJob {
  JobId job_id = 0;
  NodeSet nodes;
  Seconds expected_end = 0;
};

struct Placement {
  JobId job_id = 0;
  NodeSet nodes;
  SchedSource source = SchedSource::Main;

  friend bool operator==(const Placement&, const Placement&) = default;
};

/// Where and when the blocked head job is guaranteed to start.
struct Reservation {
  JobId job_id = 0;
  Seconds start = 0;
  NodeSet nodes;

  friend bool operator==(const Reservation&, const Reservation&) = default;
};

struct PassResult {
  std::vector<Placement> started;
  std::optional<Reservation> reservation;
};

/// One scheduling pass at `now`. `queue` is in priority order. Throws
/// ConfigError when the head job can never fit (bigger than the cluster).
PassResult schedule_pass(std::span<const QueuedJob> queue, const NodeSet& free_nodes,
                         std::span<const BusyJob> running, Seconds now);

/// Earliest instant at which `nodes` nodes are simultaneously free, with the
/// lowest-numbered such nodes. Running jobs release at their expected end.
Reservation reserve(JobId job, int nodes, const NodeSet& free_nodes,
                    std::span<const BusyJob> running, Seconds now);

struct PlannedStart {
  Seconds start = 0;
  NodeSet nodes;

  friend bool operator==(const PlannedStart&, const PlannedStart&) = default;
};

struct SchedulePlan {
  std::map<JobId, PlannedStart> pending;
  std::map<JobId, Seconds> running_expected_end;

  friend bool operator==(const SchedulePlan&, const SchedulePlan&) = default;
};

/// Forward-simulates the queue from `snapshot.now`, assuming every running
/// job ends at start + current_limit and every pending job runs for its full
/// limit. Pure function of the snapshot.
SchedulePlan plan_schedule(const QueueSnapshot& snapshot);

namespace nodes {
NodeSet take_lowest(const NodeSet& from, std::size_t count);
NodeSet minus(const NodeSet& a, const NodeSet& b);
NodeSet plus(const NodeSet& a, const NodeSet& b);
bool intersects(const NodeSet& a, const NodeSet& b);
}  // namespace nodes

}  // namespace autoloop
