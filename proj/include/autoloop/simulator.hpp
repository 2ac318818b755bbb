#pragma once

// Deterministic discrete-event simulation of a batch cluster driven by the
// two-path scheduler, with the adjustment daemon polling on a fixed tick.
//
// Events at equal time are ordered by kind (the enum order below), then by
// job id, then by insertion. Identical inputs give byte-identical logs.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoloop/ckpt_tracker.hpp"
#include "autoloop/daemon.hpp"
#include "autoloop/domain.hpp"
#include "autoloop/scheduler.hpp"
#include "autoloop/snapshot.hpp"

namespace autoloop {

enum class EventKind : std::uint8_t {
  Submit,
  SchedulePass,
  JobEndNatural,
  JobLimitReached,
  CheckpointDone,
  DaemonPoll,
  Cancel,
  LimitUpdate,
};

std::string_view to_string(EventKind kind);

struct SimEvent {
  Seconds time = 0;
  EventKind kind = EventKind::Submit;
  JobId job_id = kNoJob;
  /// LimitUpdate: the new limit. Unused otherwise.
  Seconds value = 0;
  /// Termination events are stale once the job's generation moves on.
  std::uint64_t generation = 0;
  std::uint64_t seq = 0;
};

struct LogRecord {
  Seconds time = 0;
  EventKind kind = EventKind::Submit;
  JobId job_id = kNoJob;
  nlohmann::ordered_json detail;

  /// {"time":..,"kind":..,"job_id":..,"detail":..} with fixed field order.
  std::string to_json_line() const;
};

class EventLog {
 public:
  void append(LogRecord record) { records_.push_back(std::move(record)); }
  const std::vector<LogRecord>& records() const { return records_; }
  std::string to_jsonl() const;
  /// FNV-1a over the JSON-lines rendering.
  std::uint64_t digest() const;

 private:
  std::vector<LogRecord> records_;
};

/// Inputs and outputs of one scheduling pass, for external checking.
struct PassTrace {
  Seconds now = 0;
  NodeSet free_before;
  std::vector<BusyJob> running_before;
  std::vector<QueuedJob> queue;
  PassResult result;
};

struct SimulationHooks {
  std::function<void(const PassTrace&)> on_pass;
  DecisionObserver on_decision;
};

struct SimulationResult {
  std::vector<JobRuntime> jobs;
  EventLog log;
  std::vector<AdjustmentAction> actions;
};

class Simulator {
 public:
  /// Throws ConfigError for invalid jobs, duplicate ids or jobs that need
  /// more nodes than the cluster has.
  Simulator(std::vector<JobSpec> jobs, ClusterConfig cluster, PolicyKind policy,
            SimulationHooks hooks = {});

  /// Processes events until every job is terminal.
  void run();
  /// Processes every event strictly before `t`, then sets the clock to `t`.
  void advance_to(Seconds t);
  bool finished() const { return terminal_count_ == slots_.size(); }
  Seconds now() const { return now_; }

  /// Raises a running job's limit. Throws SchedulingError when the job is
  /// not running, the limit does not strictly grow, or the job's extension
  /// budget is spent.
  void apply_limit_update(JobId job, Seconds new_limit);
  /// Ends a running job at the current clock as CANCELLED_AT_CKPT. Throws
  /// SchedulingError when the job is not running or has no checkpoint.
  void cancel_job(JobId job);

  QueueSnapshot snapshot() const;
  SchedulePlan plan() const { return plan_schedule(snapshot()); }
  LedgerSnapshot ledgers() const { return ledger_.snapshot(); }

  const JobRuntime& job(JobId id) const;
  /// The live natural-end or limit event of a running job.
  std::optional<SimEvent> pending_termination(JobId id) const;

  const EventLog& log() const { return log_; }
  const std::vector<AdjustmentAction>& actions() const { return actions_; }
  const ClusterConfig& cluster() const { return cluster_; }

  /// Job runtimes in job-id order plus the log and the daemon's actions.
  SimulationResult take_result() &&;

 private:
  struct Slot {
    JobRuntime runtime;
    std::uint64_t generation = 0;
    std::optional<SimEvent> termination;
  };
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const;
  };

  Slot& slot(JobId id);
  const Slot& slot(JobId id) const;
  void push(SimEvent e);
  void process(const SimEvent& e);
  void on_schedule_pass();
  void on_termination(const SimEvent& e);
  void on_checkpoint(const SimEvent& e);
  void on_poll();
  void start_job(const Placement& placement);
  void schedule_termination(Slot& s);
  void release(Slot& s);
  void request_pass();
  void flush_due_checkpoint(Slot& s);
  void record_checkpoint(Slot& s, Seconds t);

  ClusterConfig cluster_;
  PolicyKind policy_;
  SimulationHooks hooks_;

  std::vector<Slot> slots_;
  std::map<JobId, std::size_t> index_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  Seconds now_ = 0;
  std::size_t terminal_count_ = 0;
  std::optional<Seconds> pass_queued_at_;

  std::vector<JobId> pending_;  // priority order
  NodeSet free_nodes_;
  CheckpointLedger ledger_;
  EventLog log_;
  std::vector<AdjustmentAction> actions_;
};

SimulationResult run_simulation(std::vector<JobSpec> jobs, const ClusterConfig& cluster,
                                PolicyKind policy, SimulationHooks hooks = {});

}  // namespace autoloop
