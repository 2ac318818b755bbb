#pragma once

// Command construction and output parsing for driving a real Slurm
// controller. Everything here is pure except ProcessRunner.
//
// Queue query (pinned; never rely on the site's default squeue columns):
//
//   squeue --noconvert --states=RUNNING,PENDING --sort=-p
//          --Format=JobID:|,State:|,StartTime:|,TimeLimit:|,NodeList:|,SchedNodes:|,NumNodes:
//
// which prints a header line followed by one row per job:
//
//   JOBID|STATE|START_TIME|TIME_LIMIT|NODELIST|SCHEDNODES|NODES
//
// Columns may be space padded; the parser trims each cell.

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "autoloop/domain.hpp"
#include "autoloop/snapshot.hpp"

namespace autoloop::slurm {

/// Marker returned by parse_timelimit for "UNLIMITED".
inline constexpr Seconds kUnlimited = INT64_MAX;

/// Canonical D-HH:MM:SS.
std::string format_timelimit(Seconds seconds);

/// Accepts M, M:S, H:M:S, D-H, D-H:M, D-H:M:S and UNLIMITED. Throws
/// ParseError on anything else.
Seconds parse_timelimit(std::string_view text);

struct SchedulerCommand {
  std::vector<std::string> argv;
  int expected_exit = 0;

  std::string to_string() const;
  friend bool operator==(const SchedulerCommand&, const SchedulerCommand&) = default;
};

/// scontrol update JobId=<id> TimeLimit=<D-HH:MM:SS>
SchedulerCommand build_update_command(JobId job, Seconds new_limit);
/// scancel <id>
SchedulerCommand build_cancel_command(JobId job);
SchedulerCommand build_squeue_command();

/// Pipe-separated header produced by build_squeue_command().
inline constexpr std::string_view kSqueueHeader =
    "JOBID|STATE|START_TIME|TIME_LIMIT|NODELIST|SCHEDNODES|NODES";

/// Expands a Slurm hostlist such as "node[01-03,07],login1".
std::vector<std::string> expand_hostlist(std::string_view hostlist);

/// Maps host names to dense node ids.
class NodeTable {
 public:
  NodeTable() = default;
  explicit NodeTable(std::vector<std::string> hosts);
  static NodeTable from_hostlist(std::string_view hostlist) {
    return NodeTable(expand_hostlist(hostlist));
  }

  std::optional<NodeId> find(std::string_view host) const;
  int size() const { return static_cast<int>(hosts_.size()); }

 private:
  std::vector<std::string> hosts_;
  std::map<std::string, NodeId, std::less<>> ids_;
};

struct SqueueParse {
  QueueSnapshot snapshot;
  std::vector<std::string> warnings;
};

/// `now` is the epoch second the query ran at; StartTime values are read
/// as UTC ISO-8601 (YYYY-MM-DDTHH:MM:SS). Rows that cannot be parsed become
/// warnings. Throws ParseError when the header is missing.
SqueueParse parse_squeue_output(std::string_view text, const NodeTable& nodes, Seconds now);

/// Seconds since the epoch for a UTC "YYYY-MM-DDTHH:MM:SS".
std::optional<Seconds> parse_iso_time(std::string_view text);

struct CommandResult {
  int exit_code = 0;
  std::string output;
};

class CommandRunner {
 public:
  virtual ~CommandRunner() = default;
  virtual CommandResult run(const SchedulerCommand& command) = 0;
};

/// fork/exec with captured stdout and a wall-clock timeout. A timed-out
/// child is killed and reported with exit code 124.
class ProcessRunner : public CommandRunner {
 public:
  explicit ProcessRunner(std::chrono::milliseconds timeout = std::chrono::seconds(30))
      : timeout_(timeout) {}
  CommandResult run(const SchedulerCommand& command) override;

 private:
  std::chrono::milliseconds timeout_;
};

/// Runs `command` and throws SchedulingError unless it exits as expected.
CommandResult run_checked(CommandRunner& runner, const SchedulerCommand& command);

}  // namespace autoloop::slurm
