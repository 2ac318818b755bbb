#pragma once

// The adjustment daemon against a real Slurm controller: each tick queries
// squeue, reads the checkpoint spool, runs the decision core and issues
// scontrol/scancel through a CommandRunner.

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoloop/daemon.hpp"
#include "autoloop/slurm.hpp"

namespace autoloop {

struct DaemonConfig {
  PolicyKind policy = PolicyKind::Hybrid;
  Seconds poll_interval = 20;
  Seconds extension_grace = 20;
  int max_extensions = 1;
  std::filesystem::path spool_dir = "/tmp/autoloop";

  ClusterConfig as_cluster(int node_count) const;
};

/// Keys: policy, poll_interval, extension_grace, max_extensions, spool_dir.
DaemonConfig daemon_config_from_json(const nlohmann::json& doc);

struct TickReport {
  std::vector<AdjustmentAction> actions;
  std::vector<std::string> warnings;
};

class LiveLoop {
 public:
  LiveLoop(DaemonConfig config, slurm::NodeTable nodes, slurm::CommandRunner& runner,
           std::ostream* action_log = nullptr);

  /// One poll at epoch second `now`. Commands run one at a time, in action
  /// order; a failing command throws SchedulingError.
  TickReport tick(Seconds now);

  int extensions_granted(JobId job) const;

 private:
  DaemonConfig config_;
  slurm::NodeTable nodes_;
  slurm::CommandRunner& runner_;
  std::ostream* action_log_;
  std::map<JobId, int> extensions_;
};

}  // namespace autoloop
