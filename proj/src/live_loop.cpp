#include "autoloop/live_loop.hpp"

#include <algorithm>

namespace autoloop {

ClusterConfig DaemonConfig::as_cluster(int node_count) const {
  ClusterConfig c;
  c.node_count = std::max(node_count, 1);
  c.poll_interval = poll_interval;
  c.extension_grace = extension_grace;
  c.max_extensions_per_job = max_extensions;
  c.validate();
  return c;
}

DaemonConfig daemon_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("daemon config must be a JSON object");
  DaemonConfig c;
  for (const auto& [key, v] : doc.items()) {
    if (key == "policy") {
      const auto p = v.is_string() ? parse_policy(v.get<std::string>()) : std::nullopt;
      if (!p) throw ConfigError("unknown policy " + v.dump());
      c.policy = *p;
    } else if (key == "spool_dir") {
      if (!v.is_string()) throw ConfigError("spool_dir must be a string");
      c.spool_dir = v.get<std::string>();
    } else if (key == "poll_interval" || key == "extension_grace" || key == "max_extensions") {
      if (!v.is_number_integer()) throw ConfigError(key + " must be an integer");
      if (key == "poll_interval") c.poll_interval = v.get<Seconds>();
      else if (key == "extension_grace") c.extension_grace = v.get<Seconds>();
      else c.max_extensions = v.get<int>();
    } else {
      throw ConfigError("unknown daemon key '" + key + "'");
    }
  }
  c.as_cluster(1);
  return c;
}

LiveLoop::LiveLoop(DaemonConfig config, slurm::NodeTable nodes, slurm::CommandRunner& runner,
                   std::ostream* action_log)
    : config_(std::move(config)), nodes_(std::move(nodes)), runner_(runner), action_log_(action_log) {}

int LiveLoop::extensions_granted(JobId job) const {
  const auto it = extensions_.find(job);
  return it == extensions_.end() ? 0 : it->second;
}

TickReport LiveLoop::tick(Seconds now) {
  TickReport report;
  const auto queue = run_checked(runner_, slurm::build_squeue_command());
  auto parsed = slurm::parse_squeue_output(queue.output, nodes_, now);
  report.warnings = std::move(parsed.warnings);
  auto& snapshot = parsed.snapshot;

  std::map<JobId, Seconds> starts;
  for (auto& r : snapshot.running) {
    r.extensions_granted = extensions_granted(r.job_id);
    starts.emplace(r.job_id, r.start_time);
  }
  const auto ledgers = read_spool(config_.spool_dir, starts);
  report.actions = poll(snapshot, ledgers, config_.policy, config_.as_cluster(nodes_.size()));

  for (const auto& a : report.actions) {
    if (a.verb == ActionVerb::CancelNow) {
      run_checked(runner_, slurm::build_cancel_command(a.job_id));
    } else {
      run_checked(runner_, slurm::build_update_command(a.job_id, a.new_limit));
      ++extensions_[a.job_id];
    }
    if (action_log_) *action_log_ << to_json(a).dump() << '\n';
  }
  // Forget jobs that left the queue.
  for (auto it = extensions_.begin(); it != extensions_.end();)
    it = starts.contains(it->first) ? std::next(it) : extensions_.erase(it);
  return report;
}

}  // namespace autoloop
