#include "autoloop/domain.hpp"

#include <algorithm>
#include <string>

namespace autoloop {

ParseError::ParseError(std::size_t line, const std::string& what)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

void validate(const JobSpec& spec) {
  const auto fail = [&](const std::string& what) {
    throw ConfigError("job " + std::to_string(spec.job_id) + ": " + what);
  };
  if (spec.submit_time < 0) fail("submit_time must be >= 0");
  if (spec.nodes < 1) fail("nodes must be >= 1");
  if (spec.cores_per_node < 1) fail("cores_per_node must be >= 1");
  if (spec.time_limit <= 0) fail("time_limit must be > 0");
  if (spec.true_duration <= 0) fail("true_duration must be > 0");
  if (spec.ckpt_interval && *spec.ckpt_interval <= 0) fail("ckpt_interval must be > 0");
}

std::string_view to_string(JobState state) {
  switch (state) {
    case JobState::Pending: return "PENDING";
    case JobState::Running: return "RUNNING";
    case JobState::Completed: return "COMPLETED";
    case JobState::Timeout: return "TIMEOUT";
    case JobState::CancelledAtCkpt: return "CANCELLED_AT_CKPT";
  }
  return "?";
}

std::string_view to_string(SchedSource source) {
  return source == SchedSource::Main ? "MAIN" : "BACKFILL";
}

std::string_view event_name(const LifecycleEvent& event) {
  static constexpr std::string_view names[] = {"start",  "checkpoint",    "extend",
                                               "finish", "limit-reached", "cancel"};
  return names[event.index()];
}

namespace {

[[noreturn]] void illegal(const JobRuntime& rt, const LifecycleEvent& ev, std::string_view why) {
  std::string msg = "job " + std::to_string(rt.spec.job_id) + ": illegal transition from " +
                    std::string(to_string(rt.state)) + " on " + std::string(event_name(ev));
  if (!why.empty()) msg += " (" + std::string(why) + ")";
  throw IllegalTransition(msg);
}

struct Apply {
  JobRuntime& rt;
  const LifecycleEvent& ev;

  void require_running() const {
    if (rt.state != JobState::Running) illegal(rt, ev, "");
  }

  void operator()(const lifecycle::Start& e) const {
    if (rt.state != JobState::Pending) illegal(rt, ev, "");
    if (static_cast<int>(e.nodes.size()) != rt.spec.nodes)
      illegal(rt, ev, "allocation size differs from request");
    if (e.time < rt.spec.submit_time) illegal(rt, ev, "start before submit");
    rt.state = JobState::Running;
    rt.start_time = e.time;
    rt.allocated_nodes = e.nodes;
    rt.sched_source = e.source;
  }

  void operator()(const lifecycle::Checkpoint& e) const {
    require_running();
    if (!rt.spec.checkpointing()) illegal(rt, ev, "job does not checkpoint");
    if (e.time < *rt.start_time || e.time > rt.expected_end())
      illegal(rt, ev, "checkpoint outside the run window");
    if (!rt.checkpoints.empty() && e.time <= rt.checkpoints.back())
      illegal(rt, ev, "checkpoints must be strictly increasing");
    rt.checkpoints.push_back(e.time);
  }

  void operator()(const lifecycle::Extend& e) const {
    require_running();
    if (e.new_limit <= rt.current_limit) illegal(rt, ev, "limits only grow");
    rt.current_limit = e.new_limit;
    ++rt.extensions_granted;
  }

  void operator()(const lifecycle::Finish& e) const {
    require_running();
    if (e.time != *rt.start_time + rt.spec.true_duration)
      illegal(rt, ev, "finish time differs from start + true_duration");
    if (rt.spec.true_duration > rt.current_limit) illegal(rt, ev, "job exceeds its limit");
    rt.state = JobState::Completed;
    rt.end_time = e.time;
  }

  void operator()(const lifecycle::LimitReached& e) const {
    require_running();
    if (e.time != rt.expected_end()) illegal(rt, ev, "limit time differs from start + limit");
    if (rt.spec.true_duration <= rt.current_limit) illegal(rt, ev, "job completes within its limit");
    rt.state = JobState::Timeout;
    rt.end_time = e.time;
  }

  void operator()(const lifecycle::Cancel& e) const {
    require_running();
    if (rt.checkpoints.empty()) illegal(rt, ev, "no checkpoint recorded");
    if (e.time < rt.checkpoints.back() || e.time > rt.expected_end())
      illegal(rt, ev, "cancel time outside [last checkpoint, limit]");
    rt.state = JobState::CancelledAtCkpt;
    rt.end_time = e.time;
  }
};

}  // namespace

JobRuntime job_transition(JobRuntime runtime, const LifecycleEvent& event) {
  std::visit(Apply{runtime, event}, event);
  return runtime;
}

CoreSeconds cpu_time(const JobRuntime& runtime) {
  if (!runtime.terminal())
    throw NotFinished("job " + std::to_string(runtime.spec.job_id) + " has not finished");
  return (*runtime.end_time - *runtime.start_time) * runtime.spec.cores();
}

void ClusterConfig::validate() const {
  if (node_count < 1) throw ConfigError("node_count must be >= 1");
  if (cores_per_node < 1) throw ConfigError("cores_per_node must be >= 1");
  if (poll_interval <= 0) throw ConfigError("poll_interval must be > 0");
  if (extension_grace < 0) throw ConfigError("extension_grace must be >= 0");
  if (max_extensions_per_job < 0) throw ConfigError("max_extensions_per_job must be >= 0");
}

std::string_view to_string(PolicyKind policy) {
  switch (policy) {
    case PolicyKind::Baseline: return "baseline";
    case PolicyKind::EarlyCancel: return "early-cancel";
    case PolicyKind::Extend: return "extend";
    case PolicyKind::Hybrid: return "hybrid";
  }
  return "?";
}

std::optional<PolicyKind> parse_policy(std::string_view text) {
  for (auto p : kAllPolicies)
    if (to_string(p) == text) return p;
  return std::nullopt;
}

}  // namespace autoloop
