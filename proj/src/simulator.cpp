#include "autoloop/simulator.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "text_util.hpp"

namespace autoloop {

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Submit: return "SUBMIT";
    case EventKind::SchedulePass: return "SCHEDULE_PASS";
    case EventKind::JobEndNatural: return "JOB_END_NATURAL";
    case EventKind::JobLimitReached: return "JOB_LIMIT_REACHED";
    case EventKind::CheckpointDone: return "CHECKPOINT_DONE";
    case EventKind::DaemonPoll: return "DAEMON_POLL";
    case EventKind::Cancel: return "CANCEL";
    case EventKind::LimitUpdate: return "LIMIT_UPDATE";
  }
  return "?";
}

std::string LogRecord::to_json_line() const {
  nlohmann::ordered_json o;
  o["time"] = time;
  o["kind"] = to_string(kind);
  o["job_id"] = job_id == kNoJob ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(job_id);
  o["detail"] = detail.is_null() ? nlohmann::ordered_json::object() : detail;
  return o.dump();
}

std::string EventLog::to_jsonl() const {
  std::string out;
  for (const auto& r : records_) {
    out += r.to_json_line();
    out += '\n';
  }
  return out;
}

std::uint64_t EventLog::digest() const { return text::fnv1a(to_jsonl()); }

bool Simulator::Later::operator()(const SimEvent& a, const SimEvent& b) const {
  if (a.time != b.time) return a.time > b.time;
  if (a.kind != b.kind) return a.kind > b.kind;
  if (a.job_id != b.job_id) return a.job_id > b.job_id;
  return a.seq > b.seq;
}

Simulator::Simulator(std::vector<JobSpec> jobs, ClusterConfig cluster, PolicyKind policy,
                     SimulationHooks hooks)
    : cluster_(cluster), policy_(policy), hooks_(std::move(hooks)) {
  cluster_.validate();
  std::sort(jobs.begin(), jobs.end(),
            [](const JobSpec& a, const JobSpec& b) { return a.job_id < b.job_id; });
  slots_.reserve(jobs.size());
  for (auto& spec : jobs) {
    validate(spec);
    if (spec.nodes > cluster_.node_count)
      throw ConfigError("job " + std::to_string(spec.job_id) + " requests " +
                        std::to_string(spec.nodes) + " nodes on a " +
                        std::to_string(cluster_.node_count) + "-node cluster");
    if (!index_.emplace(spec.job_id, slots_.size()).second)
      throw ConfigError("duplicate job id " + std::to_string(spec.job_id));
    slots_.push_back(Slot{JobRuntime(spec), 0, std::nullopt});
  }
  free_nodes_.resize(static_cast<std::size_t>(cluster_.node_count));
  std::iota(free_nodes_.begin(), free_nodes_.end(), 0);

  for (const auto& s : slots_)
    push({s.runtime.spec.submit_time, EventKind::Submit, s.runtime.spec.job_id});
  if (!slots_.empty()) push({0, EventKind::DaemonPoll, kNoJob});
}

Simulator::Slot& Simulator::slot(JobId id) {
  const auto it = index_.find(id);
  if (it == index_.end()) throw SchedulingError("unknown job " + std::to_string(id));
  return slots_[it->second];
}

const Simulator::Slot& Simulator::slot(JobId id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw SchedulingError("unknown job " + std::to_string(id));
  return slots_[it->second];
}

const JobRuntime& Simulator::job(JobId id) const { return slot(id).runtime; }

std::optional<SimEvent> Simulator::pending_termination(JobId id) const {
  return slot(id).termination;
}

void Simulator::push(SimEvent e) {
  e.seq = next_seq_++;
  queue_.push(e);
}

void Simulator::run() {
  while (!queue_.empty() && !finished()) {
    const SimEvent e = queue_.top();
    queue_.pop();
    now_ = e.time;
    process(e);
  }
}

void Simulator::advance_to(Seconds t) {
  while (!queue_.empty() && !finished() && queue_.top().time < t) {
    const SimEvent e = queue_.top();
    queue_.pop();
    now_ = e.time;
    process(e);
  }
  now_ = std::max(now_, t);
}

void Simulator::process(const SimEvent& e) {
  switch (e.kind) {
    case EventKind::Submit: {
      const auto& spec = slot(e.job_id).runtime.spec;
      const auto pos = std::lower_bound(pending_.begin(), pending_.end(), spec, [&](JobId id, const JobSpec& s) {
        const auto& o = slot(id).runtime.spec;
        return o.submit_time != s.submit_time ? o.submit_time < s.submit_time : o.job_id < s.job_id;
      });
      pending_.insert(pos, e.job_id);
      log_.append({e.time, e.kind, e.job_id, {}});
      request_pass();
      break;
    }
    case EventKind::SchedulePass:
      pass_queued_at_.reset();
      on_schedule_pass();
      break;
    case EventKind::JobEndNatural:
    case EventKind::JobLimitReached:
      on_termination(e);
      break;
    case EventKind::CheckpointDone:
      on_checkpoint(e);
      break;
    case EventKind::DaemonPoll:
      on_poll();
      break;
    case EventKind::Cancel:
      cancel_job(e.job_id);
      break;
    case EventKind::LimitUpdate:
      apply_limit_update(e.job_id, e.value);
      break;
  }
}

void Simulator::request_pass() {
  if (pass_queued_at_ == now_) return;
  pass_queued_at_ = now_;
  push({now_, EventKind::SchedulePass, kNoJob});
}

void Simulator::on_schedule_pass() {
  std::vector<QueuedJob> queue;
  queue.reserve(pending_.size());
  for (JobId id : pending_) {
    const auto& spec = slot(id).runtime.spec;
    queue.push_back({id, spec.nodes, spec.time_limit});
  }
  std::vector<BusyJob> running;
  for (const auto& s : slots_)
    if (s.runtime.state == JobState::Running)
      running.push_back({s.runtime.spec.job_id, s.runtime.allocated_nodes, s.runtime.expected_end()});

  PassTrace trace{now_, free_nodes_, running, queue, schedule_pass(queue, free_nodes_, running, now_)};

  nlohmann::ordered_json started = nlohmann::ordered_json::array();
  for (const auto& p : trace.result.started) {
    start_job(p);
    started.push_back({{"job_id", p.job_id}, {"nodes", p.nodes}, {"source", to_string(p.source)}});
  }
  nlohmann::ordered_json detail{{"started", std::move(started)}};
  if (trace.result.reservation) {
    const auto& r = *trace.result.reservation;
    detail["reservation"] = {{"job_id", r.job_id}, {"start", r.start}, {"nodes", r.nodes}};
  }
  log_.append({now_, EventKind::SchedulePass, kNoJob, std::move(detail)});
  if (hooks_.on_pass) hooks_.on_pass(trace);
}

void Simulator::start_job(const Placement& p) {
  auto& s = slot(p.job_id);
  s.runtime = job_transition(std::move(s.runtime), lifecycle::Start{now_, p.nodes, p.source});
  free_nodes_ = nodes::minus(free_nodes_, p.nodes);
  pending_.erase(std::find(pending_.begin(), pending_.end(), p.job_id));
  schedule_termination(s);
  if (const auto interval = s.runtime.spec.ckpt_interval) {
    ledger_.open(p.job_id, now_);
    push({now_ + *interval, EventKind::CheckpointDone, p.job_id});
  }
}

void Simulator::schedule_termination(Slot& s) {
  const auto& rt = s.runtime;
  SimEvent e;
  e.job_id = rt.spec.job_id;
  e.generation = ++s.generation;
  if (rt.spec.true_duration <= rt.current_limit) {
    e.time = *rt.start_time + rt.spec.true_duration;
    e.kind = EventKind::JobEndNatural;
  } else {
    e.time = rt.expected_end();
    e.kind = EventKind::JobLimitReached;
  }
  push(e);
  e.seq = next_seq_ - 1;
  s.termination = e;
}

void Simulator::release(Slot& s) {
  ++s.generation;
  s.termination.reset();
  free_nodes_ = nodes::plus(free_nodes_, s.runtime.allocated_nodes);
  ++terminal_count_;
  request_pass();
}

void Simulator::record_checkpoint(Slot& s, Seconds t) {
  s.runtime = job_transition(std::move(s.runtime), lifecycle::Checkpoint{t});
  // Same validation path as a live report file line.
  ledger_.append_report(s.runtime.spec.job_id, std::to_string(t));
  log_.append({t, EventKind::CheckpointDone, s.runtime.spec.job_id,
               {{"index", s.runtime.checkpoints.size()}}});
}

void Simulator::flush_due_checkpoint(Slot& s) {
  // A checkpoint completing exactly at termination still counts.
  const auto& rt = s.runtime;
  const auto interval = rt.spec.ckpt_interval;
  if (!interval) return;
  const Seconds elapsed = now_ - *rt.start_time;
  const Seconds due = *rt.start_time + (elapsed / *interval) * *interval;
  if (elapsed > 0 && due == now_ && (rt.checkpoints.empty() || rt.checkpoints.back() < now_))
    record_checkpoint(s, now_);
}

void Simulator::on_termination(const SimEvent& e) {
  auto& s = slot(e.job_id);
  if (s.runtime.state != JobState::Running || e.generation != s.generation) return;
  flush_due_checkpoint(s);
  if (e.kind == EventKind::JobEndNatural)
    s.runtime = job_transition(std::move(s.runtime), lifecycle::Finish{now_});
  else
    s.runtime = job_transition(std::move(s.runtime), lifecycle::LimitReached{now_});
  log_.append({now_, e.kind, e.job_id, {{"state", to_string(s.runtime.state)}}});
  release(s);
}

void Simulator::on_checkpoint(const SimEvent& e) {
  auto& s = slot(e.job_id);
  if (s.runtime.state != JobState::Running) return;
  if (!s.runtime.checkpoints.empty() && s.runtime.checkpoints.back() >= now_) return;
  record_checkpoint(s, now_);
  push({now_ + *s.runtime.spec.ckpt_interval, EventKind::CheckpointDone, e.job_id});
}

void Simulator::on_poll() {
  const auto actions = poll(snapshot(), ledger_.snapshot(), policy_, cluster_, hooks_.on_decision);
  for (const auto& a : actions) {
    actions_.push_back(a);
    if (a.verb == ActionVerb::CancelNow)
      push({now_, EventKind::Cancel, a.job_id});
    else
      push({now_, EventKind::LimitUpdate, a.job_id, a.new_limit});
  }
  log_.append({now_, EventKind::DaemonPoll, kNoJob, {{"actions", actions.size()}}});
  if (!finished()) push({now_ + cluster_.poll_interval, EventKind::DaemonPoll, kNoJob});
}

void Simulator::apply_limit_update(JobId id, Seconds new_limit) {
  auto& s = slot(id);
  auto& rt = s.runtime;
  if (rt.state != JobState::Running)
    throw SchedulingError("job " + std::to_string(id) + " is not running");
  if (new_limit <= rt.current_limit)
    throw SchedulingError("job " + std::to_string(id) + ": new limit " + std::to_string(new_limit) +
                          " does not exceed current limit " + std::to_string(rt.current_limit));
  if (rt.extensions_granted >= cluster_.max_extensions_per_job)
    throw SchedulingError("job " + std::to_string(id) + ": extension budget exhausted");
  rt = job_transition(std::move(rt), lifecycle::Extend{new_limit});
  schedule_termination(s);
  log_.append({now_, EventKind::LimitUpdate, id, {{"new_limit", new_limit}}});
  request_pass();
}

void Simulator::cancel_job(JobId id) {
  auto& s = slot(id);
  if (s.runtime.state != JobState::Running)
    throw SchedulingError("job " + std::to_string(id) + " is not running");
  if (s.runtime.checkpoints.empty())
    throw SchedulingError("job " + std::to_string(id) + " has no checkpoint to stop at");
  s.runtime = job_transition(std::move(s.runtime), lifecycle::Cancel{now_});
  log_.append({now_, EventKind::Cancel, id, {{"state", to_string(s.runtime.state)}}});
  release(s);
}

QueueSnapshot Simulator::snapshot() const {
  QueueSnapshot snap;
  snap.now = now_;
  snap.node_count = cluster_.node_count;
  for (const auto& s : slots_) {
    const auto& rt = s.runtime;
    if (rt.state == JobState::Running)
      snap.running.push_back(
          {rt.spec.job_id, *rt.start_time, rt.current_limit, rt.allocated_nodes, rt.extensions_granted});
  }
  for (JobId id : pending_) {
    const auto& spec = slot(id).runtime.spec;
    snap.pending.push_back({id, spec.nodes, spec.time_limit, std::nullopt});
  }
  snap.free_nodes = free_nodes_;
  return snap;
}

SimulationResult Simulator::take_result() && {
  SimulationResult r;
  r.jobs.reserve(slots_.size());
  for (auto& s : slots_) r.jobs.push_back(std::move(s.runtime));
  r.log = std::move(log_);
  r.actions = std::move(actions_);
  return r;
}

SimulationResult run_simulation(std::vector<JobSpec> jobs, const ClusterConfig& cluster,
                                PolicyKind policy, SimulationHooks hooks) {
  Simulator sim(std::move(jobs), cluster, policy, std::move(hooks));
  sim.run();
  return std::move(sim).take_result();
}

}  // namespace autoloop
