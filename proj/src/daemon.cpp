#include "autoloop/daemon.hpp"

#include <algorithm>

namespace autoloop {

std::string_view to_string(ActionVerb verb) {
  return verb == ActionVerb::CancelNow ? "CANCEL_NOW" : "EXTEND_TO";
}

std::string_view to_string(ActionReason reason) {
  switch (reason) {
    case ActionReason::NoNextCkptFits: return "NO_NEXT_CKPT_FITS";
    case ActionReason::NextCkptAccommodated: return "NEXT_CKPT_ACCOMMODATED";
    case ActionReason::ExtensionWouldDelay: return "EXTENSION_WOULD_DELAY";
  }
  return "?";
}

nlohmann::ordered_json to_json(const AdjustmentAction& a) {
  nlohmann::ordered_json o;
  o["job_id"] = a.job_id;
  o["verb"] = to_string(a.verb);
  if (a.verb == ActionVerb::ExtendTo) o["new_limit"] = a.new_limit;
  o["reason"] = to_string(a.reason);
  o["decided_at"] = a.decided_at;
  return o;
}

bool is_eligible(const RunningJobView& job, const LedgerEntry& entry) {
  if (entry.timestamps.empty()) return false;
  return predict_next(entry) > job.expected_end();
}

namespace {

AdjustmentAction cancel_now(const RunningJobView& job, ActionReason reason, Seconds now) {
  return {job.job_id, ActionVerb::CancelNow, 0, reason, now};
}

AdjustmentAction extension_for(const RunningJobView& job, const LedgerEntry& entry,
                               const ClusterConfig& cluster, Seconds now) {
  const Seconds new_limit = predict_next(entry) - job.start_time + cluster.extension_grace;
  return {job.job_id, ActionVerb::ExtendTo, new_limit, ActionReason::NextCkptAccommodated, now};
}

bool budget_spent(const RunningJobView& job, const ClusterConfig& cluster) {
  return job.extensions_granted >= cluster.max_extensions_per_job;
}

}  // namespace

std::optional<AdjustmentAction> decide_early_cancel(const RunningJobView& job,
                                                    const LedgerEntry& entry, Seconds now) {
  if (!is_eligible(job, entry)) return std::nullopt;
  return cancel_now(job, ActionReason::NoNextCkptFits, now);
}

std::optional<AdjustmentAction> decide_extension(const RunningJobView& job,
                                                 const LedgerEntry& entry,
                                                 const ClusterConfig& cluster, Seconds now) {
  if (!is_eligible(job, entry)) return std::nullopt;
  if (budget_spent(job, cluster)) return cancel_now(job, ActionReason::NoNextCkptFits, now);
  return extension_for(job, entry, cluster, now);
}

AdjustmentAction decide_hybrid(const RunningJobView& job, const LedgerEntry& entry,
                               const QueueSnapshot& snapshot, const ClusterConfig& cluster) {
  const Seconds now = snapshot.now;
  if (budget_spent(job, cluster)) return cancel_now(job, ActionReason::NoNextCkptFits, now);
  const auto candidate = extension_for(job, entry, cluster, now);
  if (snapshot.pending.empty()) return candidate;

  const auto extended = plan_schedule(with_limit(snapshot, job.job_id, candidate.new_limit));
  const bool delays = would_delay(plan_schedule(snapshot), extended) ||
                      would_delay(plan_schedule(with_cancel(snapshot, job.job_id)), extended);
  return delays ? cancel_now(job, ActionReason::ExtensionWouldDelay, now) : candidate;
}

bool would_delay(const SchedulePlan& before, const SchedulePlan& after) {
  for (const auto& [job, planned] : after.pending) {
    const auto it = before.pending.find(job);
    if (it != before.pending.end() && planned.start > it->second.start) return true;
  }
  return false;
}

std::vector<AdjustmentAction> poll(const QueueSnapshot& snapshot, const LedgerSnapshot& ledgers,
                                   PolicyKind policy, const ClusterConfig& cluster,
                                   const DecisionObserver& observer) {
  std::vector<AdjustmentAction> actions;
  if (policy == PolicyKind::Baseline) return actions;

  auto running = snapshot.running;
  std::sort(running.begin(), running.end(),
            [](const RunningJobView& a, const RunningJobView& b) { return a.job_id < b.job_id; });

  QueueSnapshot working = snapshot;
  for (const auto& job : running) {
    const auto it = ledgers.find(job.job_id);
    if (it == ledgers.end() || !is_eligible(job, it->second)) continue;
    const auto& entry = it->second;

    std::optional<AdjustmentAction> action;
    switch (policy) {
      case PolicyKind::EarlyCancel: action = decide_early_cancel(job, entry, snapshot.now); break;
      case PolicyKind::Extend: action = decide_extension(job, entry, cluster, snapshot.now); break;
      case PolicyKind::Hybrid: action = decide_hybrid(job, entry, working, cluster); break;
      case PolicyKind::Baseline: break;
    }
    if (!action) continue;
    if (observer) observer(working, *action);
    working = action->verb == ActionVerb::CancelNow
                  ? with_cancel(working, job.job_id)
                  : with_limit(working, job.job_id, action->new_limit);
    actions.push_back(*action);
  }
  return actions;
}

}  // namespace autoloop
