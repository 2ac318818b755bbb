#pragma once

// Decision core of the time-limit adjustment loop.
//
// At every poll tick the daemon looks at running jobs that report
// checkpoints. A job becomes eligible once its predicted next checkpoint no
// longer fits before start + current_limit. Eligible jobs are then
//   - cancelled right away (early cancellation),
//   - extended just past the predicted checkpoint (extension), or
//   - extended only when a re-plan shows no pending job starts later than it
//     would under either the current plan or an immediate cancel (hybrid).
// Once a job's extension budget is spent, the next eligibility triggers a
// cancel instead.

#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "autoloop/ckpt_tracker.hpp"
#include "autoloop/domain.hpp"
#include "autoloop/scheduler.hpp"
#include "autoloop/snapshot.hpp"

namespace autoloop {

enum class ActionVerb : std::uint8_t { CancelNow, ExtendTo };

enum class ActionReason : std::uint8_t {
  NoNextCkptFits,
  NextCkptAccommodated,
  ExtensionWouldDelay,
};

std::string_view to_string(ActionVerb verb);
std::string_view to_string(ActionReason reason);

struct AdjustmentAction {
  JobId job_id = 0;
  ActionVerb verb = ActionVerb::CancelNow;
  /// Only meaningful for ExtendTo.
  Seconds new_limit = 0;
  ActionReason reason = ActionReason::NoNextCkptFits;
  Seconds decided_at = 0;

  friend bool operator==(const AdjustmentAction&, const AdjustmentAction&) = default;
};

nlohmann::ordered_json to_json(const AdjustmentAction& action);

/// Called once per emitted action with the snapshot the decision was made
/// on (earlier actions of the same tick already applied).
using DecisionObserver = std::function<void(const QueueSnapshot&, const AdjustmentAction&)>;

/// The job's predicted next checkpoint falls after start + current_limit.
bool is_eligible(const RunningJobView& job, const LedgerEntry& entry);

std::optional<AdjustmentAction> decide_early_cancel(const RunningJobView& job,
                                                    const LedgerEntry& entry, Seconds now);

/// Extends to (predicted next checkpoint - start) + grace, or cancels when
/// the job's extension budget is already spent.
std::optional<AdjustmentAction> decide_extension(const RunningJobView& job,
                                                 const LedgerEntry& entry,
                                                 const ClusterConfig& cluster, Seconds now);

/// Pre: job is eligible. `snapshot` must contain the job as running.
AdjustmentAction decide_hybrid(const RunningJobView& job, const LedgerEntry& entry,
                               const QueueSnapshot& snapshot, const ClusterConfig& cluster);

/// True iff some pending job planned in both plans starts later in `after`.
bool would_delay(const SchedulePlan& before, const SchedulePlan& after);

/// One daemon tick. At most one action per job, in ascending job id. Jobs
/// without ledger entries (non-checkpointing) are never touched.
std::vector<AdjustmentAction> poll(const QueueSnapshot& snapshot, const LedgerSnapshot& ledgers,
                                   PolicyKind policy, const ClusterConfig& cluster,
                                   const DecisionObserver& observer = {});

}  // namespace autoloop
