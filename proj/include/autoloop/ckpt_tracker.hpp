#pragma once

// Checkpoint progress sensing.
//
// Applications report each completed checkpoint by appending one timestamp
// per line to `<spool_dir>/ckpt_<job_id>.log`. The tracker validates those
// reports, estimates the checkpoint interval and predicts the next one.

#include <filesystem>
#include <map>
#include <mutex>
#include <string_view>
#include <vector>

#include "autoloop/domain.hpp"

namespace autoloop {

/// One timestamp per line, integer or decimal (floored); blank lines are
/// skipped. Throws ParseError for non-numeric or non-increasing lines.
std::vector<Seconds> parse_checkpoint_file(std::string_view text);

struct LedgerEntry {
  Seconds job_start = 0;
  std::vector<Seconds> timestamps;

  friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

using LedgerSnapshot = std::map<JobId, LedgerEntry>;

class NoCheckpointData : public Error {
 public:
  using Error::Error;
};

/// Mean of successive differences over [job_start, t1, ..., tn]; a single
/// checkpoint gives t1 - job_start. Rounded to nearest second, ties to even.
Seconds estimate_interval(const LedgerEntry& entry);

/// Last timestamp + estimate_interval(entry).
Seconds predict_next(const LedgerEntry& entry);

/// Per-job checkpoint history with one writer (reports) and any number of
/// snapshot readers. Every append is parsed with the file-protocol parser.
class CheckpointLedger {
 public:
  void open(JobId job, Seconds job_start);
  /// Appends one reported line. Throws ParseError when the line is not a
  /// timestamp later than the previous report and not before job start.
  void append_report(JobId job, std::string_view line);
  /// Replaces a job's history with the contents of a whole report file.
  void load_report_file(JobId job, Seconds job_start, std::string_view text);
  void close(JobId job);

  LedgerSnapshot snapshot() const;
  bool contains(JobId job) const;

 private:
  mutable std::mutex mutex_;
  LedgerSnapshot entries_;
};

std::filesystem::path spool_path(const std::filesystem::path& spool_dir, JobId job);

/// Reads `ckpt_<id>.log` for every job in `job_starts` that has a file.
/// Jobs without a file are absent from the result.
LedgerSnapshot read_spool(const std::filesystem::path& spool_dir,
                          const std::map<JobId, Seconds>& job_starts);

}  // namespace autoloop
