#include "autoloop/ckpt_tracker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "text_util.hpp"

namespace autoloop {

namespace {

Seconds parse_timestamp(std::string_view raw, std::size_t line) {
  const auto s = text::trim(raw);
  if (const auto i = text::to_int(s)) {
    if (*i < 0) throw ParseError(line, "negative timestamp");
    return *i;
  }
  const auto d = text::to_double(s);
  if (!d || !std::isfinite(*d)) throw ParseError(line, "non-numeric timestamp '" + std::string(s) + "'");
  if (*d < 0) throw ParseError(line, "negative timestamp");
  return static_cast<Seconds>(std::floor(*d));
}

Seconds round_half_even(Seconds num, Seconds den) {
  Seconds q = num / den;
  const Seconds r = num % den;
  if (2 * r > den || (2 * r == den && q % 2 != 0)) ++q;
  return q;
}

}  // namespace

std::vector<Seconds> parse_checkpoint_file(std::string_view text) {
  std::vector<Seconds> out;
  std::size_t lineno = 0;
  for (auto line : text::split(text, '\n')) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const Seconds t = parse_timestamp(line, lineno);
    if (!out.empty() && t <= out.back())
      throw ParseError(lineno, "non-increasing checkpoint timestamp " + std::to_string(t));
    out.push_back(t);
  }
  return out;
}

Seconds estimate_interval(const LedgerEntry& entry) {
  const auto& ts = entry.timestamps;
  if (ts.empty()) throw NoCheckpointData("no checkpoint recorded");
  // Job start counts as the origin sample, so the mean of successive
  // differences telescopes to (last - start) / n.
  // Never below one second so the prediction always lies after the last report.
  return std::max<Seconds>(
      1, round_half_even(ts.back() - entry.job_start, static_cast<Seconds>(ts.size())));
}

Seconds predict_next(const LedgerEntry& entry) {
  const Seconds interval = estimate_interval(entry);
  return entry.timestamps.back() + interval;
}

void CheckpointLedger::open(JobId job, Seconds job_start) {
  std::lock_guard lock(mutex_);
  entries_[job] = LedgerEntry{job_start, {}};
}

void CheckpointLedger::append_report(JobId job, std::string_view line) {
  const auto parsed = parse_checkpoint_file(line);
  if (parsed.size() != 1) throw ParseError(1, "expected exactly one timestamp per report");
  const Seconds t = parsed.front();

  std::lock_guard lock(mutex_);
  auto it = entries_.find(job);
  if (it == entries_.end()) throw ParseError(1, "no ledger opened for job " + std::to_string(job));
  auto& entry = it->second;
  if (t < entry.job_start) throw ParseError(1, "checkpoint before job start");
  if (!entry.timestamps.empty() && t <= entry.timestamps.back())
    throw ParseError(1, "non-increasing checkpoint timestamp " + std::to_string(t));
  entry.timestamps.push_back(t);
}

void CheckpointLedger::load_report_file(JobId job, Seconds job_start, std::string_view text) {
  auto ts = parse_checkpoint_file(text);
  if (!ts.empty() && ts.front() < job_start) throw ParseError(1, "checkpoint before job start");
  std::lock_guard lock(mutex_);
  entries_[job] = LedgerEntry{job_start, std::move(ts)};
}

void CheckpointLedger::close(JobId job) {
  std::lock_guard lock(mutex_);
  entries_.erase(job);
}

LedgerSnapshot CheckpointLedger::snapshot() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

bool CheckpointLedger::contains(JobId job) const {
  std::lock_guard lock(mutex_);
  return entries_.contains(job);
}

std::filesystem::path spool_path(const std::filesystem::path& spool_dir, JobId job) {
  return spool_dir / ("ckpt_" + std::to_string(job) + ".log");
}

LedgerSnapshot read_spool(const std::filesystem::path& spool_dir,
                          const std::map<JobId, Seconds>& job_starts) {
  LedgerSnapshot out;
  for (const auto& [job, start] : job_starts) {
    std::ifstream in(spool_path(spool_dir, job));
    if (!in) continue;
    std::ostringstream buf;
    buf << in.rdbuf();
    auto text = buf.str();
    // A writer may be mid-append; only complete lines are considered.
    if (const auto last_nl = text.rfind('\n'); last_nl == std::string::npos)
      text.clear();
    else
      text.resize(last_nl + 1);
    auto ts = parse_checkpoint_file(text);
    if (!ts.empty() && ts.front() < start)
      throw ParseError(1, "job " + std::to_string(job) + ": checkpoint before job start");
    out.emplace(job, LedgerEntry{start, std::move(ts)});
  }
  return out;
}

}  // namespace autoloop
