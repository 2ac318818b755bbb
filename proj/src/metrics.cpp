#include "autoloop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace autoloop {

CoreSeconds tail_waste(const JobRuntime& rt) {
  if (!rt.terminal())
    throw NotFinished("job " + std::to_string(rt.spec.job_id) + " has not finished");
  if (!rt.spec.checkpointing() || rt.state == JobState::Completed) return 0;
  const Seconds saved_until = rt.checkpoints.empty() ? *rt.start_time : rt.checkpoints.back();
  return (*rt.end_time - saved_until) * rt.spec.cores();
}

WaitStats waits(std::span<const JobRuntime> runtimes) {
  if (runtimes.empty()) throw ConfigError("wait statistics need at least one job");
  double sum = 0;
  double weighted = 0;
  double node_sum = 0;
  for (const auto& rt : runtimes) {
    if (!rt.start_time)
      throw NotFinished("job " + std::to_string(rt.spec.job_id) + " never started");
    const auto wait = static_cast<double>(*rt.start_time - rt.spec.submit_time);
    sum += wait;
    weighted += wait * rt.spec.nodes;
    node_sum += rt.spec.nodes;
  }
  const auto n = static_cast<double>(runtimes.size());
  return {sum / n, weighted / node_sum, weighted / n};
}

MetricsReport aggregate(std::span<const JobRuntime> runtimes, PolicyKind policy) {
  MetricsReport r;
  r.policy = policy;
  r.total_jobs = static_cast<int>(runtimes.size());
  if (runtimes.empty()) return r;

  Seconds first_submit = runtimes.front().spec.submit_time;
  Seconds last_end = 0;
  for (const auto& rt : runtimes) {
    switch (rt.state) {
      case JobState::Completed: ++r.completed; break;
      case JobState::Timeout: ++r.timeout; break;
      case JobState::CancelledAtCkpt:
        ++r.cancelled_at_ckpt;
        if (rt.extensions_granted == 0) ++r.early_cancelled;
        break;
      default: throw NotFinished("job " + std::to_string(rt.spec.job_id) + " has not finished");
    }
    if (rt.extensions_granted > 0) ++r.extended;
    if (rt.sched_source == SchedSource::Main) ++r.sched_main;
    if (rt.sched_source == SchedSource::Backfill) ++r.sched_backfill;
    r.total_checkpoints += static_cast<std::int64_t>(rt.checkpoints.size());
    r.tail_waste += tail_waste(rt);
    r.total_cpu += cpu_time(rt);
    first_submit = std::min(first_submit, rt.spec.submit_time);
    last_end = std::max(last_end, *rt.end_time);
  }
  r.wait = waits(runtimes);
  r.makespan = last_end - first_submit;
  return r;
}

nlohmann::ordered_json to_json(const MetricsReport& r) {
  return {{"policy", to_string(r.policy)},
          {"jobs",
           {{"total", r.total_jobs},
            {"completed", r.completed},
            {"timeout", r.timeout},
            {"cancelled_at_ckpt", r.cancelled_at_ckpt},
            {"early_cancelled", r.early_cancelled},
            {"extended", r.extended}}},
          {"sched_source", {{"main", r.sched_main}, {"backfill", r.sched_backfill}}},
          {"total_checkpoints", r.total_checkpoints},
          {"avg_wait_s", r.wait.avg_wait},
          {"weighted_avg_wait_s", r.wait.weighted_avg_wait},
          {"weighted_wait_node_s", r.wait.node_weighted_wait},
          {"tail_waste_core_s", r.tail_waste},
          {"total_cpu_core_s", r.total_cpu},
          {"makespan_s", r.makespan}};
}

namespace {

struct MetricDef {
  const char* name;
  double (*get)(const MetricsReport&);
};

// Table order: job outcomes, scheduler paths, checkpoints, waits, CPU, makespan.
constexpr MetricDef kMetrics[] = {
    {"timeout_jobs", [](const MetricsReport& r) { return double(r.timeout); }},
    {"early_cancelled_jobs", [](const MetricsReport& r) { return double(r.early_cancelled); }},
    {"extended_jobs", [](const MetricsReport& r) { return double(r.extended); }},
    {"completed_jobs", [](const MetricsReport& r) { return double(r.completed); }},
    {"total_jobs", [](const MetricsReport& r) { return double(r.total_jobs); }},
    {"sched_main", [](const MetricsReport& r) { return double(r.sched_main); }},
    {"sched_backfill", [](const MetricsReport& r) { return double(r.sched_backfill); }},
    {"total_checkpoints", [](const MetricsReport& r) { return double(r.total_checkpoints); }},
    {"avg_wait_s", [](const MetricsReport& r) { return r.wait.avg_wait; }},
    {"weighted_avg_wait_s", [](const MetricsReport& r) { return r.wait.weighted_avg_wait; }},
    {"weighted_wait_node_s", [](const MetricsReport& r) { return r.wait.node_weighted_wait; }},
    {"tail_waste_core_s", [](const MetricsReport& r) { return double(r.tail_waste); }},
    {"total_cpu_core_s", [](const MetricsReport& r) { return double(r.total_cpu); }},
    {"makespan_s", [](const MetricsReport& r) { return double(r.makespan); }},
};

std::string format_value(double v) {
  char buf[64];
  if (std::floor(v) == v && std::fabs(v) < 1e15)
    std::snprintf(buf, sizeof buf, "%.0f", v);
  else
    std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string format_delta(const std::optional<double>& d) {
  if (!d) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", *d);
  return buf;
}

}  // namespace

Comparison compare(std::span<const MetricsReport> reports) {
  if (reports.size() < 2) throw ConfigError("comparison needs a baseline and at least one policy");
  Comparison c;
  std::set<PolicyKind> seen;
  for (const auto& r : reports) {
    if (!seen.insert(r.policy).second)
      throw ConfigError("duplicate policy '" + std::string(to_string(r.policy)) + "' in comparison");
    c.policies.push_back(r.policy);
  }
  for (const auto& m : kMetrics) {
    ComparisonRow row{m.name, {}, {}};
    const double base = m.get(reports.front());
    for (const auto& r : reports) {
      const double v = m.get(r);
      row.values.push_back(v);
      if (base != 0)
        row.delta_pct.push_back((v - base) / base * 100.0);
      else if (v == 0)
        row.delta_pct.push_back(0.0);
      else
        row.delta_pct.push_back(std::nullopt);
    }
    c.rows.push_back(std::move(row));
  }
  return c;
}

const ComparisonRow& Comparison::row(std::string_view metric) const {
  for (const auto& r : rows)
    if (r.metric == metric) return r;
  throw ConfigError("unknown metric '" + std::string(metric) + "'");
}

std::string Comparison::to_csv() const {
  std::string out = "metric";
  for (auto p : policies) out += "," + std::string(to_string(p));
  for (std::size_t i = 1; i < policies.size(); ++i)
    out += "," + std::string(to_string(policies[i])) + "_delta_pct";
  out += '\n';
  for (const auto& r : rows) {
    out += r.metric;
    for (double v : r.values) out += "," + format_value(v);
    for (std::size_t i = 1; i < r.delta_pct.size(); ++i) out += "," + format_delta(r.delta_pct[i]);
    out += '\n';
  }
  return out;
}

std::string Comparison::to_text() const {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-22s", "metric");
  out += buf;
  for (auto p : policies) {
    std::snprintf(buf, sizeof buf, " %16s", std::string(to_string(p)).c_str());
    out += buf;
  }
  out += '\n';
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-22s", r.metric.c_str());
    out += buf;
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      std::string cell = format_value(r.values[i]);
      if (i > 0 && r.delta_pct[i]) cell += " (" + format_delta(r.delta_pct[i]) + "%)";
      std::snprintf(buf, sizeof buf, " %16s", cell.c_str());
      out += buf;
    }
    out += '\n';
  }
  const auto& tw = row("tail_waste_core_s");
  for (std::size_t i = 1; i < policies.size(); ++i) {
    if (tw.values[0] == 0) continue;
    std::snprintf(buf, sizeof buf, "tail waste reduction %-12s %.1f%%\n",
                  std::string(to_string(policies[i])).c_str(),
                  (tw.values[0] - tw.values[i]) / tw.values[0] * 100.0);
    out += buf;
  }
  return out;
}

}  // namespace autoloop
