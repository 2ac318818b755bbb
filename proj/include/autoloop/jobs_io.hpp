#pragma once

// Workload files (the simulator's JobSpec lists) and cluster config JSON.
//
// CSV header:
//   job_id,submit_time,nodes,cores_per_node,time_limit,true_duration,ckpt_interval
// ckpt_interval is 0 for jobs that do not checkpoint. JSON-lines uses the
// same keys, one job per line.

#include <filesystem>
#include <iosfwd>
#include <vector>

#include <json.hpp>

#include "autoloop/domain.hpp"
#include "autoloop/workload.hpp"

namespace autoloop {

void write_jobs(std::ostream& out, const std::vector<JobSpec>& jobs, TraceFormat format);
std::vector<JobSpec> read_jobs(std::istream& in, TraceFormat format);

/// Picks the format from the extension (.jsonl -> JSON-lines, else CSV).
TraceFormat format_for_path(const std::filesystem::path& path);
std::vector<JobSpec> load_jobs(const std::filesystem::path& path);

ClusterConfig cluster_from_json(const nlohmann::json& doc, ClusterConfig base = {});
nlohmann::ordered_json to_json(const ClusterConfig& cluster);

}  // namespace autoloop
