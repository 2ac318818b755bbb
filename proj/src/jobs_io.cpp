#include "autoloop/jobs_io.hpp"

#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <string>

#include "text_util.hpp"

namespace autoloop {

namespace {

constexpr std::array<std::string_view, 7> kJobColumns = {
    "job_id", "submit_time", "nodes", "cores_per_node", "time_limit", "true_duration", "ckpt_interval"};

JobSpec job_from_values(const std::array<std::int64_t, 7>& v) {
  JobSpec s;
  s.job_id = v[0];
  s.submit_time = v[1];
  s.nodes = static_cast<int>(v[2]);
  s.cores_per_node = static_cast<int>(v[3]);
  s.time_limit = v[4];
  s.true_duration = v[5];
  if (v[6] > 0) s.ckpt_interval = v[6];
  return s;
}

void check(const JobSpec& s, std::size_t line) {
  try {
    validate(s);
  } catch (const ConfigError& e) {
    throw ParseError(line, e.what());
  }
}

}  // namespace

void write_jobs(std::ostream& out, const std::vector<JobSpec>& jobs, TraceFormat format) {
  if (format == TraceFormat::Csv) {
    for (std::size_t i = 0; i < kJobColumns.size(); ++i) out << (i ? "," : "") << kJobColumns[i];
    out << '\n';
    for (const auto& j : jobs)
      out << j.job_id << ',' << j.submit_time << ',' << j.nodes << ',' << j.cores_per_node << ','
          << j.time_limit << ',' << j.true_duration << ',' << j.ckpt_interval.value_or(0) << '\n';
    return;
  }
  for (const auto& j : jobs) {
    nlohmann::ordered_json o{{"job_id", j.job_id},         {"submit_time", j.submit_time},
                             {"nodes", j.nodes},           {"cores_per_node", j.cores_per_node},
                             {"time_limit", j.time_limit}, {"true_duration", j.true_duration},
                             {"ckpt_interval", j.ckpt_interval.value_or(0)}};
    out << o.dump() << '\n';
  }
}

std::vector<JobSpec> read_jobs(std::istream& in, TraceFormat format) {
  std::vector<JobSpec> out;
  std::set<JobId> ids;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  std::array<std::size_t, 7> mapping{};
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    std::array<std::int64_t, 7> values{};
    if (format == TraceFormat::Csv) {
      const auto cells = text::split(line, ',');
      if (!header_seen) {
        if (cells.size() != kJobColumns.size()) throw ParseError(lineno, "bad workload header");
        std::array<bool, 7> seen{};
        for (std::size_t i = 0; i < cells.size(); ++i) {
          const auto name = text::trim(cells[i]);
          std::size_t idx = 0;
          while (idx < kJobColumns.size() && kJobColumns[idx] != name) ++idx;
          if (idx == kJobColumns.size() || seen[idx])
            throw ParseError(lineno, "unknown or duplicate column '" + std::string(name) + "'");
          seen[idx] = true;
          mapping[i] = idx;
        }
        header_seen = true;
        continue;
      }
      if (cells.size() != kJobColumns.size())
        throw ParseError(lineno, "expected 7 fields, got " + std::to_string(cells.size()));
      for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto v = text::to_int(cells[i]);
        if (!v) throw ParseError(lineno, "non-numeric value '" + std::string(cells[i]) + "'");
        values[mapping[i]] = *v;
      }
    } else {
      nlohmann::json obj;
      try {
        obj = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
      }
      if (!obj.is_object()) throw ParseError(lineno, "expected a JSON object");
      for (std::size_t i = 0; i < kJobColumns.size(); ++i) {
        const auto it = obj.find(std::string(kJobColumns[i]));
        if (it == obj.end()) throw ParseError(lineno, "missing field '" + std::string(kJobColumns[i]) + "'");
        if (!it->is_number_integer())
          throw ParseError(lineno, "field '" + std::string(kJobColumns[i]) + "' must be an integer");
        values[i] = it->get<std::int64_t>();
      }
      if (obj.size() != kJobColumns.size()) throw ParseError(lineno, "unexpected extra fields");
    }
    JobSpec s = job_from_values(values);
    check(s, lineno);
    if (!ids.insert(s.job_id).second)
      throw ParseError(lineno, "duplicate job_id " + std::to_string(s.job_id));
    out.push_back(s);
  }
  return out;
}

TraceFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".jsonl" ? TraceFormat::Jsonl : TraceFormat::Csv;
}

std::vector<JobSpec> load_jobs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open workload file " + path.string());
  return read_jobs(in, format_for_path(path));
}

ClusterConfig cluster_from_json(const nlohmann::json& doc, ClusterConfig c) {
  if (!doc.is_object()) throw ConfigError("cluster config must be a JSON object");
  for (const auto& [key, v] : doc.items()) {
    if (!v.is_number_integer()) throw ConfigError("cluster key '" + key + "' must be an integer");
    if (key == "node_count") c.node_count = v.get<int>();
    else if (key == "cores_per_node") c.cores_per_node = v.get<int>();
    else if (key == "poll_interval") c.poll_interval = v.get<Seconds>();
    else if (key == "extension_grace") c.extension_grace = v.get<Seconds>();
    else if (key == "max_extensions_per_job" || key == "max_extensions")
      c.max_extensions_per_job = v.get<int>();
    else throw ConfigError("unknown cluster key '" + key + "'");
  }
  c.validate();
  return c;
}

nlohmann::ordered_json to_json(const ClusterConfig& c) {
  return {{"node_count", c.node_count},
          {"cores_per_node", c.cores_per_node},
          {"poll_interval", c.poll_interval},
          {"extension_grace", c.extension_grace},
          {"max_extensions_per_job", c.max_extensions_per_job}};
}

}  // namespace autoloop
