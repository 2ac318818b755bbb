#include "autoloop/workload.hpp"

#include <algorithm>
#include <array>
#include <istream>
#include <map>
#include <string>

#include "autoloop/rng.hpp"
#include "text_util.hpp"

namespace autoloop {

std::string_view to_string(FinalState state) {
  switch (state) {
    case FinalState::Completed: return "COMPLETED";
    case FinalState::Timeout: return "TIMEOUT";
    case FinalState::Other: return "OTHER";
  }
  return "OTHER";
}

FinalState parse_final_state(std::string_view text) {
  if (text == "COMPLETED") return FinalState::Completed;
  if (text == "TIMEOUT") return FinalState::Timeout;
  return FinalState::Other;
}

namespace {

constexpr std::size_t kColumnCount = std::size(kTraceColumns);

std::size_t column_index(std::string_view name) {
  for (std::size_t i = 0; i < kColumnCount; ++i)
    if (name == kTraceColumns[i]) return i;
  return kColumnCount;
}

// Field values arrive as text for CSV and are stringified for JSON-lines so
// both formats share one validation path.
TraceRecord build_record(const std::array<std::optional<std::string>, kColumnCount>& fields,
                         std::size_t line) {
  for (std::size_t i = 0; i < kColumnCount; ++i)
    if (!fields[i]) throw ParseError(line, std::string("missing field '") + kTraceColumns[i] + "'");

  const auto number = [&](std::size_t i, std::int64_t min) {
    const auto v = text::to_int(*fields[i]);
    if (!v) throw ParseError(line, std::string("non-numeric ") + kTraceColumns[i] + " '" + *fields[i] + "'");
    if (*v < min)
      throw ParseError(line, std::string(kTraceColumns[i]) + " must be >= " + std::to_string(min));
    return *v;
  };

  TraceRecord r;
  r.job_id = number(0, 0);
  r.submit_time = number(1, 0);
  r.nodes = static_cast<int>(number(2, 1));
  r.cores_per_node = static_cast<int>(number(3, 1));
  r.time_limit = number(4, 0);
  r.run_duration = number(5, 0);
  r.final_state = parse_final_state(text::trim(*fields[6]));
  const auto excl = text::to_bool(*fields[7]);
  if (!excl) throw ParseError(line, "exclusive must be true/false, got '" + *fields[7] + "'");
  r.exclusive = *excl;
  r.partition = std::string(text::trim(*fields[8]));
  r.queue = std::string(text::trim(*fields[9]));
  r.month = std::string(text::trim(*fields[10]));
  return r;
}

std::vector<TraceRecord> parse_csv(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::size_t> mapping;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto cells = text::split(line, ',');
    if (mapping.empty()) {
      std::array<bool, kColumnCount> seen{};
      for (auto cell : cells) {
        const auto name = text::trim(cell);
        const auto idx = column_index(name);
        if (idx == kColumnCount) throw ParseError(lineno, "unknown column '" + std::string(name) + "'");
        if (seen[idx]) throw ParseError(lineno, "duplicate column '" + std::string(name) + "'");
        seen[idx] = true;
        mapping.push_back(idx);
      }
      for (std::size_t i = 0; i < kColumnCount; ++i)
        if (!seen[i]) throw ParseError(lineno, std::string("missing column '") + kTraceColumns[i] + "'");
      continue;
    }
    if (cells.size() != mapping.size())
      throw ParseError(lineno, "expected " + std::to_string(mapping.size()) + " fields, got " +
                                   std::to_string(cells.size()));
    std::array<std::optional<std::string>, kColumnCount> fields;
    for (std::size_t i = 0; i < cells.size(); ++i) fields[mapping[i]] = std::string(text::trim(cells[i]));
    out.push_back(build_record(fields, lineno));
  }
  return out;
}

std::vector<TraceRecord> parse_jsonl(std::istream& in) {
  std::vector<TraceRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!obj.is_object()) throw ParseError(lineno, "expected a JSON object");
    std::array<std::optional<std::string>, kColumnCount> fields;
    for (const auto& [key, value] : obj.items()) {
      const auto idx = column_index(key);
      if (idx == kColumnCount) throw ParseError(lineno, "unknown field '" + key + "'");
      if (value.is_string())
        fields[idx] = value.get<std::string>();
      else if (value.is_number_integer() || value.is_boolean())
        fields[idx] = value.dump();
      else
        throw ParseError(lineno, "field '" + key + "' has unsupported type");
    }
    out.push_back(build_record(fields, lineno));
  }
  return out;
}

}  // namespace

std::vector<TraceRecord> parse_trace(std::istream& in, TraceFormat format) {
  return format == TraceFormat::Csv ? parse_csv(in) : parse_jsonl(in);
}

std::vector<TraceRecord> filter_jobs(const std::vector<TraceRecord>& records,
                                     const FilterCriteria& criteria) {
  std::vector<TraceRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out), [&](const TraceRecord& r) {
    if (criteria.partition && r.partition != *criteria.partition) return false;
    if (criteria.queue && r.queue != *criteria.queue) return false;
    if (criteria.month && r.month != *criteria.month) return false;
    if (!criteria.states.contains(r.final_state)) return false;
    if (r.run_duration < criteria.min_run_duration) return false;
    if (criteria.require_exclusive && !r.exclusive) return false;
    return true;
  });
  return out;
}

Seconds scale_seconds(Seconds x, Ratio factor) {
  const std::int64_t scaled = x * factor.den;
  std::int64_t q = scaled / factor.num;
  const std::int64_t r = scaled % factor.num;
  if (2 * r > factor.num || (2 * r == factor.num && (q % 2) != 0)) ++q;
  return q;
}

std::vector<TraceRecord> scale_time(const std::vector<TraceRecord>& records, Ratio factor) {
  if (factor.num <= 0 || factor.den <= 0) throw ConfigError("scale factor must be > 0");
  std::vector<TraceRecord> out = records;
  for (auto& r : out) {
    r.time_limit = scale_seconds(r.time_limit, factor);
    r.run_duration = scale_seconds(r.run_duration, factor);
    r.submit_time = 0;
  }
  return out;
}

std::vector<JobSpec> mark_checkpointing(const std::vector<TraceRecord>& records,
                                        Seconds max_limit, Seconds ckpt_interval) {
  std::vector<JobSpec> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    JobSpec s;
    s.job_id = r.job_id;
    s.submit_time = r.submit_time;
    s.nodes = r.nodes;
    s.cores_per_node = r.cores_per_node;
    s.time_limit = std::max<Seconds>(r.time_limit, 1);
    if (r.final_state == FinalState::Timeout && r.time_limit == max_limit) {
      s.ckpt_interval = ckpt_interval;
      s.true_duration = s.time_limit + ckpt_interval + 1;
    } else if (r.final_state == FinalState::Timeout) {
      s.true_duration = std::max(r.run_duration, s.time_limit + 1);
    } else {
      s.true_duration = std::max<Seconds>(r.run_duration, 1);
    }
    out.push_back(s);
  }
  return out;
}

void GeneratorShape::validate() const {
  if (completed_count < 0 || timeout_count < 0 || ckpt_count < 0)
    throw ConfigError("job counts must be >= 0");
  if (cluster_nodes < 1) throw ConfigError("cluster_nodes must be >= 1");
  if (cores_per_node < 1) throw ConfigError("cores_per_node must be >= 1");
  if (min_duration < 1) throw ConfigError("min_duration must be >= 1");
  if (ckpt_limit <= 0 || ckpt_interval <= 0) throw ConfigError("ckpt_limit and ckpt_interval must be > 0");
  const auto check_nodes = [&](const std::vector<int>& choices, const char* name) {
    if (choices.empty()) throw ConfigError(std::string(name) + " must not be empty");
    for (int n : choices)
      if (n < 1 || n > cluster_nodes)
        throw ConfigError(std::string(name) + ": " + std::to_string(n) +
                          " nodes does not fit a " + std::to_string(cluster_nodes) + "-node cluster");
  };
  check_nodes(node_choices, "node_choices");
  check_nodes(ckpt_node_choices, "ckpt_node_choices");
  if (completed_limits.empty() || timeout_limits.empty())
    throw ConfigError("limit choices must not be empty");
  for (auto l : completed_limits)
    if (l <= min_duration) throw ConfigError("completed_limits must exceed min_duration");
  for (auto l : timeout_limits)
    if (l <= 0 || l >= ckpt_limit) throw ConfigError("timeout_limits must lie in (0, ckpt_limit)");
}

namespace {

template <typename T>
std::vector<T> read_list(const nlohmann::json& v, const char* key) {
  if (!v.is_array()) throw ConfigError(std::string(key) + " must be an array");
  try {
    return v.get<std::vector<T>>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string(key) + " must be an array of integers");
  }
}

template <typename T>
T read_int(const nlohmann::json& v, const char* key) {
  if (!v.is_number_integer()) throw ConfigError(std::string(key) + " must be an integer");
  return v.get<T>();
}

}  // namespace

GeneratorShape shape_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("generator config must be a JSON object");
  GeneratorShape s;
  for (const auto& [key, v] : doc.items()) {
    if (key == "completed_count") s.completed_count = read_int<int>(v, "completed_count");
    else if (key == "timeout_count") s.timeout_count = read_int<int>(v, "timeout_count");
    else if (key == "ckpt_count") s.ckpt_count = read_int<int>(v, "ckpt_count");
    else if (key == "cluster_nodes") s.cluster_nodes = read_int<int>(v, "cluster_nodes");
    else if (key == "cores_per_node") s.cores_per_node = read_int<int>(v, "cores_per_node");
    else if (key == "node_choices") s.node_choices = read_list<int>(v, "node_choices");
    else if (key == "ckpt_node_choices") s.ckpt_node_choices = read_list<int>(v, "ckpt_node_choices");
    else if (key == "completed_limits") s.completed_limits = read_list<Seconds>(v, "completed_limits");
    else if (key == "timeout_limits") s.timeout_limits = read_list<Seconds>(v, "timeout_limits");
    else if (key == "min_duration") s.min_duration = read_int<Seconds>(v, "min_duration");
    else if (key == "ckpt_limit") s.ckpt_limit = read_int<Seconds>(v, "ckpt_limit");
    else if (key == "ckpt_interval") s.ckpt_interval = read_int<Seconds>(v, "ckpt_interval");
    else throw ConfigError("unknown generator key '" + key + "'");
  }
  return s;
}

nlohmann::ordered_json to_json(const GeneratorShape& s) {
  return {{"completed_count", s.completed_count},
          {"timeout_count", s.timeout_count},
          {"ckpt_count", s.ckpt_count},
          {"cluster_nodes", s.cluster_nodes},
          {"cores_per_node", s.cores_per_node},
          {"node_choices", s.node_choices},
          {"ckpt_node_choices", s.ckpt_node_choices},
          {"completed_limits", s.completed_limits},
          {"timeout_limits", s.timeout_limits},
          {"min_duration", s.min_duration},
          {"ckpt_limit", s.ckpt_limit},
          {"ckpt_interval", s.ckpt_interval}};
}

std::vector<JobSpec> synthesize_workload(std::uint64_t seed, const GeneratorShape& shape) {
  shape.validate();
  enum class Kind { Completed, Timeout, Ckpt };
  std::vector<Kind> kinds;
  kinds.insert(kinds.end(), shape.completed_count, Kind::Completed);
  kinds.insert(kinds.end(), shape.timeout_count, Kind::Timeout);
  kinds.insert(kinds.end(), shape.ckpt_count, Kind::Ckpt);

  StableRng rng(seed);
  rng.shuffle(std::span<Kind>(kinds));

  std::vector<JobSpec> jobs;
  jobs.reserve(kinds.size());
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    JobSpec s;
    s.job_id = static_cast<JobId>(i + 1);
    s.submit_time = 0;
    s.cores_per_node = shape.cores_per_node;
    switch (kinds[i]) {
      case Kind::Completed:
        s.nodes = rng.pick(std::span<const int>(shape.node_choices));
        s.time_limit = rng.pick(std::span<const Seconds>(shape.completed_limits));
        s.true_duration = rng.between(shape.min_duration, s.time_limit - 1);
        break;
      case Kind::Timeout:
        s.nodes = rng.pick(std::span<const int>(shape.node_choices));
        s.time_limit = rng.pick(std::span<const Seconds>(shape.timeout_limits));
        s.true_duration = s.time_limit + rng.between(1, s.time_limit);
        break;
      case Kind::Ckpt:
        s.nodes = rng.pick(std::span<const int>(shape.ckpt_node_choices));
        s.time_limit = shape.ckpt_limit;
        s.ckpt_interval = shape.ckpt_interval;
        s.true_duration = shape.ckpt_limit + shape.ckpt_interval + 1;
        break;
    }
    jobs.push_back(s);
  }
  return jobs;
}

WorkloadSummary summarize(const std::vector<JobSpec>& jobs) {
  WorkloadSummary s;
  for (const auto& j : jobs) {
    if (j.checkpointing())
      ++s.checkpointing;
    else if (j.true_duration <= j.time_limit)
      ++s.completed_destined;
    else
      ++s.timeout_destined;
  }
  return s;
}

}  // namespace autoloop
