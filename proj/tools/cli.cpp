#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "autoloop/jobs_io.hpp"
#include "autoloop/metrics.hpp"
#include "autoloop/simulator.hpp"
#include "autoloop/workload.hpp"
#include "text_util.hpp"

namespace autoloop::cli {
namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
  if (!out) throw ConfigError("write failed for " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Ratio parse_ratio(const std::string& s) {
  const auto parts = text::split(s, '/');
  const auto num = text::to_int(parts[0]);
  const auto den = parts.size() == 2 ? text::to_int(parts[1]) : std::optional<std::int64_t>(1);
  if (parts.size() > 2 || !num || !den || *num <= 0 || *den <= 0)
    throw ConfigError("scale must be N or N/D with positive integers, got '" + s + "'");
  return {*num, *den};
}

std::string jobs_csv(const std::vector<JobSpec>& jobs) {
  std::ostringstream s;
  write_jobs(s, jobs, TraceFormat::Csv);
  return s.str();
}

// Shared by run and compare.
struct RunFlags {
  std::string workload;
  std::string cluster;
  std::string out;
  std::uint64_t seed = 42;
  Seconds poll_interval = 0;
  Seconds grace = 0;
  int max_extensions = 0;
  CLI::Option* workload_opt = nullptr;
  CLI::Option* poll_opt = nullptr;
  CLI::Option* grace_opt = nullptr;
  CLI::Option* max_ext_opt = nullptr;

  void attach(CLI::App& app) {
    workload_opt = app.add_option("--workload", workload,
                                  "Workload file (.csv or .jsonl); generated from --seed if omitted");
    app.add_option("--cluster", cluster, "Cluster config JSON");
    app.add_option("--seed", seed, "Generator seed when no workload file is given");
    app.add_option("--out", out, "Run directory")->required();
    poll_opt = app.add_option("--poll-interval", poll_interval, "Daemon poll interval (s)");
    grace_opt = app.add_option("--grace", grace, "Extension grace (s)");
    max_ext_opt = app.add_option("--max-extensions", max_extensions, "Extensions per job");
  }

  ClusterConfig cluster_config() const {
    ClusterConfig c;
    if (!cluster.empty()) c = cluster_from_json(read_json_file(cluster));
    if (poll_opt->count()) c.poll_interval = poll_interval;
    if (grace_opt->count()) c.extension_grace = grace;
    if (max_ext_opt->count()) c.max_extensions_per_job = max_extensions;
    c.validate();
    return c;
  }
};

struct Workload {
  std::vector<JobSpec> jobs;
  ojson source;
};

Workload load_workload(const RunFlags& f, const ClusterConfig& cluster) {
  if (f.workload_opt->count()) {
    return {load_jobs(f.workload), {{"path", fs::absolute(f.workload).string()}}};
  }
  GeneratorShape shape;
  shape.cluster_nodes = cluster.node_count;
  shape.cores_per_node = cluster.cores_per_node;
  shape.validate();
  return {synthesize_workload(f.seed, shape),
          {{"generated", {{"seed", f.seed}, {"shape", to_json(shape)}}}}};
}

ojson manifest(std::string_view command, const Workload& w, const ClusterConfig& cluster,
               const std::vector<PolicyKind>& policies) {
  const std::string workload_hash = hex(text::fnv1a(jobs_csv(w.jobs)));
  ojson names = ojson::array();
  for (auto p : policies) names.push_back(to_string(p));
  ojson config{{"cluster", to_json(cluster)}, {"policies", names}, {"workload_fnv1a", workload_hash}};
  return {{"tool", "autoloop"},
          {"version", kVersion},
          {"command", command},
          {"inputs", {{"workload", w.source}, {"jobs", w.jobs.size()}, {"workload_fnv1a", workload_hash}}},
          {"config", config},
          {"config_hash", hex(text::fnv1a(config.dump()))},
#if defined(__VERSION__)
          {"compiler", __VERSION__},
#endif
          {"cxx_standard", __cplusplus}};
}

struct Scenario {
  PolicyKind policy;
  SimulationResult result;
  MetricsReport report;
};

Scenario run_scenario(const std::vector<JobSpec>& jobs, const ClusterConfig& cluster,
                      PolicyKind policy) {
  auto result = run_simulation(jobs, cluster, policy);
  auto report = aggregate(result.jobs, policy);
  return {policy, std::move(result), report};
}

void write_scenario(const fs::path& dir, const Scenario& s) {
  make_dir(dir);
  write_file(dir / "event_log.jsonl", s.result.log.to_jsonl());
  std::string actions;
  for (const auto& a : s.result.actions) actions += to_json(a).dump() + '\n';
  write_file(dir / "actions.jsonl", actions);
  auto report = to_json(s.report);
  report["event_log_fnv1a"] = hex(s.result.log.digest());
  write_file(dir / "report.json", report.dump(2) + '\n');
}

void print_report(std::ostream& out, const MetricsReport& r) {
  out << to_string(r.policy) << ": " << r.total_jobs << " jobs, " << r.completed << " completed, "
      << r.timeout << " timeout, " << r.early_cancelled << " early-cancelled, " << r.extended
      << " extended, " << r.total_checkpoints << " checkpoints, tail waste " << r.tail_waste
      << " core-s, makespan " << r.makespan << " s\n";
}

int cmd_gen_workload(const std::string& out_path, const std::string& format,
                     const std::string& config, const std::string& cluster_path,
                     std::uint64_t seed, const CLI::Option* nodes_max_opt, int nodes_max,
                     const std::string& trace, const FilterCriteria& filter,
                     const std::string& scale, Seconds max_limit, Seconds ckpt_interval,
                     std::ostream& out) {
  std::vector<JobSpec> jobs;
  if (!trace.empty()) {
    std::ifstream in(trace);
    if (!in) throw ConfigError("cannot open trace " + trace);
    const auto records = parse_trace(in, format_for_path(trace));
    const auto kept = filter_jobs(records, filter);
    jobs = mark_checkpointing(scale_time(kept, parse_ratio(scale)), max_limit, ckpt_interval);
    out << records.size() << " trace records, " << kept.size() << " kept by the filter\n";
  } else {
    GeneratorShape shape;
    if (!config.empty()) shape = shape_from_json(read_json_file(config));
    if (!cluster_path.empty()) {
      const auto c = cluster_from_json(read_json_file(cluster_path));
      shape.cluster_nodes = c.node_count;
      shape.cores_per_node = c.cores_per_node;
    }
    if (nodes_max_opt->count()) {
      if (nodes_max < 1 || nodes_max > shape.cluster_nodes)
        throw ConfigError("--nodes-max " + std::to_string(nodes_max) + " does not fit a " +
                          std::to_string(shape.cluster_nodes) + "-node cluster");
      shape.node_choices.clear();
      for (int n = 1; n < nodes_max; n *= 2) shape.node_choices.push_back(n);
      shape.node_choices.push_back(nodes_max);
    }
    shape.validate();
    jobs = synthesize_workload(seed, shape);
  }

  const TraceFormat fmt = format.empty()   ? format_for_path(out_path)
                          : format == "jsonl" ? TraceFormat::Jsonl
                                              : TraceFormat::Csv;
  std::ostringstream body;
  write_jobs(body, jobs, fmt);
  write_file(out_path, body.str());

  const auto s = summarize(jobs);
  out << s.total() << " jobs: " << s.completed_destined << " complete-destined / "
      << s.timeout_destined << " timeout / " << s.checkpointing << " checkpointing\n";
  return kOk;
}

int cmd_run(const RunFlags& f, const std::string& policy_name, std::ostream& out) {
  const auto policy = parse_policy(policy_name);
  const auto cluster = f.cluster_config();
  const auto w = load_workload(f, cluster);
  const fs::path dir = f.out;
  make_dir(dir);
  const auto s = run_scenario(w.jobs, cluster, *policy);
  write_scenario(dir, s);
  write_file(dir / "manifest.json", manifest("run", w, cluster, {*policy}).dump(2) + '\n');
  print_report(out, s.report);
  return kOk;
}

int cmd_compare(const RunFlags& f, std::ostream& out) {
  const auto cluster = f.cluster_config();
  const auto w = load_workload(f, cluster);
  const fs::path dir = f.out;
  make_dir(dir);

  // Isolated instances; results are merged in policy order once all finish.
  std::vector<std::future<Scenario>> futures;
  for (auto p : kAllPolicies)
    futures.push_back(std::async(std::launch::async, run_scenario, std::cref(w.jobs),
                                 std::cref(cluster), p));
  std::vector<Scenario> scenarios;
  for (auto& fut : futures) scenarios.push_back(fut.get());

  std::vector<MetricsReport> reports;
  std::vector<PolicyKind> policies;
  for (const auto& s : scenarios) {
    write_scenario(dir / std::string(to_string(s.policy)), s);
    reports.push_back(s.report);
    policies.push_back(s.policy);
  }
  const auto table = compare(reports);
  write_file(dir / "comparison.csv", table.to_csv());
  write_file(dir / "summary.txt", table.to_text());
  write_file(dir / "manifest.json", manifest("compare", w, cluster, policies).dump(2) + '\n');
  out << table.to_text();
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Batch-cluster simulator with checkpoint-aware time limit adjustment"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-workload", "Generate or ingest a workload file");
  std::string gen_out, gen_format, gen_config, gen_cluster, trace, scale = "1";
  std::uint64_t gen_seed = 42;
  int nodes_max = 0;
  Seconds max_limit = 1440, ckpt_interval = 420;
  FilterCriteria filter;
  std::string partition, queue, month;
  bool include_shared = false;
  gen->add_option("--out", gen_out, "Output workload file")->required();
  gen->add_option("--format", gen_format, "csv or jsonl (default: from extension)")
      ->check(CLI::IsMember({"csv", "jsonl"}));
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--config", gen_config, "Generator shape JSON");
  gen->add_option("--cluster", gen_cluster, "Cluster config JSON (node count, cores per node)");
  auto* nodes_max_opt =
      gen->add_option("--nodes-max", nodes_max, "Largest node count for non-checkpointing jobs");
  auto* trace_opt = gen->add_option("--trace", trace, "Job trace (.csv or .jsonl) instead of the generator");
  gen->add_option("--partition", partition, "Trace filter: partition")->needs(trace_opt);
  gen->add_option("--queue", queue, "Trace filter: queue")->needs(trace_opt);
  gen->add_option("--month", month, "Trace filter: month")->needs(trace_opt);
  gen->add_option("--min-run", filter.min_run_duration, "Trace filter: minimum run (s)")->needs(trace_opt);
  gen->add_flag("--include-shared", include_shared, "Keep non-exclusive jobs")->needs(trace_opt);
  gen->add_option("--scale", scale, "Time compression N or N/D")->needs(trace_opt);
  gen->add_option("--max-limit", max_limit, "Scaled limit marking checkpointing jobs")->needs(trace_opt);
  gen->add_option("--ckpt-interval", ckpt_interval, "Checkpoint interval (s)")->needs(trace_opt);
  nodes_max_opt->excludes(trace_opt);

  const std::vector<std::string> policy_names{"baseline", "early-cancel", "extend", "hybrid"};
  auto* run = app.add_subcommand("run", "Simulate one policy");
  RunFlags run_flags;
  run_flags.attach(*run);
  std::string policy_name;
  run->add_option("--policy", policy_name, "baseline | early-cancel | extend | hybrid")
      ->required()
      ->check(CLI::IsMember(policy_names));

  auto* cmp = app.add_subcommand("compare", "Simulate all four policies and compare");
  RunFlags cmp_flags;
  cmp_flags.attach(*cmp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      if (!partition.empty()) filter.partition = partition;
      if (!queue.empty()) filter.queue = queue;
      if (!month.empty()) filter.month = month;
      filter.require_exclusive = !include_shared;
      return cmd_gen_workload(gen_out, gen_format, gen_config, gen_cluster, gen_seed,
                              nodes_max_opt, nodes_max, trace, filter, scale, max_limit,
                              ckpt_interval, out);
    }
    if (*run) return cmd_run(run_flags, policy_name, out);
    return cmd_compare(cmp_flags, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
}

}  // namespace autoloop::cli
