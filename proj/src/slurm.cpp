#include "autoloop/slurm.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstdio>
#include <set>

#include "autoloop/scheduler.hpp"
#include "text_util.hpp"

namespace autoloop::slurm {

std::string format_timelimit(Seconds seconds) {
  if (seconds < 0) throw ConfigError("time limit must be >= 0");
  const Seconds days = seconds / 86400;
  const Seconds hours = seconds % 86400 / 3600;
  const Seconds minutes = seconds % 3600 / 60;
  const Seconds secs = seconds % 60;
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%lld-%02lld:%02lld:%02lld", static_cast<long long>(days),
                static_cast<long long>(hours), static_cast<long long>(minutes),
                static_cast<long long>(secs));
  return buf.data();
}

namespace {

std::optional<Seconds> digits(std::string_view s) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
    return std::nullopt;
  return text::to_int(s);
}

}  // namespace

Seconds parse_timelimit(std::string_view raw) {
  const auto text = text::trim(raw);
  if (text == "UNLIMITED" || text == "INFINITE") return kUnlimited;
  const auto bad = [&]() -> ParseError {
    return ParseError(0, "malformed time limit '" + std::string(text) + "'");
  };

  std::optional<Seconds> days;
  std::string_view clock = text;
  if (const auto dash = text.find('-'); dash != std::string_view::npos) {
    days = digits(text.substr(0, dash));
    if (!days) throw bad();
    clock = text.substr(dash + 1);
  }
  std::vector<Seconds> parts;
  for (auto p : text::split(clock, ':')) {
    const auto v = digits(p);
    if (!v) throw bad();
    parts.push_back(*v);
  }
  if (days) {
    // D-H, D-H:M, D-H:M:S
    if (parts.empty() || parts.size() > 3) throw bad();
    parts.resize(3, 0);
    return *days * 86400 + parts[0] * 3600 + parts[1] * 60 + parts[2];
  }
  switch (parts.size()) {
    case 1: return parts[0] * 60;                                    // M
    case 2: return parts[0] * 60 + parts[1];                         // M:S
    case 3: return parts[0] * 3600 + parts[1] * 60 + parts[2];       // H:M:S
    default: throw bad();
  }
}

std::string SchedulerCommand::to_string() const {
  std::string out;
  for (const auto& a : argv) {
    if (!out.empty()) out += ' ';
    out += a;
  }
  return out;
}

SchedulerCommand build_update_command(JobId job, Seconds new_limit) {
  if (job < 0) throw ConfigError("job id must be >= 0");
  if (new_limit <= 0) throw ConfigError("new time limit must be > 0");
  return {{"scontrol", "update", "JobId=" + std::to_string(job),
           "TimeLimit=" + format_timelimit(new_limit)},
          0};
}

SchedulerCommand build_cancel_command(JobId job) {
  if (job < 0) throw ConfigError("job id must be >= 0");
  return {{"scancel", std::to_string(job)}, 0};
}

SchedulerCommand build_squeue_command() {
  return {{"squeue", "--noconvert", "--states=RUNNING,PENDING", "--sort=-p",
           "--Format=JobID:|,State:|,StartTime:|,TimeLimit:|,NodeList:|,SchedNodes:|,NumNodes:"},
          0};
}

std::vector<std::string> expand_hostlist(std::string_view hostlist) {
  std::vector<std::string> out;
  // Split on commas that are not inside brackets.
  std::vector<std::string_view> items;
  int depth = 0;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < hostlist.size(); ++i) {
    if (hostlist[i] == '[') ++depth;
    if (hostlist[i] == ']') --depth;
    if (hostlist[i] == ',' && depth == 0) {
      items.push_back(hostlist.substr(begin, i - begin));
      begin = i + 1;
    }
  }
  if (depth != 0) throw ParseError(0, "unbalanced brackets in hostlist '" + std::string(hostlist) + "'");
  items.push_back(hostlist.substr(begin));

  for (auto raw : items) {
    const auto item = text::trim(raw);
    if (item.empty()) continue;
    const auto open = item.find('[');
    if (open == std::string_view::npos) {
      out.emplace_back(item);
      continue;
    }
    const auto close = item.find(']', open);
    if (close == std::string_view::npos)
      throw ParseError(0, "malformed hostlist item '" + std::string(item) + "'");
    const auto prefix = item.substr(0, open);
    const auto suffix = item.substr(close + 1);
    for (auto range : text::split(item.substr(open + 1, close - open - 1), ',')) {
      const auto dash = range.find('-');
      const auto lo_text = range.substr(0, dash);
      const auto hi_text = dash == std::string_view::npos ? lo_text : range.substr(dash + 1);
      const auto lo = digits(lo_text);
      const auto hi = digits(hi_text);
      if (!lo || !hi || *hi < *lo)
        throw ParseError(0, "malformed hostlist range '" + std::string(range) + "'");
      const auto width = lo_text.size();
      for (Seconds n = *lo; n <= *hi; ++n) {
        auto num = std::to_string(n);
        if (num.size() < width) num.insert(0, width - num.size(), '0');
        out.push_back(std::string(prefix) + num + std::string(suffix));
      }
    }
  }
  return out;
}

NodeTable::NodeTable(std::vector<std::string> hosts) : hosts_(std::move(hosts)) {
  for (std::size_t i = 0; i < hosts_.size(); ++i)
    if (!ids_.emplace(hosts_[i], static_cast<NodeId>(i)).second)
      throw ConfigError("duplicate host " + hosts_[i]);
}

std::optional<NodeId> NodeTable::find(std::string_view host) const {
  const auto it = ids_.find(host);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::vector<std::string_view> row_cells(std::string_view line) {
  auto cells = text::split(line, '|');
  for (auto& c : cells) c = text::trim(c);
  // Every column carries a '|' suffix except possibly the last.
  if (cells.size() > 1 && cells.back().empty()) cells.pop_back();
  return cells;
}

}  // namespace

std::optional<Seconds> parse_iso_time(std::string_view text) {
  text = text::trim(text);
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' ||
      text[16] != ':')
    return std::nullopt;
  const auto y = digits(text.substr(0, 4));
  const auto mo = digits(text.substr(5, 2));
  const auto d = digits(text.substr(8, 2));
  const auto h = digits(text.substr(11, 2));
  const auto mi = digits(text.substr(14, 2));
  const auto s = digits(text.substr(17, 2));
  if (!y || !mo || !d || !h || !mi || !s) return std::nullopt;
  if (*mo < 1 || *mo > 12 || *d < 1 || *d > 31 || *h > 23 || *mi > 59 || *s > 60) return std::nullopt;
  return days_from_civil(*y, static_cast<unsigned>(*mo), static_cast<unsigned>(*d)) * 86400 +
         *h * 3600 + *mi * 60 + *s;
}

SqueueParse parse_squeue_output(std::string_view text, const NodeTable& table, Seconds now) {
  SqueueParse out;
  out.snapshot.now = now;
  out.snapshot.node_count = table.size();

  const auto lines = text::split(text, '\n');
  std::size_t i = 0;
  while (i < lines.size() && text::trim(lines[i]).empty()) ++i;
  const auto expected_header = row_cells(kSqueueHeader);
  if (i == lines.size() || row_cells(lines[i]) != expected_header)
    throw ParseError(i < lines.size() ? i + 1 : 0, "squeue header missing");

  NodeSet busy;
  for (++i; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const auto lineno = std::to_string(i + 1);
    const auto cells = row_cells(lines[i]);
    const auto warn = [&](const std::string& what) {
      out.warnings.push_back("line " + lineno + ": " + what);
    };
    if (cells.size() != expected_header.size()) {
      warn("expected " + std::to_string(expected_header.size()) + " columns");
      continue;
    }
    const auto id = text::to_int(cells[0]);
    if (!id || *id < 0) {
      warn("unsupported job id '" + std::string(cells[0]) + "'");
      continue;
    }
    Seconds limit = 0;
    try {
      limit = parse_timelimit(cells[3]);
    } catch (const ParseError&) {
      warn("bad time limit '" + std::string(cells[3]) + "'");
      continue;
    }
    if (limit == kUnlimited) {
      warn("job " + std::to_string(*id) + " has no time limit");
      continue;
    }

    if (cells[1] == "RUNNING") {
      const auto start = parse_iso_time(cells[2]);
      if (!start) {
        warn("bad start time '" + std::string(cells[2]) + "'");
        continue;
      }
      NodeSet alloc;
      bool ok = true;
      try {
        for (const auto& host : expand_hostlist(cells[4])) {
          const auto nid = table.find(host);
          if (!nid) {
            warn("unknown host '" + host + "'");
            ok = false;
            break;
          }
          alloc.push_back(*nid);
        }
      } catch (const ParseError& e) {
        warn(e.what());
        ok = false;
      }
      if (!ok) continue;
      std::sort(alloc.begin(), alloc.end());
      alloc.erase(std::unique(alloc.begin(), alloc.end()), alloc.end());
      busy = nodes::plus(busy, alloc);
      out.snapshot.running.push_back({*id, *start, limit, std::move(alloc), 0});
    } else if (cells[1] == "PENDING") {
      const auto n = text::to_int(cells[6]);
      if (!n || *n < 1) {
        warn("bad node count '" + std::string(cells[6]) + "'");
        continue;
      }
      std::optional<Seconds> planned;
      if (cells[2] != "N/A" && !cells[2].empty()) {
        planned = parse_iso_time(cells[2]);
        if (!planned) {
          warn("bad planned start '" + std::string(cells[2]) + "'");
          continue;
        }
        planned = std::max(*planned, now);
      }
      out.snapshot.pending.push_back({*id, static_cast<int>(*n), limit, planned});
    } else {
      warn("skipping job " + std::to_string(*id) + " in state " + std::string(cells[1]));
    }
  }

  for (NodeId n = 0; n < table.size(); ++n)
    if (!std::binary_search(busy.begin(), busy.end(), n)) out.snapshot.free_nodes.push_back(n);
  return out;
}

CommandResult ProcessRunner::run(const SchedulerCommand& command) {
  if (command.argv.empty()) throw ConfigError("empty command");
  int fds[2];
  if (pipe(fds) != 0) throw SchedulingError("pipe failed");
  const pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    throw SchedulingError("fork failed");
  }
  if (pid == 0) {
    dup2(fds[1], STDOUT_FILENO);
    close(fds[0]);
    close(fds[1]);
    std::vector<char*> args;
    for (const auto& a : command.argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    execvp(args[0], args.data());
    _exit(127);
  }
  close(fds[1]);

  CommandResult result;
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  bool timed_out = false;
  std::array<char, 4096> buf{};
  while (true) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      timed_out = true;
      break;
    }
    pollfd pfd{fds[0], POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) {
      timed_out = rc == 0;
      break;
    }
    const auto n = read(fds[0], buf.data(), buf.size());
    if (n <= 0) break;
    result.output.append(buf.data(), static_cast<std::size_t>(n));
  }
  close(fds[0]);
  if (timed_out) kill(pid, SIGKILL);
  int status = 0;
  waitpid(pid, &status, 0);
  if (timed_out)
    result.exit_code = 124;
  else if (WIFEXITED(status))
    result.exit_code = WEXITSTATUS(status);
  else
    result.exit_code = 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  return result;
}

CommandResult run_checked(CommandRunner& runner, const SchedulerCommand& command) {
  auto result = runner.run(command);
  if (result.exit_code != command.expected_exit)
    throw SchedulingError("'" + command.to_string() + "' exited with " +
                          std::to_string(result.exit_code));
  return result;
}

}  // namespace autoloop::slurm
