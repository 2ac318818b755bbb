#include "autoloop/scheduler.hpp"

#include <algorithm>
#include <iterator>
#include <string>

namespace autoloop {

namespace nodes {

NodeSet take_lowest(const NodeSet& from, std::size_t count) {
  return NodeSet(from.begin(), from.begin() + static_cast<std::ptrdiff_t>(count));
}

NodeSet minus(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

NodeSet plus(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool intersects(const NodeSet& a, const NodeSet& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i == *j) return true;
    if (*i < *j)
      ++i;
    else
      ++j;
  }
  return false;
}

}  // namespace nodes

const RunningJobView* QueueSnapshot::find_running(JobId job) const {
  const auto it = std::find_if(running.begin(), running.end(),
                               [&](const RunningJobView& r) { return r.job_id == job; });
  return it == running.end() ? nullptr : &*it;
}

QueueSnapshot with_limit(const QueueSnapshot& snapshot, JobId job, Seconds new_limit) {
  QueueSnapshot out = snapshot;
  for (auto& r : out.running)
    if (r.job_id == job) r.current_limit = new_limit;
  return out;
}

QueueSnapshot with_cancel(const QueueSnapshot& snapshot, JobId job) {
  QueueSnapshot out = snapshot;
  const auto it = std::find_if(out.running.begin(), out.running.end(),
                               [&](const RunningJobView& r) { return r.job_id == job; });
  if (it == out.running.end()) return out;
  out.free_nodes = nodes::plus(out.free_nodes, it->nodes);
  out.running.erase(it);
  return out;
}

Reservation reserve(JobId job, int need, const NodeSet& free_nodes, std::span<const BusyJob> running,
                    Seconds now) {
  const auto count = static_cast<std::size_t>(need);
  if (free_nodes.size() >= count) return {job, now, nodes::take_lowest(free_nodes, count)};

  std::vector<const BusyJob*> by_end;
  by_end.reserve(running.size());
  for (const auto& b : running) by_end.push_back(&b);
  std::sort(by_end.begin(), by_end.end(), [](const BusyJob* a, const BusyJob* b) {
    return a->expected_end != b->expected_end ? a->expected_end < b->expected_end
                                              : a->job_id < b->job_id;
  });

  NodeSet avail = free_nodes;
  for (std::size_t i = 0; i < by_end.size();) {
    const Seconds t = by_end[i]->expected_end;
    // Everything ending at the same instant is released together.
    for (; i < by_end.size() && by_end[i]->expected_end == t; ++i)
      avail = nodes::plus(avail, by_end[i]->nodes);
    if (avail.size() >= count) return {job, std::max(t, now), nodes::take_lowest(avail, count)};
  }
  throw ConfigError("job " + std::to_string(job) + " requests " + std::to_string(need) +
                    " nodes but at most " + std::to_string(avail.size()) + " exist");
}

PassResult schedule_pass(std::span<const QueuedJob> queue, const NodeSet& free_nodes,
                         std::span<const BusyJob> running, Seconds now) {
  PassResult result;
  NodeSet free = free_nodes;

  std::size_t i = 0;
  std::vector<BusyJob> busy;
  for (; i < queue.size() && static_cast<std::size_t>(queue[i].nodes) <= free.size(); ++i) {
    const auto& q = queue[i];
    auto alloc = nodes::take_lowest(free, static_cast<std::size_t>(q.nodes));
    free = nodes::minus(free, alloc);
    busy.push_back({q.job_id, alloc, now + q.time_limit});
    result.started.push_back({q.job_id, std::move(alloc), SchedSource::Main});
  }
  if (i == queue.size()) return result;

  busy.insert(busy.end(), running.begin(), running.end());
  const auto& head = queue[i];
  result.reservation = reserve(head.job_id, head.nodes, free, busy, now);
  const auto& res = *result.reservation;

  for (std::size_t j = i + 1; j < queue.size() && !free.empty(); ++j) {
    const auto& q = queue[j];
    const auto need = static_cast<std::size_t>(q.nodes);
    if (need > free.size()) continue;
    NodeSet alloc;
    if (now + q.time_limit <= res.start) {
      alloc = nodes::take_lowest(free, need);
    } else {
      const auto outside = nodes::minus(free, res.nodes);
      if (outside.size() < need) continue;
      alloc = nodes::take_lowest(outside, need);
    }
    free = nodes::minus(free, alloc);
    result.started.push_back({q.job_id, std::move(alloc), SchedSource::Backfill});
  }
  return result;
}

SchedulePlan plan_schedule(const QueueSnapshot& snapshot) {
  SchedulePlan plan;
  std::vector<BusyJob> busy;
  busy.reserve(snapshot.running.size() + snapshot.pending.size());
  for (const auto& r : snapshot.running) {
    plan.running_expected_end[r.job_id] = r.expected_end();
    busy.push_back({r.job_id, r.nodes, r.expected_end()});
  }
  std::vector<QueuedJob> queue;
  queue.reserve(snapshot.pending.size());
  for (const auto& p : snapshot.pending) queue.push_back({p.job_id, p.nodes, p.time_limit});

  NodeSet free = snapshot.free_nodes;
  Seconds t = snapshot.now;
  while (true) {
    const auto released = std::partition(busy.begin(), busy.end(),
                                         [&](const BusyJob& b) { return b.expected_end > t; });
    for (auto it = released; it != busy.end(); ++it) free = nodes::plus(free, it->nodes);
    busy.erase(released, busy.end());
    if (queue.empty()) break;

    const auto pass = schedule_pass(queue, free, busy, t);
    for (const auto& p : pass.started) {
      const auto q = std::find_if(queue.begin(), queue.end(),
                                  [&](const QueuedJob& x) { return x.job_id == p.job_id; });
      plan.pending[p.job_id] = {t, p.nodes};
      free = nodes::minus(free, p.nodes);
      busy.push_back({p.job_id, p.nodes, t + q->time_limit});
      queue.erase(q);
    }
    if (queue.empty()) break;
    if (busy.empty())
      throw ConfigError("job " + std::to_string(queue.front().job_id) + " can never be placed");
    t = std::min_element(busy.begin(), busy.end(), [](const BusyJob& a, const BusyJob& b) {
          return a.expected_end < b.expected_end;
        })->expected_end;
  }
  return plan;
}

}  // namespace autoloop
