#include "spatial/core.hpp"

#include <algorithm>
#include <map>
#include <queue>

namespace spatial {

CostLedger operator+(const CostLedger& a, const CostLedger& b) {
  return {a.energy + b.energy, a.depth + b.depth, a.wire_depth + b.wire_depth,
          a.messages + b.messages, a.steps + b.steps};
}

CostLedger audit(const Trace& trace) {
  struct Label {
    std::uint64_t depth = 0;
    std::uint64_t wire = 0;
  };
  struct Pending {
    std::uint64_t arrival;
    std::size_t index;
    bool operator>(const Pending& o) const {
      return arrival != o.arrival ? arrival > o.arrival : index > o.index;
    }
  };
  std::unordered_map<std::uint64_t, Label> received;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending;

  CostLedger ledger;
  std::uint64_t prev_step = 0;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const auto& e = trace.events[i];
    if (e.send_step < prev_step) throw ModelError("trace events are not sorted by send step");
    prev_step = e.send_step;
    while (!pending.empty() && pending.top().arrival <= e.send_step) {
      const auto& p = trace.events[pending.top().index];
      auto& lab = received[coord_key(p.dst)];
      lab.depth = std::max(lab.depth, p.depth);
      lab.wire = std::max(lab.wire, p.wire);
      pending.pop();
    }
    const std::uint64_t cost = manhattan(e.src, e.dst);
    if (cost != e.cost) throw ModelError("event cost differs from Manhattan distance");
    Label pred;
    if (auto it = received.find(coord_key(e.src)); it != received.end()) pred = it->second;
    if (e.depth != pred.depth + 1 || e.wire != pred.wire + cost)
      throw ModelError("inconsistent depth/wire labels at step " + std::to_string(e.send_step));
    pending.push({e.arrival_step, i});
    ledger.energy += cost;
    ledger.depth = std::max(ledger.depth, e.depth);
    ledger.wire_depth = std::max(ledger.wire_depth, e.wire);
    ledger.messages += 1;
    ledger.steps = std::max(ledger.steps, e.arrival_step);
  }
  ledger.steps = std::max(ledger.steps, trace.steps);
  return ledger;
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::SendsPerStep: return "sends-per-step";
    case ViolationKind::QueueOverflow: return "queue-overflow";
    case ViolationKind::ArrivalTime: return "arrival-time";
    case ViolationKind::CostMismatch: return "cost-mismatch";
  }
  return "unknown";
}

ViolationReport validate(const Trace& trace, const ModelLimits& limits) {
  ViolationReport report;
  std::map<std::pair<std::uint64_t, Coord>, std::uint64_t> sends, arrivals;
  for (const auto& e : trace.events) {
    ++sends[{e.send_step, e.src}];
    ++arrivals[{e.arrival_step, e.dst}];
    if (e.arrival_step != e.send_step + 1)
      report.violations.push_back({ViolationKind::ArrivalTime, e.send_step, e.dst, 1});
    if (e.cost != manhattan(e.src, e.dst))
      report.violations.push_back({ViolationKind::CostMismatch, e.send_step, e.src, e.cost});
  }
  for (const auto& [key, n] : sends)
    if (n > limits.sends_per_step)
      report.violations.push_back({ViolationKind::SendsPerStep, key.first, key.second, n});
  for (const auto& [key, n] : arrivals)
    if (n > limits.queue_capacity)
      report.violations.push_back({ViolationKind::QueueOverflow, key.first, key.second, n});
  return report;
}

namespace {
constexpr std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

Word rng_word(std::uint64_t seed, Coord coord, std::uint64_t counter) {
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ coord_key(coord));
  return splitmix(h ^ counter);
}

// ---------------------------------------------------------------------------

Schedule::Schedule(ModelLimits limits, bool record) : limits_(limits), record_(record) {}

Schedule::Proc& Schedule::proc(Coord c) { return procs_[coord_key(c)]; }

std::uint64_t Schedule::ready(Coord c) const {
  auto it = procs_.find(coord_key(c));
  return it == procs_.end() ? 0 : it->second.latest;
}

std::uint32_t Schedule::arrivals_at(const Proc& p, std::uint64_t step) {
  auto it = std::lower_bound(p.arrivals.begin(), p.arrivals.end(), step,
                             [](const Arrival& a, std::uint64_t s) { return a.step < s; });
  return it != p.arrivals.end() && it->step == step ? it->count : 0;
}

void Schedule::fold(Proc& p, std::uint64_t step) {
  auto it = p.arrivals.begin();
  for (; it != p.arrivals.end() && it->step <= step; ++it) {
    p.depth = std::max(p.depth, it->depth);
    p.wire = std::max(p.wire, it->wire);
  }
  p.arrivals.erase(p.arrivals.begin(), it);
}

std::uint64_t Schedule::send_at(Coord src, Coord dst, Word payload, std::uint64_t not_before) {
  if (src.row < 0 || src.col < 0 || dst.row < 0 || dst.col < 0)
    throw ModelError("coordinates must be nonnegative");
  if (src == dst) return std::max(not_before, ready(src));
  Proc& s = proc(src);
  Proc& d = proc(dst);  // unordered_map references are stable across rehash

  std::uint64_t step = not_before;
  if (s.last_send >= 0) {
    step = std::max(step, std::uint64_t(s.last_send));
    if (std::int64_t(step) == s.last_send && s.sends_at_last >= limits_.sends_per_step) ++step;
  }
  if (d.last_send >= 0) step = std::max(step, std::uint64_t(d.last_send));
  while (arrivals_at(d, step + 1) >= limits_.queue_capacity) ++step;
  if (step >= limits_.max_steps) throw ModelError("schedule exceeded max_steps");

  if (std::int64_t(step) == s.last_send) {
    ++s.sends_at_last;
  } else {
    s.last_send = std::int64_t(step);
    s.sends_at_last = 1;
    fold(s, step);
  }
  const std::uint64_t cost = manhattan(src, dst);
  const std::uint64_t depth = s.depth + 1;
  const std::uint64_t wire = s.wire + cost;

  const std::uint64_t arrival = step + 1;
  auto it = std::lower_bound(d.arrivals.begin(), d.arrivals.end(), arrival,
                             [](const Arrival& a, std::uint64_t v) { return a.step < v; });
  if (it != d.arrivals.end() && it->step == arrival) {
    ++it->count;
    it->depth = std::max(it->depth, depth);
    it->wire = std::max(it->wire, wire);
  } else {
    d.arrivals.insert(it, {arrival, 1, depth, wire});
  }
  d.latest = std::max(d.latest, arrival);

  ledger_.energy += cost;
  ledger_.depth = std::max(ledger_.depth, depth);
  ledger_.wire_depth = std::max(ledger_.wire_depth, wire);
  ledger_.messages += 1;
  ledger_.steps = std::max(ledger_.steps, arrival);

  if (record_) events_.push_back({src, dst, step, arrival, payload, cost, depth, wire});
  return arrival;
}

Trace Schedule::trace(GridShape shape, std::uint64_t seed) const {
  Trace t;
  t.events = events_;
  std::stable_sort(t.events.begin(), t.events.end(),
                   [](const MessageEvent& a, const MessageEvent& b) { return a.send_step < b.send_step; });
  t.steps = ledger_.steps;
  t.touched.reserve(2 * t.events.size());
  for (const auto& e : t.events) {
    t.touched.push_back(e.src);
    t.touched.push_back(e.dst);
  }
  std::sort(t.touched.begin(), t.touched.end());
  t.touched.erase(std::unique(t.touched.begin(), t.touched.end()), t.touched.end());
  t.shape = shape;
  t.seed = seed;
  t.limits = limits_;
  return t;
}

}  // namespace spatial
