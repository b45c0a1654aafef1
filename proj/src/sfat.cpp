#include <queue>
#include <stdexcept>
#include <unordered_map>

#include "spatial/bridge.hpp"
#include "spatial/layout.hpp"

namespace spatial {

std::uint64_t SfatConfig::block() const {
  if (c < 1 || S < c) throw std::invalid_argument("S-fat needs S >= c >= 1");
  return isqrt(S / c);
}

CostLedger coarsen_sfat(const Trace& trace, const SfatConfig& cfg) {
  const auto b = std::int32_t(cfg.block());
  auto fat = [b](Coord x) { return Coord{x.row / b, x.col / b}; };

  // Same sweep as audit, with the dependencies of the original processors
  // and the distances between their blocks.
  using Pending = std::pair<std::uint64_t, std::size_t>;  // arrival, event
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> pending;
  std::unordered_map<std::uint64_t, std::uint64_t> wire;
  std::vector<std::uint64_t> label(trace.events.size());

  CostLedger ledger;
  for (std::size_t i = 0; i < trace.events.size(); ++i) {
    const auto& e = trace.events[i];
    while (!pending.empty() && pending.top().first <= e.send_step) {
      const auto& p = trace.events[pending.top().second];
      auto& w = wire[coord_key(p.dst)];
      w = std::max(w, label[pending.top().second]);
      pending.pop();
    }
    const std::uint64_t cost = manhattan(fat(e.src), fat(e.dst));
    const auto it = wire.find(coord_key(e.src));
    label[i] = (it == wire.end() ? 0 : it->second) + cost;
    pending.push({e.arrival_step, i});
    ledger.energy += cost;
    ledger.depth = std::max(ledger.depth, e.depth);
    ledger.wire_depth = std::max(ledger.wire_depth, label[i]);
    ledger.messages += 1;
    ledger.steps = std::max(ledger.steps, e.arrival_step);
  }
  ledger.steps = std::max(ledger.steps, trace.steps);
  return ledger;
}

}  // namespace spatial
