#include <algorithm>
#include <stdexcept>

#include "detail.hpp"
#include "spatial/layout.hpp"
#include "spatial/sort.hpp"

namespace spatial {

std::vector<KeyedElement> make_elements(const std::vector<std::uint32_t>& keys) {
  std::vector<KeyedElement> out(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) out[i] = {keys[i], std::uint32_t(i), true};
  return out;
}

std::vector<std::uint64_t> bitonic_on(Schedule& sched, const std::vector<Coord>& wires, std::vector<Word>& keys,
                                      std::vector<std::uint64_t> ready) {
  const std::size_t n = wires.size();
  if (!is_pow2(n) || keys.size() != n || ready.size() != n)
    throw std::invalid_argument("bitonic network needs 2^k wires");
  std::vector<Transfer> round;
  std::vector<std::uint64_t> start;
  for (std::size_t size = 2; size <= n; size *= 2)
    for (std::size_t stride = size / 2; stride > 0; stride /= 2) {
      round.clear();
      start.clear();
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i ^ stride;
        if (j < i) continue;
        round.push_back({wires[i], wires[j], keys[i]});
        round.push_back({wires[j], wires[i], keys[j]});
        start.push_back(ready[i]);
        start.push_back(ready[j]);
        const bool ascending = (i & size) == 0;
        if ((keys[i] > keys[j]) == ascending) std::swap(keys[i], keys[j]);
      }
      const auto at = send_round(sched, round, start);
      std::size_t r = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i ^ stride;
        if (j < i) continue;
        // Each wire holds its result once the partner's key has landed.
        ready[j] = at[r];
        ready[i] = at[r + 1];
        r += 2;
      }
    }
  return ready;
}

void bitonic_on(Schedule& sched, const std::vector<Coord>& wires, std::vector<Word>& keys) {
  std::vector<std::uint64_t> ready;
  for (Coord c : wires) ready.push_back(sched.ready(c));
  bitonic_on(sched, wires, keys, std::move(ready));
}

void bitonic_on(Schedule& sched, const std::vector<Coord>& wires, std::vector<Word>& keys, std::size_t live) {
  const std::size_t n = wires.size();
  if (!is_pow2(n) || keys.size() != n || live > n) throw std::invalid_argument("bitonic network needs 2^k wires");
  std::vector<bool> pad(n, false);
  for (std::size_t i = live; i < n; ++i) pad[i] = true;
  std::vector<std::uint64_t> ready;
  for (Coord c : wires) ready.push_back(sched.ready(c));
  std::vector<Transfer> round;
  std::vector<std::uint64_t> start;
  std::vector<std::pair<std::size_t, std::size_t>> lands;  // (wire, index into round)
  for (std::size_t size = 2; size <= n; size *= 2)
    for (std::size_t stride = size / 2; stride > 0; stride /= 2) {
      round.clear();
      start.clear();
      lands.clear();
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i ^ stride;
        if (j < i || (pad[i] && pad[j])) continue;
        const bool ascending = (i & size) == 0;
        if (!pad[i] && !pad[j]) {
          lands.push_back({j, round.size()});
          round.push_back({wires[i], wires[j], keys[i]});
          start.push_back(ready[i]);
          lands.push_back({i, round.size()});
          round.push_back({wires[j], wires[i], keys[j]});
          start.push_back(ready[j]);
          if ((keys[i] > keys[j]) == ascending) std::swap(keys[i], keys[j]);
          continue;
        }
        // The real key is the minimum; it belongs on i when ascending.
        const std::size_t from = pad[i] ? j : i, to = ascending ? i : j;
        if (from == to) continue;
        lands.push_back({to, round.size()});
        round.push_back({wires[from], wires[to], keys[from]});
        start.push_back(ready[from]);
        std::swap(keys[from], keys[to]);
        pad[from] = true;
        pad[to] = false;
      }
      const auto at = send_round(sched, round, start);
      for (auto [w, r] : lands) ready[w] = at[r];
    }
}

AlgorithmResult<std::vector<KeyedElement>> bitonic_sort(const std::vector<KeyedElement>& values,
                                                         std::int64_t h, std::int64_t w,
                                                         const RunOptions& opts) {
  if (h < 1 || w < 1 || std::size_t(h * w) != values.size())
    throw std::invalid_argument("values must fill the h x w grid");
  detail::check_tags(values);
  const std::size_t n = values.size(), p = ceil_pow2(n);
  std::vector<Coord> wires(p);
  std::vector<Word> keys(p);
  for (std::size_t i = 0; i < p; ++i) {
    wires[i] = {std::int32_t(i / std::size_t(w)), std::int32_t(i % std::size_t(w))};
    keys[i] = i < n ? values[i].packed() : sentinel_word(i);
  }
  Schedule sched(opts.limits, opts.record_trace);
  bitonic_on(sched, wires, keys);
  std::vector<KeyedElement> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = KeyedElement::unpack(keys[i]);
  return detail::finish(std::move(out), sched, {h, w, {}}, opts);
}

}  // namespace spatial
