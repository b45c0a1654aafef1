#include "spatial/layout.hpp"

#include <cmath>
#include <stdexcept>

namespace spatial {

std::uint64_t isqrt(std::uint64_t x) {
  auto r = std::uint64_t(std::sqrt(double(x)));
  while (r * r > x) --r;
  while ((r + 1) * (r + 1) <= x) ++r;
  return r;
}

Coord zorder_coord(std::uint64_t index, std::uint64_t side) {
  if (!is_pow2(side)) throw std::invalid_argument("Z-order side must be a power of 2");
  if (index >= side * side) throw std::out_of_range("Z-order index out of range");
  std::uint32_t row = 0, col = 0;
  for (unsigned bit = 0; index != 0; ++bit, index >>= 2) {
    col |= std::uint32_t(index & 1) << bit;
    row |= std::uint32_t((index >> 1) & 1) << bit;
  }
  return {std::int32_t(row), std::int32_t(col)};
}

std::uint64_t zorder_rank(Coord c, std::uint64_t side) {
  if (!is_pow2(side)) throw std::invalid_argument("Z-order side must be a power of 2");
  if (c.row < 0 || c.col < 0 || std::uint64_t(c.row) >= side || std::uint64_t(c.col) >= side)
    throw std::out_of_range("coordinate outside the Z-order grid");
  std::uint64_t index = 0;
  for (unsigned bit = 0; bit < 32; ++bit) {
    index |= std::uint64_t((std::uint32_t(c.col) >> bit) & 1) << (2 * bit);
    index |= std::uint64_t((std::uint32_t(c.row) >> bit) & 1) << (2 * bit + 1);
  }
  return index;
}

Coord rowmajor_coord(std::uint64_t index, std::uint64_t h, std::uint64_t w) {
  if (w == 0 || index >= h * w) throw std::out_of_range("row-major index out of range");
  return {std::int32_t(index / w), std::int32_t(index % w)};
}

std::uint64_t rowmajor_rank(Coord c, std::uint64_t h, std::uint64_t w) {
  if (c.row < 0 || c.col < 0 || std::uint64_t(c.row) >= h || std::uint64_t(c.col) >= w)
    throw std::out_of_range("coordinate outside the row-major grid");
  return std::uint64_t(c.row) * w + std::uint64_t(c.col);
}

LayoutKind LayoutKind::zorder(std::uint64_t side, Coord origin) {
  if (!is_pow2(side)) throw std::invalid_argument("Z-order side must be a power of 2");
  return {LayoutOrder::ZOrder, side, side, origin};
}

Coord LayoutKind::coord(std::uint64_t index) const {
  const Coord local = order == LayoutOrder::ZOrder ? zorder_coord(index, w) : rowmajor_coord(index, h, w);
  return local + origin;
}

std::uint64_t LayoutKind::rank(Coord c) const {
  const Coord local{c.row - origin.row, c.col - origin.col};
  return order == LayoutOrder::ZOrder ? zorder_rank(local, w) : rowmajor_rank(local, h, w);
}

bool is_bijection(const std::vector<std::uint64_t>& target) {
  std::vector<bool> seen(target.size(), false);
  for (auto t : target) {
    if (t >= target.size() || seen[t]) return false;
    seen[t] = true;
  }
  return true;
}

void send_round(Schedule& sched, const std::vector<Transfer>& round) {
  std::vector<std::uint64_t> start(round.size());
  for (std::size_t i = 0; i < round.size(); ++i) start[i] = sched.ready(round[i].src);
  for (std::size_t i = 0; i < round.size(); ++i)
    sched.send_at(round[i].src, round[i].dst, round[i].payload, start[i]);
}

std::vector<std::uint64_t> send_round(Schedule& sched, const std::vector<Transfer>& round,
                                      const std::vector<std::uint64_t>& ready) {
  if (ready.size() != round.size()) throw std::invalid_argument("one ready step per transfer");
  std::vector<std::uint64_t> at(round.size());
  for (std::size_t i = 0; i < round.size(); ++i)
    at[i] = sched.send_at(round[i].src, round[i].dst, round[i].payload, ready[i]);
  return at;
}

void route_permutation(Schedule& sched, const PermutationPlan& plan, const std::vector<Word>& payloads) {
  if (plan.target.size() != plan.layout.size())
    throw std::invalid_argument("permutation size does not match the layout");
  if (!is_bijection(plan.target)) throw std::invalid_argument("permutation plan is not a bijection");
  std::vector<Transfer> round;
  round.reserve(plan.target.size());
  for (std::uint64_t i = 0; i < plan.target.size(); ++i)
    round.push_back({plan.layout.coord(i), plan.layout.coord(plan.target[i]), payloads.empty() ? i : payloads[i]});
  send_round(sched, round);
}

Trace route_permutation(const PermutationPlan& plan, const GridShape& shape, const ModelLimits& limits) {
  Schedule sched(limits, true);
  route_permutation(sched, plan);
  return sched.trace(shape);
}

std::uint64_t reversal_energy(std::uint64_t h, std::uint64_t w) {
  std::uint64_t total = 0;
  for (std::uint64_t i = 0; i < h; ++i)
    for (std::uint64_t j = 0; j < w; ++j) {
      const auto di = std::int64_t(h) - 1 - 2 * std::int64_t(i);
      const auto dj = std::int64_t(w) - 1 - 2 * std::int64_t(j);
      total += std::uint64_t(di < 0 ? -di : di) + std::uint64_t(dj < 0 ? -dj : dj);
    }
  return total;
}

}  // namespace spatial
