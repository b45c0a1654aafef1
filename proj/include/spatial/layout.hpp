#pragma once

#include <cstdint>
#include <vector>

#include "spatial/core.hpp"

namespace spatial {

constexpr bool is_pow2(std::uint64_t x) { return x != 0 && (x & (x - 1)) == 0; }
constexpr bool is_pow4(std::uint64_t x) { return is_pow2(x) && (x & 0x5555555555555555ULL) != 0; }

/// Smallest power of two >= x (x >= 1).
constexpr std::uint64_t ceil_pow2(std::uint64_t x) {
  std::uint64_t p = 1;
  while (p < x) p <<= 1;
  return p;
}

constexpr unsigned ilog2(std::uint64_t x) {
  unsigned r = 0;
  while (x >>= 1) ++r;
  return r;
}

/// Integer square root (floor).
std::uint64_t isqrt(std::uint64_t x);

/// Morton index -> cell, quadrants visited TL, TR, BL, BR. `side` must be a power of 2.
Coord zorder_coord(std::uint64_t index, std::uint64_t side);
std::uint64_t zorder_rank(Coord c, std::uint64_t side);

Coord rowmajor_coord(std::uint64_t index, std::uint64_t h, std::uint64_t w);
std::uint64_t rowmajor_rank(Coord c, std::uint64_t h, std::uint64_t w);

enum class LayoutOrder { RowMajor, ZOrder };

struct LayoutKind {
  LayoutOrder order = LayoutOrder::RowMajor;
  std::uint64_t h = 1;
  std::uint64_t w = 1;
  Coord origin{};

  static LayoutKind row_major(std::uint64_t h, std::uint64_t w, Coord origin = {}) {
    return {LayoutOrder::RowMajor, h, w, origin};
  }
  /// Throws std::invalid_argument unless `side` is a power of 2.
  static LayoutKind zorder(std::uint64_t side, Coord origin = {});

  std::uint64_t size() const { return h * w; }
  Coord coord(std::uint64_t index) const;
  std::uint64_t rank(Coord c) const;
};

struct PermutationPlan {
  std::vector<std::uint64_t> target;  // element i moves to slot target[i]
  LayoutKind layout;
};

struct Transfer {
  Coord src;
  Coord dst;
  Word payload = 0;
};

/// Issues the transfers as one parallel round: each waits only for deliveries
/// that reached its source before the round began.
void send_round(Schedule& sched, const std::vector<Transfer>& round);
/// Transfer i starts no earlier than ready[i]; returns the arrival steps.
std::vector<std::uint64_t> send_round(Schedule& sched, const std::vector<Transfer>& round,
                                      const std::vector<std::uint64_t>& ready);

bool is_bijection(const std::vector<std::uint64_t>& target);

/// Sends every element directly from its slot to its target slot on `sched`.
void route_permutation(Schedule& sched, const PermutationPlan& plan,
                       const std::vector<Word>& payloads = {});

/// Standalone routing run; the trace records every move.
Trace route_permutation(const PermutationPlan& plan, const GridShape& shape,
                        const ModelLimits& limits = {});

/// Exact energy of reversing a row-major h x w grid: sum |h-1-2i| + |w-1-2j|.
std::uint64_t reversal_energy(std::uint64_t h, std::uint64_t w);

}  // namespace spatial
