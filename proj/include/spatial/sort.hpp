#pragma once

#include <compare>
#include <cstdint>
#include <vector>

#include "spatial/core.hpp"

namespace spatial {

/// A sortable element. Key and tag share one machine word (key in the high
/// half), so an element travels as a single message and compares as a word.
struct KeyedElement {
  std::uint32_t key = 0;
  std::uint32_t tag = 0;
  bool active = true;

  Word packed() const { return Word(key) << 32 | tag; }
  static KeyedElement unpack(Word w) { return {std::uint32_t(w >> 32), std::uint32_t(w), true}; }

  std::strong_ordering operator<=>(const KeyedElement& o) const { return packed() <=> o.packed(); }
  bool operator==(const KeyedElement& o) const { return packed() == o.packed(); }
};

/// Padding elements compare above every caller element; caller tags must stay
/// below kSentinelTagBase.
constexpr std::uint32_t kSentinelKey = 0xFFFFFFFFu;
constexpr std::uint32_t kSentinelTagBase = 0x80000000u;
constexpr Word sentinel_word(std::uint64_t i) {
  return Word(kSentinelKey) << 32 | (kSentinelTagBase + i);
}

/// Elements with tag = index.
std::vector<KeyedElement> make_elements(const std::vector<std::uint32_t>& keys);

/// A word resident at a processor from step `ready` on.
struct Located {
  Word key = 0;
  Coord pos{};
  std::uint64_t ready = 0;
};

// Choreography building blocks -----------------------------------------------

/// Bitonic network over `wires` (a power of 2 count); keys[i] sits at wires[i].
/// Sorts ascending in place.
void bitonic_on(Schedule& sched, const std::vector<Coord>& wires, std::vector<Word>& keys);
/// Timed form: wire i holds its key from ready[i]; returns when each wire
/// holds its final key.
std::vector<std::uint64_t> bitonic_on(Schedule& sched, const std::vector<Coord>& wires, std::vector<Word>& keys,
                                      std::vector<std::uint64_t> ready);
/// Same network where only the first `live` keys exist; the remaining wires
/// hold virtual +infinity padding that is never sent. Comparators between two
/// pads are skipped and a key meeting a pad moves (one message) only when it
/// has to change wires. On return keys[0, live) is sorted.
void bitonic_on(Schedule& sched, const std::vector<Coord>& wires, std::vector<Word>& keys, std::size_t live);

struct CrossRanks {
  std::vector<std::uint64_t> x, y;        // rank of each element in x ∪ y (0-based)
  std::vector<Coord> x_at, y_at;          // where each rank ends up
  std::vector<std::uint64_t> x_ready, y_ready;  // and when
};

/// Ranks two individually sorted sequences against each other on a virtual
/// |x| x |y| grid folded row-major into `area`: row i compares x[i] with
/// every y[j]. Needs |x| |y| <= area cells.
CrossRanks cross_rank_on(Schedule& sched, const std::vector<Located>& x, const std::vector<Located>& y,
                         const GridShape& area);

/// Merges sorted `a` and `b` (|a| + |b| = region cells, region h x w with
/// w in {h, 2h}, both powers of 2). Returns the result row-major over `region`.
std::vector<Located> merge_on(Schedule& sched, const std::vector<Located>& a, const std::vector<Located>& b,
                              const GridShape& region);

/// Sorts the words of a side x side square (side a power of 2, row-major in
/// `keys`) into row-major order.
void mergesort_on(Schedule& sched, const GridShape& square, std::vector<Word>& keys);

// Standalone runs --------------------------------------------------------------

/// Row-major over h x w; pads to a power of 2 with sentinels placed on the
/// virtual rows below the grid.
AlgorithmResult<std::vector<KeyedElement>> bitonic_sort(const std::vector<KeyedElement>& values,
                                                         std::int64_t h, std::int64_t w,
                                                         const RunOptions& opts = {});

struct AllPairsOutput {
  std::vector<KeyedElement> sorted;
  std::vector<std::uint64_t> ranks;  // rank of input i
};

/// n a power of 4, data row-major on the sqrt(n) square at the origin; the
/// n x n working grid sits immediately to its right.
AlgorithmResult<AllPairsOutput> all_pairs_sort(const std::vector<KeyedElement>& values,
                                               const RunOptions& opts = {});

struct MergeInstance {
  std::vector<KeyedElement> a;
  std::vector<KeyedElement> b;
};

/// k-th smallest (1-based) of a ∪ b via deterministic sampling.
AlgorithmResult<KeyedElement> two_array_rank(const MergeInstance& inst, std::uint64_t k,
                                             const RunOptions& opts = {});

/// a then b row-major on the smallest power-of-4 square, padded with sentinels.
AlgorithmResult<std::vector<KeyedElement>> merge_sorted(const MergeInstance& inst,
                                                        const RunOptions& opts = {});

/// Row-major on a power-of-4 square (padded with sentinels); output row-major.
AlgorithmResult<std::vector<KeyedElement>> mergesort_2d(const std::vector<KeyedElement>& values,
                                                        const RunOptions& opts = {});

struct SelectConfig {
  double c = 5.0;  // must be at least 3
};

struct SelectOutput {
  KeyedElement element;
  unsigned iterations = 0;
  bool fallback = false;
};

/// Rank-k (1-based) element of values laid out row-major on a power-of-2
/// square; padding cells never take part. Randomness comes from the
/// per-processor streams seeded by opts.seed.
AlgorithmResult<SelectOutput> rank_select(const std::vector<KeyedElement>& values, std::uint64_t k,
                                          const SelectConfig& cfg = {}, const RunOptions& opts = {});

}  // namespace spatial
