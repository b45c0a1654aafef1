#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "spatial/core.hpp"

namespace spatial {

struct CombineOp {
  std::function<Word(Word, Word)> fn;
  Word identity = 0;
  bool associative = true;
  bool commutative = true;
  std::string name;

  Word operator()(Word a, Word b) const { return fn(a, b); }

  static CombineOp plus();
  static CombineOp max();
  static CombineOp min();
};

struct SegmentedValue {
  Word value = 0;
  bool segment_start = false;
  bool operator==(const SegmentedValue&) const = default;
};

/// Edges (parent, child) of the broadcast tree over `region`, parent edges
/// listed before the edges of the child's subtree. The root is region.origin.
std::vector<std::pair<Coord, Coord>> broadcast_tree(const GridShape& region);
/// Same, rooted at any processor of the region.
std::vector<std::pair<Coord, Coord>> broadcast_tree(const GridShape& region, Coord root);

/// Middle processor; trees rooted there reach every cell within about half
/// the region's perimeter.
Coord center(const GridShape& region);

// Choreography building blocks; they append sends to an existing schedule.

// The plain forms start each send once everything that reached the sender
// has arrived. The timed forms take the step at which the operand is
// available instead and report when results land, so independent
// collectives can overlap.

struct TimedWord {
  Word value = 0;
  std::uint64_t step = 0;
};

/// Spreads the word held by region.origin to every processor of `region`.
void broadcast_on(Schedule& sched, const GridShape& region, Word value);
/// Timed form rooted at `root`; returns the arrival step per processor, row-major.
std::vector<std::uint64_t> broadcast_on(Schedule& sched, const GridShape& region, Coord root, Word value,
                                        std::uint64_t ready);

/// Combines value(c) over the region; the result ends at region.origin.
Word reduce_on(Schedule& sched, const GridShape& region, const CombineOp& op,
               const std::function<Word(Coord)>& value);
TimedWord reduce_on(Schedule& sched, const GridShape& region, Coord root, const CombineOp& op,
                    const std::function<Word(Coord)>& value, const std::function<std::uint64_t(Coord)>& ready);

/// 1D tree along an arbitrary list of processors, rooted at path[0].
void broadcast_path(Schedule& sched, const std::vector<Coord>& path, Word value);
std::vector<std::uint64_t> broadcast_path(Schedule& sched, const std::vector<Coord>& path, Word value,
                                         std::uint64_t ready);
Word reduce_path(Schedule& sched, const std::vector<Coord>& path, const CombineOp& op,
                 const std::vector<Word>& values);
TimedWord reduce_path(Schedule& sched, const std::vector<Coord>& path, const CombineOp& op,
                      const std::vector<Word>& values, const std::vector<std::uint64_t>& ready);

/// In-place inclusive scan of `values`, stored in Z-order on the side x side
/// square at `origin`.
void scan_on(Schedule& sched, Coord origin, std::uint64_t side, const CombineOp& op,
             std::vector<Word>& values);

/// Segmented variant; each transfer carries (flag, value) as two words.
void segmented_scan_on(Schedule& sched, Coord origin, std::uint64_t side, const CombineOp& op,
                       std::vector<SegmentedValue>& values);

// Standalone runs. Inputs and outputs of broadcast/reduce are row-major over
// `shape`; scans use Z-order on the square of side sqrt(n).

AlgorithmResult<std::vector<Word>> broadcast(Word value, const GridShape& shape,
                                             const RunOptions& opts = {});
AlgorithmResult<Word> reduce(const CombineOp& op, const std::vector<Word>& values,
                             const GridShape& shape, const RunOptions& opts = {});
AlgorithmResult<std::vector<Word>> all_reduce(const CombineOp& op, const std::vector<Word>& values,
                                              const GridShape& shape, const RunOptions& opts = {});
/// Pads with op.identity up to the next power of 4.
AlgorithmResult<std::vector<Word>> scan(const CombineOp& op, const std::vector<Word>& values,
                                        const RunOptions& opts = {});
AlgorithmResult<std::vector<SegmentedValue>> segmented_scan(const CombineOp& op,
                                                            std::vector<SegmentedValue> values,
                                                            const RunOptions& opts = {});

/// Number of up-sweep tree values hosted by the busiest processor of a
/// Z-order scan over n = 4^k cells, including its own leaf.
std::uint64_t scan_max_values_per_processor(std::uint64_t n);

}  // namespace spatial
