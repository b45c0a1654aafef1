#pragma once

// Spatial computer core: grid coordinates, the message trace, cost auditing,
// model-constraint validation and the two execution engines (a choreography
// scheduler and a per-processor virtual machine).

#include <compare>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace spatial {

using Word = std::uint64_t;

struct Coord {
  std::int32_t row = 0;
  std::int32_t col = 0;

  constexpr auto operator<=>(const Coord&) const = default;
};

constexpr Coord operator+(Coord a, Coord b) { return {a.row + b.row, a.col + b.col}; }

inline std::uint64_t coord_key(Coord c) {
  return (std::uint64_t(std::uint32_t(c.row)) << 32) | std::uint32_t(c.col);
}

/// Message cost between two processors: |dr| + |dc|.
constexpr std::uint64_t manhattan(Coord a, Coord b) {
  auto d = [](std::int64_t x, std::int64_t y) { return std::uint64_t(x > y ? x - y : y - x); };
  return d(a.row, b.row) + d(a.col, b.col);
}

/// Rectangular h x w subgrid anchored at `origin`.
struct GridShape {
  std::int64_t h = 1;
  std::int64_t w = 1;
  Coord origin{};

  std::int64_t cells() const { return h * w; }
  bool contains(Coord c) const {
    return c.row >= origin.row && c.col >= origin.col && c.row < origin.row + h &&
           c.col < origin.col + w;
  }
  Coord at(std::int64_t r, std::int64_t c) const {
    return {origin.row + std::int32_t(r), origin.col + std::int32_t(c)};
  }
  bool operator==(const GridShape&) const = default;
};

struct MessageEvent {
  Coord src;
  Coord dst;
  std::uint64_t send_step = 0;
  std::uint64_t arrival_step = 1;
  Word payload = 0;
  std::uint64_t cost = 0;
  std::uint64_t depth = 1;
  std::uint64_t wire = 0;

  bool operator==(const MessageEvent&) const = default;
};

struct ModelLimits {
  std::uint32_t queue_capacity = 4;
  std::uint32_t local_memory_words = 32;
  std::uint32_t sends_per_step = 1;
  bool strict = false;
  std::uint64_t max_steps = std::uint64_t(1) << 32;
  // Randomize dequeue order (VM only), driven by the run seed.
  bool fuzz_dequeue = false;

  bool operator==(const ModelLimits&) const = default;
};

struct CostLedger {
  std::uint64_t energy = 0;
  std::uint64_t depth = 0;
  std::uint64_t wire_depth = 0;
  std::uint64_t messages = 0;
  std::uint64_t steps = 0;

  bool operator==(const CostLedger&) const = default;
};

/// Sequential composition: energies add, depths add (upper bound).
CostLedger operator+(const CostLedger& a, const CostLedger& b);

struct Trace {
  std::vector<MessageEvent> events;  // sorted by send_step
  std::uint64_t steps = 0;
  std::vector<Coord> touched;  // sorted, unique
  GridShape shape{};
  std::uint64_t seed = 0;
  ModelLimits limits{};
  std::vector<std::string> warnings;

  bool operator==(const Trace&) const = default;
};

/// Thrown for violations of the model in strict mode and for corrupted traces.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Recomputes E, D and Dw from the trace by a time-ordered sweep and checks the
/// stored labels against the recomputation. Throws ModelError on mismatch.
CostLedger audit(const Trace& trace);

enum class ViolationKind { SendsPerStep, QueueOverflow, ArrivalTime, CostMismatch };

struct Violation {
  ViolationKind kind;
  std::uint64_t step;
  Coord where;
  std::uint64_t count;
};

struct ViolationReport {
  std::vector<Violation> violations;
  bool empty() const { return violations.empty(); }
  std::size_t size() const { return violations.size(); }
};

ViolationReport validate(const Trace& trace, const ModelLimits& limits);

std::string to_string(ViolationKind kind);

/// Deterministic per-processor random word: a function of (seed, coord, counter).
Word rng_word(std::uint64_t seed, Coord coord, std::uint64_t counter);

class ProcessorRng {
 public:
  ProcessorRng(std::uint64_t seed, Coord coord) : seed_(seed), coord_(coord) {}
  Word next() { return rng_word(seed_, coord_, counter_++); }
  // Uniform in [0, 1).
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }
  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t seed_;
  Coord coord_;
  std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// Choreography engine
// ---------------------------------------------------------------------------

/// Central message scheduler. A send is placed at the earliest step that
///  - is no earlier than the caller's `not_before`,
///  - keeps the sender within `sends_per_step` and its sends in step order,
///  - keeps the receiver within `queue_capacity` arrivals for that step,
///  - arrives after the receiver's last send, so labels can be fixed online.
/// Processors are materialized lazily. Labels and the ledger are maintained
/// incrementally; full event recording is optional.
class Schedule {
 public:
  explicit Schedule(ModelLimits limits = {}, bool record = false);

  /// Sends one word once everything already delivered to `src` has landed.
  /// Returns the arrival step. Self-sends are free no-ops.
  std::uint64_t send(Coord src, Coord dst, Word payload) {
    return send_at(src, dst, payload, ready(src));
  }
  /// Sends one word no earlier than `not_before`; the caller vouches that the
  /// payload is available at `src` by then. Returns the arrival step.
  std::uint64_t send_at(Coord src, Coord dst, Word payload, std::uint64_t not_before);

  /// Latest arrival step of any message delivered to `c` so far.
  std::uint64_t ready(Coord c) const;

  const CostLedger& ledger() const { return ledger_; }
  const ModelLimits& limits() const { return limits_; }
  bool recording() const { return record_; }

  /// Finalizes the recorded events into an immutable trace.
  Trace trace(GridShape shape = {}, std::uint64_t seed = 0) const;

 private:
  struct Arrival {
    std::uint64_t step;
    std::uint32_t count;
    std::uint64_t depth;
    std::uint64_t wire;
  };
  struct Proc {
    std::int64_t last_send = -1;
    std::uint32_t sends_at_last = 0;
    std::uint64_t latest = 0;
    std::uint64_t depth = 0;  // labels of arrivals at or before last_send
    std::uint64_t wire = 0;
    std::vector<Arrival> arrivals;  // after last_send, sorted by step
  };

  Proc& proc(Coord c);
  static std::uint32_t arrivals_at(const Proc& p, std::uint64_t step);
  static void fold(Proc& p, std::uint64_t step);

  ModelLimits limits_;
  bool record_;
  std::unordered_map<std::uint64_t, Proc> procs_;
  std::vector<MessageEvent> events_;
  CostLedger ledger_;
};

// ---------------------------------------------------------------------------
// Per-processor virtual machine
// ---------------------------------------------------------------------------

class ProcessorContext {
 public:
  Coord self() const { return self_; }
  std::uint64_t step() const { return step_; }
  const std::optional<Word>& message() const { return message_; }

  /// Local memory word `i`; exceeding the budget is an error in strict mode.
  Word& mem(std::size_t i);
  Word random() { return rng_->next(); }
  void send(Coord dst, Word payload);
  /// Requests another activation next step even with an empty queue.
  void stay_awake() { awake_ = true; }

 private:
  friend class VirtualMachine;
  Coord self_{};
  std::uint64_t step_ = 0;
  std::optional<Word> message_;
  std::vector<Word>* memory_ = nullptr;
  ProcessorRng* rng_ = nullptr;
  const ModelLimits* limits_ = nullptr;
  std::vector<std::string>* warnings_ = nullptr;
  std::vector<std::pair<Coord, Word>> outbox_;
  bool awake_ = false;
};

using ProcessorProgram = std::function<void(ProcessorContext&)>;

/// Executes `program` on every processor of `shape` in synchronous steps until
/// quiescence. `inputs` (row-major over `shape`) is placed in memory word 0.
Trace run(const ProcessorProgram& program, const GridShape& shape, std::span<const Word> inputs,
          std::uint64_t seed, const ModelLimits& limits = {});

/// Result of a full VM run including the final local memories.
struct VmRun {
  Trace trace;
  std::unordered_map<std::uint64_t, std::vector<Word>> memory;  // keyed by coord_key
};

VmRun run_with_memory(const ProcessorProgram& program, const GridShape& shape,
                      std::span<const Word> inputs, std::uint64_t seed,
                      const ModelLimits& limits = {});

// ---------------------------------------------------------------------------
// Trace export
// ---------------------------------------------------------------------------

void write_trace_jsonl(std::ostream& out, const Trace& trace);
Trace read_trace_jsonl(std::istream& in);

/// Output values plus the cost of the run that produced them.
template <class Values>
struct AlgorithmResult {
  Values values;
  CostLedger ledger;
  std::optional<Trace> trace;
};

struct RunOptions {
  ModelLimits limits{};
  bool record_trace = false;
  std::uint64_t seed = 0;
};

}  // namespace spatial
