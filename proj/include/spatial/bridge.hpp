#pragma once

// PRAM programs on the spatial computer, and coarsening of traces onto
// machines with fewer, larger processors.
//
// A PRAM program is a step script. Every step names a range of active
// processors and templates for their reads, register arithmetic and write;
// the templates are instantiated per processor through its index and
// registers. Within a step all reads observe memory as it was when the step
// began, then every processor computes, then the writes land.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "spatial/core.hpp"

namespace spatial {

using PramWord = std::uint32_t;  // arithmetic wraps mod 2^32

constexpr std::size_t kPramRegisters = 8;
constexpr std::size_t kPramMaxReads = 4;   // per processor per step
constexpr std::size_t kPramMaxWrites = 1;  // per processor per step
constexpr std::uint64_t kPramMaxProcessors = 1 << 16;
constexpr std::uint64_t kPramMaxCells = (1 << 16) - 1;

/// Cell = base + pid_scale * pid (+ r[reg] when reg >= 0). With `wrap` the
/// sum is reduced mod m; otherwise it must land in [0, m).
struct PramAddress {
  std::int64_t base = 0;
  std::int64_t pid_scale = 0;
  int reg = -1;
  bool wrap = false;
};

struct PramAccess {
  int reg = 0;  // destination of a read, source of a write
  PramAddress addr;
};

enum class PramOp { Mov, Movi, Addi, Add, Sub, Mul, Min, Max, And, Or, Xor, Pid };

/// dst = a op b (register operands); Movi and Addi use imm, Pid loads the
/// processor index.
struct PramInstr {
  PramOp op = PramOp::Mov;
  int dst = 0;
  int a = 0;
  int b = 0;
  PramWord imm = 0;
};

struct PramStep {
  std::uint64_t active_lo = 0;
  std::uint64_t active_hi = UINT64_MAX;  // clamped to p
  std::vector<PramAccess> reads;
  std::vector<PramInstr> compute;
  std::vector<PramAccess> writes;
};

struct PramProgram {
  std::uint64_t p = 1;
  std::uint64_t m = 1;
  std::vector<PramWord> memory;  // initial contents, zero-extended to m
  std::vector<PramStep> steps;
};

class PramError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws PramError for out-of-range sizes, registers or request counts.
void check_program(const PramProgram& prog);

/// JSON step script:
///   {"p": 16, "m": 16, "memory": [..],
///    "steps": [{"active": [lo, hi],
///               "read":    [{"reg": 1, "addr": {"base": -1, "pid": 1, "reg": 0, "wrap": false}}],
///               "compute": [{"op": "add", "dst": 0, "a": 0, "b": 1}, {"op": "movi", "dst": 2, "imm": 5}],
///               "write":   [{"reg": 0, "addr": {"pid": 1}}]}]}
/// Every field except p, m and steps is optional. Ops: mov movi addi add sub
/// mul min max and or xor pid.
PramProgram parse_pram_json(const std::string& text);
PramProgram read_pram_json(std::istream& in);
std::string to_json(const PramProgram& prog);

enum class PramMode { Erew, PriorityCrcw };

struct PramState {
  std::vector<PramWord> memory;
  std::vector<PramWord> registers;  // p x kPramRegisters, row per processor
  std::uint64_t steps = 0;          // T_p
  std::uint64_t memory_messages = 0;  // messages delivered to memory cells (simulations only)

  bool operator==(const PramState& o) const {
    return memory == o.memory && registers == o.registers && steps == o.steps;
  }
};

/// Sequential reference. EREW mode throws PramError when two processors read
/// one cell, or two processors write one cell, in the same step. Priority
/// CRCW resolves write conflicts in favour of the lowest processor index.
PramState interpret(const PramProgram& prog, PramMode mode);

/// Processors sit in Z-order on the smallest power-of-2 square holding p;
/// memory is row-major on a ceil(sqrt m) square one column to its right.
/// Every request travels to its cell, and every read is answered directly.
AlgorithmResult<PramState> simulate_erew(const PramProgram& prog, const RunOptions& opts = {});

/// Concurrent access through sorting. Per read slot: sort the (cell, pid)
/// tuples, mark the first of every run of equal cells, let those fetch the
/// cell, segmented-broadcast the value along the run and sort by pid to bring
/// it home. Writes sort the same way and only the first of every run stores.
AlgorithmResult<PramState> simulate_crcw(const PramProgram& prog, const RunOptions& opts = {});

/// Random step script over p processors and m cells. Erew scripts are
/// conflict-free by construction: every access slot of a step covers its own
/// contiguous band of cells, indexed by pid or reversed pid. PriorityCrcw
/// scripts mix constant, strided and register-dependent addresses.
PramProgram random_pram_program(std::uint64_t seed, PramMode mode, std::uint64_t p, std::uint64_t m,
                                std::size_t steps);

/// Coordinates of PRAM processor `pid` and memory cell `cell` in the layout above.
Coord pram_processor(std::uint64_t pid, std::uint64_t p);
Coord pram_cell(std::uint64_t cell, std::uint64_t p, std::uint64_t m);

// S-fat coarsening -------------------------------------------------------------

struct SfatConfig {
  std::uint64_t S = ModelLimits{}.local_memory_words;  // words per fat processor
  std::uint64_t c = ModelLimits{}.local_memory_words;  // words per original processor

  /// Block side floor(sqrt(S / c)).
  std::uint64_t block() const;
};

/// Re-costs a trace as if each b x b block of processors were one processor:
/// (i, j) maps to (floor(i/b), floor(j/b)), messages inside a block cost
/// nothing. Depth and message count are unchanged; energy and wire-depth are
/// recomputed over the original dependencies.
CostLedger coarsen_sfat(const Trace& trace, const SfatConfig& cfg);

}  // namespace spatial
