#include <algorithm>
#include <stdexcept>
#include <unordered_map>

#include "detail.hpp"
#include "pram_detail.hpp"
#include "spatial/collectives.hpp"
#include "spatial/layout.hpp"
#include "spatial/sort.hpp"

namespace spatial {

namespace {

using namespace pram_detail;

// Sort keys: cell in bits 48..63, pid in 32..47, payload in 0..31. Processors
// without a request use the cell id kNone and sort behind every real one.
constexpr Word kNone = 0xFFFF;

Word tuple(Word cell, Word pid, PramWord value = 0) { return cell << 48 | pid << 32 | value; }
Word cell_of(Word key) { return key >> 48; }
Word pid_of(Word key) { return (key >> 32) & 0xFFFF; }

class Machine {
 public:
  Machine(const PramProgram& prog, Schedule& sched)
      : prog_(prog), sched_(sched), side_(ceil_pow2(isqrt(prog.p - 1) + 1)) {
    st_.memory = prog.memory;
    st_.memory.resize(prog.m, 0);
    st_.registers.assign(prog.p * kPramRegisters, 0);
  }

  GridShape shape() const {
    const std::uint64_t width = isqrt(prog_.m - 1) + 1, rows = (prog_.m + width - 1) / width;
    return {std::int64_t(std::max(side_, rows)), std::int64_t(side_ + 1 + width), {}};
  }
  PramState& state() { return st_; }

  void run(PramMode mode) {
    for (const auto& step : prog_.steps) {
      if (mode == PramMode::Erew)
        erew_step(step);
      else
        crcw_step(step);
      ++st_.steps;
    }
  }

 private:
  std::uint64_t cells() const { return side_ * side_; }
  Coord proc(std::uint64_t pid) const { return zorder_coord(pid, side_); }
  Coord mem(std::uint64_t cell) const { return pram_cell(cell, prog_.p, prog_.m); }
  Coord rm(std::uint64_t r) const { return rowmajor_coord(r, side_, side_); }
  PramWord* regs(std::uint64_t pid) { return st_.registers.data() + pid * kPramRegisters; }

  void to_memory(const std::vector<Transfer>& round) {
    send_round(sched_, round);
    st_.memory_messages += round.size();
  }

  void compute(const PramStep& step) {
    for (std::uint64_t pid = step.active_lo; pid < active_end(step, prog_.p); ++pid) run_compute(step, pid, regs(pid));
  }

  // Cell per (pid, slot) from the registers of the step start; kNone when idle.
  std::vector<Word> addresses(const PramStep& step, const std::vector<PramAccess>& list) {
    std::vector<Word> cell(cells() * list.size(), kNone);
    for (std::uint64_t pid = step.active_lo; pid < active_end(step, prog_.p); ++pid)
      for (std::size_t k = 0; k < list.size(); ++k)
        cell[pid * list.size() + k] = resolve(list[k].addr, pid, regs(pid), prog_.m);
    return cell;
  }

  void erew_step(const PramStep& step) {
    const std::size_t nr = step.reads.size();
    const auto read_cells = addresses(step, step.reads);
    std::unordered_map<Word, std::uint64_t> owner;
    auto claim = [&](Word cell, std::uint64_t pid) {
      auto [it, fresh] = owner.emplace(cell, pid);
      if (!fresh && it->second != pid)
        throw PramError("EREW violation: processors " + std::to_string(it->second) + " and " + std::to_string(pid) +
                        " access cell " + std::to_string(cell) + " in one sub-step");
    };

    std::vector<Transfer> ask, answer;
    std::vector<std::pair<std::uint64_t, PramWord>> loaded;
    for (std::uint64_t pid = 0; pid < prog_.p; ++pid)
      for (std::size_t k = 0; k < nr; ++k) {
        const Word cell = read_cells[pid * nr + k];
        if (cell == kNone) continue;
        claim(cell, pid);
        ask.push_back({proc(pid), mem(cell), pid << 32 | cell});
        answer.push_back({mem(cell), proc(pid), st_.memory[cell]});
        loaded.push_back({pid * kPramRegisters + std::uint64_t(step.reads[k].reg), st_.memory[cell]});
      }
    to_memory(ask);
    send_round(sched_, answer);
    for (const auto& [slot, v] : loaded) st_.registers[slot] = v;

    compute(step);

    owner.clear();
    const auto write_cells = addresses(step, step.writes);
    std::vector<Transfer> store;
    std::vector<Word> stored;
    for (std::uint64_t pid = 0; pid < prog_.p; ++pid)
      for (std::size_t k = 0; k < step.writes.size(); ++k) {
        const Word cell = write_cells[pid * step.writes.size() + k];
        if (cell == kNone) continue;
        claim(cell, pid);
        store.push_back({proc(pid), mem(cell), regs(pid)[step.writes[k].reg]});
        stored.push_back(cell);
      }
    to_memory(store);
    for (std::size_t i = 0; i < store.size(); ++i) st_.memory[stored[i]] = PramWord(store[i].payload);
  }

  // Row-major keys of the processor square, one tuple per processor.
  std::vector<Word> tuples(const std::vector<Word>& cell, std::size_t stride, std::size_t k,
                           const PramAccess* write) {
    std::vector<Word> keys(cells());
    for (std::uint64_t r = 0; r < cells(); ++r) {
      const std::uint64_t pid = zorder_rank(rm(r), side_);
      const Word c = pid < prog_.p ? cell[pid * stride + k] : kNone;
      const PramWord v = write && c != kNone ? regs(pid)[write->reg] : 0;
      keys[r] = tuple(c, pid, v);
    }
    return keys;
  }

  void crcw_step(const PramStep& step) {
    const std::size_t nr = step.reads.size();
    const auto read_cells = addresses(step, step.reads);
    std::vector<std::pair<std::uint64_t, PramWord>> loaded;
    for (std::size_t k = 0; k < nr; ++k) {
      bool any = false;
      for (std::uint64_t pid = 0; pid < prog_.p; ++pid) any |= read_cells[pid * nr + k] != kNone;
      if (!any) continue;
      auto keys = tuples(read_cells, nr, k, nullptr);
      for (const auto& [pid, v] : concurrent_read(keys))
        loaded.push_back({pid * kPramRegisters + std::uint64_t(step.reads[k].reg), v});
    }
    for (const auto& [slot, v] : loaded) st_.registers[slot] = v;

    compute(step);

    const auto write_cells = addresses(step, step.writes);
    for (std::size_t k = 0; k < step.writes.size(); ++k) {
      bool any = false;
      for (std::uint64_t pid = 0; pid < prog_.p; ++pid) any |= write_cells[pid * step.writes.size() + k] != kNone;
      if (!any) continue;
      auto keys = tuples(write_cells, step.writes.size(), k, &step.writes[k]);
      concurrent_write(keys);
    }
  }

  // Returns (pid, value) for every processor with a request.
  std::vector<std::pair<std::uint64_t, PramWord>> concurrent_read(std::vector<Word>& keys) {
    const GridShape square{std::int64_t(side_), std::int64_t(side_), {}};
    const std::uint64_t n = cells();
    mergesort_on(sched_, square, keys);

    // Sorted rank r moves to Z-order slot r so the scan can run over it.
    std::vector<Transfer> round;
    for (std::uint64_t r = 0; r < n; ++r)
      if (rm(r) != proc(r)) round.push_back({rm(r), proc(r), keys[r]});
    send_round(sched_, round);

    // Each rank learns its predecessor's cell; the first of a run fetches.
    round.clear();
    for (std::uint64_t r = 1; r < n; ++r) round.push_back({proc(r - 1), proc(r), keys[r - 1]});
    send_round(sched_, round);
    std::vector<SegmentedValue> seg(n);
    std::vector<Transfer> ask, answer;
    for (std::uint64_t r = 0; r < n; ++r) {
      const Word c = cell_of(keys[r]);
      seg[r].segment_start = r == 0 || cell_of(keys[r - 1]) != c;
      if (!seg[r].segment_start || c == kNone) continue;
      seg[r].value = st_.memory[c];
      ask.push_back({proc(r), mem(c), keys[r]});
      answer.push_back({mem(c), proc(r), seg[r].value});
    }
    to_memory(ask);
    send_round(sched_, answer);
    segmented_scan_on(sched_, {0, 0}, side_, CombineOp::plus(), seg);

    // Back to the requesters: sort by pid, then step from row-major to Z-order.
    std::vector<Word> back(n);
    for (std::uint64_t r = 0; r < n; ++r)
      back[rowmajor_rank(proc(r), side_, side_)] = pid_of(keys[r]) << 32 | PramWord(seg[r].value);
    std::vector<bool> wants(n, false);
    for (std::uint64_t r = 0; r < n; ++r) wants[pid_of(keys[r])] = cell_of(keys[r]) != kNone;
    mergesort_on(sched_, square, back);

    std::vector<std::pair<std::uint64_t, PramWord>> out;
    round.clear();
    for (std::uint64_t q = 0; q < n; ++q) {
      if (back[q] >> 32 != q) throw std::logic_error("pid sort out of order");
      if (!wants[q]) continue;
      if (rm(q) != proc(q)) round.push_back({rm(q), proc(q), back[q]});
      out.push_back({q, PramWord(back[q])});
    }
    send_round(sched_, round);
    return out;
  }

  void concurrent_write(std::vector<Word>& keys) {
    const GridShape square{std::int64_t(side_), std::int64_t(side_), {}};
    mergesort_on(sched_, square, keys);
    std::vector<Transfer> round;
    for (std::uint64_t r = 1; r < cells(); ++r) round.push_back({rm(r - 1), rm(r), keys[r - 1]});
    send_round(sched_, round);
    // The lowest pid of every run of equal cells stores.
    round.clear();
    for (std::uint64_t r = 0; r < cells(); ++r) {
      const Word c = cell_of(keys[r]);
      if (c == kNone || (r > 0 && cell_of(keys[r - 1]) == c)) continue;
      round.push_back({rm(r), mem(c), keys[r]});
      st_.memory[c] = PramWord(keys[r]);
    }
    to_memory(round);
  }

  const PramProgram& prog_;
  Schedule& sched_;
  std::uint64_t side_;
  PramState st_;
};

AlgorithmResult<PramState> simulate(const PramProgram& prog, PramMode mode, const RunOptions& opts) {
  check_program(prog);
  Schedule sched(opts.limits, opts.record_trace);
  Machine machine(prog, sched);
  machine.run(mode);
  return detail::finish(std::move(machine.state()), sched, machine.shape(), opts);
}

}  // namespace

AlgorithmResult<PramState> simulate_erew(const PramProgram& prog, const RunOptions& opts) {
  return simulate(prog, PramMode::Erew, opts);
}

AlgorithmResult<PramState> simulate_crcw(const PramProgram& prog, const RunOptions& opts) {
  return simulate(prog, PramMode::PriorityCrcw, opts);
}

}  // namespace spatial
