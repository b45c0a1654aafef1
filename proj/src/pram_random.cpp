#include <algorithm>
#include <random>

#include "spatial/bridge.hpp"

namespace spatial {

namespace {

class Generator {
 public:
  Generator(std::uint64_t seed, std::uint64_t p, std::uint64_t m) : gen_(seed), p_(p), m_(m) {}

  std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(gen_); }
  int reg() { return int(below(kPramRegisters)); }

  std::vector<PramInstr> compute() {
    static constexpr PramOp kOps[] = {PramOp::Mov, PramOp::Movi, PramOp::Addi, PramOp::Add, PramOp::Sub, PramOp::Mul,
                                      PramOp::Min, PramOp::Max,  PramOp::And,  PramOp::Or,  PramOp::Xor, PramOp::Pid};
    std::vector<PramInstr> out(below(4));
    for (auto& in : out) in = {kOps[below(std::size(kOps))], reg(), reg(), reg(), PramWord(below(1000))};
    return out;
  }

  // `slots` exclusive accesses for pids [lo, lo + w): each slot owns a band
  // of w consecutive cells.
  std::vector<PramAccess> exclusive(std::size_t slots, std::uint64_t lo, std::uint64_t w) {
    slots = std::min<std::size_t>(slots, m_ / w);
    std::vector<std::uint64_t> band(slots);
    for (std::size_t k = 0; k < slots; ++k) band[k] = k;
    std::shuffle(band.begin(), band.end(), gen_);
    const std::uint64_t shift = below(m_ - slots * w + 1);
    std::vector<PramAccess> out;
    for (std::size_t k = 0; k < slots; ++k) {
      const auto start = std::int64_t(shift + band[k] * w);
      PramAddress a;
      if (below(2)) {
        a.base = start - std::int64_t(lo);
        a.pid_scale = 1;
      } else {
        a.base = start + std::int64_t(lo + w - 1);
        a.pid_scale = -1;
      }
      out.push_back({reg(), a});
    }
    return out;
  }

  std::vector<PramAccess> concurrent(std::size_t slots) {
    std::vector<PramAccess> out;
    for (std::size_t k = 0; k < slots; ++k) {
      PramAddress a;
      a.base = std::int64_t(below(m_));
      a.wrap = true;
      switch (below(3)) {
        case 0: break;  // every processor on one cell
        case 1: a.pid_scale = std::int64_t(below(5)) - 2; break;
        default: a.reg = reg(); break;
      }
      out.push_back({reg(), a});
    }
    return out;
  }

  PramProgram program(PramMode mode, std::size_t steps) {
    PramProgram prog;
    prog.p = p_;
    prog.m = m_;
    prog.memory.resize(m_);
    for (auto& w : prog.memory) w = PramWord(below(1u << 20));
    for (std::size_t t = 0; t < steps; ++t) {
      PramStep s;
      const std::uint64_t width = 1 + below(std::min(p_, m_));
      s.active_lo = below(p_ - std::min(width, p_) + 1);
      s.active_hi = s.active_lo + width;
      if (mode == PramMode::Erew) {
        s.reads = exclusive(below(kPramMaxReads + 1), s.active_lo, width);
        s.writes = exclusive(below(kPramMaxWrites + 1), s.active_lo, width);
      } else {
        s.reads = concurrent(below(kPramMaxReads + 1));
        s.writes = concurrent(below(kPramMaxWrites + 1));
      }
      s.compute = compute();
      prog.steps.push_back(std::move(s));
    }
    return prog;
  }

 private:
  std::mt19937_64 gen_;
  std::uint64_t p_, m_;
};

}  // namespace

PramProgram random_pram_program(std::uint64_t seed, PramMode mode, std::uint64_t p, std::uint64_t m,
                                std::size_t steps) {
  if (p < 1 || m < 1) throw PramError("random program needs p, m >= 1");
  return Generator(seed, p, m).program(mode, steps);
}

}  // namespace spatial
