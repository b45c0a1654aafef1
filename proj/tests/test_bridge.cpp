#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "spatial/bridge.hpp"
#include "spatial/collectives.hpp"
#include "spatial/layout.hpp"

using namespace spatial;

namespace {

PramAddress at_pid(std::int64_t base = 0) { return {base, 1, -1, false}; }
PramAddress fixed(std::int64_t cell) { return {cell, 0, -1, false}; }

RunOptions traced() {
  RunOptions o;
  o.record_trace = true;
  return o;
}

// Pointer-doubling prefix sum: r0 keeps the running sum of processor i.
PramProgram prefix_sum(std::uint64_t n) {
  PramProgram prog;
  prog.p = prog.m = n;
  for (std::uint64_t i = 0; i < n; ++i) prog.memory.push_back(PramWord(i * 7 % 11 + 1));
  PramStep load;
  load.reads = {{0, at_pid()}};
  prog.steps.push_back(load);
  for (std::uint64_t d = 1; d < n; d *= 2) {
    PramStep s;
    s.active_lo = d;
    s.reads = {{1, at_pid(-std::int64_t(d))}};
    s.compute = {{PramOp::Add, 0, 0, 1, 0}};
    s.writes = {{0, at_pid()}};
    prog.steps.push_back(s);
  }
  return prog;
}

std::uint64_t messages_into(const Trace& t, Coord c) {
  return std::uint64_t(std::count_if(t.events.begin(), t.events.end(), [&](const auto& e) { return e.dst == c; }));
}

}  // namespace

TEST_CASE("pram interpreter and EREW simulation") {
  PramProgram inc;
  inc.p = inc.m = 4;
  inc.memory = {5, 6, 7, 8};
  PramStep s;
  s.reads = {{0, at_pid()}};
  s.compute = {{PramOp::Addi, 0, 0, 0, 1}};
  s.writes = {{0, at_pid()}};
  inc.steps = {s};
  const auto direct = interpret(inc, PramMode::Erew);
  CHECK(direct.memory == std::vector<PramWord>{6, 7, 8, 9});
  auto sim = simulate_erew(inc, traced());
  CHECK(sim.values == direct);
  CHECK(sim.values.memory_messages == 8);
  CHECK(validate(*sim.trace, {}).empty());
  CHECK(audit(*sim.trace) == sim.ledger);

  const auto ps = prefix_sum(16);
  std::vector<PramWord> expect(16);
  std::partial_sum(ps.memory.begin(), ps.memory.end(), expect.begin());
  const auto sum = simulate_erew(ps);
  CHECK(sum.values.memory == expect);
  CHECK(sum.values == interpret(ps, PramMode::Erew));
  CHECK(sum.values.steps == 5);

  PramProgram clash;
  clash.p = 2;
  clash.m = 1;
  PramStep w;
  w.writes = {{0, fixed(0)}};
  clash.steps = {w};
  CHECK_THROWS_AS(interpret(clash, PramMode::Erew), PramError);
  CHECK_THROWS_AS(simulate_erew(clash), PramError);
  CHECK(interpret(clash, PramMode::PriorityCrcw).memory == std::vector<PramWord>{0});

  PramProgram far = inc;
  far.steps[0].reads[0].addr.base = 1;
  CHECK_THROWS_AS(interpret(far, PramMode::Erew), PramError);
}

TEST_CASE("pram layout") {
  CHECK(pram_processor(0, 16) == Coord{0, 0});
  CHECK(pram_processor(3, 16) == Coord{1, 1});
  CHECK(pram_processor(4, 5) == Coord{0, 2});
  CHECK(pram_cell(0, 16, 16) == Coord{0, 5});
  CHECK(pram_cell(5, 16, 10) == Coord{1, 6});
}

TEST_CASE("CRCW simulation") {
  PramProgram bcast;
  bcast.p = bcast.m = 16;
  bcast.memory = {42};
  PramStep r;
  r.reads = {{2, fixed(0)}};
  bcast.steps = {r};
  auto b = simulate_crcw(bcast, traced());
  for (std::uint64_t pid = 0; pid < 16; ++pid) CHECK(b.values.registers[pid * kPramRegisters + 2] == 42);
  CHECK(b.values.memory_messages == 1);
  CHECK(messages_into(*b.trace, pram_cell(0, 16, 16)) == 1);
  CHECK(b.values == interpret(bcast, PramMode::PriorityCrcw));
  CHECK(validate(*b.trace, {}).empty());
  CHECK(audit(*b.trace) == b.ledger);

  // Processors 3 and 7 both aim at cell 5 (2 + (pid & 3)); 4..6 elsewhere.
  PramProgram prio;
  prio.p = 8;
  prio.m = 8;
  PramStep w;
  w.active_lo = 3;
  w.compute = {{PramOp::Pid, 0, 0, 0, 0}, {PramOp::Movi, 1, 0, 0, 10}, {PramOp::Mul, 0, 0, 1, 0},
               {PramOp::Movi, 2, 0, 0, 3}, {PramOp::Pid, 3, 0, 0, 0},  {PramOp::And, 3, 3, 2, 0}};
  w.writes = {{0, {2, 0, 3, false}}};
  prio.steps = {w};
  const auto pw = simulate_crcw(prio);
  CHECK(pw.values.memory[5] == 30);
  CHECK(pw.values == interpret(prio, PramMode::PriorityCrcw));

  PramProgram idle;
  idle.p = idle.m = 16;
  PramStep c;
  c.compute = {{PramOp::Pid, 0, 0, 0, 0}};
  idle.steps = {c};
  const auto quiet = simulate_crcw(idle);
  CHECK(quiet.ledger.energy == 0);
  CHECK(quiet.values.registers[5 * kPramRegisters] == 5);

  PramProgram oob = bcast;
  oob.steps[0].reads[0].addr.base = 16;
  CHECK_THROWS_AS(simulate_crcw(oob), PramError);
}

TEST_CASE("random PRAM scripts") {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::uint64_t p = 1 + seed * 37 % 256, m = 1 + seed * 53 % 256;
    const auto erew = random_pram_program(seed, PramMode::Erew, p, m, 6);
    const auto e = simulate_erew(erew, traced());
    REQUIRE(e.values == interpret(erew, PramMode::Erew));
    CHECK(validate(*e.trace, {}).empty());
    const double scale = double(p) * (std::sqrt(double(p)) + std::sqrt(double(m))) * double(e.values.steps);
    worst = std::max(worst, double(e.ledger.energy) / scale);

    const auto crcw = random_pram_program(seed, PramMode::PriorityCrcw, p, m, 6);
    const auto c = simulate_crcw(crcw, traced());
    REQUIRE(c.values == interpret(crcw, PramMode::PriorityCrcw));
    CHECK(validate(*c.trace, {}).empty());
  }
  CHECK(worst <= 8.0);
}

TEST_CASE("PRAM scripts as JSON") {
  const auto prog = random_pram_program(3, PramMode::PriorityCrcw, 9, 13, 4);
  const auto back = parse_pram_json(to_json(prog));
  CHECK(interpret(back, PramMode::PriorityCrcw) == interpret(prog, PramMode::PriorityCrcw));

  std::istringstream in(R"({"p": 4, "m": 4, "memory": [1, 2, 3, 4],
    "steps": [{"read": [{"reg": 0, "addr": {"pid": 1}}],
               "compute": [{"op": "addi", "dst": 0, "a": 0, "imm": 10}],
               "write": [{"reg": 0, "addr": {"pid": 1}}]}]})");
  CHECK(interpret(read_pram_json(in), PramMode::Erew).memory == std::vector<PramWord>{11, 12, 13, 14});
  CHECK_THROWS_AS(parse_pram_json(R"({"p": 4, "m": 4, "steps": [{"compute": [{"op": "div", "dst": 0}]}]})"),
                  PramError);
  CHECK_THROWS_AS(parse_pram_json(R"({"p": 0, "m": 4, "steps": []})"), PramError);
  CHECK_THROWS_AS(parse_pram_json("{"), PramError);
}

TEST_CASE("S-fat coarsening") {
  std::vector<Word> v(64 * 64, 1);
  RunOptions o = traced();
  const auto scan_run = scan(CombineOp::plus(), v, o);
  const Trace& t = *scan_run.trace;
  CHECK(coarsen_sfat(t, {32, 32}) == audit(t));
  CHECK_THROWS(coarsen_sfat(t, {16, 32}));

  Trace one;
  one.events.push_back({{0, 0}, {0, 7}, 0, 1, 0, 7, 1, 7});
  one.steps = 1;
  CHECK(coarsen_sfat(one, {4 * 32, 32}).energy == 3);

  // Scan energy sits in messages shorter than a block, so it shrinks by about
  // b^2; 1/b is only an upper bound there. Wire-depth follows 1/b.
  const auto base = audit(t);
  std::uint64_t prev = base.energy;
  for (std::uint64_t ratio : {4, 16, 64}) {
    const auto coarse = coarsen_sfat(t, {ratio * 32, 32});
    const double b = std::sqrt(double(ratio));
    CHECK(coarse.depth == base.depth);
    CHECK(coarse.messages == base.messages);
    CHECK(coarse.energy <= prev);
    CHECK(double(coarse.energy) * b / double(base.energy) <= 2.0);
    CHECK(double(coarse.energy) * b * b / double(base.energy) >= 0.5);
    const double wire = double(coarse.wire_depth) * b / double(base.wire_depth);
    CHECK(wire >= 0.5);
    CHECK(wire <= 2.0);
    prev = coarse.energy;
  }

  // Reversal of an h x w grid keeps paying about (max^2 min) / b.
  PermutationPlan rev;
  rev.layout = LayoutKind::row_major(16, 32);
  for (std::uint64_t i = 0; i < 16 * 32; ++i) rev.target.push_back(16 * 32 - 1 - i);
  const Trace rt = route_permutation(rev, {16, 32, {}});
  for (std::uint64_t b : {1, 2, 4}) {
    const auto coarse = coarsen_sfat(rt, {b * b, 1});
    CHECK(double(coarse.energy) >= 32.0 * 32 * 16 / (9.0 * double(b)));
    CHECK(double(coarse.energy) * double(b) == doctest::Approx(double(audit(rt).energy)).epsilon(0.05));
  }
}
