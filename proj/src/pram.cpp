#include <algorithm>
#include <array>
#include <istream>
#include <iterator>
#include <unordered_map>

#include "json.hpp"
#include "pram_detail.hpp"
#include "spatial/bridge.hpp"
#include "spatial/layout.hpp"

namespace spatial {

namespace {

using nlohmann::json;

constexpr std::array<std::pair<PramOp, const char*>, 12> kOpNames{{
    {PramOp::Mov, "mov"}, {PramOp::Movi, "movi"}, {PramOp::Addi, "addi"}, {PramOp::Add, "add"},
    {PramOp::Sub, "sub"}, {PramOp::Mul, "mul"}, {PramOp::Min, "min"}, {PramOp::Max, "max"},
    {PramOp::And, "and"}, {PramOp::Or, "or"}, {PramOp::Xor, "xor"}, {PramOp::Pid, "pid"},
}};

const char* op_name(PramOp op) {
  for (const auto& [o, name] : kOpNames)
    if (o == op) return name;
  throw PramError("unknown op");
}

PramOp op_from(const std::string& s) {
  for (const auto& [o, name] : kOpNames)
    if (s == name) return o;
  throw PramError("unknown op '" + s + "'");
}

void check_reg(int r, bool optional) {
  if ((optional && r == -1) || (r >= 0 && r < int(kPramRegisters))) return;
  throw PramError("register index out of range: " + std::to_string(r));
}

PramAddress address_from(const json& j) {
  PramAddress a;
  a.base = j.value("base", std::int64_t(0));
  a.pid_scale = j.value("pid", std::int64_t(0));
  a.reg = j.value("reg", -1);
  a.wrap = j.value("wrap", false);
  return a;
}

json address_to(const PramAddress& a) {
  json j{{"base", a.base}, {"pid", a.pid_scale}};
  if (a.reg >= 0) j["reg"] = a.reg;
  if (a.wrap) j["wrap"] = true;
  return j;
}

std::vector<PramAccess> accesses_from(const json& j, const char* key) {
  std::vector<PramAccess> out;
  if (!j.contains(key)) return out;
  for (const auto& a : j.at(key)) out.push_back({a.at("reg").get<int>(), address_from(a.at("addr"))});
  return out;
}

PramWord apply(const PramInstr& in, const PramWord* r, std::uint64_t pid) {
  const PramWord a = r[in.a], b = r[in.b];
  switch (in.op) {
    case PramOp::Mov: return a;
    case PramOp::Movi: return in.imm;
    case PramOp::Addi: return a + in.imm;
    case PramOp::Add: return a + b;
    case PramOp::Sub: return a - b;
    case PramOp::Mul: return a * b;
    case PramOp::Min: return std::min(a, b);
    case PramOp::Max: return std::max(a, b);
    case PramOp::And: return a & b;
    case PramOp::Or: return a | b;
    case PramOp::Xor: return a ^ b;
    case PramOp::Pid: return PramWord(pid);
  }
  return 0;
}

}  // namespace

namespace pram_detail {

std::uint64_t resolve(const PramAddress& a, std::uint64_t pid, const PramWord* regs, std::uint64_t m) {
  std::int64_t v = a.base + a.pid_scale * std::int64_t(pid);
  if (a.reg >= 0) v += std::int64_t(regs[a.reg]);
  if (a.wrap) {
    v %= std::int64_t(m);
    if (v < 0) v += std::int64_t(m);
  }
  if (v < 0 || v >= std::int64_t(m))
    throw PramError("processor " + std::to_string(pid) + " addresses cell " + std::to_string(v) +
                    " outside [0, " + std::to_string(m) + ")");
  return std::uint64_t(v);
}

void run_compute(const PramStep& step, std::uint64_t pid, PramWord* regs) {
  for (const auto& in : step.compute) regs[in.dst] = apply(in, regs, pid);
}

std::uint64_t active_end(const PramStep& step, std::uint64_t p) { return std::min(step.active_hi, p); }

}  // namespace pram_detail

void check_program(const PramProgram& prog) {
  if (prog.p < 1 || prog.p > kPramMaxProcessors) throw PramError("p must lie in [1, 65536]");
  if (prog.m < 1 || prog.m > kPramMaxCells) throw PramError("m must lie in [1, 65535]");
  if (prog.memory.size() > prog.m) throw PramError("initial memory longer than m");
  for (const auto& s : prog.steps) {
    if (s.active_lo > s.active_hi) throw PramError("active range needs lo <= hi");
    if (s.reads.size() > kPramMaxReads) throw PramError("too many reads in one step");
    if (s.writes.size() > kPramMaxWrites) throw PramError("too many writes in one step");
    for (const auto* list : {&s.reads, &s.writes})
      for (const auto& a : *list) {
        check_reg(a.reg, false);
        check_reg(a.addr.reg, true);
      }
    for (const auto& in : s.compute) {
      check_reg(in.dst, false);
      check_reg(in.a, false);
      check_reg(in.b, false);
    }
  }
}

PramProgram parse_pram_json(const std::string& text) {
  PramProgram prog;
  try {
    const json j = json::parse(text);
    prog.p = j.at("p").get<std::uint64_t>();
    prog.m = j.at("m").get<std::uint64_t>();
    if (j.contains("memory")) prog.memory = j.at("memory").get<std::vector<PramWord>>();
    for (const auto& js : j.at("steps")) {
      PramStep s;
      if (js.contains("active")) {
        s.active_lo = js.at("active").at(0).get<std::uint64_t>();
        s.active_hi = js.at("active").at(1).get<std::uint64_t>();
      }
      s.reads = accesses_from(js, "read");
      s.writes = accesses_from(js, "write");
      if (js.contains("compute"))
        for (const auto& ji : js.at("compute")) {
          PramInstr in;
          in.op = op_from(ji.at("op").get<std::string>());
          in.dst = ji.at("dst").get<int>();
          in.a = ji.value("a", 0);
          in.b = ji.value("b", 0);
          in.imm = ji.value("imm", PramWord(0));
          s.compute.push_back(in);
        }
      prog.steps.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw PramError(std::string("bad PRAM script: ") + e.what());
  }
  check_program(prog);
  return prog;
}

PramProgram read_pram_json(std::istream& in) {
  return parse_pram_json(std::string(std::istreambuf_iterator<char>(in), {}));
}

std::string to_json(const PramProgram& prog) {
  json j{{"p", prog.p}, {"m", prog.m}, {"memory", prog.memory}, {"steps", json::array()}};
  for (const auto& s : prog.steps) {
    json js{{"active", {s.active_lo, std::min(s.active_hi, prog.p)}}};
    for (const auto& [key, list] : {std::pair{"read", &s.reads}, std::pair{"write", &s.writes}}) {
      js[key] = json::array();
      for (const auto& a : *list) js[key].push_back({{"reg", a.reg}, {"addr", address_to(a.addr)}});
    }
    js["compute"] = json::array();
    for (const auto& in : s.compute)
      js["compute"].push_back({{"op", op_name(in.op)}, {"dst", in.dst}, {"a", in.a}, {"b", in.b}, {"imm", in.imm}});
    j["steps"].push_back(std::move(js));
  }
  return j.dump();
}

PramState interpret(const PramProgram& prog, PramMode mode) {
  using namespace pram_detail;
  check_program(prog);
  const std::uint64_t p = prog.p, m = prog.m;
  PramState st;
  st.memory = prog.memory;
  st.memory.resize(m, 0);
  st.registers.assign(p * kPramRegisters, 0);
  auto regs = [&](std::uint64_t pid) { return st.registers.data() + pid * kPramRegisters; };

  for (const auto& step : prog.steps) {
    const std::uint64_t end = active_end(step, p);
    std::unordered_map<std::uint64_t, std::uint64_t> owner;  // cell -> pid, per sub-step
    auto claim = [&](std::uint64_t cell, std::uint64_t pid, const char* what) {
      auto [it, fresh] = owner.emplace(cell, pid);
      if (!fresh && it->second != pid)
        throw PramError(std::string("EREW violation: processors ") + std::to_string(it->second) + " and " +
                        std::to_string(pid) + " " + what + " cell " + std::to_string(cell));
    };

    // Reads see the memory of the step start; addresses use the registers
    // of the step start.
    std::vector<std::pair<std::uint64_t, PramWord>> loaded;  // (register slot, value)
    for (std::uint64_t pid = step.active_lo; pid < end; ++pid)
      for (const auto& r : step.reads) {
        const std::uint64_t cell = resolve(r.addr, pid, regs(pid), m);
        if (mode == PramMode::Erew) claim(cell, pid, "read");
        loaded.push_back({pid * kPramRegisters + std::uint64_t(r.reg), st.memory[cell]});
      }
    for (const auto& [slot, v] : loaded) st.registers[slot] = v;

    for (std::uint64_t pid = step.active_lo; pid < end; ++pid) run_compute(step, pid, regs(pid));

    owner.clear();
    std::unordered_map<std::uint64_t, PramWord> stores;
    for (std::uint64_t pid = step.active_lo; pid < end; ++pid)
      for (const auto& w : step.writes) {
        const std::uint64_t cell = resolve(w.addr, pid, regs(pid), m);
        if (mode == PramMode::Erew) claim(cell, pid, "write");
        stores.emplace(cell, regs(pid)[w.reg]);  // first (lowest pid) wins
      }
    for (const auto& [cell, v] : stores) st.memory[cell] = v;
    ++st.steps;
  }
  return st;
}

Coord pram_processor(std::uint64_t pid, std::uint64_t p) { return zorder_coord(pid, ceil_pow2(isqrt(p - 1) + 1)); }

Coord pram_cell(std::uint64_t cell, std::uint64_t p, std::uint64_t m) {
  const std::uint64_t side = ceil_pow2(isqrt(p - 1) + 1);
  const std::uint64_t width = isqrt(m - 1) + 1;
  return {std::int32_t(cell / width), std::int32_t(side + 1 + cell % width)};
}

}  // namespace spatial
