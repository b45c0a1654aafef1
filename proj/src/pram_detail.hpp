#pragma once

#include "spatial/bridge.hpp"

namespace spatial::pram_detail {

/// Cell addressed by `a` for processor `pid` holding `regs`.
std::uint64_t resolve(const PramAddress& a, std::uint64_t pid, const PramWord* regs, std::uint64_t m);
void run_compute(const PramStep& step, std::uint64_t pid, PramWord* regs);
std::uint64_t active_end(const PramStep& step, std::uint64_t p);

}  // namespace spatial::pram_detail
