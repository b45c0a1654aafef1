#pragma once

#include <stdexcept>
#include <utility>

#include "spatial/core.hpp"
#include "spatial/sort.hpp"

namespace spatial::detail {

template <class V>
AlgorithmResult<V> finish(V values, const Schedule& sched, const GridShape& shape, const RunOptions& opts) {
  AlgorithmResult<V> r{std::move(values), sched.ledger(), std::nullopt};
  if (opts.record_trace) r.trace = sched.trace(shape, opts.seed);
  return r;
}

inline void check_tags(const std::vector<KeyedElement>& v) {
  for (const auto& e : v)
    if (e.tag >= kSentinelTagBase) throw std::invalid_argument("element tags must be below 2^31");
}

}  // namespace spatial::detail
