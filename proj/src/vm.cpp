#include <algorithm>
#include <deque>
#include <map>

#include "spatial/core.hpp"

namespace spatial {

Word& ProcessorContext::mem(std::size_t i) {
  if (i >= limits_->local_memory_words) {
    if (limits_->strict)
      throw ModelError("local memory budget exceeded at step " + std::to_string(step_));
    if (warnings_->empty() || warnings_->back().rfind("memory", 0) != 0)
      warnings_->push_back("memory budget exceeded at step " + std::to_string(step_));
  }
  if (i >= memory_->size()) memory_->resize(i + 1, 0);
  return (*memory_)[i];
}

void ProcessorContext::send(Coord dst, Word payload) {
  if (outbox_.size() >= limits_->sends_per_step) {
    if (limits_->strict) throw ModelError("more than sends_per_step sends in one step");
    warnings_->push_back("sends_per_step exceeded at step " + std::to_string(step_));
  }
  outbox_.push_back({dst, payload});
}

class VirtualMachine {
 public:
  VirtualMachine(const ProcessorProgram& program, const GridShape& shape, std::uint64_t seed,
                 const ModelLimits& limits)
      : program_(program), shape_(shape), seed_(seed), limits_(limits), fuzz_(seed ^ 0x5bd1e995ULL, Coord{-1, -1}) {}

  VmRun execute(std::span<const Word> inputs) {
    if (!inputs.empty() && std::int64_t(inputs.size()) != shape_.cells())
      throw ModelError("inputs do not match the grid shape");
    for (std::int64_t r = 0; r < shape_.h; ++r)
      for (std::int64_t c = 0; c < shape_.w; ++c) {
        auto& p = node(shape_.at(r, c));
        p.memory.assign(1, inputs.empty() ? 0 : inputs[std::size_t(r * shape_.w + c)]);
        p.awake = true;
      }

    std::vector<MessageEvent> events;
    std::vector<std::string> warnings;
    struct Label {
      std::uint64_t depth = 0, wire = 0;
    };
    std::unordered_map<std::uint64_t, Label> received;

    for (std::uint64_t step = 0;; ++step) {
      std::vector<Coord> active;
      for (auto& [key, p] : nodes_)
        if (p.awake || !p.queue.empty()) active.push_back(p.coord);
      if (active.empty()) break;
      if (step >= limits_.max_steps) throw ModelError("VM exceeded max_steps without quiescing");
      std::sort(active.begin(), active.end());

      std::vector<MessageEvent> outgoing;
      for (Coord c : active) {
        auto& p = node(c);
        ProcessorContext ctx;
        ctx.self_ = c;
        ctx.step_ = step;
        ctx.memory_ = &p.memory;
        ctx.rng_ = &p.rng;
        ctx.limits_ = &limits_;
        ctx.warnings_ = &warnings;
        if (!p.queue.empty()) {
          std::size_t pick = 0;
          if (limits_.fuzz_dequeue) pick = fuzz_.next() % p.queue.size();
          ctx.message_ = p.queue[pick];
          p.queue.erase(p.queue.begin() + std::ptrdiff_t(pick));
        }
        program_(ctx);
        p.awake = ctx.awake_;
        const Label pred = received[coord_key(c)];
        for (auto& [dst, payload] : ctx.outbox_) {
          const std::uint64_t cost = manhattan(c, dst);
          outgoing.push_back({c, dst, step, step + 1, payload, cost, pred.depth + 1, pred.wire + cost});
        }
      }
      // Deliver: FIFO by arrival, ties by sender coordinate.
      std::stable_sort(outgoing.begin(), outgoing.end(),
                       [](const MessageEvent& a, const MessageEvent& b) { return a.src < b.src; });
      for (const auto& e : outgoing) {
        auto& q = node(e.dst);
        q.queue.push_back(e.payload);
        if (q.queue.size() > limits_.queue_capacity) {
          if (limits_.strict)
            throw ModelError("receive queue overflow at step " + std::to_string(e.arrival_step));
          warnings.push_back("queue overflow at step " + std::to_string(e.arrival_step));
        }
        auto& lab = received[coord_key(e.dst)];
        lab.depth = std::max(lab.depth, e.depth);
        lab.wire = std::max(lab.wire, e.wire);
        events.push_back(e);
      }
    }

    VmRun out;
    out.trace.events = std::move(events);
    for (const auto& e : out.trace.events) {
      out.trace.steps = std::max(out.trace.steps, e.arrival_step);
      out.trace.touched.push_back(e.src);
      out.trace.touched.push_back(e.dst);
    }
    std::sort(out.trace.touched.begin(), out.trace.touched.end());
    out.trace.touched.erase(std::unique(out.trace.touched.begin(), out.trace.touched.end()),
                            out.trace.touched.end());
    out.trace.shape = shape_;
    out.trace.seed = seed_;
    out.trace.limits = limits_;
    out.trace.warnings = std::move(warnings);
    for (auto& [key, p] : nodes_) out.memory.emplace(key, std::move(p.memory));
    return out;
  }

 private:
  struct Node {
    Coord coord;
    std::vector<Word> memory;
    std::deque<Word> queue;
    ProcessorRng rng;
    bool awake = false;
  };

  Node& node(Coord c) {
    auto key = coord_key(c);
    auto it = nodes_.find(key);
    if (it == nodes_.end())
      it = nodes_.emplace(key, Node{c, std::vector<Word>(1, 0), {}, ProcessorRng(seed_, c), false}).first;
    return it->second;
  }

  const ProcessorProgram& program_;
  GridShape shape_;
  std::uint64_t seed_;
  ModelLimits limits_;
  ProcessorRng fuzz_;
  std::map<std::uint64_t, Node> nodes_;
};

VmRun run_with_memory(const ProcessorProgram& program, const GridShape& shape,
                      std::span<const Word> inputs, std::uint64_t seed, const ModelLimits& limits) {
  return VirtualMachine(program, shape, seed, limits).execute(inputs);
}

Trace run(const ProcessorProgram& program, const GridShape& shape, std::span<const Word> inputs,
          std::uint64_t seed, const ModelLimits& limits) {
  return run_with_memory(program, shape, inputs, seed, limits).trace;
}

}  // namespace spatial
