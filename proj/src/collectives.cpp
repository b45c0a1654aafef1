#include "spatial/collectives.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <optional>
#include <stdexcept>

#include "detail.hpp"
#include "spatial/layout.hpp"

namespace spatial {

using detail::finish;

CombineOp CombineOp::plus() { return {[](Word a, Word b) { return a + b; }, 0, true, true, "plus"}; }
CombineOp CombineOp::max() {
  return {[](Word a, Word b) { return std::max(a, b); }, 0, true, true, "max"};
}
CombineOp CombineOp::min() {
  return {[](Word a, Word b) { return std::min(a, b); }, std::numeric_limits<Word>::max(), true, true,
          "min"};
}

namespace {

GridShape transpose(const GridShape& g) { return {g.w, g.h, {g.origin.col, g.origin.row}}; }
Coord transpose(Coord c) { return {c.col, c.row}; }

// 1D tree over indices [a, a+len): a feeds a+1 and a+ceil(len/2).
void line_tree_index(std::size_t a, std::size_t len, std::vector<std::pair<std::size_t, std::size_t>>& out) {
  if (len <= 1) return;
  const std::size_t half = (len + 1) / 2;
  if (half > 1) out.emplace_back(a, a + 1);
  out.emplace_back(a, a + half);
  if (half > 1) line_tree_index(a + 1, half - 1, out);
  line_tree_index(a + half, len - half, out);
}

void line_tree(const std::vector<Coord>& pos, std::size_t a, std::size_t len,
               std::vector<std::pair<Coord, Coord>>& out) {
  std::vector<std::pair<std::size_t, std::size_t>> idx;
  line_tree_index(a, len, idx);
  for (auto [p, c] : idx) out.emplace_back(pos[p], pos[c]);
}

void build_tree(const GridShape& g, std::vector<std::pair<Coord, Coord>>& out) {
  if (g.cells() <= 1) return;
  if (g.w > 2 * g.h) {
    std::vector<std::pair<Coord, Coord>> t;
    build_tree(transpose(g), t);
    for (auto [p, c] : t) out.emplace_back(transpose(p), transpose(c));
    return;
  }
  if (g.h > 2 * g.w) {
    // Stack of w x w squares: a line tree over the square tops, then each square.
    std::vector<Coord> tops;
    for (std::int64_t r = 0; r < g.h; r += g.w) tops.push_back(g.at(r, 0));
    line_tree(tops, 0, tops.size(), out);
    for (std::int64_t r = 0; r < g.h; r += g.w)
      build_tree({std::min(g.w, g.h - r), g.w, g.at(r, 0)}, out);
    return;
  }
  const std::int64_t h0 = (g.h + 1) / 2, w0 = (g.w + 1) / 2;
  const GridShape quads[4] = {{h0, w0, g.origin},
                              {h0, g.w - w0, g.at(0, w0)},
                              {g.h - h0, w0, g.at(h0, 0)},
                              {g.h - h0, g.w - w0, g.at(h0, w0)}};
  for (int q = 1; q < 4; ++q)
    if (quads[q].cells() > 0) out.emplace_back(g.origin, quads[q].origin);
  for (const auto& q : quads)
    if (q.cells() > 0) build_tree(q, out);
}

std::size_t local_index(const GridShape& g, Coord c) {
  return std::size_t(c.row - g.origin.row) * std::size_t(g.w) + std::size_t(c.col - g.origin.col);
}

void require_nonempty(const GridShape& g) {
  if (g.h < 1 || g.w < 1) throw std::invalid_argument("empty grid shape");
}

// Z-order up-sweep/down-sweep over the side x side square at `origin`. Each
// tree node of height t over the Z-interval [b, b + 4^t) lives at Z index b + t.
template <class T, class Op, class Emit>
void zscan(Schedule& sched, Coord origin, std::uint64_t side, std::vector<T>& vals, const Op& op,
           const Emit& emit) {
  if (!is_pow2(side) || vals.size() != side * side)
    throw std::invalid_argument("scan needs n = 4^k values on a square grid");
  const std::uint64_t n = vals.size();
  const unsigned k = ilog2(side);
  auto at = [&](std::uint64_t z) { return zorder_coord(z, side) + origin; };

  // sums[t][q]: subtree combination of node q at height t; pre[t][q][i]: prefix
  // of the first i+1 children, kept at the node's holder.
  std::vector<std::vector<T>> sums(k + 1);
  std::vector<std::vector<std::array<T, 3>>> pre(k + 1);
  sums[0] = vals;
  for (unsigned t = 1; t <= k; ++t) {
    const std::uint64_t span = std::uint64_t(1) << (2 * t), child = span / 4;
    sums[t].resize(n / span);
    pre[t].resize(n / span);
    for (std::uint64_t q = 0; q < n / span; ++q) {
      const std::uint64_t b = q * span;
      const Coord holder = at(b + t);
      T acc{};
      for (unsigned j = 0; j < 4; ++j) {
        const T& s = sums[t - 1][4 * q + j];
        emit(sched, at(b + j * child + (t - 1)), holder, s);
        acc = j == 0 ? s : op(acc, s);
        if (j < 3) pre[t][q][j] = acc;
      }
      sums[t][q] = acc;
    }
  }

  // Down-sweep: x = combination of everything left of the node; the node's
  // top-left cell holds it and forwards it to the holder.
  std::vector<std::optional<T>> xs(1), next;
  for (unsigned t = k; t >= 1; --t) {
    const std::uint64_t span = std::uint64_t(1) << (2 * t), child = span / 4;
    next.assign(n / child, std::nullopt);
    for (std::uint64_t q = 0; q < n / span; ++q) {
      const std::uint64_t b = q * span;
      const Coord holder = at(b + t);
      const auto& x = xs[q];
      if (x) emit(sched, at(b), holder, *x);
      next[4 * q] = x;
      for (unsigned i = 1; i < 4; ++i) {
        T v = x ? op(*x, pre[t][q][i - 1]) : pre[t][q][i - 1];
        emit(sched, holder, at(b + i * child), v);
        next[4 * q + i] = std::move(v);
      }
    }
    xs.swap(next);
  }
  for (std::uint64_t z = 0; z < n; ++z)
    if (xs[z]) vals[z] = op(*xs[z], vals[z]);
}

}  // namespace

std::vector<std::pair<Coord, Coord>> broadcast_tree(const GridShape& region) {
  require_nonempty(region);
  std::vector<std::pair<Coord, Coord>> edges;
  edges.reserve(std::size_t(region.cells()));
  build_tree(region, edges);
  return edges;
}

std::vector<std::pair<Coord, Coord>> broadcast_tree(const GridShape& region, Coord root) {
  if (!region.contains(root)) throw std::invalid_argument("root outside the region");
  if (root == region.origin) return broadcast_tree(region);
  const std::int64_t rr = root.row - region.origin.row, rc = root.col - region.origin.col;
  std::vector<std::pair<Coord, Coord>> edges;
  // The four blocks around the root, each entered at its corner next to it.
  struct Block {
    std::int64_t r0, c0, h, w;
    bool flip_r, flip_c;
  };
  const Block blocks[4] = {{rr, rc, region.h - rr, region.w - rc, false, false},
                           {0, rc, rr, region.w - rc, true, false},
                           {rr, 0, region.h - rr, rc, false, true},
                           {0, 0, rr, rc, true, true}};
  for (const auto& b : blocks) {
    if (b.h <= 0 || b.w <= 0) continue;
    auto map = [&](Coord c) {
      const std::int64_t r = b.flip_r ? b.h - 1 - c.row : c.row, k = b.flip_c ? b.w - 1 - c.col : c.col;
      return region.at(b.r0 + r, b.c0 + k);
    };
    const Coord corner = map({0, 0});
    if (corner != root) edges.emplace_back(root, corner);
    std::vector<std::pair<Coord, Coord>> local;
    build_tree({b.h, b.w, {}}, local);
    for (auto [p, c] : local) edges.emplace_back(map(p), map(c));
  }
  return edges;
}

Coord center(const GridShape& region) { return region.at(region.h / 2, region.w / 2); }

namespace {

using Edges = std::vector<std::pair<std::size_t, std::size_t>>;

// Edges are (parent, child) indices into `nodes`, parents first.
std::vector<std::uint64_t> tree_broadcast(Schedule& sched, const std::vector<Coord>& nodes, const Edges& edges,
                                         Word value, std::uint64_t t0) {
  std::vector<std::uint64_t> t(nodes.size(), t0);
  for (auto [p, c] : edges) t[c] = sched.send_at(nodes[p], nodes[c], value, t[p]);
  return t;
}

TimedWord tree_reduce(Schedule& sched, const std::vector<Coord>& nodes, const Edges& edges, const CombineOp& op,
                      std::vector<Word> acc, std::vector<std::uint64_t> t) {
  if (!op.commutative) throw std::invalid_argument("reduce requires a commutative operator");
  if (nodes.empty()) return {op.identity, 0};
  for (auto it = edges.rbegin(); it != edges.rend(); ++it) {
    auto [p, c] = *it;
    t[p] = std::max(t[p], sched.send_at(nodes[c], nodes[p], acc[c], t[c]));
    acc[p] = op(acc[p], acc[c]);
  }
  return {acc[0], t[0]};
}

std::vector<Coord> cells_of(const GridShape& g) {
  std::vector<Coord> v;
  v.reserve(std::size_t(g.cells()));
  for (std::int64_t r = 0; r < g.h; ++r)
    for (std::int64_t c = 0; c < g.w; ++c) v.push_back(g.at(r, c));
  return v;
}

Edges grid_edges(const GridShape& g, Coord root) {
  Edges e;
  for (auto [p, c] : broadcast_tree(g, root)) e.emplace_back(local_index(g, p), local_index(g, c));
  return e;
}

Edges path_edges(std::size_t len) {
  Edges e;
  line_tree_index(0, len, e);
  return e;
}

}  // namespace

std::vector<std::uint64_t> broadcast_on(Schedule& sched, const GridShape& region, Coord root, Word value,
                                        std::uint64_t ready) {
  return tree_broadcast(sched, cells_of(region), grid_edges(region, root), value, ready);
}

void broadcast_on(Schedule& sched, const GridShape& region, Word value) {
  broadcast_on(sched, region, region.origin, value, sched.ready(region.origin));
}

TimedWord reduce_on(Schedule& sched, const GridShape& region, Coord root, const CombineOp& op,
                    const std::function<Word(Coord)>& value, const std::function<std::uint64_t(Coord)>& ready) {
  const auto nodes = cells_of(region);
  std::vector<Word> acc(nodes.size());
  std::vector<std::uint64_t> t(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) acc[i] = value(nodes[i]), t[i] = ready(nodes[i]);
  // tree_reduce leaves the result at node 0; swap the root into that slot.
  const std::size_t r = local_index(region, root);
  auto edges = grid_edges(region, root);
  auto relabel = [&](std::size_t i) { return i == r ? 0 : i == 0 ? r : i; };
  for (auto& [p, c] : edges) p = relabel(p), c = relabel(c);
  std::vector<Coord> order = nodes;
  std::swap(order[0], order[r]);
  std::swap(acc[0], acc[r]);
  std::swap(t[0], t[r]);
  return tree_reduce(sched, order, edges, op, std::move(acc), std::move(t));
}

Word reduce_on(Schedule& sched, const GridShape& region, const CombineOp& op,
               const std::function<Word(Coord)>& value) {
  return reduce_on(sched, region, region.origin, op, value, [&](Coord c) { return sched.ready(c); }).value;
}

std::vector<std::uint64_t> broadcast_path(Schedule& sched, const std::vector<Coord>& path, Word value,
                                         std::uint64_t ready) {
  return tree_broadcast(sched, path, path_edges(path.size()), value, ready);
}

void broadcast_path(Schedule& sched, const std::vector<Coord>& path, Word value) {
  if (!path.empty()) broadcast_path(sched, path, value, sched.ready(path[0]));
}

TimedWord reduce_path(Schedule& sched, const std::vector<Coord>& path, const CombineOp& op,
                      const std::vector<Word>& values, const std::vector<std::uint64_t>& ready) {
  return tree_reduce(sched, path, path_edges(path.size()), op, values, ready);
}

Word reduce_path(Schedule& sched, const std::vector<Coord>& path, const CombineOp& op,
                 const std::vector<Word>& values) {
  std::vector<std::uint64_t> t;
  for (Coord c : path) t.push_back(sched.ready(c));
  return reduce_path(sched, path, op, values, t).value;
}

void scan_on(Schedule& sched, Coord origin, std::uint64_t side, const CombineOp& op,
             std::vector<Word>& values) {
  zscan(sched, origin, side, values, op,
        [](Schedule& s, Coord a, Coord b, Word v) { s.send(a, b, v); });
}

void segmented_scan_on(Schedule& sched, Coord origin, std::uint64_t side, const CombineOp& op,
                       std::vector<SegmentedValue>& values) {
  auto seg = [&op](const SegmentedValue& a, const SegmentedValue& b) {
    return SegmentedValue{b.segment_start ? b.value : op(a.value, b.value),
                          a.segment_start || b.segment_start};
  };
  std::vector<bool> flags(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) flags[i] = values[i].segment_start;
  zscan(sched, origin, side, values, seg, [](Schedule& s, Coord a, Coord b, const SegmentedValue& v) {
    s.send(a, b, Word(v.segment_start));
    s.send(a, b, v.value);
  });
  for (std::size_t i = 0; i < values.size(); ++i) values[i].segment_start = flags[i];
}

AlgorithmResult<std::vector<Word>> broadcast(Word value, const GridShape& shape, const RunOptions& opts) {
  require_nonempty(shape);
  Schedule sched(opts.limits, opts.record_trace);
  broadcast_on(sched, shape, value);
  return finish(std::vector<Word>(std::size_t(shape.cells()), value), sched, shape, opts);
}

AlgorithmResult<Word> reduce(const CombineOp& op, const std::vector<Word>& values, const GridShape& shape,
                             const RunOptions& opts) {
  require_nonempty(shape);
  if (values.size() != std::size_t(shape.cells())) throw std::invalid_argument("one value per processor");
  Schedule sched(opts.limits, opts.record_trace);
  const Word r = reduce_on(sched, shape, op, [&](Coord c) { return values[local_index(shape, c)]; });
  return finish(r, sched, shape, opts);
}

AlgorithmResult<std::vector<Word>> all_reduce(const CombineOp& op, const std::vector<Word>& values,
                                              const GridShape& shape, const RunOptions& opts) {
  require_nonempty(shape);
  if (values.size() != std::size_t(shape.cells())) throw std::invalid_argument("one value per processor");
  Schedule sched(opts.limits, opts.record_trace);
  const Word r = reduce_on(sched, shape, op, [&](Coord c) { return values[local_index(shape, c)]; });
  broadcast_on(sched, shape, r);
  return finish(std::vector<Word>(values.size(), r), sched, shape, opts);
}

AlgorithmResult<std::vector<Word>> scan(const CombineOp& op, const std::vector<Word>& values,
                                        const RunOptions& opts) {
  if (values.empty()) throw std::invalid_argument("empty scan input");
  std::uint64_t n = 1;
  while (n < values.size()) n *= 4;
  std::vector<Word> padded = values;
  padded.resize(n, op.identity);
  const std::uint64_t side = isqrt(n);
  Schedule sched(opts.limits, opts.record_trace);
  scan_on(sched, {}, side, op, padded);
  padded.resize(values.size());
  return finish(std::move(padded), sched, {std::int64_t(side), std::int64_t(side), {}}, opts);
}

AlgorithmResult<std::vector<SegmentedValue>> segmented_scan(const CombineOp& op,
                                                            std::vector<SegmentedValue> values,
                                                            const RunOptions& opts) {
  if (values.empty()) throw std::invalid_argument("empty scan input");
  values[0].segment_start = true;
  const std::size_t size = values.size();
  std::uint64_t n = 1;
  while (n < size) n *= 4;
  values.resize(n, SegmentedValue{op.identity, false});
  const std::uint64_t side = isqrt(n);
  Schedule sched(opts.limits, opts.record_trace);
  segmented_scan_on(sched, {}, side, op, values);
  values.resize(size);
  return finish(std::move(values), sched, {std::int64_t(side), std::int64_t(side), {}}, opts);
}

std::uint64_t scan_max_values_per_processor(std::uint64_t n) {
  if (!is_pow4(n)) throw std::invalid_argument("n must be a power of 4");
  std::vector<std::uint64_t> count(n, 1);
  for (std::uint64_t t = 1, span = 4; span <= n; ++t, span *= 4)
    for (std::uint64_t b = 0; b < n; b += span) ++count[b + t];
  return *std::max_element(count.begin(), count.end());
}

}  // namespace spatial
