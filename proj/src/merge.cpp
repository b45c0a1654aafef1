#include <algorithm>
#include <array>
#include <optional>
#include <tuple>
#include <stdexcept>

#include "detail.hpp"
#include "spatial/collectives.hpp"
#include "spatial/layout.hpp"
#include "spatial/sort.hpp"

namespace spatial {

namespace {

constexpr Word pack2(std::uint64_t hi, std::uint64_t lo) { return hi << 32 | lo; }

Coord rm(const GridShape& r, std::uint64_t i) {
  return r.at(std::int64_t(i) / r.w, std::int64_t(i) % r.w);
}

std::uint64_t rank_in(const GridShape& r, Coord c) {
  return std::uint64_t(c.row - r.origin.row) * std::uint64_t(r.w) + std::uint64_t(c.col - r.origin.col);
}

// Instances this small are sorted with a bitonic network in place.
constexpr std::uint64_t kBitonicBase = 8;

GridShape quadrant(const GridShape& r, int q) {
  const std::int64_t h2 = r.h / 2, w2 = r.w / 2;
  return {h2, w2, r.at((q / 2) * h2, (q % 2) * w2)};
}

std::vector<Located> slice(const std::vector<Located>& v, std::uint64_t lo, std::uint64_t hi) {
  return {v.begin() + std::ptrdiff_t(lo), v.begin() + std::ptrdiff_t(hi)};
}

struct Split {
  std::uint64_t ca = 0;  // elements of a at or below the split element
  std::uint64_t cb = 0;
  Word key = 0;
  std::uint64_t ready = 0;  // when the counts reach the region's hub
};

// Physical home of a virtual rows x cols cross-rank grid. Banded folds cut
// the columns into strips of area.w and stack the strips, so every virtual
// column stays on one physical column; otherwise cells go row-major.
struct Fold {
  GridShape area;
  std::uint64_t cols = 0;
  std::uint64_t rows = 0;
  std::int64_t row0 = 0;
  bool banded = true;

  Coord at(std::uint64_t i, std::uint64_t k) const {
    if (!banded) return rm(area, i * cols + k);
    const auto w = std::uint64_t(area.w);
    return area.at(row0 + std::int64_t((k / w) * rows + i), std::int64_t(k % w));
  }
  std::uint64_t height() const { return (cols + std::uint64_t(area.w) - 1) / std::uint64_t(area.w) * rows; }
};

// Best fold of a rows x cols grid into `area`, growing the area downwards
// only when the grid cannot fit at all.
Fold fold_into(GridShape area, std::uint64_t rows, std::uint64_t cols) {
  Fold f{area, cols, rows, 0, true};
  if (f.height() <= std::uint64_t(area.h)) return f;
  if (rows * cols <= std::uint64_t(area.cells())) return {area, cols, rows, 0, false};
  f.area.h = std::int64_t(f.height());
  return f;
}

struct CrossJob {
  const std::vector<Located>* x;
  const std::vector<Located>* y;
  Fold fold;
};

// Runs several cross-rankings phase by phase so that jobs on disjoint cells
// overlap in time.
std::vector<CrossRanks> cross_rank_batch(Schedule& sched, const std::vector<CrossJob>& jobs) {
  struct State {
    std::vector<std::vector<Coord>> rows, cols;
    std::vector<std::vector<std::uint64_t>> row_t, col_t;
    std::vector<std::uint64_t> tx, ty;
  };
  std::vector<CrossRanks> out(jobs.size());
  std::vector<State> st(jobs.size());
  std::vector<Transfer> round;
  std::vector<std::uint64_t> ready;
  auto live = [&](std::size_t j) { return !jobs[j].x->empty() && !jobs[j].y->empty(); };

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto &x = *jobs[j].x, &y = *jobs[j].y;
    const std::size_t a = x.size(), b = y.size();
    auto& r = out[j];
    r.x.resize(a), r.y.resize(b), r.x_at.resize(a), r.y_at.resize(b), r.x_ready.resize(a), r.y_ready.resize(b);
    if (!live(j)) {
      for (std::size_t i = 0; i < a; ++i) r.x[i] = i, r.x_at[i] = x[i].pos, r.x_ready[i] = x[i].ready;
      for (std::size_t k = 0; k < b; ++k) r.y[k] = k, r.y_at[k] = y[k].pos, r.y_ready[k] = y[k].ready;
      continue;
    }
    const Fold& f = jobs[j].fold;
    if (f.rows != a || f.cols != b) throw std::logic_error("fold does not match the cross-rank grid");
    auto& s = st[j];
    s.rows.assign(a, {});
    s.cols.assign(b, {});
    for (std::size_t i = 0; i < a; ++i)
      for (std::size_t k = 0; k < b; ++k) {
        const Coord c = f.at(i, k);
        s.rows[i].push_back(c);
        s.cols[k].push_back(c);
      }
    for (std::size_t i = 0; i < a; ++i) round.push_back({x[i].pos, s.rows[i][0], x[i].key}), ready.push_back(x[i].ready);
    for (std::size_t k = 0; k < b; ++k) round.push_back({y[k].pos, s.cols[k][0], y[k].key}), ready.push_back(y[k].ready);
  }
  const auto arrived = send_round(sched, round, ready);
  std::size_t at = 0;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!live(j)) continue;
    st[j].tx.assign(arrived.begin() + std::ptrdiff_t(at), arrived.begin() + std::ptrdiff_t(at + jobs[j].x->size()));
    at += jobs[j].x->size();
    st[j].ty.assign(arrived.begin() + std::ptrdiff_t(at), arrived.begin() + std::ptrdiff_t(at + jobs[j].y->size()));
    at += jobs[j].y->size();
  }

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!live(j)) continue;
    auto& s = st[j];
    for (std::size_t i = 0; i < s.rows.size(); ++i)
      s.row_t.push_back(broadcast_path(sched, s.rows[i], (*jobs[j].x)[i].key, s.tx[i]));
    for (std::size_t k = 0; k < s.cols.size(); ++k)
      s.col_t.push_back(broadcast_path(sched, s.cols[k], (*jobs[j].y)[k].key, s.ty[k]));
  }

  const auto plus = CombineOp::plus();
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (!live(j)) continue;
    const auto &x = *jobs[j].x, &y = *jobs[j].y;
    auto& s = st[j];
    auto& r = out[j];
    std::vector<Word> flags;
    std::vector<std::uint64_t> t;
    for (std::size_t i = 0; i < x.size(); ++i) {
      flags.clear(), t.clear();
      for (std::size_t k = 0; k < y.size(); ++k)
        flags.push_back(y[k].key < x[i].key), t.push_back(std::max(s.row_t[i][k], s.col_t[k][i]));
      const auto w = reduce_path(sched, s.rows[i], plus, flags, t);
      r.x[i] = i + w.value, r.x_at[i] = s.rows[i][0], r.x_ready[i] = w.step;
    }
    for (std::size_t k = 0; k < y.size(); ++k) {
      flags.clear(), t.clear();
      for (std::size_t i = 0; i < x.size(); ++i)
        flags.push_back(x[i].key < y[k].key), t.push_back(std::max(s.row_t[i][k], s.col_t[k][i]));
      const auto w = reduce_path(sched, s.cols[k], plus, flags, t);
      r.y[k] = k + w.value, r.y_at[k] = s.cols[k][0], r.y_ready[k] = w.step;
    }
  }
  return out;
}

// Deterministic-sampling rank queries over one merge instance whose elements
// fill `region`, one per processor.
class RankQuery {
 public:
  RankQuery(Schedule& sched, const std::vector<Located>& a, const std::vector<Located>& b,
            const GridShape& region)
      : sched_(sched), a_(a), b_(b), region_(region), g_(spacing(a.size(), b.size())),
        key_at_(std::size_t(region.cells())), ready_at_(std::size_t(region.cells())),
        in_a_(std::size_t(region.cells())), hub_(center(region)) {
    for (const auto& e : a) place(e, true);
    for (const auto& e : b) place(e, false);

    // Every g-th element of each array, ranked against each other.
    std::vector<Located> sa, sb;
    for (std::uint64_t m = g_; m < a.size(); m += g_) sa.push_back(a[m]);
    for (std::uint64_t m = g_; m < b.size(); m += g_) sb.push_back(b[m]);
    const bool flip = sa.size() > sb.size();
    const auto& xs = flip ? sb : sa;
    const auto& ys = flip ? sa : sb;
    const auto cr = cross_rank_batch(sched, {{&xs, &ys, fold_into(region, xs.size(), ys.size())}})[0];
    sample_.resize(xs.size() + ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) sample_[cr.x[i]] = {xs[i].key, cr.x_at[i], cr.x_ready[i]};
    for (std::size_t j = 0; j < ys.size(); ++j) sample_[cr.y[j]] = {ys[j].key, cr.y_at[j], cr.y_ready[j]};
  }

  // For each t, finds the element with exactly t smaller elements; the
  // answers end at the hub. Queries run side by side.
  std::vector<Split> locate(const std::vector<std::uint64_t>& ts) {
    const std::uint64_t s = sample_.size();
    struct Bound {
      std::size_t sample;
      bool inclusive;
      TimedWord count{};
      std::vector<std::uint64_t> seen;  // arrival of the count word per cell
    };
    struct Query {
      std::optional<std::size_t> lo, hi;  // indices into bounds
    };
    std::vector<Bound> bounds;
    std::vector<Query> qs(ts.size());
    for (std::size_t q = 0; q < ts.size(); ++q) {
      const std::int64_t m_lo = std::min<std::int64_t>(std::int64_t(ts[q] / g_) - 1, std::int64_t(s));
      const std::uint64_t m_hi = std::max<std::uint64_t>(1, (ts[q] + g_ - 1) / g_);
      if (m_lo >= 1) qs[q].lo = bounds.size(), bounds.push_back({std::size_t(m_lo - 1), false, {}, {}});
      if (m_hi <= s) qs[q].hi = bounds.size(), bounds.push_back({m_hi - 1, true, {}, {}});
    }

    // Count, per array, the elements below each pivot.
    std::vector<Transfer> round;
    std::vector<std::uint64_t> ready;
    for (const auto& bd : bounds) {
      const auto& p = sample_[bd.sample];
      round.push_back({p.pos, hub_, p.key});
      ready.push_back(p.ready);
    }
    const auto at_root = send_round(sched_, round, ready);
    std::vector<std::vector<std::uint64_t>> spread;
    for (std::size_t i = 0; i < bounds.size(); ++i)
      spread.push_back(broadcast_on(sched_, region_, hub_, sample_[bounds[i].sample].key, at_root[i]));
    for (std::size_t i = 0; i < bounds.size(); ++i) {
      const Word pivot = sample_[bounds[i].sample].key;
      const bool inclusive = bounds[i].inclusive;
      bounds[i].count = reduce_on(
          sched_, region_, hub_, CombineOp::plus(),
          [&](Coord c) -> Word {
            const auto k = std::size_t(rank_in(region_, c));
            const bool below = inclusive ? key_at_[k] <= pivot : key_at_[k] < pivot;
            return below ? (in_a_[k] ? Word(1) << 32 : Word(1)) : 0;
          },
          [&](Coord c) {
            const auto k = std::size_t(rank_in(region_, c));
            return std::max(spread[i][k], ready_at_[k]);
          });
    }
    for (auto& bd : bounds) bd.seen = broadcast_on(sched_, region_, hub_, bd.count.value, bd.count.step);

    // Cross-rank each window; windows share cells only when they cannot all fit.
    std::vector<std::array<std::uint64_t, 4>> win(ts.size());  // a0, b0, a1, b1
    std::vector<std::vector<Located>> wa(ts.size()), wb(ts.size());
    for (std::size_t q = 0; q < ts.size(); ++q) {
      auto& w = win[q];
      w = {0, 0, a_.size(), b_.size()};
      if (qs[q].lo) w[0] = bounds[*qs[q].lo].count.value >> 32, w[1] = bounds[*qs[q].lo].count.value & 0xFFFFFFFFu;
      if (qs[q].hi) w[2] = bounds[*qs[q].hi].count.value >> 32, w[3] = bounds[*qs[q].hi].count.value & 0xFFFFFFFFu;
      auto window = [&](const std::vector<Located>& v, std::uint64_t lo, std::uint64_t hi) {
        std::vector<Located> out = slice(v, lo, hi);
        for (auto& e : out) {
          const auto k = std::size_t(rank_in(region_, e.pos));
          if (qs[q].lo) e.ready = std::max(e.ready, bounds[*qs[q].lo].seen[k]);
          if (qs[q].hi) e.ready = std::max(e.ready, bounds[*qs[q].hi].seen[k]);
        }
        return out;
      };
      wa[q] = window(a_, w[0], w[2]);
      wb[q] = window(b_, w[1], w[3]);
    }
    // Windows get their own bands when they all fit side by side.
    std::vector<CrossJob> jobs;
    std::vector<bool> flip(ts.size());
    std::uint64_t stacked = 0;
    for (std::size_t q = 0; q < ts.size(); ++q) {
      flip[q] = wa[q].size() > wb[q].size();
      const auto* x = flip[q] ? &wb[q] : &wa[q];
      const auto* y = flip[q] ? &wa[q] : &wb[q];
      jobs.push_back({x, y, fold_into(region_, x->size(), y->size())});
      if (jobs.back().fold.banded) stacked += jobs.back().fold.height();
    }
    if (stacked <= std::uint64_t(region_.h)) {
      std::int64_t row = 0;
      for (auto& j : jobs)
        if (j.fold.banded) j.fold.row0 = row, row += std::int64_t(j.fold.height());
    }
    const auto crs = cross_rank_batch(sched_, jobs);

    std::vector<Split> out(ts.size());
    round.clear();
    ready.clear();
    for (std::size_t q = 0; q < ts.size(); ++q) {
      const auto& cr = crs[q];
      const auto& w = win[q];
      const std::uint64_t target = ts[q] - w[0] - w[1];
      // Ranks are relative to the window; translate back to whole-array counts.
      auto hit = [&](const std::vector<std::uint64_t>& ranks, const std::vector<Located>& side,
                     bool side_is_a) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < ranks.size(); ++i)
          if (ranks[i] == target) {
            const std::uint64_t own = i + 1, other = ranks[i] - i;
            out[q].ca = side_is_a ? w[0] + own : w[0] + other;
            out[q].cb = side_is_a ? w[1] + other : w[1] + own;
            out[q].key = side[i].key;
            return i;
          }
        return std::nullopt;
      };
      if (auto i = hit(cr.x, *jobs[q].x, !flip[q])) {
        round.push_back({cr.x_at[*i], hub_, pack2(out[q].ca, out[q].cb)});
        ready.push_back(cr.x_ready[*i]);
      } else if (auto k = hit(cr.y, *jobs[q].y, flip[q])) {
        round.push_back({cr.y_at[*k], hub_, pack2(out[q].ca, out[q].cb)});
        ready.push_back(cr.y_ready[*k]);
      } else {
        throw std::logic_error("rank window does not contain the target");
      }
    }
    const auto done = send_round(sched_, round, ready);
    for (std::size_t q = 0; q < ts.size(); ++q) out[q].ready = done[q];
    return out;
  }

 private:
  // Smallest sample spacing whose cross-rank grid fits in the region.
  static std::uint64_t spacing(std::uint64_t na, std::uint64_t nb) {
    const std::uint64_t n = na + nb;
    std::uint64_t g = 1;
    while ((na ? (na - 1) / g : 0) * (nb ? (nb - 1) / g : 0) > n) ++g;
    return g;
  }

  void place(const Located& e, bool is_a) {
    if (!region_.contains(e.pos)) throw std::invalid_argument("merge element outside its region");
    const auto i = std::size_t(rank_in(region_, e.pos));
    key_at_[i] = e.key;
    ready_at_[i] = e.ready;
    in_a_[i] = is_a;
  }

  Schedule& sched_;
  const std::vector<Located>& a_;
  const std::vector<Located>& b_;
  GridShape region_;
  std::uint64_t g_;
  std::vector<Word> key_at_;
  std::vector<std::uint64_t> ready_at_;
  std::vector<bool> in_a_;
  Coord hub_;  // collects counts and answers
  std::vector<Located> sample_;  // sorted
};

std::vector<Located> merge_rec(Schedule& sched, const std::vector<Located>& a, const std::vector<Located>& b,
                               const GridShape& region);

// Merges the instance filling `region`; output rank i ends at dest[i].
// Sub-instances work inside their own quadrant and hand results back, so
// siblings never touch each other's processors.
std::vector<Located> merge_rec(Schedule& sched, const std::vector<Located>& a, const std::vector<Located>& b,
                               const GridShape& region, const std::vector<Coord>& dest) {
  const std::uint64_t na = a.size(), nb = b.size(), n = na + nb;
  if (n != std::uint64_t(region.cells()) || dest.size() != n)
    throw std::invalid_argument("merge inputs must fill the region");
  std::vector<Located> out(n);
  std::vector<Transfer> round;
  std::vector<std::uint64_t> ready;
  auto deliver = [&](const std::vector<Located>& sorted) {
    round.clear();
    ready.clear();
    for (std::uint64_t i = 0; i < n; ++i) {
      round.push_back({sorted[i].pos, dest[i], sorted[i].key});
      ready.push_back(sorted[i].ready);
    }
    const auto t = send_round(sched, round, ready);
    for (std::uint64_t i = 0; i < n; ++i) out[i] = {sorted[i].key, dest[i], t[i]};
    return out;
  };
  if (na == 0 || nb == 0) return deliver(na ? a : b);
  if (n <= kBitonicBase) {
    std::vector<Coord> wires(n);
    std::vector<Word> keys(n);
    std::vector<std::uint64_t> t(n);
    for (std::uint64_t i = 0; i < n; ++i) wires[i] = rm(region, i);
    for (const auto* v : {&a, &b})
      for (const auto& e : *v) {
        const auto k = std::size_t(rank_in(region, e.pos));
        keys[k] = e.key;
        t[k] = e.ready;
      }
    t = bitonic_on(sched, wires, keys, std::move(t));
    std::vector<Located> sorted(n);
    for (std::uint64_t i = 0; i < n; ++i) sorted[i] = {keys[i], wires[i], t[i]};
    return deliver(sorted);
  }

  const std::uint64_t q = n / 4;
  std::array<std::uint64_t, 5> ca{0, 0, 0, 0, na}, cb{0, 0, 0, 0, nb};
  std::array<std::vector<std::uint64_t>, 3> seen;
  {
    RankQuery query(sched, a, b, region);
    const auto splits = query.locate({q - 1, 2 * q - 1, 3 * q - 1});
    for (std::size_t j = 0; j < 3; ++j) {
      ca[j + 1] = splits[j].ca;
      cb[j + 1] = splits[j].cb;
      seen[j] = broadcast_on(sched, region, center(region), pack2(splits[j].ca, splits[j].cb), splits[j].ready);
    }
  }
  auto known = [&](const Located& e) {
    const auto k = std::size_t(rank_in(region, e.pos));
    return std::max({e.ready, seen[0][k], seen[1][k], seen[2][k]});
  };

  // Each quadrant receives its part of a, then its part of b, row-major.
  for (std::size_t j = 0; j < 4; ++j) {
    const auto quad = quadrant(region, int(j));
    const std::uint64_t base_b = ca[j + 1] - ca[j];
    if (base_b + cb[j + 1] - cb[j] != q) throw std::logic_error("unbalanced merge split");
    for (std::uint64_t i = ca[j]; i < ca[j + 1]; ++i) {
      round.push_back({a[i].pos, rm(quad, i - ca[j]), a[i].key});
      ready.push_back(known(a[i]));
    }
    for (std::uint64_t i = cb[j]; i < cb[j + 1]; ++i) {
      round.push_back({b[i].pos, rm(quad, base_b + i - cb[j]), b[i].key});
      ready.push_back(known(b[i]));
    }
  }
  const auto t = send_round(sched, round, ready);
  std::array<std::vector<Located>, 4> qa, qb;
  std::size_t r = 0;
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::uint64_t i = ca[j]; i < ca[j + 1]; ++i, ++r) qa[j].push_back({a[i].key, round[r].dst, t[r]});
    for (std::uint64_t i = cb[j]; i < cb[j + 1]; ++i, ++r) qb[j].push_back({b[i].key, round[r].dst, t[r]});
  }
  std::vector<Located> merged;
  for (std::size_t j = 0; j < 4; ++j) {
    const auto part = merge_rec(sched, qa[j], qb[j], quadrant(region, int(j)));
    merged.insert(merged.end(), part.begin(), part.end());
  }
  return deliver(merged);
}

std::vector<Located> merge_rec(Schedule& sched, const std::vector<Located>& a, const std::vector<Located>& b,
                               const GridShape& region) {
  std::vector<Coord> dest(std::size_t(region.cells()));
  for (std::size_t i = 0; i < dest.size(); ++i) dest[i] = rm(region, i);
  return merge_rec(sched, a, b, region, dest);
}

std::vector<Located> sort_square(Schedule& sched, const GridShape& sq, const std::vector<Located>& in) {
  if (sq.h == 1) return in;
  const std::int64_t half = sq.h / 2;
  std::array<std::vector<Located>, 4> part;
  for (int q = 0; q < 4; ++q) {
    const auto quad = quadrant(sq, q);
    std::vector<Located> sub;
    for (std::int64_t r = 0; r < half; ++r)
      for (std::int64_t c = 0; c < half; ++c) sub.push_back(in[std::size_t(rank_in(sq, quad.at(r, c)))]);
    part[std::size_t(q)] = sort_square(sched, quad, sub);
  }
  const GridShape top{half, sq.w, sq.origin}, bottom{half, sq.w, sq.at(half, 0)};
  const auto t = merge_rec(sched, part[0], part[1], top);
  const auto b = merge_rec(sched, part[2], part[3], bottom);
  return merge_rec(sched, t, b, sq);
}

GridShape square_for(std::uint64_t n) {
  std::uint64_t side = 1;
  while (side * side < n) side *= 2;
  return {std::int64_t(side), std::int64_t(side), {}};
}

void check_sorted(const std::vector<KeyedElement>& v) {
  if (!std::is_sorted(v.begin(), v.end())) throw std::invalid_argument("merge inputs must be sorted");
}

// a then b, row-major on the smallest square, the tail padded with sentinels
// appended to the longer array.
struct Laid {
  GridShape region;
  std::vector<Located> a, b;
};

Laid lay_out(const MergeInstance& inst) {
  detail::check_tags(inst.a);
  detail::check_tags(inst.b);
  check_sorted(inst.a);
  check_sorted(inst.b);
  const std::uint64_t n = inst.a.size() + inst.b.size();
  Laid l;
  l.region = square_for(std::max<std::uint64_t>(n, 1));
  const bool pad_a = inst.a.size() > inst.b.size();
  std::uint64_t pos = 0;
  for (const auto& e : inst.a) l.a.push_back({e.packed(), rm(l.region, pos++)});
  if (pad_a)
    for (std::uint64_t i = 0; n + i < std::uint64_t(l.region.cells()); ++i)
      l.a.push_back({sentinel_word(i), rm(l.region, pos++)});
  for (const auto& e : inst.b) l.b.push_back({e.packed(), rm(l.region, pos++)});
  if (!pad_a)
    for (std::uint64_t i = 0; n + i < std::uint64_t(l.region.cells()); ++i)
      l.b.push_back({sentinel_word(i), rm(l.region, pos++)});
  return l;
}

}  // namespace

CrossRanks cross_rank_on(Schedule& sched, const std::vector<Located>& x, const std::vector<Located>& y,
                         const GridShape& area) {
  if (std::uint64_t(x.size()) * y.size() > std::uint64_t(area.cells()))
    throw std::invalid_argument("cross-rank area too small");
  return cross_rank_batch(sched, {{&x, &y, fold_into(area, x.size(), y.size())}})[0];
}

std::vector<Located> merge_on(Schedule& sched, const std::vector<Located>& a, const std::vector<Located>& b,
                              const GridShape& region) {
  return merge_rec(sched, a, b, region);
}

void mergesort_on(Schedule& sched, const GridShape& square, std::vector<Word>& keys) {
  if (square.h != square.w || !is_pow2(std::uint64_t(square.h)) || keys.size() != std::size_t(square.cells()))
    throw std::invalid_argument("mergesort needs a full power-of-2 square");
  std::vector<Located> in(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const Coord c = rm(square, i);
    in[i] = {keys[i], c, sched.ready(c)};
  }
  const auto out = sort_square(sched, square, in);
  for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = out[i].key;
}

AlgorithmResult<std::vector<KeyedElement>> mergesort_2d(const std::vector<KeyedElement>& values,
                                                        const RunOptions& opts) {
  detail::check_tags(values);
  const auto sq = square_for(std::max<std::size_t>(values.size(), 1));
  std::vector<Word> keys(std::size_t(sq.cells()));
  for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = i < values.size() ? values[i].packed() : sentinel_word(i);
  Schedule sched(opts.limits, opts.record_trace);
  mergesort_on(sched, sq, keys);
  std::vector<KeyedElement> out(values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = KeyedElement::unpack(keys[i]);
  return detail::finish(std::move(out), sched, sq, opts);
}

AlgorithmResult<std::vector<KeyedElement>> merge_sorted(const MergeInstance& inst, const RunOptions& opts) {
  const auto l = lay_out(inst);
  Schedule sched(opts.limits, opts.record_trace);
  const auto merged = merge_rec(sched, l.a, l.b, l.region);
  std::vector<KeyedElement> out(inst.a.size() + inst.b.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = KeyedElement::unpack(merged[i].key);
  return detail::finish(std::move(out), sched, l.region, opts);
}

AlgorithmResult<KeyedElement> two_array_rank(const MergeInstance& inst, std::uint64_t k, const RunOptions& opts) {
  const std::uint64_t n = inst.a.size() + inst.b.size();
  if (k < 1 || k > n) throw std::out_of_range("rank k out of range");
  const auto l = lay_out(inst);
  Schedule sched(opts.limits, opts.record_trace);
  RankQuery query(sched, l.a, l.b, l.region);
  const Split s = query.locate({k - 1})[0];
  return detail::finish(KeyedElement::unpack(s.key), sched, l.region, opts);
}

AlgorithmResult<AllPairsOutput> all_pairs_sort(const std::vector<KeyedElement>& values, const RunOptions& opts) {
  const std::uint64_t n = values.size();
  if (!is_pow4(n)) throw std::invalid_argument("all-pairs sort needs n a power of 4");
  detail::check_tags(values);
  const auto s = std::int64_t(isqrt(n));
  const GridShape data{s, s, {}};
  const Coord work{0, std::int32_t(s)};
  auto tile = [&](std::uint64_t i) -> GridShape {
    return {s, s, work + Coord{std::int32_t(std::int64_t(i) / s * s), std::int32_t(std::int64_t(i) % s * s)}};
  };
  std::vector<Word> key(n);
  for (std::uint64_t i = 0; i < n; ++i) key[i] = values[i].packed();

  Schedule sched(opts.limits, opts.record_trace);
  std::vector<Transfer> round;
  for (std::uint64_t i = 0; i < n; ++i) round.push_back({rm(data, i), tile(i).origin, key[i]});
  send_round(sched, round);
  for (std::uint64_t i = 0; i < n; ++i) broadcast_on(sched, tile(i), key[i]);

  // Copy the array into tile 0, then spread it tile by tile.
  round.clear();
  for (std::uint64_t j = 0; j < n; ++j) round.push_back({rm(data, j), rm(tile(0), j), key[j]});
  send_round(sched, round);
  for (auto [p, c] : broadcast_tree({s, s, {}})) {
    round.clear();
    const GridShape from = tile(std::uint64_t(p.row * s + p.col)), to = tile(std::uint64_t(c.row * s + c.col));
    for (std::uint64_t j = 0; j < n; ++j) round.push_back({rm(from, j), rm(to, j), key[j]});
    send_round(sched, round);
  }

  AllPairsOutput out;
  out.ranks.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const GridShape t = tile(i);
    out.ranks[i] = reduce_on(sched, t, CombineOp::plus(), [&](Coord c) -> Word {
      return key[std::size_t((c.row - t.origin.row) * s + c.col - t.origin.col)] < key[i];
    });
  }
  round.clear();
  for (std::uint64_t i = 0; i < n; ++i) round.push_back({tile(i).origin, rm(data, i), out.ranks[i]});
  send_round(sched, round);
  round.clear();
  out.sorted.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    round.push_back({rm(data, i), rm(data, out.ranks[i]), key[i]});
    out.sorted[out.ranks[i]] = values[i];
  }
  send_round(sched, round);
  return detail::finish(std::move(out), sched, {s, s + std::int64_t(n), {}}, opts);
}

}  // namespace spatial
