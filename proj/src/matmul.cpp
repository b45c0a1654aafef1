#include <algorithm>
#include <bit>
#include <functional>
#include <optional>
#include <stdexcept>
#include <type_traits>
#include <unordered_map>

#include "detail.hpp"
#include "spatial/layout.hpp"
#include "spatial/matmul.hpp"

namespace spatial {

namespace {

template <class T>
struct Arith {
  bool overflow = false;

  T add(T x, T y) {
    if constexpr (std::is_integral_v<T>) {
      T r;
      overflow |= __builtin_add_overflow(x, y, &r);
      return r;
    } else {
      return x + y;
    }
  }
  T sub(T x, T y) {
    if constexpr (std::is_integral_v<T>) {
      T r;
      overflow |= __builtin_sub_overflow(x, y, &r);
      return r;
    } else {
      return x - y;
    }
  }
  T mul(T x, T y) {
    if constexpr (std::is_integral_v<T>) {
      T r;
      overflow |= __builtin_mul_overflow(x, y, &r);
      return r;
    } else {
      return x * y;
    }
  }
  T axpy(T acc, int coef, T x) { return coef > 0 ? add(acc, x) : sub(acc, x); }
};

class MemoryMeter {
 public:
  void add(Coord c, std::int64_t k) {
    auto& x = live_[coord_key(c)];
    x += k;
    peak_ = std::max(peak_, x);
  }
  std::uint64_t peak() const { return std::uint64_t(peak_); }

 private:
  std::unordered_map<std::uint64_t, std::int64_t> live_;
  std::int64_t peak_ = 0;
};

// n x n values, entry (i, j) on processor origin + (i, j).
template <class T>
struct Block {
  Coord origin{};
  std::int64_t n = 0;
  std::vector<T> v;

  Coord at(std::int64_t i, std::int64_t j) const { return {origin.row + std::int32_t(i), origin.col + std::int32_t(j)}; }
  T get(std::int64_t i, std::int64_t j) const { return v[std::size_t(i * n + j)]; }
};

template <class T>
struct Ctx {
  Schedule& sched;
  MemoryMeter mem;
  Arith<T> ar;

  void hold(const Block<T>& b, std::int64_t words) {
    for (std::int64_t i = 0; i < b.n; ++i)
      for (std::int64_t j = 0; j < b.n; ++j) mem.add(b.at(i, j), words);
  }
};

template <class T>
Word to_word(T x) {
  return std::bit_cast<Word>(x);
}

// Strassen's products, quadrants 0 = 11, 1 = 12, 2 = 21, 3 = 22.
constexpr int kA[7][4] = {{1, 0, 0, 1}, {0, 0, 1, 1},  {1, 0, 0, 0}, {0, 0, 0, 1},
                          {1, 1, 0, 0}, {-1, 0, 1, 0}, {0, 1, 0, -1}};
constexpr int kB[7][4] = {{1, 0, 0, 1}, {1, 0, 0, 0}, {0, 1, 0, -1}, {-1, 0, 1, 0},
                          {0, 0, 0, 1}, {1, 1, 0, 0}, {0, 0, 1, 1}};
constexpr int kC[4][7] = {{1, 0, 0, 1, -1, 0, 1}, {0, 0, 1, 0, 1, 0, 0}, {0, 1, 0, 1, 0, 0, 0}, {1, -1, 1, 0, 0, 1, 0}};

struct Term {
  Coord offset;  // block offset inside the operand
  int index;     // call or block number
  int coef;
};

// Coefficients of `levels` unrolled Strassen levels on an n x n operand.
// Calls are numbered in base 7 and blocks in base 4, most significant digit
// for the outermost level.
struct Unrolled {
  std::vector<std::vector<Term>> a, b;  // per call: operand blocks
  std::vector<std::vector<Term>> c;     // per result block: calls
  std::vector<Coord> block;             // offset of each block

  Unrolled(unsigned levels, std::int64_t n) {
    int calls = 1, blocks = 1;
    for (unsigned l = 0; l < levels; ++l) calls *= 7, blocks *= 4;
    block.resize(std::size_t(blocks));
    for (int q = 0; q < blocks; ++q) {
      Coord off{};
      for (unsigned l = 0, rest = unsigned(q); l < levels; ++l) {
        const unsigned digit = (rest >> (2 * (levels - 1 - l))) & 3;
        const auto half = std::int32_t(n >> (l + 1));
        off.row += std::int32_t(digit >> 1) * half;
        off.col += std::int32_t(digit & 1) * half;
      }
      block[std::size_t(q)] = off;
    }
    a.resize(std::size_t(calls));
    b.resize(std::size_t(calls));
    c.resize(std::size_t(blocks));
    for (int r = 0; r < calls; ++r)
      for (int q = 0; q < blocks; ++q) {
        int ca = 1, cb = 1, cc = 1;
        for (unsigned l = 0, rr = unsigned(r), qq = unsigned(q); l < levels; ++l, rr /= 7, qq >>= 2) {
          ca *= kA[rr % 7][qq & 3];
          cb *= kB[rr % 7][qq & 3];
          cc *= kC[qq & 3][rr % 7];
        }
        const Coord off = block[std::size_t(q)];
        if (ca) a[std::size_t(r)].push_back({off, q, ca});
        if (cb) b[std::size_t(r)].push_back({off, q, cb});
        if (cc) c[std::size_t(q)].push_back({off, r, cc});
      }
  }
};

// Sub-calls run on a regular tiling of the working grid; a call's operands
// sit in the top-left m x m corner of its tile.
struct TileGrid {
  GridShape work;
  std::int64_t per_side = 8;  // tiles per row
  std::size_t used = 64;      // tiles per chunk
  bool zorder = true;

  std::int64_t side() const { return work.h / per_side; }
  GridShape tile(std::size_t i) const {
    const Coord t = zorder ? zorder_coord(i, std::uint64_t(per_side))
                           : Coord{std::int32_t(std::int64_t(i) / per_side), std::int32_t(std::int64_t(i) % per_side)};
    return {side(), side(), work.at(t.row * side(), t.col * side())};
  }
  bool operand_cell(Coord c, std::int64_t m) const {
    if (!work.contains(c)) return false;
    const std::int64_t r = c.row - work.origin.row, k = c.col - work.origin.col, s = side();
    if (r % s >= m || k % s >= m || r / s >= per_side || k / s >= per_side) return false;
    const std::uint64_t i = zorder ? zorder_rank({std::int32_t(r / s), std::int32_t(k / s)}, std::uint64_t(per_side))
                                   : std::uint64_t(r / s * per_side + k / s);
    return i < used;
  }
};

// A receiver that also sends during the same phase would chain every word it
// receives into its later sends. Such receivers get their terms through a
// staging processor that forwards the sum once the phase's sends are issued.
template <class T>
struct Phase {
  Ctx<T>& ctx;
  std::function<std::optional<Coord>(Coord)> staging;
  std::vector<Transfer> forwards;

  // Sends the terms for `dest` and returns their signed sum.
  T gather(Coord dest, const std::vector<std::pair<Coord, T>>& from, const std::vector<int>& coef) {
    const auto via = staging(dest);
    T s{};
    for (std::size_t t = 0; t < from.size(); ++t) {
      ctx.sched.send(from[t].first, via ? *via : dest, to_word(from[t].second));
      s = ctx.ar.axpy(s, coef[t], from[t].second);
    }
    if (via) {
      ctx.mem.add(*via, 1);
      forwards.push_back({*via, dest, to_word(s)});
    }
    return s;
  }
  void flush() {
    for (const Transfer& f : forwards) {
      ctx.sched.send(f.src, f.dst, f.payload);
      ctx.mem.add(f.src, -1);
    }
    forwards.clear();
  }
};

template <class T>
Block<T> combine(Phase<T>& phase, const Block<T>& src, const std::vector<Term>& terms, std::int64_t m, Coord dest) {
  Block<T> out{dest, m, std::vector<T>(std::size_t(m * m), T{})};
  std::vector<std::pair<Coord, T>> from(terms.size());
  std::vector<int> coef(terms.size());
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < m; ++j) {
      for (std::size_t t = 0; t < terms.size(); ++t) {
        const std::int64_t r = terms[t].offset.row + i, c = terms[t].offset.col + j;
        from[t] = {src.at(r, c), src.get(r, c)};
        coef[t] = terms[t].coef;
      }
      out.v[std::size_t(i * m + j)] = phase.gather(out.at(i, j), from, coef);
    }
  phase.ctx.hold(out, 1);
  return out;
}

template <class T>
using SubCall = std::function<Block<T>(Ctx<T>&, const Block<T>&, const Block<T>&, const GridShape&)>;

// One unrolled step: calls run in chunks of tiles.used, each chunk reusing
// the same tiles; results stay in their tiles until every chunk is done and
// are then accumulated onto a's processors.
template <class T>
Block<T> unrolled_step(Ctx<T>& ctx, const Block<T>& a, const Block<T>& b, unsigned levels, const TileGrid& tiles,
                       const SubCall<T>& sub) {
  const Unrolled u(levels, a.n);
  const std::int64_t m = a.n >> levels, n = a.n;
  const std::size_t calls = u.a.size();
  const GridShape own{n, n, a.origin};

  // Operand words land in a tile corner; corners inside a's square still
  // have words of a and b to send, so they are staged to the right of it.
  Phase<T> form{ctx, [&](Coord c) -> std::optional<Coord> {
                  const Coord h{c.row, c.col + std::int32_t(n)};
                  if (own.contains(c) && tiles.work.contains(h)) return h;
                  return std::nullopt;
                }, {}};
  std::vector<Block<T>> results(calls);
  for (std::size_t first = 0; first < calls; first += tiles.used) {
    const std::size_t last = std::min(calls, first + tiles.used);
    std::vector<Block<T>> ta, tb;
    for (std::size_t r = first; r < last; ++r) {
      const Coord dest = tiles.tile(r - first).origin;
      ta.push_back(combine(form, a, u.a[r], m, dest));
      tb.push_back(combine(form, b, u.b[r], m, dest));
    }
    form.flush();
    for (std::size_t r = first; r < last; ++r) {
      results[r] = sub(ctx, ta[r - first], tb[r - first], tiles.tile(r - first));
      ctx.hold(ta[r - first], -1);
      ctx.hold(tb[r - first], -1);
    }
  }

  // Product words leave the tile corners; a destination that is itself such
  // a corner is staged just below it, still inside its tile.
  Phase<T> acc{ctx, [&](Coord c) -> std::optional<Coord> {
                 if (tiles.side() < 2 * m || !tiles.operand_cell(c, m)) return std::nullopt;
                 return Coord{c.row + std::int32_t(m), c.col};
               }, {}};
  Block<T> c{a.origin, n, std::vector<T>(std::size_t(n * n), T{})};
  ctx.hold(c, 1);
  std::vector<std::pair<Coord, T>> from;
  std::vector<int> coef;
  for (std::size_t q = 0; q < u.c.size(); ++q) {
    const Coord off = u.block[q];
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < m; ++j) {
        from.clear();
        coef.clear();
        for (const Term& t : u.c[q]) {
          const Block<T>& res = results[std::size_t(t.index)];
          from.push_back({res.at(i, j), res.get(i, j)});
          coef.push_back(t.coef);
        }
        const std::int64_t r = off.row + i, k = off.col + j;
        c.v[std::size_t(r * n + k)] = acc.gather(c.at(r, k), from, coef);
      }
  }
  acc.flush();
  for (const auto& res : results) ctx.hold(res, -1);
  return c;
}

unsigned s3mm_levels(std::int64_t n) {
  const unsigned rest = ilog2(std::uint64_t(n)) % 3;
  return rest ? rest : 3;
}

std::int64_t ceil_sqrt(std::uint64_t x) {
  std::uint64_t s = isqrt(x);
  return std::int64_t(s * s < x ? s + 1 : s);
}

std::int64_t s3mm_side(std::int64_t n) {
  if (n == 1) return 1;
  const unsigned levels = s3mm_levels(n);
  const std::int64_t base = n * ceil_sqrt(ilog2(std::uint64_t(n)));
  const std::int64_t tiles = levels == 3 ? 8 : levels == 2 ? 7 : 3;
  return std::max(base, tiles * s3mm_side(n >> levels));
}

template <class T>
Block<T> s3mm_rec(Ctx<T>& ctx, const Block<T>& a, const Block<T>& b, const GridShape& work) {
  if (a.n == 1) {
    Block<T> c{a.origin, 1, {ctx.ar.mul(a.v[0], b.v[0])}};
    ctx.hold(c, 1);
    return c;
  }
  const unsigned levels = s3mm_levels(a.n);
  const TileGrid tiles = levels == 3   ? TileGrid{work, 8, 64, true}
                         : levels == 2 ? TileGrid{work, 7, 49, false}
                                       : TileGrid{work, 3, 7, false};
  return unrolled_step<T>(ctx, a, b, levels, tiles, [](Ctx<T>& cx, const Block<T>& x, const Block<T>& y, const GridShape& t) {
    return s3mm_rec(cx, x, y, t);
  });
}

bool bfs_leaf(std::int64_t n, std::int64_t k) { return n <= k || n < 4; }

std::int64_t bfs_side(std::int64_t n, std::int64_t k) {
  return bfs_leaf(n, k) ? s3mm_side(n) : std::max(n, 7 * bfs_side(n / 4, k));
}

template <class T>
Block<T> bfs_rec(Ctx<T>& ctx, const Block<T>& a, const Block<T>& b, const GridShape& work, std::int64_t k) {
  if (bfs_leaf(a.n, k)) return s3mm_rec(ctx, a, b, work);
  return unrolled_step<T>(ctx, a, b, 2, TileGrid{work, 7, 49, false},
                          [k](Ctx<T>& cx, const Block<T>& x, const Block<T>& y, const GridShape& t) {
                            return bfs_rec(cx, x, y, t, k);
                          });
}

template <class T>
void check_operands(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols()) throw std::invalid_argument("matrices must be square");
  if (a.rows() != b.rows()) throw std::invalid_argument("matrix sides differ");
  if (a.rows() == 0) throw std::invalid_argument("empty matrix");
}

template <class T>
Block<T> padded(const Matrix<T>& m, std::int64_t p) {
  Block<T> b{{0, 0}, p, std::vector<T>(std::size_t(p * p), T{})};
  for (std::int64_t i = 0; i < m.rows(); ++i)
    for (std::int64_t j = 0; j < m.cols(); ++j) b.v[std::size_t(i * p + j)] = m(i, j);
  return b;
}

template <class T>
AlgorithmResult<MatmulOutput<T>> run_strassen(const Matrix<T>& a, const Matrix<T>& b, const RunOptions& opts,
                                              std::int64_t k) {
  check_operands(a, b);
  const std::int64_t n = a.rows(), p = std::int64_t(ceil_pow2(std::uint64_t(n)));
  if (k >= n) k = p;
  Schedule sched(opts.limits, opts.record_trace);
  Ctx<T> ctx{sched, {}, {}};
  const Block<T> pa = padded(a, p), pb = padded(b, p);
  ctx.hold(pa, 2);
  const std::int64_t side = bfs_side(p, k);
  const GridShape work{side, side, {}};
  const Block<T> c = bfs_rec(ctx, pa, pb, work, k);

  MatmulOutput<T> out;
  out.c.resize(n, n);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) out.c(i, j) = c.get(i, j);
  out.overflow = ctx.ar.overflow;
  out.peak_words = ctx.mem.peak();
  out.grid_side = side;
  if (opts.limits.strict && out.peak_words > opts.limits.local_memory_words)
    throw ModelError("processor memory exceeds local_memory_words");
  return detail::finish(std::move(out), sched, work, opts);
}

}  // namespace

template <class T>
Matrix<T> multiply_oracle(const Matrix<T>& a, const Matrix<T>& b) {
  check_operands(a, b);
  const auto n = a.rows();
  Matrix<T> c = Matrix<T>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      for (Eigen::Index j = 0; j < n; ++j) {
        if constexpr (std::is_integral_v<T>)
          c(i, j) = T(std::uint64_t(c(i, j)) + std::uint64_t(a(i, k)) * std::uint64_t(b(k, j)));
        else
          c(i, j) += a(i, k) * b(k, j);
      }
  return c;
}

template <class T>
AlgorithmResult<MatmulOutput<T>> cannon(const Matrix<T>& a, const Matrix<T>& b, const RunOptions& opts) {
  check_operands(a, b);
  const std::int64_t n = a.rows();
  Schedule sched(opts.limits, opts.record_trace);
  Arith<T> ar;
  auto cell = [](std::int64_t i, std::int64_t j) { return Coord{std::int32_t(i), std::int32_t(j)}; };
  auto wrap = [n](std::int64_t x) { return (x % n + n) % n; };

  // Skew: row i of A moves i to the left, column j of B moves j up.
  Matrix<T> ca(n, n), cb(n, n);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      sched.send(cell(i, j), cell(i, wrap(j - i)), to_word(a(i, j)));
      sched.send(cell(i, j), cell(wrap(i - j), j), to_word(b(i, j)));
      ca(i, wrap(j - i)) = a(i, j);
      cb(wrap(i - j), j) = b(i, j);
    }

  Matrix<T> c = Matrix<T>::Zero(n, n);
  for (std::int64_t round = 0; round < n; ++round) {
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < n; ++j) c(i, j) = ar.add(c(i, j), ar.mul(ca(i, j), cb(i, j)));
    Matrix<T> na(n, n), nb(n, n);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < n; ++j) {
        sched.send(cell(i, j), cell(i, wrap(j - 1)), to_word(ca(i, j)));
        sched.send(cell(i, j), cell(wrap(i - 1), j), to_word(cb(i, j)));
        na(i, wrap(j - 1)) = ca(i, j);
        nb(wrap(i - 1), j) = cb(i, j);
      }
    ca.swap(na);
    cb.swap(nb);
  }

  MatmulOutput<T> out{std::move(c), ar.overflow, 3, n};
  return detail::finish(std::move(out), sched, {n, n, {}}, opts);
}

template <class T>
AlgorithmResult<MatmulOutput<T>> s3mm(const Matrix<T>& a, const Matrix<T>& b, const RunOptions& opts) {
  return run_strassen(a, b, opts, a.rows());
}

template <class T>
AlgorithmResult<MatmulOutput<T>> s3mm_bfs_dfs(const Matrix<T>& a, const Matrix<T>& b, const StrassenConfig& cfg,
                                              const RunOptions& opts) {
  check_operands(a, b);
  const std::int64_t k = cfg.cutoff ? cfg.cutoff : a.rows();
  if (k < 1 || k > a.rows()) throw std::invalid_argument("cutoff k must lie in [1, n]");
  return run_strassen(a, b, opts, k);
}

#define SPATIAL_MATMUL(T)                                                                                     \
  template Matrix<T> multiply_oracle(const Matrix<T>&, const Matrix<T>&);                                     \
  template AlgorithmResult<MatmulOutput<T>> cannon(const Matrix<T>&, const Matrix<T>&, const RunOptions&);    \
  template AlgorithmResult<MatmulOutput<T>> s3mm(const Matrix<T>&, const Matrix<T>&, const RunOptions&);      \
  template AlgorithmResult<MatmulOutput<T>> s3mm_bfs_dfs(const Matrix<T>&, const Matrix<T>&, const StrassenConfig&, \
                                                         const RunOptions&);
SPATIAL_MATMUL(std::int64_t)
SPATIAL_MATMUL(double)
#undef SPATIAL_MATMUL

}  // namespace spatial
