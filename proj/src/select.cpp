#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "detail.hpp"
#include "spatial/collectives.hpp"
#include "spatial/layout.hpp"
#include "spatial/sort.hpp"

namespace spatial {

namespace {

// Guards against pathological seeds; the expected count is a small constant.
constexpr unsigned kMaxIterations = 64;

// Candidate elements on a power-of-2 square, indexed by Z-order.
class Selector {
 public:
  Selector(Schedule& sched, std::uint64_t side, std::vector<Word> words, std::vector<bool> active,
           std::uint64_t seed)
      : sched_(sched), side_(side), words_(std::move(words)), active_(std::move(active)) {
    rngs_.reserve(words_.size());
    for (std::uint64_t z = 0; z < words_.size(); ++z) rngs_.emplace_back(seed, at(z));
  }

  Coord at(std::uint64_t z) const { return zorder_coord(z, side_); }
  GridShape grid() const { return {std::int64_t(side_), std::int64_t(side_), {}}; }

  // Current comparator order; a reversal flips every comparison.
  Word ord(Word w) const { return reversed_ ? ~w : w; }
  Word unord(Word w) const { return ord(w); }
  void reverse() { reversed_ = !reversed_; }

  // Each active processor joins the sample with probability `prob`.
  std::vector<bool> draw_sample(double prob) {
    std::vector<bool> s(words_.size(), false);
    for (std::uint64_t z = 0; z < words_.size(); ++z) {
      const double u = rngs_[z].uniform();
      s[z] = active_[z] && u < prob;
    }
    return s;
  }

  // Moves the flagged elements to the first wires of a row-major square at the
  // grid origin (a scan numbers them, a broadcast announces the count) and
  // sorts them in comparator order (bitonic, padding kept virtual). Returns the sorted ord-words and wires.
  std::vector<Word> gather_and_sort(const std::vector<bool>& flag, std::vector<Coord>& wires) {
    std::vector<Word> index(words_.size());
    for (std::uint64_t z = 0; z < words_.size(); ++z) index[z] = flag[z];
    scan_on(sched_, {0, 0}, side_, CombineOp::plus(), index);
    const std::uint64_t size = index.back();
    sched_.send(at(words_.size() - 1), {0, 0}, size);
    broadcast_on(sched_, grid(), size);

    const std::uint64_t p = ceil_pow2(std::max<std::uint64_t>(size, 1));
    std::uint64_t q = 1;
    while (q * q < p) q *= 2;
    wires.resize(p);
    for (std::uint64_t i = 0; i < p; ++i) wires[i] = {std::int32_t(i / q), std::int32_t(i % q)};
    std::vector<Word> keys(p);
    std::vector<Transfer> round;
    for (std::uint64_t z = 0; z < words_.size(); ++z)
      if (flag[z]) {
        const std::uint64_t i = index[z] - 1;
        keys[i] = ord(words_[z]);
        round.push_back({at(z), wires[i], words_[z]});
      }
    send_round(sched_, round);
    bitonic_on(sched_, wires, keys, size);
    keys.resize(size);
    return keys;
  }

  // Spreads the pivots and all-reduces (# active below lo, # active above hi).
  std::pair<std::uint64_t, std::uint64_t> count_outside(std::optional<Word> lo, Word hi) {
    if (lo) broadcast_on(sched_, grid(), *lo);
    broadcast_on(sched_, grid(), hi);
    const Word packed = reduce_on(sched_, grid(), CombineOp::plus(), [&](Coord c) -> Word {
      const auto z = std::size_t(zorder_rank(c, side_));
      if (!active_[z]) return 0;
      const Word w = ord(words_[z]);
      if (lo && w < *lo) return Word(1) << 32;
      return w > hi ? 1 : 0;
    });
    broadcast_on(sched_, grid(), packed);
    return {packed >> 32, packed & 0xFFFFFFFFu};
  }

  void deactivate_outside(std::optional<Word> lo, Word hi) {
    for (std::uint64_t z = 0; z < words_.size(); ++z)
      if (active_[z]) {
        const Word w = ord(words_[z]);
        if ((lo && w < *lo) || w > hi) active_[z] = false;
      }
  }

  const std::vector<bool>& active() const { return active_; }

 private:
  Schedule& sched_;
  std::uint64_t side_;
  std::vector<Word> words_;
  std::vector<bool> active_;
  std::vector<ProcessorRng> rngs_;
  bool reversed_ = false;
};

}  // namespace

AlgorithmResult<SelectOutput> rank_select(const std::vector<KeyedElement>& values, std::uint64_t k,
                                          const SelectConfig& cfg, const RunOptions& opts) {
  const std::uint64_t n = values.size();
  if (k < 1 || k > n) throw std::out_of_range("rank k out of range");
  if (!(cfg.c >= 3.0)) throw std::invalid_argument("selection constant c must be at least 3");
  detail::check_tags(values);

  std::uint64_t side = 1;
  while (side * side < n) side *= 2;
  const GridShape grid{std::int64_t(side), std::int64_t(side), {}};
  // Input is row-major; padding cells never become candidates.
  std::vector<Word> words(side * side);
  std::vector<bool> real(side * side, false);
  for (std::uint64_t i = 0; i < side * side; ++i) {
    const auto z = std::size_t(zorder_rank({std::int32_t(i / side), std::int32_t(i % side)}, side));
    words[z] = i < n ? values[i].packed() : sentinel_word(i);
    real[z] = i < n;
  }

  Schedule sched(opts.limits, opts.record_trace);
  Selector sel(sched, side, words, real, opts.seed);
  const double c = cfg.c;
  const double sqrt_ln_n = std::sqrt(std::log(double(std::max<std::uint64_t>(n, 2))));
  const double limit = c * std::sqrt(double(n));

  SelectOutput out;
  std::uint64_t big_n = n, rank = k;
  if (rank > (big_n + 1) / 2) {
    rank = big_n - rank + 1;
    sel.reverse();
  }

  auto fall_back = [&]() {
    // Sort everything with 2D Mergesort and read off the original rank.
    std::vector<Word> keys(side * side);
    for (std::uint64_t i = 0; i < side * side; ++i) keys[i] = i < n ? values[i].packed() : sentinel_word(i);
    mergesort_on(sched, grid, keys);
    out.fallback = true;
    out.element = KeyedElement::unpack(keys[k - 1]);
    sched.send({std::int32_t((k - 1) / side), std::int32_t((k - 1) % side)}, {0, 0}, keys[k - 1]);
  };

  while (double(big_n) > limit) {
    if (++out.iterations > kMaxIterations) {
      fall_back();
      return detail::finish(out, sched, grid, opts);
    }
    const double bn = double(big_n);
    const auto sample = sel.draw_sample(std::min(1.0, c / std::sqrt(bn)));
    std::vector<Coord> wires;
    const auto sorted = sel.gather_and_sort(sample, wires);
    const std::uint64_t s = sorted.size();
    if (s == 0) continue;

    const double spread = c / 2 * std::pow(bn, 0.25) * sqrt_ln_n;
    const double centre = c * double(rank) / std::sqrt(bn);
    const auto r = std::uint64_t(std::clamp(std::floor(centre + spread), 1.0, double(s)));
    std::optional<std::uint64_t> l;
    if (double(rank) >= 0.5 * std::pow(bn, 0.75) * sqrt_ln_n && centre - spread >= 1.0)
      l = std::min<std::uint64_t>(std::uint64_t(std::floor(centre - spread)), r);

    // Pivots travel from their wires to the root before being spread.
    sched.send(wires[r - 1], {0, 0}, sorted[r - 1]);
    std::optional<Word> lo;
    if (l) {
      sched.send(wires[*l - 1], {0, 0}, sorted[*l - 1]);
      lo = sorted[*l - 1];
    }
    const Word hi = sorted[r - 1];
    const auto [below, above] = sel.count_outside(lo, hi);
    if (below >= rank || above >= big_n - rank) {
      fall_back();
      return detail::finish(out, sched, grid, opts);
    }
    rank -= below;
    sel.deactivate_outside(lo, hi);
    big_n -= below + above;
    if (rank > (big_n + 1) / 2) {
      rank = big_n - rank + 1;
      sel.reverse();
    }
  }

  std::vector<Coord> wires;
  const auto sorted = sel.gather_and_sort(sel.active(), wires);
  if (sorted.size() != big_n) throw std::logic_error("active count out of sync");
  sched.send(wires[rank - 1], {0, 0}, sorted[rank - 1]);
  out.element = KeyedElement::unpack(sel.unord(sorted[rank - 1]));
  return detail::finish(out, sched, grid, opts);
}

}  // namespace spatial
