#include "spatial/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <map>
#include <random>
#include <stdexcept>

#include "spatial/bridge.hpp"
#include "spatial/collectives.hpp"
#include "spatial/layout.hpp"
#include "spatial/matmul.hpp"
#include "spatial/sort.hpp"

namespace spatial {

namespace {

// FNV-1a, so input streams do not depend on the standard library's hash.
std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

enum class SizeRule { Pow4, Pow2, PramSize };

struct Runner {
  AlgorithmInfo info;
  SizeRule rule;
  std::uint64_t max_n;
  // Runs with `opts`, returns the ledger, the trace when recorded, and fills h, w.
  std::function<std::pair<CostLedger, std::optional<Trace>>(std::uint64_t n, std::mt19937_64& gen,
                                                            const RunOptions& opts, GridShape& grid)>
      run;
};

template <class R>
std::pair<CostLedger, std::optional<Trace>> unpack(R&& r) {
  return {r.ledger, std::move(r.trace)};
}

std::vector<Word> random_words(std::uint64_t n, std::mt19937_64& gen) {
  std::vector<Word> v(n);
  for (auto& x : v) x = gen() % 1000;
  return v;
}

std::vector<KeyedElement> random_elements(std::uint64_t n, std::mt19937_64& gen) {
  std::vector<std::uint32_t> keys(n);
  for (auto& k : keys) k = std::uint32_t(gen() % (4 * n + 1));
  return make_elements(keys);
}

IntMatrix random_matrix(std::uint64_t n, std::mt19937_64& gen) {
  IntMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::int64_t(gen() % 21) - 10;
  return m;
}

GridShape square(std::uint64_t n) {
  const auto s = std::int64_t(isqrt(n));
  return {s, s, {}};
}

template <class F>
std::pair<CostLedger, std::optional<Trace>> matmul_run(std::uint64_t n, std::mt19937_64& gen, GridShape& grid, F f) {
  const IntMatrix a = random_matrix(n, gen), b = random_matrix(n, gen);
  auto r = f(a, b);
  grid = {r.values.grid_side, r.values.grid_side, {}};
  return unpack(r);
}

std::pair<CostLedger, std::optional<Trace>> pram_run(std::uint64_t n, std::mt19937_64& gen, const RunOptions& opts,
                                                     GridShape& grid, PramMode mode) {
  const auto prog = random_pram_program(gen(), mode, n, n, 8);
  auto r = mode == PramMode::Erew ? simulate_erew(prog, opts) : simulate_crcw(prog, opts);
  const std::uint64_t side = ceil_pow2(isqrt(n - 1) + 1), width = isqrt(n - 1) + 1;
  grid = {std::int64_t(side), std::int64_t(side + 1 + width), {}};
  return unpack(r);
}

const std::vector<Runner>& runners() {
  static const std::vector<Runner> table = [] {
    std::vector<Runner> t;
    auto add = [&](std::string id, SizeRule rule, std::uint64_t max_n, std::string what, auto fn) {
      static const char* rules[] = {"power of 4", "power of 2", "1..65535"};
      t.push_back({{std::move(id), rules[int(rule)], std::move(what)}, rule, max_n, fn});
    };
    constexpr std::uint64_t kBig = std::uint64_t(1) << 40;
    add("broadcast", SizeRule::Pow4, kBig, "one word to every processor of the sqrt(n) square",
        [](std::uint64_t n, std::mt19937_64& gen, const RunOptions& o, GridShape& g) {
          g = square(n);
          return unpack(broadcast(gen() % 1000, g, o));
        });
    add("reduce", SizeRule::Pow4, kBig, "sum to the corner",
        [](std::uint64_t n, std::mt19937_64& gen, const RunOptions& o, GridShape& g) {
          g = square(n);
          return unpack(reduce(CombineOp::plus(), random_words(n, gen), g, o));
        });
    add("all_reduce", SizeRule::Pow4, kBig, "sum to every processor",
        [](std::uint64_t n, std::mt19937_64& gen, const RunOptions& o, GridShape& g) {
          g = square(n);
          return unpack(all_reduce(CombineOp::plus(), random_words(n, gen), g, o));
        });
    add("scan", SizeRule::Pow4, kBig, "inclusive prefix sum in Z-order",
        [](std::uint64_t n, std::mt19937_64& gen, const RunOptions& o, GridShape& g) {
          g = square(n);
          return unpack(scan(CombineOp::plus(), random_words(n, gen), o));
        });
    add("segmented_scan", SizeRule::Pow4, kBig, "segmented prefix sum, segment starts with probability 1/8",
        [](std::uint64_t n, std::mt19937_64& gen, const RunOptions& o, GridShape& g) {
          g = square(n);
          std::vector<SegmentedValue> v(n);
          for (auto& x : v) x = {gen() % 1000, gen() % 8 == 0};
          return unpack(segmented_scan(CombineOp::plus(), v, o));
        });
    add("permutation", SizeRule::Pow4, kBig, "reversal of the sqrt(n) square, every element sent directly",
        [](std::uint64_t n, std::mt19937_64&, const RunOptions& o, GridShape& g) {
          g = square(n);
          PermutationPlan plan;
          plan.layout = LayoutKind::row_major(std::uint64_t(g.h), std::uint64_t(g.w));
          for (std::uint64_t i = 0; i < n; ++i) plan.target.push_back(n - 1 - i);
          Trace t = route_permutation(plan, g, o.limits);
          const CostLedger l = audit(t);
          return std::pair<CostLedger, std::optional<Trace>>{l, o.record_trace ? std::optional(std::move(t)) : std::nullopt};
        });
    add("bitonic", SizeRule::Pow4, kBig, "bitonic sorting network on the sqrt(n) square",
        [](std::uint64_t n, std::mt19937_64& gen, const RunOptions& o, GridShape& g) {
          g = square(n);
          return unpack(bitonic_sort(random_elements(n, gen), g.h, g.w, o));
        });
    add("mergesort", SizeRule::Pow4, kBig, "2D Mergesort",
        [](std::uint64_t n, std::mt19937_64& gen, const RunOptions& o, GridShape& g) {
          g = square(n);
          return unpack(mergesort_2d(random_elements(n, gen), o));
        });
    add("merge", SizeRule::Pow4, kBig, "merge of two sorted halves",
        [](std::uint64_t n, std::mt19937_64& gen, const RunOptions& o, GridShape& g) {
          g = square(n);
          auto all = random_elements(n, gen);
          MergeInstance inst{{all.begin(), all.begin() + std::ptrdiff_t(n / 2)}, {all.begin() + std::ptrdiff_t(n / 2), all.end()}};
          std::sort(inst.a.begin(), inst.a.end());
          std::sort(inst.b.begin(), inst.b.end());
          return unpack(merge_sorted(inst, o));
        });
    add("all_pairs", SizeRule::Pow4, std::uint64_t(1) << 12, "all-pairs ranking on an n x n working grid",
        [](std::uint64_t n, std::mt19937_64& gen, const RunOptions& o, GridShape& g) {
          const auto s = std::int64_t(isqrt(n));
          g = {std::max<std::int64_t>(s, std::int64_t(n)), s + std::int64_t(n), {}};
          return unpack(all_pairs_sort(random_elements(n, gen), o));
        });
    add("select", SizeRule::Pow4, kBig, "randomized median selection",
        [](std::uint64_t n, std::mt19937_64& gen, const RunOptions& o, GridShape& g) {
          g = square(n);
          return unpack(rank_select(random_elements(n, gen), (n + 1) / 2, {}, o));
        });
    add("cannon", SizeRule::Pow2, 1 << 10, "Cannon's algorithm, n x n matrices",
        [](std::uint64_t n, std::mt19937_64& gen, const RunOptions& o, GridShape& g) {
          return matmul_run(n, gen, g, [&](const IntMatrix& a, const IntMatrix& b) { return cannon(a, b, o); });
        });
    add("s3mm", SizeRule::Pow2, 1 << 10, "space-sharing Strassen, n x n matrices",
        [](std::uint64_t n, std::mt19937_64& gen, const RunOptions& o, GridShape& g) {
          return matmul_run(n, gen, g, [&](const IntMatrix& a, const IntMatrix& b) { return s3mm(a, b, o); });
        });
    add("bfs_dfs", SizeRule::Pow2, 1 << 10, "breadth-first Strassen down to side 8, then s3mm",
        [](std::uint64_t n, std::mt19937_64& gen, const RunOptions& o, GridShape& g) {
          return matmul_run(n, gen, g, [&](const IntMatrix& a, const IntMatrix& b) {
            return s3mm_bfs_dfs(a, b, {std::min<std::int64_t>(8, std::int64_t(n))}, o);
          });
        });
    add("pram_erew", SizeRule::PramSize, kPramMaxCells, "random 8-step EREW script, p = m = n",
        [](std::uint64_t n, std::mt19937_64& gen, const RunOptions& o, GridShape& g) {
          return pram_run(n, gen, o, g, PramMode::Erew);
        });
    add("pram_crcw", SizeRule::PramSize, kPramMaxCells, "random 8-step priority CRCW script, p = m = n",
        [](std::uint64_t n, std::mt19937_64& gen, const RunOptions& o, GridShape& g) {
          return pram_run(n, gen, o, g, PramMode::PriorityCrcw);
        });
    return t;
  }();
  return table;
}

const Runner& runner(const std::string& algo) {
  for (const auto& r : runners())
    if (r.info.id == algo) return r;
  throw std::invalid_argument("unknown algorithm '" + algo + "'");
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : (v[k - 1] + v[k]) / 2;
}

double metric_value(const ScalingRecord& r, Metric m) {
  switch (m) {
    case Metric::Energy: return double(r.energy);
    case Metric::Depth: return double(r.depth);
    case Metric::WireDepth: return double(r.wire_depth);
  }
  return 0;
}

}  // namespace

std::string to_string(Metric m) {
  switch (m) {
    case Metric::Energy: return "energy";
    case Metric::Depth: return "depth";
    case Metric::WireDepth: return "wire_depth";
  }
  return "unknown";
}

Metric metric_from(const std::string& s) {
  if (s == "energy") return Metric::Energy;
  if (s == "depth") return Metric::Depth;
  if (s == "wire" || s == "wire_depth") return Metric::WireDepth;
  throw std::invalid_argument("unknown metric '" + s + "'");
}

bool ScalingRecord::same_costs(const ScalingRecord& o) const {
  return algo == o.algo && n == o.n && h == o.h && w == o.w && seed == o.seed && energy == o.energy &&
         depth == o.depth && wire_depth == o.wire_depth && messages == o.messages && steps == o.steps;
}

const std::vector<AlgorithmInfo>& algorithms() {
  static const std::vector<AlgorithmInfo> infos = [] {
    std::vector<AlgorithmInfo> v;
    for (const auto& r : runners()) v.push_back(r.info);
    return v;
  }();
  return infos;
}

void check_size(const std::string& algo, std::uint64_t n) {
  const Runner& r = runner(algo);
  bool ok = n >= 1 && n <= r.max_n;
  if (r.rule == SizeRule::Pow4) ok = ok && is_pow4(n);
  if (r.rule == SizeRule::Pow2) ok = ok && is_pow2(n);
  if (!ok)
    throw std::invalid_argument(algo + " takes sizes that are a " + r.info.sizes + " up to " + std::to_string(r.max_n) +
                                ", not " + std::to_string(n));
}

ScalingRecord run_one(const std::string& algo, std::uint64_t n, std::uint64_t seed, const ModelLimits& limits,
                      bool audit_trace, Trace* trace) {
  check_size(algo, n);
  RunOptions opts;
  opts.limits = limits;
  opts.seed = seed;
  opts.record_trace = audit_trace || trace;
  std::mt19937_64 gen(stable_hash(algo) ^ (seed * 0x9E3779B97F4A7C15ULL) ^ n);
  GridShape grid;

  const auto start = std::chrono::steady_clock::now();
  auto [ledger, recorded] = runner(algo).run(n, gen, opts, grid);
  const auto stop = std::chrono::steady_clock::now();
  if (audit_trace) ledger = audit(*recorded);
  if (trace) *trace = std::move(*recorded);

  ScalingRecord rec;
  rec.algo = algo;
  rec.n = n;
  rec.h = std::uint64_t(grid.h);
  rec.w = std::uint64_t(grid.w);
  rec.seed = seed;
  rec.energy = ledger.energy;
  rec.depth = ledger.depth;
  rec.wire_depth = ledger.wire_depth;
  rec.messages = ledger.messages;
  rec.steps = ledger.steps;
  rec.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  return rec;
}

std::vector<ScalingRecord> run_suite(const ExperimentSpec& spec) {
  for (auto n : spec.sizes) check_size(spec.algo, n);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> runs;  // (n, seed)
  for (auto n : spec.sizes)
    for (unsigned r = 0; r < std::max(1u, spec.reps); ++r) runs.push_back({n, spec.seed + r});

  std::vector<ScalingRecord> rows(runs.size());
  auto one = [&](std::size_t i) {
    rows[i] = run_one(spec.algo, runs[i].first, runs[i].second, spec.limits, spec.audit);
  };
  if (spec.jobs <= 1) {
    for (std::size_t i = 0; i < runs.size(); ++i) one(i);
  } else {
    for (std::size_t base = 0; base < runs.size(); base += spec.jobs) {
      std::vector<std::future<void>> batch;
      for (std::size_t i = base; i < std::min(runs.size(), base + spec.jobs); ++i)
        batch.push_back(std::async(std::launch::async, one, i));
      for (auto& f : batch) f.get();
    }
  }
  return rows;
}

Fit fit_points(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw std::invalid_argument("a fit needs at least 3 sizes");
  double mx = 0, my = 0;
  for (const auto& [x, y] : points) {
    mx += x;
    my += y;
  }
  mx /= double(points.size());
  my /= double(points.size());
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (sxx == 0) throw std::invalid_argument("a fit needs at least 3 distinct sizes");
  Fit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss_res = 0;
  for (const auto& [x, y] : points) ss_res += std::pow(y - f.intercept - f.slope * x, 2);
  f.r2 = syy == 0 ? 1.0 : 1.0 - ss_res / syy;
  f.sizes = points.size();
  return f;
}

Fit fit_exponent(const std::vector<ScalingRecord>& records, Metric metric) {
  std::map<std::uint64_t, std::vector<double>> by_n;
  for (const auto& r : records) by_n[r.n].push_back(metric_value(r, metric));
  std::vector<std::pair<double, double>> points;
  for (const auto& [n, vals] : by_n) {
    const double m = median(vals);
    if (m <= 0) throw std::invalid_argument(to_string(metric) + " is zero at n = " + std::to_string(n));
    points.push_back({std::log2(double(n)), std::log2(m)});
  }
  return fit_points(points);
}

std::vector<BoundCheck> verify_bounds(const std::vector<ScalingRecord>& records,
                                      const std::vector<BoundExpectation>& expectations) {
  std::vector<BoundCheck> out;
  for (const auto& e : expectations) {
    BoundCheck c{e, std::nullopt, false, {}};
    std::vector<ScalingRecord> mine;
    for (const auto& r : records)
      if (e.algo.empty() || r.algo == e.algo) mine.push_back(r);
    try {
      c.fit = fit_exponent(mine, e.metric);
      c.pass = c.fit->slope >= e.lo && c.fit->slope <= e.hi;
    } catch (const std::invalid_argument& err) {
      c.error = err.what();
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::uint64_t permutation_lower_bound(std::uint64_t h, std::uint64_t w) { return reversal_energy(h, w); }

}  // namespace spatial
