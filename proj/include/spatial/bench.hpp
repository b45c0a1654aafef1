#pragma once

// Experiment runner: runs library algorithms over size grids, fits scaling
// exponents and checks them against expected bounds.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spatial/core.hpp"

namespace spatial {

enum class Metric { Energy, Depth, WireDepth };

std::string to_string(Metric m);
/// Accepts energy, depth, wire and wire_depth.
Metric metric_from(const std::string& s);

struct ExperimentSpec {
  std::string algo;
  std::vector<std::uint64_t> sizes;
  std::uint64_t seed = 1;
  unsigned reps = 1;  // seeds seed, seed + 1, ...
  ModelLimits limits{};
  bool audit = true;  // record every trace and take costs from audit()
  unsigned jobs = 1;
};

struct ScalingRecord {
  std::string algo;
  std::uint64_t n = 0;
  std::uint64_t h = 0;
  std::uint64_t w = 0;
  std::uint64_t seed = 0;
  std::uint64_t energy = 0;
  std::uint64_t depth = 0;
  std::uint64_t wire_depth = 0;
  std::uint64_t messages = 0;
  std::uint64_t steps = 0;
  double wall_ms = 0;

  bool same_costs(const ScalingRecord& o) const;
};

struct AlgorithmInfo {
  std::string id;
  std::string sizes;  // size rule, e.g. "power of 4"
  std::string what;
};

const std::vector<AlgorithmInfo>& algorithms();

/// Throws std::invalid_argument for unknown ids and sizes the algorithm
/// does not take.
void check_size(const std::string& algo, std::uint64_t n);

/// One run. Inputs are pseudo-random functions of (algo, n, seed).
ScalingRecord run_one(const std::string& algo, std::uint64_t n, std::uint64_t seed, const ModelLimits& limits = {},
                      bool audit = true, Trace* trace = nullptr);

/// Rows ordered by (n, seed) regardless of `jobs`.
std::vector<ScalingRecord> run_suite(const ExperimentSpec& spec);

struct Fit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
  std::size_t sizes = 0;
};

/// Least squares of log2(metric) on log2(n) over the per-size medians.
/// Throws std::invalid_argument with fewer than 3 sizes or a zero metric.
Fit fit_exponent(const std::vector<ScalingRecord>& records, Metric metric);
/// Plain least squares on points already in log space.
Fit fit_points(const std::vector<std::pair<double, double>>& points);

struct BoundExpectation {
  std::string algo;
  Metric metric = Metric::Energy;
  double exponent = 0;
  double lo = 0;  // band for the fitted slope
  double hi = 0;
  bool log_factor = false;
  std::vector<std::uint64_t> sizes;  // used when verify runs the suite itself
  unsigned reps = 1;
  std::string source;
};

struct BoundCheck {
  BoundExpectation expectation;
  std::optional<Fit> fit;
  bool pass = false;
  std::string error;
};

/// Fits every expectation on the records of its algorithm. An expectation
/// without enough data fails with an error message.
std::vector<BoundCheck> verify_bounds(const std::vector<ScalingRecord>& records,
                                      const std::vector<BoundExpectation>& expectations);

/// Exact reversal distance sum of an h x w grid; at least max(h,w)^2 min(h,w) / 9.
std::uint64_t permutation_lower_bound(std::uint64_t h, std::uint64_t w);

// Files -----------------------------------------------------------------------

/// CSV header: algo,n,h,w,seed,energy,depth,wire_depth,messages,steps,wall_ms
void write_records_csv(std::ostream& out, const std::vector<ScalingRecord>& rows);
std::vector<ScalingRecord> read_records_csv(std::istream& in);
void write_records_json(std::ostream& out, const std::vector<ScalingRecord>& rows);
std::vector<ScalingRecord> read_records_json(std::istream& in);
/// Picks the format from the first non-blank character.
std::vector<ScalingRecord> read_records(std::istream& in);

/// {"expectations": [{"algo": "scan", "metric": "energy", "exponent": 1.0,
///   "band": [0.95, 1.10], "log_factor": false, "sizes": [64, 256], "reps": 1,
///   "source": "..."}]}. "tolerance": t may replace "band" (exponent +- t).
std::vector<BoundExpectation> read_expectations(std::istream& in);
void write_report_json(std::ostream& out, const std::vector<BoundCheck>& checks);

}  // namespace spatial
