// spatial: experiment runner for the spatial computer library.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "spatial/bench.hpp"
#include "spatial/bridge.hpp"

using namespace spatial;

namespace {

// Output file for `name`: the explicit path, else $SPATIAL_OUT_DIR/name, else
// empty for stdout.
std::string output_path(const std::string& explicit_path, const std::string& name) {
  if (!explicit_path.empty()) return explicit_path;
  if (const char* dir = std::getenv("SPATIAL_OUT_DIR"); dir && *dir) {
    std::filesystem::create_directories(dir);
    return (std::filesystem::path(dir) / name).string();
  }
  return {};
}

template <class F>
void with_output(const std::string& path, F write) {
  if (path.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write(out);
  std::cerr << "wrote " << path << '\n';
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return in;
}

void print_fit(const Fit& f) {
  std::cout << std::fixed << std::setprecision(4) << "slope " << f.slope << "  intercept " << f.intercept << "  r2 "
            << f.r2 << "  sizes " << f.sizes << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial computer experiments: run algorithms, fit scaling exponents, check bounds."};
  app.require_subcommand(1);

  ModelLimits limits;
  auto add_limits = [&](CLI::App* cmd) {
    cmd->add_option("--queue", limits.queue_capacity, "arrivals per processor per step");
    cmd->add_option("--memory", limits.local_memory_words, "local memory words per processor");
    cmd->add_flag("--strict", limits.strict, "throw on model violations");
  };

  ExperimentSpec spec;
  std::string out, format = "csv";
  auto* run = app.add_subcommand("run", "run an algorithm over a size list");
  run->add_option("--algo", spec.algo, "algorithm id (see `list`)")->required();
  run->add_option("--sizes", spec.sizes, "comma-separated sizes")->delimiter(',')->required();
  run->add_option("--seed", spec.seed, "first seed");
  run->add_option("--reps", spec.reps, "seeds per size");
  run->add_option("--jobs", spec.jobs, "runs in flight");
  run->add_option("--out", out, "output file (default $SPATIAL_OUT_DIR/<algo>.<format>, else stdout)");
  run->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  bool no_audit = false;
  run->add_flag("--no-audit", no_audit, "skip trace recording; costs from the online ledger");
  add_limits(run);

  std::string in, metric = "energy";
  auto* fit = app.add_subcommand("fit", "fit log2(metric) against log2(n)");
  fit->add_option("--in", in, "records (CSV or JSON)")->required();
  fit->add_option("--metric", metric, "energy, depth or wire")->check(CLI::IsMember({"energy", "depth", "wire", "wire_depth"}));
  std::string algo_filter;
  fit->add_option("--algo", algo_filter, "only records of this algorithm");

  std::string expect, report;
  auto* verify = app.add_subcommand("verify", "check fitted exponents against expected bands; exit 0 iff all pass");
  verify->add_option("--in", in, "records; without it every expectation runs its own sizes");
  verify->add_option("--expect", expect, "expectations JSON")->required();
  verify->add_option("--report", report, "write the report as JSON");

  std::uint64_t h = 1, w = 1;
  auto* lower = app.add_subcommand("lowerbound", "reversal-permutation energy of an h x w grid");
  lower->set_help_flag("--help", "print this help message and exit");  // frees -h for --h
  lower->add_option("--h", h)->required()->check(CLI::PositiveNumber);
  lower->add_option("--w", w)->required()->check(CLI::PositiveNumber);

  std::uint64_t n = 0;
  auto* trace = app.add_subcommand("trace", "dump one run's trace as JSON lines");
  trace->add_option("--algo", spec.algo)->required();
  trace->add_option("--n", n)->required();
  trace->add_option("--seed", spec.seed);
  trace->add_option("--out", out, "output file (default $SPATIAL_OUT_DIR/<algo>-<n>.jsonl, else stdout)");
  add_limits(trace);

  std::string script, mode = "erew";
  auto* pram = app.add_subcommand("pram", "run a PRAM step script on the spatial computer");
  pram->add_option("--script", script, "JSON step script")->required();
  pram->add_option("--mode", mode, "erew or crcw")->check(CLI::IsMember({"erew", "crcw"}));

  std::string trace_in;
  SfatConfig sfat;
  auto* coarsen = app.add_subcommand("coarsen", "re-cost a trace for S-fat processors");
  coarsen->add_option("--trace", trace_in, "JSON-lines trace")->required();
  coarsen->add_option("--S", sfat.S, "words per fat processor")->required();
  coarsen->add_option("--c", sfat.c, "words per original processor");

  auto* list = app.add_subcommand("list", "algorithm ids and their sizes");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      spec.limits = limits;
      spec.audit = !no_audit;
      const auto rows = run_suite(spec);
      with_output(output_path(out, spec.algo + "." + format), [&](std::ostream& o) {
        if (format == "json")
          write_records_json(o, rows);
        else
          write_records_csv(o, rows);
      });
    } else if (*fit) {
      auto file = open_in(in);
      auto rows = read_records(file);
      if (!algo_filter.empty()) std::erase_if(rows, [&](const auto& r) { return r.algo != algo_filter; });
      print_fit(fit_exponent(rows, metric_from(metric)));
    } else if (*verify) {
      auto file = open_in(expect);
      const auto expectations = read_expectations(file);
      std::vector<BoundCheck> checks;
      if (!in.empty()) {
        auto rf = open_in(in);
        checks = verify_bounds(read_records(rf), expectations);
      } else {
        for (const auto& e : expectations) {
          ExperimentSpec s;
          s.algo = e.algo;
          s.sizes = e.sizes;
          s.reps = e.reps;
          s.audit = false;
          auto part = verify_bounds(run_suite(s), {e});
          checks.insert(checks.end(), part.begin(), part.end());
        }
      }
      bool all = true;
      for (const auto& c : checks) {
        all = all && c.pass;
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.expectation.algo << ' ' << to_string(c.expectation.metric)
                  << " band [" << c.expectation.lo << ", " << c.expectation.hi << "]";
        if (c.fit) std::cout << " slope " << std::fixed << std::setprecision(3) << c.fit->slope << std::defaultfloat;
        if (!c.error.empty()) std::cout << " error: " << c.error;
        std::cout << '\n';
      }
      if (!report.empty()) with_output(report, [&](std::ostream& o) { write_report_json(o, checks); });
      return all ? 0 : 1;
    } else if (*lower) {
      const std::uint64_t e = permutation_lower_bound(h, w);
      const double big = double(std::max(h, w)), small = double(std::min(h, w));
      std::cout << "reversal energy " << e << "\nlower bound max^2*min/9 = " << big * big * small / 9 << '\n';
    } else if (*trace) {
      Trace t;
      run_one(spec.algo, n, spec.seed, limits, false, &t);
      with_output(output_path(out, spec.algo + "-" + std::to_string(n) + ".jsonl"),
                  [&](std::ostream& o) { write_trace_jsonl(o, t); });
    } else if (*pram) {
      auto file = open_in(script);
      const auto prog = read_pram_json(file);
      const auto r = mode == "erew" ? simulate_erew(prog) : simulate_crcw(prog);
      std::cout << "steps " << r.values.steps << "  energy " << r.ledger.energy << "  depth " << r.ledger.depth
                << "  wire_depth " << r.ledger.wire_depth << "\nmemory";
      for (auto v : r.values.memory) std::cout << ' ' << v;
      std::cout << '\n';
    } else if (*coarsen) {
      auto file = open_in(trace_in);
      const Trace t = read_trace_jsonl(file);
      const auto before = audit(t), after = coarsen_sfat(t, sfat);
      std::cout << "block " << sfat.block() << "\nenergy " << before.energy << " -> " << after.energy << "\ndepth "
                << before.depth << " -> " << after.depth << "\nwire_depth " << before.wire_depth << " -> "
                << after.wire_depth << '\n';
    } else if (*list) {
      for (const auto& a : algorithms()) std::cout << std::left << std::setw(16) << a.id << std::setw(12) << a.sizes << a.what << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
