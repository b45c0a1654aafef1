#include <charconv>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "spatial/bench.hpp"

namespace spatial {

namespace {

using nlohmann::json;

constexpr const char* kHeader = "algo,n,h,w,seed,energy,depth,wire_depth,messages,steps,wall_ms";

json to_json(const ScalingRecord& r) {
  return {{"algo", r.algo},         {"n", r.n},         {"h", r.h},
          {"w", r.w},               {"seed", r.seed},   {"energy", r.energy},
          {"depth", r.depth},       {"wire_depth", r.wire_depth}, {"messages", r.messages},
          {"steps", r.steps},       {"wall_ms", r.wall_ms}};
}

ScalingRecord record_from(const json& j) {
  ScalingRecord r;
  r.algo = j.at("algo").get<std::string>();
  r.n = j.at("n").get<std::uint64_t>();
  r.h = j.at("h").get<std::uint64_t>();
  r.w = j.at("w").get<std::uint64_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.energy = j.at("energy").get<std::uint64_t>();
  r.depth = j.at("depth").get<std::uint64_t>();
  r.wire_depth = j.at("wire_depth").get<std::uint64_t>();
  r.messages = j.at("messages").get<std::uint64_t>();
  r.steps = j.at("steps").get<std::uint64_t>();
  r.wall_ms = j.at("wall_ms").get<double>();
  return r;
}

std::uint64_t to_u64(const std::string& s) {
  std::size_t used = 0;
  const auto v = std::stoull(s, &used);
  if (used != s.size()) throw std::invalid_argument("bad integer field '" + s + "'");
  return v;
}

// Shortest text that reads back to the same double.
std::string shortest(double x) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

}  // namespace

void write_records_csv(std::ostream& out, const std::vector<ScalingRecord>& rows) {
  out << kHeader << '\n';
  for (const auto& r : rows)
    out << r.algo << ',' << r.n << ',' << r.h << ',' << r.w << ',' << r.seed << ',' << r.energy << ',' << r.depth
        << ',' << r.wire_depth << ',' << r.messages << ',' << r.steps << ',' << shortest(r.wall_ms) << '\n';
}

std::vector<ScalingRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(kHeader, 0) != 0) throw std::runtime_error("missing CSV header");
  std::vector<ScalingRecord> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    if (f.size() != 11) throw std::runtime_error("CSV row needs 11 fields: " + line);
    ScalingRecord r;
    r.algo = f[0];
    r.n = to_u64(f[1]);
    r.h = to_u64(f[2]);
    r.w = to_u64(f[3]);
    r.seed = to_u64(f[4]);
    r.energy = to_u64(f[5]);
    r.depth = to_u64(f[6]);
    r.wire_depth = to_u64(f[7]);
    r.messages = to_u64(f[8]);
    r.steps = to_u64(f[9]);
    r.wall_ms = std::stod(f[10]);
    rows.push_back(r);
  }
  return rows;
}

void write_records_json(std::ostream& out, const std::vector<ScalingRecord>& rows) {
  json j = json::array();
  for (const auto& r : rows) j.push_back(to_json(r));
  out << j.dump(1) << '\n';
}

std::vector<ScalingRecord> read_records_json(std::istream& in) {
  std::vector<ScalingRecord> rows;
  try {
    for (const auto& j : json::parse(in)) rows.push_back(record_from(j));
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad records file: ") + e.what());
  }
  return rows;
}

std::vector<ScalingRecord> read_records(std::istream& in) {
  in >> std::ws;
  return in.peek() == '[' ? read_records_json(in) : read_records_csv(in);
}

std::vector<BoundExpectation> read_expectations(std::istream& in) {
  std::vector<BoundExpectation> out;
  try {
    const json doc = json::parse(in);
    for (const auto& j : doc.at("expectations")) {
      BoundExpectation e;
      e.algo = j.value("algo", std::string());
      e.metric = metric_from(j.at("metric").get<std::string>());
      e.exponent = j.at("exponent").get<double>();
      if (j.contains("band")) {
        e.lo = j.at("band").at(0).get<double>();
        e.hi = j.at("band").at(1).get<double>();
      } else {
        const double t = j.at("tolerance").get<double>();
        e.lo = e.exponent - t;
        e.hi = e.exponent + t;
      }
      if (!(e.lo <= e.hi)) throw std::invalid_argument("empty band for " + e.algo);
      e.log_factor = j.value("log_factor", false);
      e.sizes = j.value("sizes", std::vector<std::uint64_t>{});
      e.reps = j.value("reps", 1u);
      e.source = j.value("source", std::string());
      out.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("bad expectations file: ") + e.what());
  }
  return out;
}

void write_report_json(std::ostream& out, const std::vector<BoundCheck>& checks) {
  json j = json::array();
  for (const auto& c : checks) {
    json row{{"algo", c.expectation.algo},
             {"metric", to_string(c.expectation.metric)},
             {"exponent", c.expectation.exponent},
             {"band", {c.expectation.lo, c.expectation.hi}},
             {"log_factor", c.expectation.log_factor},
             {"pass", c.pass}};
    if (c.fit) row["fit"] = {{"slope", c.fit->slope}, {"intercept", c.fit->intercept}, {"r2", c.fit->r2}};
    if (!c.error.empty()) row["error"] = c.error;
    if (!c.expectation.source.empty()) row["source"] = c.expectation.source;
    j.push_back(std::move(row));
  }
  out << j.dump(1) << '\n';
}

}  // namespace spatial
