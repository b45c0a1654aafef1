#include <algorithm>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"
#include "spatial/core.hpp"

namespace spatial {

using nlohmann::json;

namespace {
json coord_json(Coord c) { return json::array({c.row, c.col}); }
Coord coord_from(const json& j) { return {j.at(0).get<std::int32_t>(), j.at(1).get<std::int32_t>()}; }
}  // namespace

void write_trace_jsonl(std::ostream& out, const Trace& trace) {
  json header = {
      {"shape", {{"h", trace.shape.h}, {"w", trace.shape.w}, {"origin", coord_json(trace.shape.origin)}}},
      {"seed", trace.seed},
      {"steps", trace.steps},
      {"limits",
       {{"queue_capacity", trace.limits.queue_capacity},
        {"local_memory_words", trace.limits.local_memory_words},
        {"sends_per_step", trace.limits.sends_per_step},
        {"strict", trace.limits.strict}}},
  };
  out << header.dump() << '\n';
  for (const auto& e : trace.events) {
    // Fixed key order keeps the output byte-identical across runs.
    out << "{\"step\":" << e.send_step << ",\"src\":[" << e.src.row << ',' << e.src.col << "],\"dst\":["
        << e.dst.row << ',' << e.dst.col << "],\"payload\":" << e.payload << ",\"cost\":" << e.cost
        << ",\"depth\":" << e.depth << ",\"wire\":" << e.wire << "}\n";
  }
}

Trace read_trace_jsonl(std::istream& in) {
  Trace t;
  std::string line;
  if (!std::getline(in, line)) throw ModelError("empty trace stream");
  const json header = json::parse(line);
  t.shape.h = header.at("shape").at("h").get<std::int64_t>();
  t.shape.w = header.at("shape").at("w").get<std::int64_t>();
  t.shape.origin = coord_from(header.at("shape").at("origin"));
  t.seed = header.at("seed").get<std::uint64_t>();
  t.steps = header.value("steps", std::uint64_t(0));
  const auto& lim = header.at("limits");
  t.limits.queue_capacity = lim.at("queue_capacity").get<std::uint32_t>();
  t.limits.local_memory_words = lim.at("local_memory_words").get<std::uint32_t>();
  t.limits.sends_per_step = lim.at("sends_per_step").get<std::uint32_t>();
  t.limits.strict = lim.at("strict").get<bool>();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    MessageEvent e;
    e.send_step = j.at("step").get<std::uint64_t>();
    e.arrival_step = e.send_step + 1;
    e.src = coord_from(j.at("src"));
    e.dst = coord_from(j.at("dst"));
    e.payload = j.at("payload").get<std::uint64_t>();
    e.cost = j.at("cost").get<std::uint64_t>();
    e.depth = j.at("depth").get<std::uint64_t>();
    e.wire = j.at("wire").get<std::uint64_t>();
    t.events.push_back(e);
    t.touched.push_back(e.src);
    t.touched.push_back(e.dst);
  }
  std::sort(t.touched.begin(), t.touched.end());
  t.touched.erase(std::unique(t.touched.begin(), t.touched.end()), t.touched.end());
  return t;
}

}  // namespace spatial
