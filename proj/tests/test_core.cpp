#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "spatial/core.hpp"

using namespace spatial;

namespace {

MessageEvent ev(Coord src, Coord dst, std::uint64_t step, std::uint64_t depth, std::uint64_t wire) {
  return {src, dst, step, step + 1, 0, manhattan(src, dst), depth, wire};
}

Trace make_trace(std::vector<MessageEvent> events) {
  Trace t;
  t.events = std::move(events);
  for (const auto& e : t.events) t.steps = std::max(t.steps, e.arrival_step);
  return t;
}

// Enumerates every chain in the explicit dependency DAG; exponential, so only
// used on tiny traces.
struct ChainOracle {
  const std::vector<MessageEvent>& ev;
  std::vector<std::vector<std::size_t>> preds;

  explicit ChainOracle(const std::vector<MessageEvent>& events) : ev(events), preds(events.size()) {
    for (std::size_t i = 0; i < ev.size(); ++i)
      for (std::size_t j = 0; j < ev.size(); ++j)
        if (ev[j].dst == ev[i].src && ev[j].arrival_step <= ev[i].send_step) preds[i].push_back(j);
  }
  // Longest chain ending at i, by message count and by summed cost.
  std::pair<std::uint64_t, std::uint64_t> walk(std::size_t i) const {
    std::uint64_t best_d = 0, best_w = 0;
    for (auto j : preds[i]) {
      auto [d, w] = walk(j);
      best_d = std::max(best_d, d);
      best_w = std::max(best_w, w);
    }
    return {best_d + 1, best_w + ev[i].cost};
  }
};

}  // namespace

TEST_CASE("manhattan distance") {
  CHECK(manhattan({0, 0}, {0, 0}) == 0);
  CHECK(manhattan({0, 0}, {2, 3}) == 5);
  CHECK(manhattan({1, 4}, {4, 1}) == 6);
  CHECK(manhattan({4, 1}, {1, 4}) == 6);
}

TEST_CASE("vm: program that never sends") {
  auto t = run([](ProcessorContext&) {}, {3, 3, {}}, {}, 1);
  CHECK(t.events.empty());
  CHECK(t.steps == 0);
  CHECK(audit(t) == CostLedger{});
}

TEST_CASE("vm: single send and relay labels") {
  auto single = run(
      [](ProcessorContext& ctx) {
        if (ctx.self() == Coord{0, 0} && ctx.step() == 0) ctx.send({0, 5}, 42);
      },
      {1, 6, {}}, {}, 1);
  REQUIRE(single.events.size() == 1);
  CHECK(single.events[0].cost == 5);
  CHECK(single.events[0].depth == 1);
  CHECK(single.events[0].wire == 5);

  auto relay = run(
      [](ProcessorContext& ctx) {
        if (ctx.self() == Coord{0, 0} && ctx.step() == 0) ctx.send({0, 5}, 7);
        if (ctx.self() == Coord{0, 5} && ctx.message()) ctx.send({2, 5}, *ctx.message());
      },
      {3, 6, {}}, {}, 1);
  REQUIRE(relay.events.size() == 2);
  CHECK(relay.events[0].depth == 1);
  CHECK(relay.events[0].wire == 5);
  CHECK(relay.events[1].depth == 2);
  CHECK(relay.events[1].wire == 7);
  ChainOracle oracle(relay.events);
  CHECK(oracle.walk(1) == std::pair<std::uint64_t, std::uint64_t>{2, 7});
  CHECK(audit(relay) == CostLedger{7, 2, 7, 2, 2});
}

TEST_CASE("audit: empty and independent sends") {
  CHECK(audit(Trace{}) == CostLedger{});
  auto t = make_trace({ev({0, 0}, {0, 3}, 0, 1, 3), ev({5, 0}, {5, 4}, 0, 1, 4)});
  auto l = audit(t);
  CHECK(l.energy == 7);
  CHECK(l.depth == 1);
  CHECK(l.wire_depth == 4);
}

TEST_CASE("audit rejects corrupted labels") {
  auto t = make_trace({ev({0, 0}, {0, 5}, 0, 1, 5), ev({0, 5}, {2, 5}, 1, 1, 2)});
  CHECK_THROWS_AS(audit(t), ModelError);
  t.events[1].depth = 2;
  t.events[1].wire = 7;
  t.events[1].cost = 3;
  CHECK_THROWS_AS(audit(t), ModelError);
}

TEST_CASE("audit matches exhaustive chain enumeration on random small traces") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 300; ++trial) {
    Schedule sched({}, true);
    const int n = 1 + int(gen() % 12);
    for (int i = 0; i < n; ++i) {
      Coord a{std::int32_t(gen() % 3), std::int32_t(gen() % 3)};
      Coord b{std::int32_t(gen() % 3), std::int32_t(gen() % 3)};
      if (a == b) b.col += 1;
      if (gen() % 2)
        sched.send(a, b, Word(i));
      else
        sched.send_at(a, b, Word(i), gen() % 3);
    }
    auto t = sched.trace();
    REQUIRE(t.events.size() <= 12);
    ChainOracle oracle(t.events);
    std::uint64_t d = 0, w = 0, e = 0;
    for (std::size_t i = 0; i < t.events.size(); ++i) {
      auto [di, wi] = oracle.walk(i);
      CHECK(t.events[i].depth == di);
      CHECK(t.events[i].wire == wi);
      d = std::max(d, di);
      w = std::max(w, wi);
      e += manhattan(t.events[i].src, t.events[i].dst);
    }
    auto l = audit(t);
    CHECK(l.energy == e);
    CHECK(l.depth == d);
    CHECK(l.wire_depth == w);
    CHECK(l == sched.ledger());
    CHECK(l.wire_depth <= l.depth * (3 + 4));
    CHECK(validate(t, {}).empty());
  }
}

TEST_CASE("validate reports constraint violations") {
  SUBCASE("two sends in one step") {
    auto t = make_trace({ev({0, 0}, {0, 1}, 0, 1, 1), ev({0, 0}, {1, 0}, 0, 1, 1)});
    auto r = validate(t, {});
    REQUIRE(r.size() == 1);
    CHECK(r.violations[0].kind == ViolationKind::SendsPerStep);
    CHECK(r.violations[0].step == 0);
    CHECK(r.violations[0].where == Coord{0, 0});
  }
  SUBCASE("five arrivals with capacity four") {
    std::vector<MessageEvent> es;
    for (int i = 0; i < 5; ++i) es.push_back(ev({i + 1, 0}, {0, 0}, 0, 1, std::uint64_t(i + 1)));
    auto r = validate(make_trace(es), {});
    REQUIRE(r.size() == 1);
    CHECK(r.violations[0].kind == ViolationKind::QueueOverflow);
    CHECK(r.violations[0].where == Coord{0, 0});
    CHECK(r.violations[0].count == 5);
  }
  SUBCASE("late arrival") {
    auto t = make_trace({ev({0, 0}, {0, 1}, 0, 1, 1)});
    t.events[0].arrival_step = 3;
    CHECK(validate(t, {}).violations.at(0).kind == ViolationKind::ArrivalTime);
  }
}

TEST_CASE("vm: strict mode errors and replay determinism") {
  auto flood = [](ProcessorContext& ctx) {
    if (ctx.step() == 0 && ctx.self() != Coord{0, 0}) ctx.send({0, 0}, 1);
  };
  ModelLimits strict;
  strict.strict = true;
  CHECK_THROWS_AS(run(flood, {3, 3, {}}, {}, 1, strict), ModelError);
  auto loose = run(flood, {3, 3, {}}, {}, 1);
  CHECK_FALSE(loose.warnings.empty());
  CHECK_FALSE(validate(loose, {}).empty());

  auto two = [](ProcessorContext& ctx) {
    if (ctx.step() == 0 && ctx.self() == Coord{0, 0}) {
      ctx.send({0, 1}, 1);
      ctx.send({1, 0}, 1);
    }
  };
  CHECK_THROWS_AS(run(two, {2, 2, {}}, {}, 1, strict), ModelError);

  auto hog = [](ProcessorContext& ctx) { ctx.mem(40) = 1; };
  CHECK_THROWS_AS(run(hog, {1, 1, {}}, {}, 1, strict), ModelError);

  auto forever = [](ProcessorContext& ctx) { ctx.stay_awake(); };
  ModelLimits capped;
  capped.max_steps = 50;
  CHECK_THROWS_AS(run(forever, {1, 1, {}}, {}, 1, capped), ModelError);

  auto gossip = [](ProcessorContext& ctx) {
    if (ctx.step() < 4) {
      ctx.send({std::int32_t(ctx.random() % 4), std::int32_t(ctx.random() % 4)}, ctx.random());
    }
    if (ctx.step() < 3) ctx.stay_awake();
  };
  auto a = run(gossip, {4, 4, {}}, {}, 99);
  auto b = run(gossip, {4, 4, {}}, {}, 99);
  CHECK(a == b);
  std::ostringstream sa, sb;
  write_trace_jsonl(sa, a);
  write_trace_jsonl(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK_NOTHROW(audit(a));
}

TEST_CASE("trace json-lines round trip") {
  Schedule s({}, true);
  s.send({0, 0}, {0, 5}, 11);
  s.send({0, 5}, {2, 5}, 12);
  auto t = s.trace({3, 6, {}}, 5);
  std::stringstream io;
  write_trace_jsonl(io, t);
  auto back = read_trace_jsonl(io);
  CHECK(back.events == t.events);
  CHECK(back.shape == t.shape);
  CHECK(back.seed == 5);
  CHECK(audit(back) == audit(t));
}

TEST_CASE("rng_word determinism and uniformity") {
  CHECK(rng_word(3, {1, 2}, 9) == rng_word(3, {1, 2}, 9));
  bool differs = false;
  for (std::uint64_t i = 0; i < 64; ++i) differs |= rng_word(10, {0, 0}, i) != rng_word(11, {0, 0}, i);
  CHECK(differs);

  ProcessorRng rng(2024, {3, 7});
  std::array<double, 16> buckets{};
  for (int i = 0; i < 1 << 16; ++i) buckets[rng.next() >> 60] += 1;
  double chi2 = 0;
  const double expected = double(1 << 16) / 16;
  for (double b : buckets) chi2 += (b - expected) * (b - expected) / expected;
  // 15 degrees of freedom: P(chi2 > 37.70) = 0.001
  CHECK(chi2 < 37.70);

  ProcessorRng u(77, {0, 0});
  double sum = 0;
  for (int i = 0; i < 100000; ++i) sum += u.uniform();
  const double mean = sum / 100000;
  CHECK(mean >= 0.49);
  CHECK(mean <= 0.51);
}

TEST_CASE("schedule respects queue capacity and sends per step") {
  Schedule s({}, true);
  for (int i = 1; i <= 9; ++i) s.send({i, 0}, {0, 0}, 0);
  for (int i = 1; i <= 3; ++i) s.send({0, 0}, {0, i}, 0);
  auto t = s.trace();
  CHECK(validate(t, {}).empty());
  CHECK(audit(t) == s.ledger());
  // Self-sends are free.
  Schedule z;
  z.send({1, 1}, {1, 1}, 3);
  CHECK(z.ledger().messages == 0);
}
