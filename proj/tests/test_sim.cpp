#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>

#include "doctest.h"
#include "dphaser/phaser.hpp"
#include "dphaser/scenarios.hpp"
#include "dphaser/topology.hpp"
#include "json.hpp"

using namespace dphaser;

namespace {

void drive(SimWorld& w) {
  for (;;) {
    REQUIRE(w.run_to_quiescence(1u << 22));
    if (!inject_pending(w)) break;
  }
}

}  // namespace

TEST_CASE("same seed yields an identical trace and end state") {
  auto run = [](uint64_t seed) {
    Scenario sc = make_scenario("mixed");
    sc.world.policy = SchedulePolicy::seeded_random(seed);
    sc.world.rng.seed(seed);
    drive(sc.world);
    return std::move(sc.world);
  };
  SimWorld a = run(42), b = run(42), c = run(43);
  REQUIRE(a.trace.size() == b.trace.size());
  for (size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].digest == b.trace[i].digest);
    Fnv1a fa, fb;
    a.trace[i].delivered.digest(fa);
    b.trace[i].delivered.digest(fb);
    CHECK(fa.h == fb.h);
  }
  CHECK(a.digest() == b.digest());
  CHECK(a.structurally_equal(b));
  // A different seed reorders deliveries but converges to the same lists.
  for (ListId list : {ListId::Scsl, ListId::Snsl})
    CHECK(topo_equal(snapshot_list(a, list), snapshot_list(c, list)));
}

TEST_CASE("per-channel delivery is FIFO under every policy") {
  for (uint64_t seed : {0ull, 1ull, 9ull}) {
    Scenario sc = make_scenario("mixed");
    if (seed) {
      sc.world.policy = SchedulePolicy::seeded_random(seed);
      sc.world.rng.seed(seed);
    }
    drive(sc.world);
    std::map<ChannelKey, uint64_t> last;
    for (const auto& ev : sc.world.trace) {
      ChannelKey ck{ev.delivered.src, ev.delivered.dst};
      auto it = last.find(ck);
      if (it != last.end()) CHECK(ev.delivered.seq > it->second);
      last[ck] = ev.delivered.seq;
    }
  }
}

TEST_CASE("fifo-global delivers in global send order") {
  Scenario sc = make_scenario("one-phase");
  drive(sc.world);
  uint64_t prev = 0;
  bool first = true;
  for (const auto& ev : sc.world.trace) {
    if (!first) CHECK(ev.delivered.seq > prev);
    prev = ev.delivered.seq;
    first = false;
  }
}

TEST_CASE("message conservation: everything sent is delivered by quiescence") {
  for (const auto& name : scenario_names()) {
    CAPTURE(name);
    Scenario sc = make_scenario(name);
    drive(sc.world);
    CHECK(sc.world.sent == sc.world.delivered);
    CHECK(sc.world.pending() == 0);
    CHECK(sc.world.nonempty_channels().empty());
    CHECK(sc.world.trace.size() == sc.world.delivered);
  }
}

TEST_CASE("explicit schedule replays a recorded run exactly") {
  Scenario ref = make_scenario("one-phase");
  drive(ref.world);
  std::vector<ChannelKey> order;
  for (const auto& ev : ref.world.trace)
    order.push_back({ev.delivered.src, ev.delivered.dst});

  Scenario re = make_scenario("one-phase");
  re.world.policy = SchedulePolicy::explicit_schedule(order);
  drive(re.world);
  REQUIRE(re.world.trace.size() == ref.world.trace.size());
  for (size_t i = 0; i < order.size(); ++i)
    CHECK(re.world.trace[i].digest == ref.world.trace[i].digest);
  CHECK(re.world.digest() == ref.world.digest());
}

TEST_CASE("adversarial policy starves the targeted kind while alternatives exist") {
  Scenario sc = make_scenario("spawn-during-phase");
  drive(sc.world);
  for (const auto& ev : sc.world.trace)
    if (ev.delivered.kind == MsgKind::Signal) {
      // fine: signals do get delivered eventually
    }
  // Re-run with SIGNAL starved: at each step a SIGNAL is delivered only when
  // nothing else is in flight. Verify against the recorded channel states.
  Scenario ad = make_scenario("spawn-during-phase");
  ad.world.policy = SchedulePolicy::adversarial_on(MsgKind::Signal);
  for (;;) {
    for (;;) {
      auto ready = ad.world.nonempty_channels();
      if (ready.empty()) break;
      bool non_signal_ready = false;
      for (const auto& ck : ready)
        if (ad.world.channels.at(ck).front().kind != MsgKind::Signal) non_signal_ready = true;
      auto ev = ad.world.step();
      REQUIRE(ev.has_value());
      if (non_signal_ready) CHECK(ev->delivered.kind != MsgKind::Signal);
    }
    if (!inject_pending(ad.world)) break;
  }
  CHECK(ad.world.faults.empty());
  for (ListId list : {ListId::Scsl, ListId::Snsl})
    CHECK(topo_equal(snapshot_list(ad.world, list), snapshot_list(sc.world, list)));
}

TEST_CASE("height sampling is geometric and capped") {
  std::mt19937_64 rng(7);
  const int kMax = 6;
  const int n = 40000;
  std::map<int, int> hist;
  for (int i = 0; i < n; ++i) {
    int h = sample_height(rng, 0.5, kMax);
    REQUIRE(h >= 1);
    REQUIRE(h <= kMax);
    hist[h]++;
  }
  // P(h == k) = 0.5^k for k < max
  for (int k = 1; k <= 3; ++k) {
    double frac = double(hist[k]) / n;
    double expect = std::pow(0.5, k);
    CHECK(std::abs(frac - expect) < 0.02);
  }
}

TEST_CASE("trace lines are valid json with the expected fields") {
  Scenario sc = make_scenario("one-phase");
  drive(sc.world);
  REQUIRE_FALSE(sc.world.trace.empty());
  for (const auto& ev : sc.world.trace) {
    auto j = nlohmann::json::parse(trace_event_json(ev));
    CHECK(j.contains("step"));
    CHECK(j.contains("deliver"));
    CHECK(j.contains("digest"));
    CHECK(j["deliver"].contains("kind"));
    CHECK(j["deliver"].contains("src"));
    CHECK(j["deliver"].contains("dst"));
  }
}

TEST_CASE("world digest distinguishes states and is stable at rest") {
  Scenario sc = make_scenario("one-phase");
  uint64_t d0 = sc.world.digest();
  CHECK(sc.world.digest() == d0);  // pure
  REQUIRE(sc.world.step().has_value());
  CHECK(sc.world.digest() != d0);
}
