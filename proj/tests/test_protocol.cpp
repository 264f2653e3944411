#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "dphaser/phaser.hpp"
#include "dphaser/protocol.hpp"
#include "dphaser/scenarios.hpp"
#include "dphaser/topology.hpp"

using namespace dphaser;

namespace {

void drive(SimWorld& w) {
  for (;;) {
    REQUIRE(w.run_to_quiescence(1u << 22));
    if (!inject_pending(w)) break;
  }
}

void check_healthy(const SimWorld& w) {
  for (const auto& f : w.faults) CAPTURE(f.detail);
  CHECK(w.faults.empty());
  for (const auto& [id, n] : w.nodes) {
    if (n.mode == Mode::Sentinel || n.dropped) continue;
    if (n.plan.drop_after) {
      CHECK(n.dropped);
      continue;
    }
    CAPTURE(id);
    CHECK(n.task_phase >= n.plan.run_phases);
    CHECK_FALSE(n.pending_wait);
  }
  for (ListId list : {ListId::Scsl, ListId::Snsl}) {
    for (const auto& e : validate_topology(w, list)) {
      CAPTURE(e);
      CHECK(false);
    }
  }
}

}  // namespace

TEST_CASE("every scenario completes under fifo and random schedules") {
  for (const auto& name : scenario_names()) {
    for (uint64_t s = 0; s < 8; ++s) {
      CAPTURE(name);
      CAPTURE(s);
      Scenario sc = make_scenario(name);
      if (s > 0) {
        sc.world.policy = SchedulePolicy::seeded_random(s);
        sc.world.rng.seed(s);
      }
      drive(sc.world);
      check_healthy(sc.world);
    }
  }
}

TEST_CASE("scenario end topology is schedule independent") {
  for (const auto& name : scenario_names()) {
    Scenario ref = make_scenario(name);
    drive(ref.world);
    for (uint64_t s = 1; s <= 4; ++s) {
      Scenario sc = make_scenario(name);
      sc.world.policy = SchedulePolicy::seeded_random(s);
      sc.world.rng.seed(s);
      drive(sc.world);
      for (ListId list : {ListId::Scsl, ListId::Snsl}) {
        CAPTURE(name);
        CHECK(topo_equal(snapshot_list(ref.world, list), snapshot_list(sc.world, list)));
      }
    }
  }
}

TEST_CASE("spawned member ends up linked and signaling") {
  Scenario sc = make_scenario("spawn-during-phase");
  drive(sc.world);
  check_healthy(sc.world);
  NodeId child = 5;  // 3 tasks + 2 sentinels precede it
  const NodeState& c = sc.world.nodes.at(child);
  REQUIRE(c.scsl.has_value());
  CHECK(c.scsl->stable());
  CHECK_FALSE(c.scsl->detached);
  Topology t = snapshot_list(sc.world, ListId::Scsl);
  CHECK(t.nodes.count(child) == 1);
}

TEST_CASE("dropped member leaves both lists") {
  Scenario sc = make_scenario("delete-during-phase");
  drive(sc.world);
  check_healthy(sc.world);
  const NodeState& d = sc.world.nodes.at(1);
  CHECK(d.dropped);
  CHECK(d.scsl->detached);
  CHECK(d.snsl->detached);
  for (ListId list : {ListId::Scsl, ListId::Snsl})
    CHECK(snapshot_list(sc.world, list).nodes.count(1) == 0);
}

TEST_CASE("racing promotions both reach target height") {
  Scenario sc = make_scenario("promote-race");
  drive(sc.world);
  check_healthy(sc.world);
  for (NodeId id : {NodeId{1}, NodeId{2}}) {
    CHECK(sc.world.nodes.at(id).scsl->linked_height == 2);
    CHECK(sc.world.nodes.at(id).snsl->linked_height == 2);
  }
}

TEST_CASE("full phaser run with mixed modes over several phases") {
  PhaserSpec spec;
  for (char c : std::string("bswbbswb")) spec.modes.push_back(parse_mode(c));
  spec.phases = 3;
  spec.seed = 5;
  SimWorld w = phaser_new(spec);
  REQUIRE(run_phaser(w));
  check_healthy(w);
  CHECK(w.nodes.at(w.cfg.scsl_head).scsl->phase == 3);
  CHECK(w.nodes.at(w.cfg.snsl_head).snsl->last_notified == 2);
}

TEST_CASE("handlers are pure: same input, same output") {
  Scenario sc = make_scenario("one-phase");
  SimWorld& w = sc.world;
  auto ready = w.nonempty_channels();
  REQUIRE_FALSE(ready.empty());
  const Message& msg = w.channels.at(ready[0]).front();
  const NodeState& dst = w.nodes.at(msg.dst);
  HandlerResult a = handle_message(dst, msg, w.cfg);
  HandlerResult b = handle_message(dst, msg, w.cfg);
  CHECK(node_equal(a.state, b.state));
  REQUIRE(a.out.size() == b.out.size());
  for (size_t i = 0; i < a.out.size(); ++i) {
    Fnv1a fa, fb;
    a.out[i].digest(fa);
    b.out[i].digest(fb);
    CHECK(fa.h == fb.h);
  }
  // and the input state is untouched
  CHECK(node_equal(dst, w.nodes.at(msg.dst)));
}
