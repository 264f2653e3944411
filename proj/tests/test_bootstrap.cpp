#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "dphaser/bootstrap.hpp"
#include "dphaser/phaser.hpp"
#include "dphaser/topology.hpp"

using namespace dphaser;

TEST_CASE("round count is ceil(log2 n)") {
  CHECK(boot_rounds(1) == 0);
  CHECK(boot_rounds(2) == 1);
  CHECK(boot_rounds(3) == 2);
  CHECK(boot_rounds(4) == 2);
  CHECK(boot_rounds(5) == 3);
  CHECK(boot_rounds(8) == 3);
  CHECK(boot_rounds(9) == 4);
  CHECK(boot_rounds(64) == 6);
}

namespace {

SimWorld booted(int n, uint64_t seed, SchedulePolicy pol = SchedulePolicy::fifo_global()) {
  PhaserSpec spec;
  spec.modes.assign(n, Mode::SignalWait);
  spec.phases = 0;
  spec.seed = seed;
  SimWorld w = phaser_new(spec, pol);
  REQUIRE(w.run_to_quiescence(1u << 22));
  return w;
}

Topology oracle_of(const SimWorld& w, ListId list, int n) {
  std::vector<std::pair<Key, int>> members;
  for (int i = 0; i < n; ++i) {
    const ListPeer* p = w.nodes.at(i).peer(list);
    members.push_back({p->key, p->target_height});
  }
  NodeId head = list == ListId::Scsl ? w.cfg.scsl_head : w.cfg.snsl_head;
  return build_oracle(members, w.cfg.max_height, head, 0);
}

}  // namespace

TEST_CASE("bootstrap matches sequential insertion on both lists") {
  for (int n : {1, 2, 3, 4, 6, 8, 13, 21, 32, 33}) {
    for (uint64_t seed = 1; seed <= 10; ++seed) {
      SimWorld w = booted(n, seed);
      CHECK(w.faults.empty());
      for (ListId list : {ListId::Scsl, ListId::Snsl}) {
        CAPTURE(n);
        CAPTURE(seed);
        CHECK(topo_equal(snapshot_list(w, list), oracle_of(w, list, n)));
        CHECK(validate_topology(w, list).empty());
      }
    }
  }
}

TEST_CASE("bootstrap is schedule independent") {
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    SimWorld a = booted(9, seed);
    SimWorld b = booted(9, seed, SchedulePolicy::seeded_random(seed * 31 + 7));
    CHECK(a.structurally_equal(b));
  }
}

TEST_CASE("bootstrap message count is exact: partner exchanges plus one handover") {
  for (int n : {2, 3, 6, 8, 16}) {
    SimWorld w = booted(n, 3);
    uint64_t expect = 0;
    int rounds = boot_rounds(n);
    for (int list = 0; list < 2; ++list) {  // identical rosters for both lists
      for (int r = 0; r < rounds; ++r)
        for (int i = 0; i < n; ++i) {
          if (i - (1 << r) >= 0) ++expect;
          if (i + (1 << r) < n) ++expect;
        }
      expect += 1;  // BOOT_SENTINEL
    }
    CHECK(w.delivered == expect);
  }
}
