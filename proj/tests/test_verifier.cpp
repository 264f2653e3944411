#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "dphaser/phaser.hpp"
#include "dphaser/verifier.hpp"

using namespace dphaser;

namespace {

VerifyOptions deep() {
  VerifyOptions opt;
  opt.max_depth = 512;
  opt.state_limit = 3000000;
  return opt;
}

// Independent schedule enumerator: plain recursion over ready channels with
// no dedup, no checks. Counts complete delivery orders (linear extensions of
// the message dependency order).
uint64_t count_schedules(const SimWorld& w) {
  auto ready = w.nonempty_channels();
  if (ready.empty()) {
    SimWorld ww = w;
    if (inject_pending(ww)) return count_schedules(ww);
    return 1;
  }
  uint64_t total = 0;
  for (const auto& ck : ready) {
    SimWorld next = w;
    next.step_channel(ck);
    total += count_schedules(next);
  }
  return total;
}

}  // namespace

TEST_CASE("every clean scenario passes exhaustive verification") {
  for (const auto& name : scenario_names()) {
    CAPTURE(name);
    VerifyResult r = verify(make_scenario(name), deep());
    for (const auto& e : r.errors) CAPTURE(e);
    CHECK(r.ok);
    CHECK_FALSE(r.truncated);
    CHECK(r.explored > 0);
    CHECK(r.terminals > 0);
  }
}

TEST_CASE("digest dedup is audited collision free on the scenario corpus") {
  for (const auto& name : scenario_names()) {
    CAPTURE(name);
    VerifyOptions opt = deep();
    opt.audit_collisions = true;
    VerifyResult r = verify(make_scenario(name), opt);
    CHECK(r.ok);
    CHECK(r.digest_collisions == 0);
  }
}

TEST_CASE("all seeded mutations are detected with an exact replay") {
  for (const auto& [mut, name] : mutation_pairings()) {
    CAPTURE(mutation_name(mut));
    CAPTURE(name);
    VerifyResult r = verify(make_scenario(name, mut), deep());
    REQUIRE_FALSE(r.ok);
    CHECK_FALSE(r.errors.empty());
    CHECK_FALSE(r.counterexample.empty());

    uint64_t end_digest = 0;
    auto errs = replay(make_scenario(name, mut), r.counterexample, 1u << 20, &end_digest);
    CHECK_FALSE(errs.empty());
    CHECK(end_digest == r.violation_digest);

    // The same schedule on the unmutated protocol is violation free.
    auto clean = replay(make_scenario(name), r.counterexample, 1u << 20);
    // (schedule divergence is fine; actual violations are not)
    for (const auto& e : clean) CHECK(e == "schedule diverged: channel empty");
  }
}

TEST_CASE("per-kind decomposition explores less and agrees on safety") {
  Scenario sc = make_scenario("spawn-during-phase");
  VerifyResult full = verify(sc, deep());
  REQUIRE(full.ok);
  for (int k = 0; k <= static_cast<int>(MsgKind::BootSentinel); ++k) {
    VerifyOptions opt = deep();
    opt.decompose = true;
    opt.decompose_kind = static_cast<MsgKind>(k);
    VerifyResult r = verify(make_scenario("spawn-during-phase"), opt);
    CAPTURE(kind_name(opt.decompose_kind));
    CHECK(r.ok);
    CHECK(r.explored < full.explored);
  }
  VerifyResult merged = decomposed_verify(make_scenario("spawn-during-phase"), deep());
  CHECK(merged.ok);
}

TEST_CASE("decomposition still catches a seeded defect") {
  VerifyResult r = decomposed_verify(make_scenario("one-phase", Mutation::EarlyForward), deep());
  CHECK_FALSE(r.ok);
  CHECK_FALSE(r.counterexample.empty());
}

TEST_CASE("pre-dedup schedule count matches a brute-force enumeration") {
  // one-phase: a pure aggregation/diffusion chain.
  {
    Scenario sc = make_scenario("one-phase");
    uint64_t expect = count_schedules(sc.world);
    VerifyOptions opt = deep();
    opt.dedup = false;
    VerifyResult r = verify(make_scenario("one-phase"), opt);
    CHECK(r.ok);
    CHECK(r.maximal_paths == expect);
  }
  // two-rank bootstrap: concurrent exchanges on both lists.
  {
    PhaserSpec spec;
    spec.modes = {Mode::SignalWait, Mode::SignalWait};
    spec.phases = 0;
    spec.seed = 3;
    Scenario sc{"boot-2", phaser_new(spec)};
    // stays within the small-instance regime
    {
      SimWorld probe = sc.world;
      REQUIRE(probe.run_to_quiescence(64));
      REQUIRE(probe.delivered <= 10);
    }
    uint64_t expect = count_schedules(sc.world);
    CHECK(expect > 1);  // genuinely concurrent
    VerifyOptions opt = deep();
    opt.dedup = false;
    VerifyResult r = verify(sc, opt);
    CHECK(r.ok);
    CHECK(r.maximal_paths == expect);
  }
}
