#pragma once

#include "dphaser/scenarios.hpp"

namespace dphaser {

struct VerifyOptions {
  uint64_t max_depth = 256;        // max deliveries along one schedule
  uint64_t state_limit = 2000000;  // max expanded states
  bool dedup = true;               // prune revisited world digests
  bool decompose = false;          // per-message-kind branching reduction
  MsgKind decompose_kind = MsgKind::Signal;
  bool audit_collisions = false;   // cross-check digest dedup structurally
};

struct VerifyResult {
  bool ok = true;
  uint64_t explored = 0;       // states expanded
  uint64_t transitions = 0;    // deliveries taken
  uint64_t terminals = 0;      // distinct quiescent end states reached
  uint64_t maximal_paths = 0;  // complete schedules reaching a terminal
  uint64_t deduped = 0;        // branches pruned by digest dedup
  uint64_t digest_collisions = 0;
  bool truncated = false;      // hit the depth or state limit
  std::vector<std::string> errors;
  std::vector<ChannelKey> counterexample;  // delivery schedule to the violation
  uint64_t violation_digest = 0;           // world digest at the violation
};

// Bounded exhaustive exploration of delivery interleavings from the
// scenario's initial state, checking per-step safety (no faults, barrier
// safety) and quiescent consistency at every terminal state.
VerifyResult verify(const Scenario& s, const VerifyOptions& opt);

// Runs `verify` once per message kind with decomposition enabled and merges
// the results: each pass only branches on races between messages of one kind.
VerifyResult decomposed_verify(const Scenario& s, VerifyOptions opt);

// Re-executes a counterexample schedule on a fresh copy of the scenario and
// returns the violations observed (empty if it no longer reproduces). If
// `end_digest` is given it receives the world digest right after the last
// scheduled delivery, for comparison with VerifyResult::violation_digest.
std::vector<std::string> replay(const Scenario& s, const std::vector<ChannelKey>& schedule,
                                uint64_t max_steps = 1u << 16,
                                uint64_t* end_digest = nullptr);

// One report object per verification pass: {kind, states_visited, max_depth,
// violations: [{predicate, schedule}], quiesced} plus exploration counters.
std::string verify_report_json(const std::string& kind, const VerifyResult& r,
                               uint64_t max_depth);

}  // namespace dphaser
