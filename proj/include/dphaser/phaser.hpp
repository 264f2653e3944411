#pragma once

#include "dphaser/sim.hpp"

namespace dphaser {

struct PhaserSpec {
  std::vector<Mode> modes;  // one task per entry (no sentinels)
  Phase phases = 1;
  double p = 0.5;
  uint64_t seed = 1;
  Mutation mutation = Mutation::None;
};

// Evenly spaced key for task index i (sentinel keys are 0).
Key task_key(size_t i);

// Creates tasks 0..n-1 plus the two head sentinels (ids n and n+1) and starts
// the recursive-doubling bootstrap on both lists. Heights are pre-sampled
// from the seed. Run the world to quiescence before driving phases.
SimWorld phaser_new(const PhaserSpec& spec,
                    SchedulePolicy policy = SchedulePolicy::fifo_global());

// Registers a child task and emits the insert search(es) from `parent`.
// Waiters join the SNSL first; signal-wait children chain the SCSL insert
// once their SNSL membership completes. Returns the child id.
NodeId async_spawn(SimWorld& w, NodeId parent, Mode mode, Key key, int height,
                   const TaskPlan& plan);

// Injects begin-of-phase / drop work for tasks that are not driven by
// notifications (signal-only mode). Returns true if anything was injected;
// used by the run loop and by the verifier at quiescent states.
bool inject_pending(SimWorld& w);

// Calls next() on every live task once, then alternates quiescence with
// signal-only injections until no task has work left. Returns false if the
// step limit was exhausted.
bool run_phaser(SimWorld& w, uint64_t step_limit = 1u << 22);

}  // namespace dphaser
