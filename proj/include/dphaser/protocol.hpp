#pragma once

#include "dphaser/sim.hpp"

namespace dphaser {

// Pure state-machine step: (state, message) -> (state, outgoing messages).
// All protocol logic (signal aggregation, notification diffusion, insert /
// promote / delete handshakes, bootstrap exchanges) dispatches from here.
HandlerResult handle_message(const NodeState& node, const Message& msg, const WorldConfig& cfg);

// Local operations, injected into a SimWorld via apply_local().

// next(): signal() per mode, arm the wait per mode.
HandlerResult start_task_phase(const NodeState& node, const WorldConfig& cfg);

// Parent-side of async_spawn: emits the INSERT_SEARCH toward each list the
// child joins. The child's id/key/height are pre-allocated by the caller.
HandlerResult spawn_insert(const NodeState& parent, ListId list, NodeId child, Key child_key,
                           int child_height, const WorldConfig& cfg);

// drop(): begin top-down level-by-level deletion on one list.
HandlerResult begin_delete(const NodeState& node, ListId list, const WorldConfig& cfg);

// One lazy promotion step (chains itself until target height is reached).
HandlerResult begin_promote(const NodeState& node, ListId list, const WorldConfig& cfg);

}  // namespace dphaser
