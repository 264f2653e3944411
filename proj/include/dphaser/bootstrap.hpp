#pragma once

#include "dphaser/sim.hpp"

namespace dphaser {

// Installs recursive-doubling boot state on a participant's list peer and
// returns its round-0 exchange messages. `roster` lists participant ids in
// rank (key) order; the list sentinel is not a participant.
std::vector<Message> boot_init(NodeState& self, ListId list, int rank,
                               const std::vector<NodeId>& roster, const WorldConfig& cfg);

// Handles BOOT_EXCHANGE and BOOT_SENTINEL; called from the protocol
// dispatcher. Emitted messages get src = self.id.
void handle_boot(NodeState& self, const Message& msg, const WorldConfig& cfg,
                 std::vector<Message>& out, std::vector<Fault>& faults);

// Number of exchange rounds for a team of n participants: ceil(log2 n).
int boot_rounds(int n);

}  // namespace dphaser
