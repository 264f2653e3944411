#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "dphaser/types.hpp"

namespace dphaser {

enum class MsgKind : uint8_t {
  // Phase signaling.
  Signal,         // child -> parent aggregation edge (SCSL)
  PhaseComplete,  // SCSL head sentinel -> SNSL head sentinel
  Notify,         // parent -> child diffusion edge (SNSL)
  // Eager insertion handshake.
  InsertSearch,    // routed toward the level-0 predecessor
  InsertLink,      // predecessor -> new node: your links are (a, b)
  InsertAttached,  // new node -> successor: update your prev
  InsertAck,       // successor -> predecessor, then predecessor -> new node
  // Lazy hand-over-hand promotion handshake.
  PromoteSearch,    // routed leftward toward the level-(k+1) predecessor
  PromoteLink,      // predecessor -> promoting node
  PromoteAttached,  // promoting node -> successor
  PromoteAck,       // successor -> predecessor, then predecessor -> node
  PromoteHandoff,   // promoting node -> old parent: drop me from this epoch
  // Level-by-level deletion.
  DeleteUnlink,  // deleting node -> level predecessor; also the child
                 // prev/parent fix variant (fix flag set)
  DeleteAck,     // predecessor -> deleting node
  // Phaser creation (recursive doubling).
  BootExchange,  // round-tagged neighbor-table exchange
  BootSentinel,  // rank 0's final table handed to the list sentinel
};

inline const char* kind_name(MsgKind k) {
  switch (k) {
    case MsgKind::Signal: return "SIGNAL";
    case MsgKind::PhaseComplete: return "PHASE_COMPLETE";
    case MsgKind::Notify: return "NOTIFY";
    case MsgKind::InsertSearch: return "INSERT_SEARCH";
    case MsgKind::InsertLink: return "INSERT_LINK";
    case MsgKind::InsertAttached: return "INSERT_ATTACHED";
    case MsgKind::InsertAck: return "INSERT_ACK";
    case MsgKind::PromoteSearch: return "PROMOTE_SEARCH";
    case MsgKind::PromoteLink: return "PROMOTE_LINK";
    case MsgKind::PromoteAttached: return "PROMOTE_ATTACHED";
    case MsgKind::PromoteAck: return "PROMOTE_ACK";
    case MsgKind::PromoteHandoff: return "PROMOTE_HANDOFF";
    case MsgKind::DeleteUnlink: return "DELETE_UNLINK";
    case MsgKind::DeleteAck: return "DELETE_ACK";
    case MsgKind::BootExchange: return "BOOT_EXCHANGE";
    case MsgKind::BootSentinel: return "BOOT_SENTINEL";
  }
  return "?";
}

std::optional<MsgKind> kind_from_name(const std::string& name);

struct BootEntry {
  NodeId id = kNoNode;
  Key key = 0;
  int height = 0;
};

// Per-level nearest known left/right neighbors, exchanged during bootstrap.
struct BootTable {
  std::vector<std::optional<BootEntry>> left;
  std::vector<std::optional<BootEntry>> right;
};

struct Message {
  NodeId src = kNoNode;
  NodeId dst = kNoNode;
  MsgKind kind = MsgKind::Signal;
  ListId list = ListId::Scsl;

  Phase phase = -1;  // phase-bearing kinds; for structural kinds the epoch E
  int level = -1;    // level-bearing kinds

  // Kind-specific payload.
  NodeId origin = kNoNode;  // original requester / signaler identity
  Key key = 0;              // search key
  NodeId peer = kNoNode;    // link endpoint (b / w / new prev / new parent)
  Key peer_key = 0;
  Key src_key = 0;          // sender's key, where the receiver must link back
  int height = 0;            // inserted node's target height
  bool transfer_flag = false;  // peer is a signal-child being handed over
  Phase transfer_from = -1;    // effective epoch of the child handover
  bool fix_flag = false;       // DeleteUnlink variant: child prev/parent fix
  int round = -1;              // bootstrap round
  std::shared_ptr<const BootTable> table;  // bootstrap payload

  uint64_t seq = 0;  // global send order; bookkeeping only, not digested

  void digest(Fnv1a& f) const {
    f.u32(src);
    f.u32(dst);
    f.u8(static_cast<uint8_t>(kind));
    f.u8(static_cast<uint8_t>(list));
    f.i64(phase);
    f.i64(level);
    f.u32(origin);
    f.u64(key);
    f.u32(peer);
    f.u64(peer_key);
    f.u64(src_key);
    f.i64(height);
    f.u8(transfer_flag ? 1 : 0);
    f.i64(transfer_from);
    f.u8(fix_flag ? 1 : 0);
    f.i64(round);
    if (table) {
      for (const auto& side : {table->left, table->right}) {
        for (const auto& e : side) {
          if (e) {
            f.u32(e->id);
            f.u64(e->key);
            f.i64(e->height);
          } else {
            f.u8(0xff);
          }
        }
      }
    }
  }
};

}  // namespace dphaser
