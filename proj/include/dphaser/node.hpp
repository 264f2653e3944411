#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "dphaser/message.hpp"
#include "dphaser/types.hpp"

namespace dphaser {

struct Neighbor {
  NodeId id = kNoNode;
  Key key = 0;
  bool operator==(const Neighbor&) const = default;
};

// Membership interval [from, to) in phase numbers; open-ended when to is unset.
struct Span {
  Phase from = 0;
  std::optional<Phase> to;
  bool active(Phase p) const { return p >= from && (!to || p < *to); }
  bool operator==(const Span&) const = default;
};

// A signal-child (SCSL) or notify-child (SNSL) with its membership epochs.
struct ChildRec {
  NodeId id = kNoNode;
  std::vector<Span> spans;
  bool active(Phase p) const {
    for (const auto& s : spans)
      if (s.active(p)) return true;
    return false;
  }
  bool operator==(const ChildRec&) const = default;
};

struct ParentSpan {
  Phase from = 0;
  std::optional<Neighbor> parent;  // unset = this node is the root
  bool operator==(const ParentSpan&) const = default;
};

// After handing a child over to a new parent, signals from that child for
// phases >= from are forwarded to the new owner.
struct Reroute {
  Phase from = 0;
  NodeId target = kNoNode;
  bool operator==(const Reroute&) const = default;
};

struct PhaseEntry {
  std::set<NodeId> signaled;
  bool self_signaled = false;
  bool operator==(const PhaseEntry&) const = default;
};

struct StructOp {
  enum class Kind : uint8_t { Insert, Promote, Delete } kind = Kind::Insert;
  int level = 0;   // level being spliced / current delete level
  Phase epoch = 0;  // phase at which the membership change takes effect
  NodeId peer = kNoNode;  // predecessor engaged in the handshake
  bool parent_known = false;  // promote: PROMOTE_LINK received
  bool operator==(const StructOp&) const = default;
};

// Predecessor-side record of an insert/promote splice in progress: the level
// link is frozen from LINK until the successor's ACK comes back.
struct SpliceHold {
  enum class Kind : uint8_t { Insert, Promote } kind = Kind::Insert;
  NodeId newcomer = kNoNode;
  Key newcomer_key = 0;
  std::optional<Neighbor> succ;
  Phase epoch = 0;
  bool operator==(const SpliceHold&) const = default;
};

// Recursive-doubling round state during phaser creation.
struct BootState {
  int rank = -1;
  int team = 0;    // participant count n
  int rounds = 0;  // ceil(log2 n)
  int round = 0;   // current round index
  bool got_lo = false, got_hi = false;  // partners of the current round
  std::vector<NodeId> roster;  // participant ids by rank
  BootTable table;
  std::map<int, std::vector<Message>> early;  // round -> buffered messages
  bool operator==(const BootState& o) const {
    if (rank != o.rank || team != o.team || rounds != o.rounds ||
        round != o.round || got_lo != o.got_lo || got_hi != o.got_hi ||
        roster != o.roster)
      return false;
    auto eq_side = [](const auto& a, const auto& b) {
      if (a.size() != b.size()) return false;
      for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].has_value() != b[i].has_value()) return false;
        if (a[i] && (a[i]->id != b[i]->id || a[i]->key != b[i]->key ||
                     a[i]->height != b[i]->height))
          return false;
      }
      return true;
    };
    return eq_side(table.left, o.table.left) && eq_side(table.right, o.table.right);
  }
};

// Per-list protocol state of one participant.
struct ListPeer {
  ListId list = ListId::Scsl;
  Key key = 0;
  bool is_sentinel = false;

  int target_height = 1;
  int linked_height = 1;
  std::vector<std::optional<Neighbor>> next;  // sized max_height
  std::vector<std::optional<Neighbor>> prev;  // lazily maintained below top

  std::vector<ChildRec> children;
  std::vector<ParentSpan> parents;  // sorted by from
  std::map<NodeId, std::vector<Reroute>> reroutes;

  // SCSL aggregation: lowest phase not yet forwarded by this node.
  Phase phase = 0;
  std::map<Phase, PhaseEntry> ledger;

  // SNSL diffusion. Notifications from an old and a new parent can overlap
  // around a handover; early arrivals are buffered here.
  Phase last_notified = -1;
  std::set<Phase> notify_ahead;

  std::set<int> frozen;  // levels whose next link is under a structural op
  std::map<int, SpliceHold> holds;                     // per frozen level
  std::map<int, std::vector<Message>> deferred;        // per frozen level
  std::vector<Message> deferred_until_detach;          // while deleting
  std::optional<StructOp> inflight;
  bool deleting = false;
  bool detached = false;

  std::optional<BootState> boot;

  int top() const { return linked_height - 1; }
  bool stable() const { return linked_height == target_height; }

  const std::optional<Neighbor>& next_at(int level) const { return next[level]; }

  std::optional<Neighbor> parent_at(Phase p) const {
    std::optional<Neighbor> out;
    for (const auto& ps : parents)
      if (ps.from <= p) out = ps.parent;
    return out;
  }

  void set_parent_from(Phase p, std::optional<Neighbor> parent) {
    parents.push_back(ParentSpan{p, parent});
  }

  ChildRec* find_child(NodeId id) {
    for (auto& c : children)
      if (c.id == id) return &c;
    return nullptr;
  }
  const ChildRec* find_child(NodeId id) const {
    for (const auto& c : children)
      if (c.id == id) return &c;
    return nullptr;
  }

  bool child_active(NodeId id, Phase p) const {
    const ChildRec* c = find_child(id);
    return c && c->active(p);
  }

  void add_child_from(NodeId id, Phase from) {
    ChildRec* c = find_child(id);
    if (!c) {
      children.push_back(ChildRec{id, {}});
      c = &children.back();
    }
    c->spans.push_back(Span{from, std::nullopt});
  }

  void drop_child_from(NodeId id, Phase from) {
    ChildRec* c = find_child(id);
    if (!c) return;
    for (auto& s : c->spans)
      if (!s.to && s.from <= from) s.to = from;
    // A span opened at the same phase it closes never becomes active.
    for (auto& s : c->spans)
      if (!s.to && s.from >= from) s.to = s.from;
  }

  std::vector<NodeId> children_active(Phase p) const {
    std::vector<NodeId> out;
    for (const auto& c : children)
      if (c.active(p)) out.push_back(c.id);
    return out;
  }

  std::optional<NodeId> reroute_for(NodeId child, Phase p) const {
    auto it = reroutes.find(child);
    if (it == reroutes.end()) return std::nullopt;
    std::optional<NodeId> out;
    for (const auto& r : it->second)
      if (r.from <= p) out = r.target;
    return out;
  }

  void add_reroute(NodeId child, Phase from, NodeId target) {
    reroutes[child].push_back(Reroute{from, target});
  }
};

// Scenario-driving plan for one task: how many phases it runs and whether it
// drops out at a phase boundary.
struct TaskPlan {
  Phase run_phases = 0;          // signals/waits for phases 0..run_phases-1
  std::optional<Phase> drop_after;  // initiate drop at the boundary after this phase
  bool operator==(const TaskPlan&) const = default;
};

// Key/height allocation for an insert that has not reached INSERT_LINK yet
// (waiter-mode spawns join the SNSL first, then chain the SCSL insert).
struct PendingInsert {
  Key key = 0;
  int height = 1;
  bool operator==(const PendingInsert&) const = default;
};

struct NodeState {
  NodeId id = kNoNode;
  Mode mode = Mode::SignalOnly;
  TaskPlan plan;

  Phase task_phase = 0;
  bool pending_wait = false;
  bool dropped = false;
  Phase wait_from = 0;  // first phase this task is a notifiable waiter for
  std::optional<PendingInsert> pending_scsl_insert;

  std::optional<ListPeer> scsl;
  std::optional<ListPeer> snsl;

  ListPeer* peer(ListId l) { return l == ListId::Scsl ? (scsl ? &*scsl : nullptr) : (snsl ? &*snsl : nullptr); }
  const ListPeer* peer(ListId l) const {
    return l == ListId::Scsl ? (scsl ? &*scsl : nullptr) : (snsl ? &*snsl : nullptr);
  }
};

uint64_t node_digest(const NodeState& n);
bool node_equal(const NodeState& a, const NodeState& b);

}  // namespace dphaser
