#include "dphaser/scenarios.hpp"

#include <stdexcept>

#include "dphaser/phaser.hpp"
#include "dphaser/protocol.hpp"

namespace dphaser {
namespace {

struct MemberSpec {
  Mode mode = Mode::SignalWait;
  int height = 1;        // target height
  int start_height = 0;  // linked height at world start; 0 = already at target
  TaskPlan plan;
};

// Builds a fully linked world (no bootstrap): next/prev at every linked
// level, parents and children derived the same way sequential insertion
// would, membership spans open from phase 0.
SimWorld make_linked_world(const std::vector<MemberSpec>& members, Phase phases,
                           Mutation mutation) {
  size_t n = members.size();
  WorldConfig cfg;
  cfg.max_height = max_height_for(n) + 1;  // room for the tallest forced height
  cfg.phases = phases;
  cfg.scsl_head = static_cast<NodeId>(n);
  cfg.snsl_head = static_cast<NodeId>(n + 1);
  cfg.mutation = mutation;

  SimWorld w(cfg);
  w.next_node_id = static_cast<NodeId>(n + 2);

  auto make_peer = [&](ListId list, Key key, int target, int linked, bool sentinel) {
    ListPeer p;
    p.list = list;
    p.key = key;
    p.is_sentinel = sentinel;
    p.target_height = target;
    p.linked_height = linked;
    p.next.resize(cfg.max_height);
    p.prev.resize(cfg.max_height);
    return p;
  };

  for (size_t i = 0; i < n; ++i) {
    NodeState t;
    t.id = static_cast<NodeId>(i);
    t.mode = members[i].mode;
    t.plan = members[i].plan;
    int linked = members[i].start_height ? members[i].start_height : members[i].height;
    if (is_signaler(t.mode))
      t.scsl = make_peer(ListId::Scsl, task_key(i), members[i].height, linked, false);
    if (is_waiter(t.mode))
      t.snsl = make_peer(ListId::Snsl, task_key(i), members[i].height, linked, false);
    w.nodes[t.id] = std::move(t);
  }
  for (auto [head, list] : {std::pair{cfg.scsl_head, ListId::Scsl},
                            std::pair{cfg.snsl_head, ListId::Snsl}}) {
    NodeState s;
    s.id = head;
    s.mode = Mode::Sentinel;
    ListPeer p = make_peer(list, 0, cfg.max_height, cfg.max_height, true);
    if (list == ListId::Scsl)
      s.scsl = std::move(p);
    else
      s.snsl = std::move(p);
    w.nodes[head] = std::move(s);
  }

  // Link each list level by level in key order, then derive parents/children.
  for (auto [head, list] : {std::pair{cfg.scsl_head, ListId::Scsl},
                            std::pair{cfg.snsl_head, ListId::Snsl}}) {
    for (int l = 0; l < cfg.max_height; ++l) {
      NodeId left = head;
      for (size_t i = 0; i < n; ++i) {
        ListPeer* p = w.nodes[static_cast<NodeId>(i)].peer(list);
        if (!p || l >= p->linked_height) continue;
        ListPeer& lp = *w.nodes[left].peer(list);
        lp.next[l] = Neighbor{static_cast<NodeId>(i), p->key};
        p->prev[l] = Neighbor{left, lp.key};
        left = static_cast<NodeId>(i);
      }
    }
    for (size_t i = 0; i < n; ++i) {
      ListPeer* p = w.nodes[static_cast<NodeId>(i)].peer(list);
      if (!p) continue;
      p->set_parent_from(0, *p->prev[p->top()]);
      w.nodes[p->prev[p->top()]->id].peer(list)->add_child_from(static_cast<NodeId>(i), 0);
    }
  }
  return w;
}

// next() for every notification-driven task; signal-only tasks go through
// inject_pending like the run loop does.
void start_tasks(SimWorld& w) {
  for (auto& [id, node] : w.nodes) {
    if (node.mode == Mode::Sentinel || node.mode == Mode::SignalOnly) continue;
    w.apply_local(start_task_phase(node, w.cfg));
  }
  inject_pending(w);
}

void start_promotes(SimWorld& w) {
  for (auto& [id, node] : w.nodes) {
    for (ListId list : {ListId::Scsl, ListId::Snsl}) {
      ListPeer* p = node.peer(list);
      if (p && !p->is_sentinel && p->linked_height < p->target_height)
        w.apply_local(begin_promote(node, list, w.cfg));
    }
  }
}

}  // namespace

std::vector<std::string> scenario_names() {
  return {"one-phase", "spawn-during-phase", "delete-during-phase", "promote-race", "mixed"};
}

Scenario make_scenario(const std::string& name, Mutation mutation) {
  if (name == "one-phase") {
    // Three signal-wait tasks, a single barrier.
    SimWorld w = make_linked_world({{Mode::SignalWait, 2, 0, {1, {}}},
                                    {Mode::SignalWait, 1, 0, {1, {}}},
                                    {Mode::SignalWait, 1, 0, {1, {}}}},
                                   1, mutation);
    start_tasks(w);
    return {name, std::move(w)};
  }
  if (name == "spawn-during-phase") {
    // A signal-only child is inserted while phase 0 is being collected.
    SimWorld w = make_linked_world({{Mode::SignalWait, 2, 0, {2, {}}},
                                    {Mode::SignalWait, 1, 0, {2, {}}},
                                    {Mode::SignalWait, 1, 0, {2, {}}}},
                                   2, mutation);
    start_tasks(w);
    async_spawn(w, 0, Mode::SignalOnly, task_key(0) + (1u << 18), 1, TaskPlan{2, {}});
    return {name, std::move(w)};
  }
  if (name == "delete-during-phase") {
    // A tall interior member (with a signal child) drops out after phase 0;
    // its child is handed over to the preceding member mid-run.
    SimWorld w = make_linked_world({{Mode::SignalWait, 1, 0, {2, {}}},
                                    {Mode::SignalWait, 2, 0, {2, Phase{0}}},
                                    {Mode::SignalWait, 1, 0, {2, {}}},
                                    {Mode::SignalWait, 1, 0, {2, {}}}},
                                   2, mutation);
    start_tasks(w);
    return {name, std::move(w)};
  }
  if (name == "promote-race") {
    // Two height-1 nodes promote to level 1 behind the same tall predecessor;
    // no phases run, only the structural handshakes.
    SimWorld w = make_linked_world({{Mode::SignalWait, 3, 0, {0, {}}},
                                    {Mode::SignalWait, 2, 1, {0, {}}},
                                    {Mode::SignalWait, 2, 1, {0, {}}}},
                                   0, mutation);
    start_promotes(w);
    return {name, std::move(w)};
  }
  if (name == "mixed") {
    // Two racing inserts into the same gap, plus a drop, across two phases.
    SimWorld w = make_linked_world({{Mode::SignalWait, 2, 0, {2, {}}},
                                    {Mode::SignalWait, 1, 0, {2, {}}},
                                    {Mode::SignalOnly, 1, 0, {2, Phase{0}}}},
                                   2, mutation);
    start_tasks(w);
    async_spawn(w, 0, Mode::SignalOnly, task_key(0) + (1u << 18), 1, TaskPlan{2, {}});
    async_spawn(w, 1, Mode::SignalOnly, task_key(0) + (2u << 18), 1, TaskPlan{2, {}});
    return {name, std::move(w)};
  }
  throw std::invalid_argument("unknown scenario: " + name);
}

const std::vector<std::pair<Mutation, std::string>>& mutation_pairings() {
  static const std::vector<std::pair<Mutation, std::string>> pairs = {
      {Mutation::DropAck, "spawn-during-phase"},
      {Mutation::EarlyForward, "one-phase"},
      {Mutation::SkipFreeze, "mixed"},
      {Mutation::WrongReparent, "delete-during-phase"},
      {Mutation::PhaseOffByOne, "one-phase"},
  };
  return pairs;
}

}  // namespace dphaser
