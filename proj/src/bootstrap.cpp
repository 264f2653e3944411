#include "dphaser/bootstrap.hpp"

#include <algorithm>

namespace dphaser {
namespace {

NodeId head_of(const WorldConfig& cfg, ListId list) {
  return list == ListId::Scsl ? cfg.scsl_head : cfg.snsl_head;
}

// Folds one candidate into the nearest-left / nearest-right table of a node
// with key `own`. A node of height h occupies levels [0, h).
void merge_entry(BootTable& t, const BootEntry& e, Key own) {
  if (e.key == own) return;
  for (int l = 0; l < e.height && l < static_cast<int>(t.left.size()); ++l) {
    if (e.key < own) {
      if (!t.left[l] || t.left[l]->key < e.key) t.left[l] = e;
    } else {
      if (!t.right[l] || t.right[l]->key > e.key) t.right[l] = e;
    }
  }
}

void merge_table(BootTable& t, const BootTable& other, Key own) {
  for (const auto& side : {other.left, other.right})
    for (const auto& e : side)
      if (e) merge_entry(t, *e, own);
}

Message exchange_msg(const ListPeer& p, NodeId self_id, NodeId dst, int round) {
  Message m;
  m.src = self_id;
  m.dst = dst;
  m.kind = MsgKind::BootExchange;
  m.list = p.list;
  m.round = round;
  m.src_key = p.key;
  m.height = p.target_height;
  m.table = std::make_shared<BootTable>(p.boot->table);
  return m;
}

// Sends the current table to the in-range partners of `round` and marks the
// out-of-range directions as already satisfied.
void open_round(ListPeer& p, NodeId self_id, std::vector<Message>& out) {
  BootState& b = *p.boot;
  int stride = 1 << b.round;
  int lo = b.rank - stride, hi = b.rank + stride;
  b.got_lo = lo < 0;
  b.got_hi = hi >= b.team;
  if (!b.got_lo) out.push_back(exchange_msg(p, self_id, b.roster[lo], b.round));
  if (!b.got_hi) out.push_back(exchange_msg(p, self_id, b.roster[hi], b.round));
}

// Converts the converged table into skip-list links. Children are derivable
// locally: the level-l successor is a child exactly when l is its top level.
void finalize(ListPeer& p, NodeId self_id, const WorldConfig& cfg, std::vector<Message>& out) {
  BootState b = std::move(*p.boot);
  p.boot.reset();
  p.linked_height = p.target_height;
  for (int l = 0; l < p.target_height; ++l) {
    if (b.table.left[l]) p.prev[l] = Neighbor{b.table.left[l]->id, b.table.left[l]->key};
    if (b.table.right[l]) {
      p.next[l] = Neighbor{b.table.right[l]->id, b.table.right[l]->key};
      if (b.table.right[l]->height == l + 1) p.add_child_from(b.table.right[l]->id, 0);
    }
  }
  p.set_parent_from(0, *p.prev[p.top()]);
  if (b.rank == 0) {
    Message m;
    m.src = self_id;
    m.dst = head_of(cfg, p.list);
    m.kind = MsgKind::BootSentinel;
    m.list = p.list;
    m.src_key = p.key;
    m.height = p.target_height;
    m.table = std::make_shared<BootTable>(b.table);
    out.push_back(m);
  }
}

// One BOOT_EXCHANGE applied to the current round. Returns false on a
// duplicate (caller reports the fault).
bool apply_exchange(ListPeer& p, const Message& msg) {
  BootState& b = *p.boot;
  bool from_lo = msg.src_key < p.key;
  bool& got = from_lo ? b.got_lo : b.got_hi;
  if (got) return false;
  got = true;
  merge_entry(b.table, BootEntry{msg.src, msg.src_key, msg.height}, p.key);
  if (msg.table) merge_table(b.table, *msg.table, p.key);
  return true;
}

void finalize_sentinel(ListPeer& p, const Message& msg) {
  // `msg` carries the leftmost participant's converged table plus its own
  // id/key/height; the head's successor at level l is that participant when
  // it reaches l, otherwise the participant's right neighbor at l.
  p.boot.reset();
  for (int l = 0; l < p.target_height; ++l) {
    std::optional<BootEntry> succ;
    if (l < msg.height)
      succ = BootEntry{msg.src, msg.src_key, msg.height};
    else if (msg.table && msg.table->right[l])
      succ = msg.table->right[l];
    if (succ) {
      p.next[l] = Neighbor{succ->id, succ->key};
      if (succ->height == l + 1) p.add_child_from(succ->id, 0);
    }
  }
}

}  // namespace

int boot_rounds(int n) {
  int r = 0;
  while ((1 << r) < n) ++r;
  return r;
}

std::vector<Message> boot_init(NodeState& self, ListId list, int rank,
                               const std::vector<NodeId>& roster, const WorldConfig& cfg) {
  ListPeer& p = *self.peer(list);
  BootState b;
  b.rank = rank;
  b.team = static_cast<int>(roster.size());
  b.rounds = boot_rounds(b.team);
  b.roster = roster;
  b.table.left.resize(cfg.max_height);
  b.table.right.resize(cfg.max_height);
  for (int l = 0; l < cfg.max_height; ++l)
    b.table.left[l] = BootEntry{head_of(cfg, list), 0, cfg.max_height};
  p.boot = std::move(b);

  std::vector<Message> out;
  if (p.boot->rounds == 0)
    finalize(p, self.id, cfg, out);
  else
    open_round(p, self.id, out);
  return out;
}

void handle_boot(NodeState& self, const Message& msg, const WorldConfig& cfg,
                 std::vector<Message>& out, std::vector<Fault>& faults) {
  ListPeer* pp = self.peer(msg.list);
  if (!pp) {
    faults.push_back(Fault{FaultKind::DeadLetter, self.id, "boot message at non-member"});
    return;
  }
  ListPeer& p = *pp;
  if (msg.kind == MsgKind::BootSentinel) {
    if (!p.is_sentinel || !p.boot) {
      faults.push_back(Fault{FaultKind::ProtocolViolation, self.id, "unexpected BOOT_SENTINEL"});
      return;
    }
    finalize_sentinel(p, msg);
    return;
  }
  if (!p.boot) {
    faults.push_back(Fault{FaultKind::ProtocolViolation, self.id, "BOOT_EXCHANGE after bootstrap"});
    return;
  }
  BootState& b = *p.boot;
  if (msg.round > b.round) {
    b.early[msg.round].push_back(msg);
    return;
  }
  if (msg.round < b.round || !apply_exchange(p, msg)) {
    faults.push_back(Fault{FaultKind::ProtocolViolation, self.id, "duplicate BOOT_EXCHANGE round"});
    return;
  }
  while (p.boot && b.got_lo && b.got_hi) {
    b.round += 1;
    if (b.round == b.rounds) {
      finalize(p, self.id, cfg, out);
      return;
    }
    open_round(p, self.id, out);
    auto early = b.early.find(b.round);
    if (early == b.early.end()) continue;
    std::vector<Message> queued = std::move(early->second);
    b.early.erase(early);
    for (const auto& m : queued) {
      if (!apply_exchange(p, m)) {
        faults.push_back(
            Fault{FaultKind::ProtocolViolation, self.id, "duplicate BOOT_EXCHANGE round"});
        return;
      }
    }
  }
}

}  // namespace dphaser
