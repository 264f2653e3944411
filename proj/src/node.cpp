#include "dphaser/node.hpp"

#include <string>

namespace dphaser {
namespace {

// Canonical byte serialization of a node; the digest hashes it and equality
// compares it, so the two can never disagree.
struct Sink {
  std::string bytes;
  void u8(uint8_t v) { bytes.push_back(static_cast<char>(v)); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<uint8_t>(v >> (8 * i)));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<uint8_t>(v >> (8 * i)));
  }
  void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
  void b(bool v) { u8(v ? 1 : 0); }
};

void put_neighbor(Sink& s, const std::optional<Neighbor>& n) {
  s.b(n.has_value());
  if (n) {
    s.u32(n->id);
    s.u64(n->key);
  }
}

void put_message(Sink& s, const Message& m) {
  Fnv1a f;
  m.digest(f);
  s.u64(f.h);
}

void put_peer(Sink& s, const ListPeer& p) {
  s.u8(static_cast<uint8_t>(p.list));
  s.u64(p.key);
  s.b(p.is_sentinel);
  s.i64(p.target_height);
  s.i64(p.linked_height);
  s.u64(p.next.size());
  for (const auto& n : p.next) put_neighbor(s, n);
  for (const auto& n : p.prev) put_neighbor(s, n);
  s.u64(p.children.size());
  for (const auto& c : p.children) {
    s.u32(c.id);
    s.u64(c.spans.size());
    for (const auto& sp : c.spans) {
      s.i64(sp.from);
      s.b(sp.to.has_value());
      if (sp.to) s.i64(*sp.to);
    }
  }
  s.u64(p.parents.size());
  for (const auto& ps : p.parents) {
    s.i64(ps.from);
    put_neighbor(s, ps.parent);
  }
  s.u64(p.reroutes.size());
  for (const auto& [child, rs] : p.reroutes) {
    s.u32(child);
    s.u64(rs.size());
    for (const auto& r : rs) {
      s.i64(r.from);
      s.u32(r.target);
    }
  }
  s.i64(p.phase);
  s.u64(p.ledger.size());
  for (const auto& [phase, entry] : p.ledger) {
    s.i64(phase);
    s.b(entry.self_signaled);
    s.u64(entry.signaled.size());
    for (NodeId id : entry.signaled) s.u32(id);
  }
  s.i64(p.last_notified);
  s.u64(p.notify_ahead.size());
  for (Phase ph : p.notify_ahead) s.i64(ph);
  s.u64(p.frozen.size());
  for (int l : p.frozen) s.i64(l);
  s.u64(p.holds.size());
  for (const auto& [level, h] : p.holds) {
    s.i64(level);
    s.u8(static_cast<uint8_t>(h.kind));
    s.u32(h.newcomer);
    s.u64(h.newcomer_key);
    put_neighbor(s, h.succ);
    s.i64(h.epoch);
  }
  s.u64(p.deferred.size());
  for (const auto& [level, msgs] : p.deferred) {
    s.i64(level);
    s.u64(msgs.size());
    for (const auto& m : msgs) put_message(s, m);
  }
  s.u64(p.deferred_until_detach.size());
  for (const auto& m : p.deferred_until_detach) put_message(s, m);
  s.b(p.inflight.has_value());
  if (p.inflight) {
    s.u8(static_cast<uint8_t>(p.inflight->kind));
    s.i64(p.inflight->level);
    s.i64(p.inflight->epoch);
    s.u32(p.inflight->peer);
    s.b(p.inflight->parent_known);
  }
  s.b(p.deleting);
  s.b(p.detached);
  s.b(p.boot.has_value());
  if (p.boot) {
    const BootState& b = *p.boot;
    s.i64(b.rank);
    s.i64(b.team);
    s.i64(b.rounds);
    s.i64(b.round);
    s.b(b.got_lo);
    s.b(b.got_hi);
    s.u64(b.roster.size());
    for (NodeId id : b.roster) s.u32(id);
    for (const auto& side : {b.table.left, b.table.right}) {
      s.u64(side.size());
      for (const auto& e : side) {
        s.b(e.has_value());
        if (e) {
          s.u32(e->id);
          s.u64(e->key);
          s.i64(e->height);
        }
      }
    }
    s.u64(b.early.size());
    for (const auto& [round, msgs] : b.early) {
      s.i64(round);
      s.u64(msgs.size());
      for (const auto& m : msgs) put_message(s, m);
    }
  }
}

std::string serialize_node(const NodeState& n) {
  Sink s;
  s.u32(n.id);
  s.u8(static_cast<uint8_t>(n.mode));
  s.i64(n.plan.run_phases);
  s.b(n.plan.drop_after.has_value());
  if (n.plan.drop_after) s.i64(*n.plan.drop_after);
  s.i64(n.task_phase);
  s.b(n.pending_wait);
  s.b(n.dropped);
  s.i64(n.wait_from);
  s.b(n.pending_scsl_insert.has_value());
  if (n.pending_scsl_insert) {
    s.u64(n.pending_scsl_insert->key);
    s.i64(n.pending_scsl_insert->height);
  }
  for (const auto* p : {&n.scsl, &n.snsl}) {
    s.b(p->has_value());
    if (*p) put_peer(s, **p);
  }
  return s.bytes;
}

}  // namespace

uint64_t node_digest(const NodeState& n) {
  std::string bytes = serialize_node(n);
  Fnv1a f;
  f.bytes(bytes.data(), bytes.size());
  return f.h;
}

bool node_equal(const NodeState& a, const NodeState& b) {
  return serialize_node(a) == serialize_node(b);
}

}  // namespace dphaser
