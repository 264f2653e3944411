#include "dphaser/protocol.hpp"

#include <algorithm>
#include <cassert>

#include "dphaser/bootstrap.hpp"

namespace dphaser {
namespace {

// Mutable view threaded through one handler invocation. All state changes go
// through ctx.self; all effects accumulate in ctx.r.
struct Ctx {
  HandlerResult r;
  const WorldConfig& cfg;
  NodeState& self;

  explicit Ctx(const NodeState& node, const WorldConfig& c)
      : r{node, {}, {}, {}}, cfg(c), self(r.state) {}

  void emit(Message m) {
    m.src = self.id;
    r.out.push_back(std::move(m));
  }
  void fault(FaultKind k, std::string detail) {
    r.faults.push_back(Fault{k, self.id, std::move(detail)});
  }
  void event(Annotation::Type t, Phase phase, ListId list = ListId::Scsl) {
    r.events.push_back(Annotation{t, self.id, phase, list});
  }
};

void process_message(Ctx& ctx, const Message& msg);
void do_begin_promote(Ctx& ctx, ListId list);
void do_begin_delete(Ctx& ctx, ListId list);
void do_signal(Ctx& ctx, Phase phase);
void emit_insert_search(Ctx& ctx, ListId list, NodeId child, Key child_key, int child_height);
void maybe_finish_delete(Ctx& ctx);

NodeId other_end(const WorldConfig& cfg, ListId list) {
  return list == ListId::Scsl ? cfg.snsl_head : cfg.scsl_head;
}

Phase structural_epoch(const ListPeer& p) {
  // First phase in which the structural change is visible: for the SCSL the
  // phase after the one currently being collected, for the SNSL the phase
  // after the last notification seen.
  return p.list == ListId::Scsl ? p.phase + 1 : p.last_notified + 1;
}

// ---------------------------------------------------------------------------
// SCSL aggregation

bool aggregation_complete(const Ctx& ctx, const ListPeer& p, Phase phase) {
  auto it = p.ledger.find(phase);
  const PhaseEntry* entry = it == p.ledger.end() ? nullptr : &it->second;
  bool self_ok = true;
  // A deleting node's task has stopped; it aggregates its last phase as a
  // pure relay for children that have not been handed over yet.
  if (!p.is_sentinel && is_signaler(ctx.self.mode) && !p.deleting)
    self_ok = entry && entry->self_signaled;
  if (!self_ok) return false;
  if (ctx.cfg.mutation == Mutation::EarlyForward && !p.is_sentinel)
    return true;  // forwards without waiting for children
  for (NodeId c : p.children_active(phase)) {
    if (!entry || entry->signaled.count(c) == 0) return false;
  }
  return true;
}

// Forwards completed phases upward (or completes them at the head) until the
// current phase can no longer make progress.
void pump_scsl(Ctx& ctx) {
  if (!ctx.self.scsl) return;
  ListPeer& p = *ctx.self.scsl;
  if (p.boot || p.detached) return;
  for (;;) {
    Phase phase = p.phase;
    if (p.is_sentinel && phase >= ctx.cfg.phases) return;
    if (p.deleting && (!p.inflight || phase >= p.inflight->epoch))
      return;  // never forwards its own delete epoch or later
    if (p.inflight && p.inflight->kind == StructOp::Kind::Promote &&
        !p.inflight->parent_known && phase >= p.inflight->epoch)
      return;  // new parent not yet known; hold the aggregate
    if (!aggregation_complete(ctx, p, phase)) return;
    if (p.is_sentinel) {
      Message pc;
      pc.dst = other_end(ctx.cfg, ListId::Scsl);
      pc.kind = MsgKind::PhaseComplete;
      pc.list = ListId::Snsl;
      pc.phase = phase;
      ctx.emit(pc);
      ctx.event(Annotation::Type::PhaseComplete, phase);
    } else {
      auto parent = p.parent_at(phase);
      if (!parent) {
        ctx.fault(FaultKind::ProtocolViolation, "non-sentinel node has no parent");
        return;
      }
      Message sig;
      sig.dst = parent->id;
      sig.kind = MsgKind::Signal;
      sig.list = ListId::Scsl;
      sig.phase = phase;
      sig.origin = ctx.self.id;
      ctx.emit(sig);
    }
    p.ledger.erase(p.ledger.begin(), p.ledger.upper_bound(phase));
    p.phase = phase + 1;
  }
}

void on_signal(Ctx& ctx, const Message& msg) {
  if (!ctx.self.scsl) {
    ctx.fault(FaultKind::DeadLetter, "SIGNAL to node without SCSL membership");
    return;
  }
  ListPeer& p = *ctx.self.scsl;
  if (p.detached) {
    if (auto target = p.reroute_for(msg.origin, msg.phase)) {
      Message fwd = msg;
      fwd.dst = *target;
      ctx.emit(fwd);
    } else {
      ctx.fault(FaultKind::DeadLetter, "SIGNAL reached detached node with no reroute");
    }
    return;
  }
  // While deleting, signals at or past the handover epoch belong to the
  // children's new parents; hold them until the reroutes exist.
  if (p.deleting && p.inflight && msg.phase >= p.inflight->epoch) {
    if (auto target = p.reroute_for(msg.origin, msg.phase)) {
      Message fwd = msg;
      fwd.dst = *target;
      ctx.emit(fwd);
    } else {
      p.deferred_until_detach.push_back(msg);
    }
    return;
  }
  if (msg.phase < p.phase) {
    ctx.fault(FaultKind::StaleSignal, "SIGNAL for already forwarded phase");
    return;
  }
  if (msg.phase > p.phase + 1) {
    ctx.fault(FaultKind::ProtocolViolation, "SIGNAL more than one phase ahead");
    return;
  }
  // A child handed over to a new parent may race its first rerouted-phase
  // signal against the handshake; forward it along.
  if (!p.child_active(msg.origin, msg.phase)) {
    if (auto target = p.reroute_for(msg.origin, msg.phase)) {
      Message fwd = msg;
      fwd.dst = *target;
      ctx.emit(fwd);
      return;
    }
  }
  PhaseEntry& entry = p.ledger[msg.phase];
  if (entry.signaled.count(msg.origin)) {
    ctx.fault(FaultKind::OverCount, "duplicate SIGNAL from same child and phase");
    return;
  }
  entry.signaled.insert(msg.origin);
}

void do_signal(Ctx& ctx, Phase phase) {
  ListPeer& p = *ctx.self.scsl;
  PhaseEntry& entry = p.ledger[phase];
  if (entry.self_signaled) {
    ctx.fault(FaultKind::ProtocolViolation, "double signal in one phase");
    return;
  }
  entry.self_signaled = true;
  ctx.event(Annotation::Type::SignalCall, phase);
}

// ---------------------------------------------------------------------------
// SNSL diffusion

void notify_children(Ctx& ctx, ListPeer& p, Phase member_phase, Phase notify_phase) {
  for (NodeId c : p.children_active(member_phase)) {
    Message n;
    n.dst = c;
    n.kind = MsgKind::Notify;
    n.list = ListId::Snsl;
    n.phase = notify_phase;
    ctx.emit(n);
  }
}

// Records a child handover on the receiving (new-parent) side. On the SNSL
// the new parent may already have diffused phases past the handover epoch;
// those are replayed to the child so its notification stream stays gapless.
void adopt_child(Ctx& ctx, ListPeer& p, NodeId child, Phase from) {
  p.add_child_from(child, from);
  if (p.list != ListId::Snsl) return;
  for (Phase ph = from; ph <= p.last_notified; ++ph) {
    Message n;
    n.dst = child;
    n.kind = MsgKind::Notify;
    n.list = ListId::Snsl;
    n.phase = ph;
    ctx.emit(n);
  }
}

// A waiter just observed completion of `phase`; advance the task.
void task_advance_after_wait(Ctx& ctx, Phase phase) {
  NodeState& n = ctx.self;
  if (!n.pending_wait || n.task_phase != phase) return;
  n.pending_wait = false;
  ctx.event(Annotation::Type::Unblock, phase);
  n.task_phase = phase + 1;
  if (n.plan.drop_after && *n.plan.drop_after == phase) {
    if (n.scsl && is_signaler(n.mode)) do_begin_delete(ctx, ListId::Scsl);
    if (n.snsl && is_waiter(n.mode)) do_begin_delete(ctx, ListId::Snsl);
    return;
  }
  if (n.task_phase < n.plan.run_phases) {
    if (is_signaler(n.mode)) do_signal(ctx, n.task_phase);
    if (is_waiter(n.mode)) n.pending_wait = true;
  }
}

void on_phase_complete(Ctx& ctx, const Message& msg) {
  if (!ctx.self.snsl || !ctx.self.snsl->is_sentinel) {
    ctx.fault(FaultKind::DeadLetter, "PHASE_COMPLETE at non-head-waiter");
    return;
  }
  ListPeer& p = *ctx.self.snsl;
  if (msg.phase != p.last_notified + 1) {
    ctx.fault(FaultKind::ProtocolViolation, "PHASE_COMPLETE out of order");
    return;
  }
  p.last_notified = msg.phase;
  Phase out = msg.phase;
  if (ctx.cfg.mutation == Mutation::PhaseOffByOne) out = msg.phase + 1;
  notify_children(ctx, p, msg.phase, out);
}

void on_notify(Ctx& ctx, const Message& msg) {
  if (!ctx.self.snsl) {
    ctx.fault(FaultKind::DeadLetter, "NOTIFY to node without SNSL membership");
    return;
  }
  ListPeer& p = *ctx.self.snsl;
  if (p.detached) return;  // stragglers sent before the parent saw the unlink
  // Around a handover the old and the new parent may both cover part of the
  // stream: duplicates are dropped, early arrivals buffered.
  if (msg.phase <= p.last_notified) return;
  if (msg.phase > p.last_notified + 1) {
    p.notify_ahead.insert(msg.phase);
    return;
  }
  Phase ph = msg.phase;
  for (;;) {
    p.last_notified = ph;
    notify_children(ctx, p, ph, ph);
    task_advance_after_wait(ctx, ph);
    auto it = p.notify_ahead.find(p.last_notified + 1);
    if (it == p.notify_ahead.end()) break;
    ph = *it;
    p.notify_ahead.erase(it);
  }
}

// ---------------------------------------------------------------------------
// Freeze / defer plumbing

void defer_at_level(Ctx& ctx, ListPeer& p, int level, const Message& msg) {
  p.deferred[level].push_back(msg);
}

void release_deferred(Ctx& ctx, ListPeer& p, int level) {
  auto it = p.deferred.find(level);
  if (it == p.deferred.end()) return;
  std::vector<Message> queued = std::move(it->second);
  p.deferred.erase(it);
  for (const auto& m : queued) process_message(ctx, m);
}

void release_detach_deferred(Ctx& ctx, ListPeer& p) {
  std::vector<Message> queued = std::move(p.deferred_until_detach);
  p.deferred_until_detach.clear();
  for (const auto& m : queued) process_message(ctx, m);
}

// ---------------------------------------------------------------------------
// Eager insertion

void terminal_insert_splice(Ctx& ctx, ListPeer& p, const Message& msg) {
  // `self` is the level-0 predecessor a.
  bool skip_freeze = ctx.cfg.mutation == Mutation::SkipFreeze;
  if (!skip_freeze) {
    if (p.frozen.count(0)) {
      defer_at_level(ctx, p, 0, msg);
      return;
    }
    p.frozen.insert(0);
  }
  Phase epoch = structural_epoch(p);
  std::optional<Neighbor> succ = p.next[0];
  bool transfer = succ && p.child_active(succ->id, epoch);

  // The successor may already have signaled the epoch phase into our ledger
  // (one-phase skew); it will not resend, so the handover starts after any
  // phase we already hold its signal for.
  Phase transfer_from = epoch;
  if (transfer && p.list == ListId::Scsl) {
    for (const auto& [ph, entry] : p.ledger)
      if (ph >= transfer_from && entry.signaled.count(succ->id)) transfer_from = ph + 1;
  }
  adopt_child(ctx, p, msg.peer, epoch);
  if (transfer) {
    p.drop_child_from(succ->id, transfer_from);
    p.add_reroute(succ->id, transfer_from, msg.peer);
  }
  p.holds[0] = SpliceHold{SpliceHold::Kind::Insert, msg.peer, msg.key, succ, epoch};
  if (skip_freeze) p.next[0] = Neighbor{msg.peer, msg.key};  // optimistic, unguarded

  Message link;
  link.dst = msg.peer;
  link.kind = MsgKind::InsertLink;
  link.list = p.list;
  link.phase = epoch;
  link.level = 0;
  link.key = msg.key;
  link.src_key = p.key;
  link.height = msg.height;
  if (succ) {
    link.peer = succ->id;
    link.peer_key = succ->key;
  }
  link.transfer_flag = transfer;
  link.transfer_from = transfer_from;
  ctx.emit(link);
}

void on_insert_search(Ctx& ctx, const Message& msg) {
  ListPeer* pp = ctx.self.peer(msg.list);
  if (!pp) {
    ctx.fault(FaultKind::DeadLetter, "INSERT_SEARCH at non-member");
    return;
  }
  ListPeer& p = *pp;
  if (p.detached) {
    Message fwd = msg;
    fwd.dst = p.prev[0] ? p.prev[0]->id : kNoNode;
    if (fwd.dst == kNoNode) {
      ctx.fault(FaultKind::DeadLetter, "detached node cannot relay INSERT_SEARCH");
      return;
    }
    ctx.emit(fwd);
    return;
  }
  if (p.deleting) {
    p.deferred_until_detach.push_back(msg);
    return;
  }
  int start = msg.level >= 0 ? std::min(msg.level, p.top()) : p.top();
  for (int level = start; level >= 0; --level) {
    if (p.next[level] && p.next[level]->key < msg.key) {
      Message fwd = msg;
      fwd.dst = p.next[level]->id;
      fwd.level = level;
      ctx.emit(fwd);
      return;
    }
  }
  terminal_insert_splice(ctx, p, msg);
}

void on_insert_link(Ctx& ctx, const Message& msg) {
  // `self` is the freshly spawned node.
  NodeState& n = ctx.self;
  ListPeer fresh;
  fresh.list = msg.list;
  fresh.key = msg.key;
  fresh.target_height = msg.height;
  fresh.linked_height = 1;
  fresh.next.resize(ctx.cfg.max_height);
  fresh.prev.resize(ctx.cfg.max_height);
  fresh.prev[0] = Neighbor{msg.src, msg.src_key};
  if (msg.peer != kNoNode) fresh.next[0] = Neighbor{msg.peer, msg.peer_key};
  fresh.set_parent_from(0, Neighbor{msg.src, msg.src_key});
  if (msg.transfer_flag) fresh.add_child_from(msg.peer, msg.transfer_from);
  fresh.phase = msg.phase;
  fresh.last_notified = msg.phase - 1;
  fresh.inflight = StructOp{StructOp::Kind::Insert, 0, msg.phase, msg.src, true};
  if (msg.list == ListId::Scsl)
    n.scsl = std::move(fresh);
  else
    n.snsl = std::move(fresh);

  if (msg.peer != kNoNode) {
    Message att;
    att.dst = msg.peer;
    att.kind = MsgKind::InsertAttached;
    att.list = msg.list;
    // The successor switches parent at the handover epoch, not the splice epoch.
    att.phase = msg.transfer_flag ? msg.transfer_from : msg.phase;
    att.level = 0;
    att.key = msg.key;
    att.peer = msg.src;  // ACK destination
    ctx.emit(att);
  } else {
    Message ack;
    ack.dst = msg.src;
    ack.kind = MsgKind::InsertAck;
    ack.list = msg.list;
    ack.phase = msg.phase;
    ack.level = 0;
    ack.origin = n.id;
    ctx.emit(ack);
  }
}

void on_insert_attached(Ctx& ctx, const Message& msg) {
  // `self` is the successor b.
  ListPeer* pp = ctx.self.peer(msg.list);
  if (!pp || pp->detached) {
    ctx.fault(FaultKind::DeadLetter, "INSERT_ATTACHED at detached or non-member node");
    return;
  }
  ListPeer& p = *pp;
  p.prev[msg.level] = Neighbor{msg.src, msg.key};
  if (p.top() == msg.level)
    p.set_parent_from(msg.phase, Neighbor{msg.src, msg.key});
  if (ctx.cfg.mutation == Mutation::DropAck) return;  // swallow the ack
  Message ack;
  ack.dst = msg.peer;
  ack.kind = MsgKind::InsertAck;
  ack.list = msg.list;
  ack.phase = msg.phase;
  ack.level = 0;
  ack.origin = msg.src;
  ctx.emit(ack);
}

// Completion ack arrived back at the spawned node: start participating.
void insert_completed_at_newcomer(Ctx& ctx, ListId list) {
  NodeState& n = ctx.self;
  ListPeer& p = *n.peer(list);
  Phase epoch = p.inflight->epoch;
  p.inflight.reset();
  ctx.event(Annotation::Type::InsertDone, epoch, list);

  if (list == ListId::Snsl) {
    n.wait_from = epoch;
    n.task_phase = epoch;
    if (is_signaler(n.mode)) {
      // Waiter-side membership is in place; now chain the SCSL insert. The
      // SCSL epoch is guaranteed to be >= this one (signals lead notifies).
      if (n.pending_scsl_insert) {
        emit_insert_search(ctx, ListId::Scsl, n.id, n.pending_scsl_insert->key,
                           n.pending_scsl_insert->height);
        n.pending_scsl_insert.reset();
      }
    } else if (n.task_phase < n.plan.run_phases) {
      n.pending_wait = true;
    }
  } else {
    n.task_phase = epoch;
    if (n.task_phase < n.plan.run_phases) {
      do_signal(ctx, n.task_phase);
      if (is_waiter(n.mode))
        n.pending_wait = true;
      else
        n.task_phase += 1;  // signal-only: no blocking wait
    }
  }
  if (p.linked_height < p.target_height) do_begin_promote(ctx, list);
}

void on_insert_ack(Ctx& ctx, const Message& msg) {
  ListPeer* pp = ctx.self.peer(msg.list);
  if (!pp) {
    ctx.fault(FaultKind::DeadLetter, "INSERT_ACK at non-member");
    return;
  }
  ListPeer& p = *pp;
  auto hold = p.holds.find(0);
  if (hold != p.holds.end() && hold->second.kind == SpliceHold::Kind::Insert) {
    // Predecessor side: adopt the new level-0 link and release the freeze.
    SpliceHold h = hold->second;
    p.holds.erase(hold);
    p.next[0] = Neighbor{h.newcomer, h.newcomer_key};
    p.frozen.erase(0);
    Message done;
    done.dst = h.newcomer;
    done.kind = MsgKind::InsertAck;
    done.list = msg.list;
    done.phase = h.epoch;
    done.level = 0;
    ctx.emit(done);
    release_deferred(ctx, p, 0);
    return;
  }
  if (p.inflight && p.inflight->kind == StructOp::Kind::Insert) {
    insert_completed_at_newcomer(ctx, msg.list);
    return;
  }
  ctx.fault(FaultKind::ProtocolViolation, "unexpected INSERT_ACK");
}

// ---------------------------------------------------------------------------
// Lazy hand-over-hand promotion

void do_begin_promote(Ctx& ctx, ListId list) {
  ListPeer& p = *ctx.self.peer(list);
  if (p.inflight || p.deleting || p.detached) return;
  if (p.linked_height >= p.target_height) return;
  int walk = p.top();
  Phase epoch = structural_epoch(p);
  // inflight.peer starts as the current parent; it receives the handoff once
  // PROMOTE_LINK fixes the effective epoch, then tracks the new predecessor.
  p.inflight = StructOp{StructOp::Kind::Promote, walk + 1, epoch, p.prev[walk]->id, false};
  Message search;
  search.dst = p.prev[walk]->id;
  search.kind = MsgKind::PromoteSearch;
  search.list = list;
  search.phase = epoch;
  search.level = walk + 1;  // level being acquired
  search.origin = ctx.self.id;
  search.key = p.key;
  ctx.emit(search);
}

void on_promote_search(Ctx& ctx, const Message& msg) {
  ListPeer* pp = ctx.self.peer(msg.list);
  if (!pp) {
    ctx.fault(FaultKind::DeadLetter, "PROMOTE_SEARCH at non-member");
    return;
  }
  ListPeer& p = *pp;
  int walk = msg.level - 1;
  if (p.detached) {
    if (!p.prev[walk]) {
      ctx.fault(FaultKind::DeadLetter, "detached node cannot relay PROMOTE_SEARCH");
      return;
    }
    Message fwd = msg;
    fwd.dst = p.prev[walk]->id;
    ctx.emit(fwd);
    return;
  }
  if (p.deleting) {
    p.deferred_until_detach.push_back(msg);
    return;
  }
  if (p.linked_height > msg.level) {
    // `self` is present at the acquired level; a racing splice may already
    // have linked closer predecessors there, so keep moving right if needed.
    if (p.next[msg.level] && p.next[msg.level]->key < msg.key) {
      Message fwd = msg;
      fwd.dst = p.next[msg.level]->id;
      ctx.emit(fwd);
      return;
    }
    if (p.frozen.count(msg.level)) {
      defer_at_level(ctx, p, msg.level, msg);
      return;
    }
    p.frozen.insert(msg.level);
    // We may already have sealed phases past the requested epoch; the child
    // set change cannot take effect inside a sealed phase.
    Phase epoch = msg.phase;
    if (msg.list == ListId::Scsl) epoch = std::max(epoch, p.phase);
    std::optional<Neighbor> succ = p.next[msg.level];
    bool transfer = succ && p.child_active(succ->id, epoch);
    Phase transfer_from = epoch;
    if (transfer && p.list == ListId::Scsl) {
      for (const auto& [ph, entry] : p.ledger)
        if (ph >= transfer_from && entry.signaled.count(succ->id)) transfer_from = ph + 1;
    }
    p.drop_child_from(msg.origin, epoch);  // no-op unless we were its parent
    adopt_child(ctx, p, msg.origin, epoch);
    if (transfer) {
      p.drop_child_from(succ->id, transfer_from);
      p.add_reroute(succ->id, transfer_from, msg.origin);
    }
    p.holds[msg.level] =
        SpliceHold{SpliceHold::Kind::Promote, msg.origin, msg.key, succ, epoch};
    Message link;
    link.dst = msg.origin;
    link.kind = MsgKind::PromoteLink;
    link.list = msg.list;
    link.phase = epoch;
    link.level = msg.level;
    link.src_key = p.key;
    if (succ) {
      link.peer = succ->id;
      link.peer_key = succ->key;
    }
    link.transfer_flag = transfer;
    link.transfer_from = transfer_from;
    ctx.emit(link);
    return;
  }
  // Keep walking left along the level below.
  if (!p.prev[walk]) {
    ctx.fault(FaultKind::ProtocolViolation, "PROMOTE_SEARCH fell off the list");
    return;
  }
  Message fwd = msg;
  fwd.dst = p.prev[walk]->id;
  ctx.emit(fwd);
}

void on_promote_link(Ctx& ctx, const Message& msg) {
  ListPeer* pp = ctx.self.peer(msg.list);
  if (!pp || !pp->inflight || pp->inflight->kind != StructOp::Kind::Promote) {
    ctx.fault(FaultKind::ProtocolViolation, "unexpected PROMOTE_LINK");
    return;
  }
  ListPeer& p = *pp;
  p.linked_height = msg.level + 1;
  p.prev[msg.level] = Neighbor{msg.src, msg.src_key};
  if (msg.peer != kNoNode)
    p.next[msg.level] = Neighbor{msg.peer, msg.peer_key};
  else
    p.next[msg.level].reset();
  p.set_parent_from(msg.phase, Neighbor{msg.src, msg.src_key});
  if (msg.transfer_flag) adopt_child(ctx, p, msg.peer, msg.transfer_from);
  // The old parent keeps covering us up to the effective epoch the new
  // predecessor settled on; tell it where to stop.
  if (p.inflight->peer != kNoNode && p.inflight->peer != msg.src) {
    Message off;
    off.dst = p.inflight->peer;
    off.kind = MsgKind::PromoteHandoff;
    off.list = msg.list;
    off.phase = msg.phase;
    off.level = msg.level;
    off.origin = ctx.self.id;
    ctx.emit(off);
  }
  p.inflight->epoch = msg.phase;
  p.inflight->peer = msg.src;
  p.inflight->parent_known = true;
  if (msg.peer != kNoNode) {
    Message att;
    att.dst = msg.peer;
    att.kind = MsgKind::PromoteAttached;
    att.list = msg.list;
    att.phase = msg.transfer_flag ? msg.transfer_from : msg.phase;
    att.level = msg.level;
    att.key = p.key;
    att.peer = msg.src;  // ACK destination
    ctx.emit(att);
  } else {
    Message ack;
    ack.dst = msg.src;
    ack.kind = MsgKind::PromoteAck;
    ack.list = msg.list;
    ack.phase = msg.phase;
    ack.level = msg.level;
    ack.origin = ctx.self.id;
    ctx.emit(ack);
  }
}

void on_promote_attached(Ctx& ctx, const Message& msg) {
  ListPeer* pp = ctx.self.peer(msg.list);
  if (!pp || pp->detached) {
    ctx.fault(FaultKind::DeadLetter, "PROMOTE_ATTACHED at detached or non-member node");
    return;
  }
  ListPeer& p = *pp;
  p.prev[msg.level] = Neighbor{msg.src, msg.key};
  if (p.top() == msg.level)
    p.set_parent_from(msg.phase, Neighbor{msg.src, msg.key});
  Message ack;
  ack.dst = msg.peer;
  ack.kind = MsgKind::PromoteAck;
  ack.list = msg.list;
  ack.phase = msg.phase;
  ack.level = msg.level;
  ack.origin = msg.src;
  ctx.emit(ack);
}

void on_promote_ack(Ctx& ctx, const Message& msg) {
  ListPeer* pp = ctx.self.peer(msg.list);
  if (!pp) {
    ctx.fault(FaultKind::DeadLetter, "PROMOTE_ACK at non-member");
    return;
  }
  ListPeer& p = *pp;
  auto hold = p.holds.find(msg.level);
  if (hold != p.holds.end() && hold->second.kind == SpliceHold::Kind::Promote) {
    SpliceHold h = hold->second;
    p.holds.erase(hold);
    p.next[msg.level] = Neighbor{h.newcomer, h.newcomer_key};
    p.frozen.erase(msg.level);
    Message done;
    done.dst = h.newcomer;
    done.kind = MsgKind::PromoteAck;
    done.list = msg.list;
    done.phase = h.epoch;
    done.level = msg.level;
    ctx.emit(done);
    release_deferred(ctx, p, msg.level);
    return;
  }
  if (p.inflight && p.inflight->kind == StructOp::Kind::Promote &&
      p.inflight->level == msg.level) {
    p.inflight.reset();
    ctx.event(Annotation::Type::PromoteDone, msg.phase, msg.list);
    if (p.linked_height < p.target_height) do_begin_promote(ctx, msg.list);
    return;
  }
  ctx.fault(FaultKind::ProtocolViolation, "unexpected PROMOTE_ACK");
}

void on_promote_handoff(Ctx& ctx, const Message& msg) {
  // Old parent of a promoted node: stop covering it at the effective epoch.
  ListPeer* pp = ctx.self.peer(msg.list);
  if (!pp || pp->detached) return;
  pp->drop_child_from(msg.origin, msg.phase);
}

// ---------------------------------------------------------------------------
// Level-by-level deletion

void send_unlink(Ctx& ctx, ListPeer& p, int level) {
  Phase epoch = p.inflight->epoch;
  const std::optional<Neighbor>& pred = p.prev[level];
  std::optional<Neighbor> succ = p.next[level];
  bool transfer = succ && p.child_active(succ->id, epoch);

  Message unlink;
  unlink.dst = pred->id;
  unlink.kind = MsgKind::DeleteUnlink;
  unlink.list = p.list;
  unlink.phase = epoch;
  unlink.level = level;
  unlink.origin = ctx.self.id;
  unlink.key = p.key;
  if (succ) {
    unlink.peer = succ->id;
    unlink.peer_key = succ->key;
  }
  unlink.transfer_flag = transfer;
  ctx.emit(unlink);

  if (transfer) {
    // The successor at this level is one of our signal children; point it at
    // its new parent and forward any of its early signals the same way.
    Neighbor new_parent = *pred;
    if (ctx.cfg.mutation == Mutation::WrongReparent) {
      auto wrong = p.parent_at(epoch);
      if (wrong) new_parent = *wrong;
    }
    Message fix;
    fix.dst = succ->id;
    fix.kind = MsgKind::DeleteUnlink;
    fix.list = p.list;
    fix.phase = epoch;
    fix.level = level;
    fix.fix_flag = true;
    fix.peer = new_parent.id;
    fix.peer_key = new_parent.key;
    ctx.emit(fix);
    p.drop_child_from(succ->id, epoch);
    p.add_reroute(succ->id, epoch, new_parent.id);
  }
}

void do_begin_delete(Ctx& ctx, ListId list) {
  ListPeer& p = *ctx.self.peer(list);
  if (p.inflight || p.deleting || p.detached || p.is_sentinel) {
    ctx.fault(FaultKind::ProtocolViolation, "invalid delete initiation");
    return;
  }
  Phase epoch = structural_epoch(p);
  p.deleting = true;
  // Levels unlink bottom-up so every predecessor that inherits one of our
  // children records the handover before our own parent edge goes away.
  p.inflight = StructOp{StructOp::Kind::Delete, 0, epoch, kNoNode, false};
  if (list == ListId::Scsl) {
    // Signals at or past the epoch already in the ledger belong to the
    // children's new parents; replay them through the reroutes at detach.
    for (auto it = p.ledger.lower_bound(epoch); it != p.ledger.end();
         it = p.ledger.erase(it)) {
      for (NodeId c : it->second.signaled) {
        Message sig;
        sig.src = ctx.self.id;
        sig.dst = ctx.self.id;
        sig.kind = MsgKind::Signal;
        sig.list = ListId::Scsl;
        sig.phase = it->first;
        sig.origin = c;
        p.deferred_until_detach.push_back(sig);
      }
    }
  }
  send_unlink(ctx, p, 0);
}

void on_delete_unlink(Ctx& ctx, const Message& msg) {
  ListPeer* pp = ctx.self.peer(msg.list);
  if (!pp) {
    ctx.fault(FaultKind::DeadLetter, "DELETE_UNLINK at non-member");
    return;
  }
  ListPeer& p = *pp;
  if (msg.fix_flag) {
    // Child prev/parent fix from a departing parent.
    if (p.detached) return;  // both sides deleting; nothing left to fix
    p.prev[msg.level] = Neighbor{msg.peer, msg.peer_key};
    if (p.top() == msg.level)
      p.set_parent_from(msg.phase, Neighbor{msg.peer, msg.peer_key});
    return;
  }
  if (p.detached) {
    if (!p.prev[msg.level]) {
      ctx.fault(FaultKind::DeadLetter, "detached node cannot relay DELETE_UNLINK");
      return;
    }
    Message fwd = msg;
    fwd.dst = p.prev[msg.level]->id;
    ctx.emit(fwd);
    return;
  }
  if (p.deleting) {
    p.deferred_until_detach.push_back(msg);
    return;
  }
  // Nodes may have spliced in between us and the deleter; pass rightward. If
  // a child handover rides on this unlink, its fix already named us, so keep
  // relaying its signals toward whoever actually adopts it.
  if (p.next[msg.level] && p.next[msg.level]->id != msg.origin &&
      p.next[msg.level]->key < msg.key) {
    if (msg.transfer_flag) p.add_reroute(msg.peer, msg.phase, p.next[msg.level]->id);
    Message fwd = msg;
    fwd.dst = p.next[msg.level]->id;
    ctx.emit(fwd);
    return;
  }
  if (!p.next[msg.level] || p.next[msg.level]->id != msg.origin) {
    ctx.fault(FaultKind::ProtocolViolation, "DELETE_UNLINK lost its target");
    return;
  }
  if (p.frozen.count(msg.level)) {
    defer_at_level(ctx, p, msg.level, msg);
    return;
  }
  if (msg.peer != kNoNode)
    p.next[msg.level] = Neighbor{msg.peer, msg.peer_key};
  else
    p.next[msg.level].reset();
  if (msg.transfer_flag) adopt_child(ctx, p, msg.peer, msg.phase);
  p.drop_child_from(msg.origin, msg.phase);
  Message ack;
  ack.dst = msg.origin;
  ack.kind = MsgKind::DeleteAck;
  ack.list = msg.list;
  ack.phase = msg.phase;
  ack.level = msg.level;
  ctx.emit(ack);
}

void finish_delete(Ctx& ctx, ListPeer& p) {
  Phase epoch = p.inflight->epoch;
  p.inflight.reset();
  p.detached = true;
  ctx.event(Annotation::Type::DeleteDone, epoch, p.list);
  NodeState& n = ctx.self;
  bool scsl_gone = !n.scsl || !is_signaler(n.mode) || n.scsl->detached;
  bool snsl_gone = !n.snsl || !is_waiter(n.mode) || n.snsl->detached;
  if (scsl_gone && snsl_gone) n.dropped = true;
  release_detach_deferred(ctx, p);
}

void maybe_finish_delete(Ctx& ctx) {
  if (!ctx.self.scsl) return;
  ListPeer& p = *ctx.self.scsl;
  if (!p.deleting || p.detached) return;
  if (!p.inflight || p.inflight->kind != StructOp::Kind::Delete ||
      !p.inflight->parent_known)
    return;  // unlinks still in progress
  // Ready once the pre-epoch relay duty is discharged; phases at or past the
  // configured horizon are never collected by anyone.
  if (p.phase >= p.inflight->epoch || p.phase >= ctx.cfg.phases)
    finish_delete(ctx, p);
}

void on_delete_ack(Ctx& ctx, const Message& msg) {
  ListPeer* pp = ctx.self.peer(msg.list);
  if (!pp || !pp->inflight || pp->inflight->kind != StructOp::Kind::Delete) {
    ctx.fault(FaultKind::ProtocolViolation, "unexpected DELETE_ACK");
    return;
  }
  ListPeer& p = *pp;
  if (msg.level != p.inflight->level) {
    ctx.fault(FaultKind::ProtocolViolation, "DELETE_ACK level mismatch");
    return;
  }
  if (msg.level < p.top()) {
    p.inflight->level = msg.level + 1;
    send_unlink(ctx, p, msg.level + 1);
    return;
  }
  // All levels unlinked. An SCSL member still owes its parent the aggregate
  // of the phase before the handover epoch; detach once that is forwarded.
  p.inflight->parent_known = true;
  if (msg.list == ListId::Scsl) {
    maybe_finish_delete(ctx);
    return;
  }
  finish_delete(ctx, p);
}

// ---------------------------------------------------------------------------

void emit_insert_search(Ctx& ctx, ListId list, NodeId child, Key child_key, int child_height) {
  Message search;
  search.dst = list == ListId::Scsl ? ctx.cfg.scsl_head : ctx.cfg.snsl_head;
  search.kind = MsgKind::InsertSearch;
  search.list = list;
  search.level = -1;
  search.origin = ctx.self.id;
  search.key = child_key;
  search.peer = child;
  search.height = child_height;
  ctx.emit(search);
}

void process_message(Ctx& ctx, const Message& msg) {
  switch (msg.kind) {
    case MsgKind::Signal: on_signal(ctx, msg); break;
    case MsgKind::PhaseComplete: on_phase_complete(ctx, msg); break;
    case MsgKind::Notify: on_notify(ctx, msg); break;
    case MsgKind::InsertSearch: on_insert_search(ctx, msg); break;
    case MsgKind::InsertLink: on_insert_link(ctx, msg); break;
    case MsgKind::InsertAttached: on_insert_attached(ctx, msg); break;
    case MsgKind::InsertAck: on_insert_ack(ctx, msg); break;
    case MsgKind::PromoteSearch: on_promote_search(ctx, msg); break;
    case MsgKind::PromoteLink: on_promote_link(ctx, msg); break;
    case MsgKind::PromoteAttached: on_promote_attached(ctx, msg); break;
    case MsgKind::PromoteAck: on_promote_ack(ctx, msg); break;
    case MsgKind::PromoteHandoff: on_promote_handoff(ctx, msg); break;
    case MsgKind::DeleteUnlink: on_delete_unlink(ctx, msg); break;
    case MsgKind::DeleteAck: on_delete_ack(ctx, msg); break;
    case MsgKind::BootExchange:
    case MsgKind::BootSentinel:
      handle_boot(ctx.self, msg, ctx.cfg, ctx.r.out, ctx.r.faults);
      break;
  }
}

}  // namespace

HandlerResult handle_message(const NodeState& node, const Message& msg, const WorldConfig& cfg) {
  Ctx ctx(node, cfg);
  process_message(ctx, msg);
  pump_scsl(ctx);
  maybe_finish_delete(ctx);
  return std::move(ctx.r);
}

HandlerResult start_task_phase(const NodeState& node, const WorldConfig& cfg) {
  Ctx ctx(node, cfg);
  NodeState& n = ctx.self;
  if (n.mode == Mode::Sentinel) {
    pump_scsl(ctx);  // zero-signaler phases complete from here
    return std::move(ctx.r);
  }
  if (n.dropped) {
    ctx.fault(FaultKind::ProtocolViolation, "next() on dropped task");
    return std::move(ctx.r);
  }
  if (n.task_phase < n.plan.run_phases) {
    if (is_signaler(n.mode)) do_signal(ctx, n.task_phase);
    if (is_waiter(n.mode))
      n.pending_wait = true;
    else
      n.task_phase += 1;
  }
  pump_scsl(ctx);
  return std::move(ctx.r);
}

HandlerResult spawn_insert(const NodeState& parent, ListId list, NodeId child, Key child_key,
                           int child_height, const WorldConfig& cfg) {
  Ctx ctx(parent, cfg);
  emit_insert_search(ctx, list, child, child_key, child_height);
  return std::move(ctx.r);
}

HandlerResult begin_delete(const NodeState& node, ListId list, const WorldConfig& cfg) {
  Ctx ctx(node, cfg);
  do_begin_delete(ctx, list);
  pump_scsl(ctx);
  maybe_finish_delete(ctx);
  return std::move(ctx.r);
}

HandlerResult begin_promote(const NodeState& node, ListId list, const WorldConfig& cfg) {
  Ctx ctx(node, cfg);
  do_begin_promote(ctx, list);
  return std::move(ctx.r);
}

}  // namespace dphaser
