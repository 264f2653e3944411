#include "dphaser/phaser.hpp"

#include "dphaser/bootstrap.hpp"
#include "dphaser/protocol.hpp"
#include "dphaser/topology.hpp"

namespace dphaser {

Key task_key(size_t i) { return static_cast<Key>(i + 1) << 20; }

namespace {

ListPeer make_peer(ListId list, Key key, int height, int max_height, bool sentinel) {
  ListPeer p;
  p.list = list;
  p.key = key;
  p.is_sentinel = sentinel;
  p.target_height = height;
  p.linked_height = sentinel ? height : 1;
  p.next.resize(max_height);
  p.prev.resize(max_height);
  return p;
}

// Applies a local-op result and reports whether it did anything, so callers
// can tell productive injections from no-ops.
bool maybe_apply(SimWorld& w, const NodeState& before, const HandlerResult& r) {
  bool changed = !r.out.empty() || !r.faults.empty() || !r.events.empty() ||
                 !node_equal(before, r.state);
  if (changed) w.apply_local(r);
  return changed;
}

}  // namespace

SimWorld phaser_new(const PhaserSpec& spec, SchedulePolicy policy) {
  size_t n = spec.modes.size();
  WorldConfig cfg;
  cfg.max_height = max_height_for(n);
  cfg.p = spec.p;
  cfg.phases = spec.phases;
  cfg.scsl_head = static_cast<NodeId>(n);
  cfg.snsl_head = static_cast<NodeId>(n + 1);
  cfg.mutation = spec.mutation;

  SimWorld w(cfg, policy, spec.seed);
  w.next_node_id = static_cast<NodeId>(n + 2);

  std::mt19937_64 height_rng(spec.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<int> heights(n);
  for (size_t i = 0; i < n; ++i) heights[i] = sample_height(height_rng, spec.p, cfg.max_height);

  std::vector<NodeId> scsl_roster, snsl_roster;
  for (size_t i = 0; i < n; ++i) {
    NodeState t;
    t.id = static_cast<NodeId>(i);
    t.mode = spec.modes[i];
    t.plan.run_phases = spec.phases;
    if (is_signaler(t.mode)) {
      t.scsl = make_peer(ListId::Scsl, task_key(i), heights[i], cfg.max_height, false);
      scsl_roster.push_back(t.id);
    }
    if (is_waiter(t.mode)) {
      t.snsl = make_peer(ListId::Snsl, task_key(i), heights[i], cfg.max_height, false);
      snsl_roster.push_back(t.id);
    }
    w.nodes[t.id] = std::move(t);
  }

  for (auto [head, list, roster] :
       {std::tuple{cfg.scsl_head, ListId::Scsl, &scsl_roster},
        std::tuple{cfg.snsl_head, ListId::Snsl, &snsl_roster}}) {
    NodeState s;
    s.id = head;
    s.mode = Mode::Sentinel;
    ListPeer p = make_peer(list, 0, cfg.max_height, cfg.max_height, true);
    // Block phase pumping until the leftmost participant hands over its table.
    if (!roster->empty()) p.boot = BootState{};
    if (list == ListId::Scsl)
      s.scsl = std::move(p);
    else
      s.snsl = std::move(p);
    w.nodes[head] = std::move(s);
  }

  for (auto [list, roster] :
       {std::pair{ListId::Scsl, &scsl_roster}, std::pair{ListId::Snsl, &snsl_roster}}) {
    for (size_t r = 0; r < roster->size(); ++r) {
      for (const Message& m :
           boot_init(w.nodes[(*roster)[r]], list, static_cast<int>(r), *roster, cfg))
        w.send(m);
    }
  }
  return w;
}

NodeId async_spawn(SimWorld& w, NodeId parent, Mode mode, Key key, int height,
                   const TaskPlan& plan) {
  NodeId id = w.fresh_id();
  NodeState c;
  c.id = id;
  c.mode = mode;
  c.plan = plan;
  if (mode == Mode::SignalWait) c.pending_scsl_insert = PendingInsert{key, height};
  w.nodes[id] = std::move(c);
  ListId first = is_waiter(mode) ? ListId::Snsl : ListId::Scsl;
  w.apply_local(spawn_insert(w.nodes.at(parent), first, id, key, height, w.cfg));
  return id;
}

bool inject_pending(SimWorld& w) {
  bool injected = false;
  for (auto& [id, n] : w.nodes) {
    if (n.mode == Mode::Sentinel) {
      // Kick the SCSL head so phases with no live signalers still complete.
      if (n.scsl && !n.scsl->boot && n.scsl->phase < w.cfg.phases)
        injected |= maybe_apply(w, n, start_task_phase(n, w.cfg));
      continue;
    }
    if (n.mode != Mode::SignalOnly || n.dropped || !n.scsl) continue;
    ListPeer& p = *n.scsl;
    if (p.boot || p.detached || p.deleting) continue;
    if (p.inflight && p.inflight->kind == StructOp::Kind::Insert) continue;
    if (n.plan.drop_after && n.task_phase > *n.plan.drop_after) {
      injected |= maybe_apply(w, n, begin_delete(n, ListId::Scsl, w.cfg));
    } else if (n.task_phase < n.plan.run_phases) {
      injected |= maybe_apply(w, n, start_task_phase(n, w.cfg));
    }
  }
  return injected;
}

bool run_phaser(SimWorld& w, uint64_t step_limit) {
  if (!w.run_to_quiescence(step_limit)) return false;  // finish bootstrap
  for (auto& [id, n] : w.nodes) {
    if (n.mode == Mode::Sentinel || n.mode == Mode::SignalOnly) continue;
    maybe_apply(w, n, start_task_phase(n, w.cfg));
  }
  for (;;) {
    if (!w.run_to_quiescence(step_limit)) return false;
    if (!inject_pending(w)) return true;
  }
}

}  // namespace dphaser
