#include "dphaser/verifier.hpp"

#include <set>

#include "dphaser/phaser.hpp"
#include "dphaser/topology.hpp"
#include "json.hpp"

namespace dphaser {
namespace {

// Path-local barrier-safety state: no waiter may unblock from phase f before
// every signaler whose membership covers f has signaled f. Membership comes
// from the task plans plus insert-completion epochs observed on the path.
struct BarrierChecker {
  struct Req {
    Phase from = 0;
    Phase to = 0;  // must signal phases [from, to)
  };
  std::map<NodeId, Req> signalers;
  std::map<Phase, std::set<NodeId>> seen;

  static Phase req_to(const NodeState& n) {
    return n.plan.drop_after ? std::min(n.plan.run_phases, *n.plan.drop_after + 1)
                             : n.plan.run_phases;
  }

  void init(const SimWorld& w) {
    for (const auto& [id, n] : w.nodes) {
      if (n.mode != Mode::Sentinel && is_signaler(n.mode) && n.scsl && !n.scsl->detached)
        signalers[id] = Req{0, req_to(n)};
    }
  }

  std::optional<std::string> apply(const SimWorld& w, const Annotation& e) {
    switch (e.type) {
      case Annotation::Type::SignalCall:
        seen[e.phase].insert(e.node);
        break;
      case Annotation::Type::InsertDone:
        if (e.list == ListId::Scsl)
          signalers[e.node] = Req{e.phase, req_to(w.nodes.at(e.node))};
        break;
      case Annotation::Type::Unblock:
        for (const auto& [s, r] : signalers) {
          if (r.from <= e.phase && e.phase < r.to && !seen[e.phase].count(s))
            return "waiter " + std::to_string(e.node) + " unblocked from phase " +
                   std::to_string(e.phase) + " before signaler " + std::to_string(s) +
                   " signaled";
        }
        break;
      default:
        break;
    }
    return std::nullopt;
  }
};

std::vector<std::string> terminal_checks(const SimWorld& w) {
  std::vector<std::string> errs;
  for (const auto& [id, n] : w.nodes) {
    if (n.mode == Mode::Sentinel) {
      if (n.scsl && n.scsl->phase != w.cfg.phases)
        errs.push_back("head signaler stalled at phase " + std::to_string(n.scsl->phase));
      if (n.snsl && n.snsl->last_notified != w.cfg.phases - 1)
        errs.push_back("head waiter stalled at phase " + std::to_string(n.snsl->last_notified));
    } else if (!n.dropped) {
      if (n.plan.drop_after)
        errs.push_back("task " + std::to_string(id) + " failed to drop");
      else if (n.pending_wait || n.task_phase < n.plan.run_phases)
        errs.push_back("task " + std::to_string(id) + " stalled at phase " +
                       std::to_string(n.task_phase));
    }
    for (ListId list : {ListId::Scsl, ListId::Snsl}) {
      const ListPeer* p = n.peer(list);
      if (!p || p->detached) continue;
      std::string who = std::string(list_name(list)) + " peer " + std::to_string(id);
      if (!p->frozen.empty() || !p->holds.empty()) errs.push_back(who + " still frozen");
      bool deferred = !p->deferred_until_detach.empty();
      for (const auto& [level, q] : p->deferred) deferred |= !q.empty();
      if (deferred) errs.push_back(who + " has deferred messages");
      if (!p->notify_ahead.empty()) errs.push_back(who + " has undelivered buffered notifications");
      if (p->inflight) errs.push_back(who + " has an unfinished structural op");
      if (p->deleting) errs.push_back(who + " is stuck deleting");
      if (p->boot) errs.push_back(who + " never finished bootstrap");
    }
  }
  for (ListId list : {ListId::Scsl, ListId::Snsl})
    for (const auto& e : validate_topology(w, list)) errs.push_back(e);
  return errs;
}

struct Explorer {
  VerifyOptions opt;
  VerifyResult res;
  std::set<uint64_t> visited;
  std::set<uint64_t> terminal_digests;
  std::map<uint64_t, SimWorld> audit;  // digest -> representative (audit mode)
  std::vector<ChannelKey> path;

  bool violation(std::vector<std::string> errs, uint64_t digest) {
    res.ok = false;
    res.errors = std::move(errs);
    res.counterexample = path;
    res.violation_digest = digest;
    return true;
  }

  // Returns true when a violation was found and exploration must stop.
  bool dfs(SimWorld& w, BarrierChecker& bc, size_t ev_cursor) {
    while (ev_cursor < w.initial_events.size()) {
      if (auto err = bc.apply(w, w.initial_events[ev_cursor++]))
        return violation({*err}, w.digest());
    }
    if (!w.faults.empty()) {
      std::vector<std::string> errs;
      for (const auto& f : w.faults)
        errs.push_back(std::string(fault_name(f.kind)) + " at node " + std::to_string(f.node) +
                       ": " + f.detail);
      return violation(std::move(errs), w.digest());
    }
    if (res.explored >= opt.state_limit) {
      res.truncated = true;
      return false;
    }
    ++res.explored;

    std::vector<ChannelKey> ready = w.nonempty_channels();
    if (ready.empty()) {
      if (inject_pending(w)) return dfs(w, bc, ev_cursor);
      ++res.maximal_paths;
      terminal_digests.insert(w.digest());
      res.terminals = terminal_digests.size();
      std::vector<std::string> errs = terminal_checks(w);
      if (!errs.empty()) return violation(std::move(errs), w.digest());
      return false;
    }
    if (path.size() >= opt.max_depth) {
      res.truncated = true;
      return false;
    }

    std::vector<ChannelKey> candidates;
    if (opt.decompose) {
      // Only races between messages of the chosen kind branch; anything else
      // is delivered in canonical channel order.
      for (const auto& ck : ready) {
        if (w.channels.at(ck).front().kind != opt.decompose_kind) {
          candidates = {ck};
          break;
        }
      }
      if (candidates.empty()) candidates = ready;
    } else {
      candidates = ready;
    }

    for (const auto& ck : candidates) {
      SimWorld next = w;
      BarrierChecker nbc = bc;
      TraceEvent ev = next.step_channel(ck);
      ++res.transitions;
      path.push_back(ck);
      bool stop = false;
      std::optional<std::string> berr;
      for (const auto& e : ev.events) {
        if ((berr = nbc.apply(next, e))) break;
      }
      if (berr) {
        stop = violation({*berr}, next.digest());
      } else if (!next.faults.empty()) {
        // Check faults before dedup: the digest covers nodes and channels,
        // not the fault log, so a faulty state must never be pruned.
        std::vector<std::string> errs;
        for (const auto& f : next.faults)
          errs.push_back(std::string(fault_name(f.kind)) + " at node " +
                         std::to_string(f.node) + ": " + f.detail);
        stop = violation(std::move(errs), next.digest());
      } else {
        bool prune = false;
        if (opt.dedup) {
          uint64_t d = next.digest();
          if (!visited.insert(d).second) {
            if (opt.audit_collisions) {
              auto it = audit.find(d);
              if (it != audit.end() && !next.structurally_equal(it->second)) {
                ++res.digest_collisions;
              } else {
                prune = true;
              }
            } else {
              prune = true;
            }
            if (prune) ++res.deduped;
          } else if (opt.audit_collisions) {
            audit.emplace(d, next);
          }
        }
        if (!prune) stop = dfs(next, nbc, ev_cursor);
      }
      path.pop_back();
      if (stop) return true;
    }
    return false;
  }
};

}  // namespace

VerifyResult verify(const Scenario& s, const VerifyOptions& opt) {
  Explorer ex;
  ex.opt = opt;
  SimWorld root = s.world;
  root.record_trace = false;
  BarrierChecker bc;
  bc.init(root);
  ex.dfs(root, bc, 0);
  return ex.res;
}

VerifyResult decomposed_verify(const Scenario& s, VerifyOptions opt) {
  opt.decompose = true;
  VerifyResult merged;
  for (int k = 0; k <= static_cast<int>(MsgKind::BootSentinel); ++k) {
    opt.decompose_kind = static_cast<MsgKind>(k);
    VerifyResult r = verify(s, opt);
    merged.explored += r.explored;
    merged.transitions += r.transitions;
    merged.terminals += r.terminals;
    merged.maximal_paths += r.maximal_paths;
    merged.deduped += r.deduped;
    merged.digest_collisions += r.digest_collisions;
    merged.truncated |= r.truncated;
    if (!r.ok && merged.ok) {
      merged.ok = false;
      merged.errors = r.errors;
      merged.counterexample = r.counterexample;
    }
  }
  return merged;
}

std::vector<std::string> replay(const Scenario& s, const std::vector<ChannelKey>& schedule,
                                uint64_t max_steps, uint64_t* end_digest) {
  SimWorld w = s.world;
  w.record_trace = false;
  BarrierChecker bc;
  bc.init(w);
  size_t ev_cursor = 0;
  std::vector<std::string> errs;
  auto drain_events = [&]() {
    while (ev_cursor < w.initial_events.size()) {
      if (auto err = bc.apply(w, w.initial_events[ev_cursor++])) errs.push_back(*err);
    }
  };
  drain_events();
  uint64_t steps = 0;
  for (const auto& ck : schedule) {
    while (true) {
      auto it = w.channels.find(ck);
      if (it != w.channels.end() && !it->second.empty()) break;
      if (!inject_pending(w)) {
        errs.push_back("schedule diverged: channel empty");
        return errs;
      }
      drain_events();
    }
    if (++steps > max_steps) break;
    TraceEvent ev = w.step_channel(ck);
    for (const auto& e : ev.events) {
      if (auto err = bc.apply(w, e)) errs.push_back(*err);
    }
  }
  // Mirror the explorer's digest point: a fault is captured right after the
  // offending delivery, a terminal violation after pending injections settle.
  if (w.faults.empty())
    while (w.nonempty_channels().empty() && inject_pending(w)) drain_events();
  if (end_digest) *end_digest = w.digest();
  for (const auto& f : w.faults)
    errs.push_back(std::string(fault_name(f.kind)) + " at node " + std::to_string(f.node) + ": " +
                   f.detail);
  if (w.nonempty_channels().empty())
    for (const auto& e : terminal_checks(w)) errs.push_back(e);
  return errs;
}

std::string verify_report_json(const std::string& kind, const VerifyResult& r,
                               uint64_t max_depth) {
  nlohmann::json j;
  j["kind"] = kind;
  j["states_visited"] = r.explored;
  j["max_depth"] = max_depth;
  nlohmann::json violations = nlohmann::json::array();
  if (!r.ok) {
    nlohmann::json schedule = nlohmann::json::array();
    for (const auto& [src, dst] : r.counterexample) schedule.push_back({src, dst});
    for (const auto& e : r.errors)
      violations.push_back({{"predicate", e}, {"schedule", schedule}});
  }
  j["violations"] = violations;
  j["quiesced"] = !r.truncated;
  j["transitions"] = r.transitions;
  j["terminals"] = r.terminals;
  j["maximal_paths"] = r.maximal_paths;
  j["deduped"] = r.deduped;
  j["digest_collisions"] = r.digest_collisions;
  return j.dump();
}

}  // namespace dphaser
