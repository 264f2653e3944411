#include "dphaser/sim.hpp"

#include <fstream>

#include "dphaser/protocol.hpp"
#include "json.hpp"

namespace dphaser {

std::optional<MsgKind> kind_from_name(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(MsgKind::BootSentinel); ++k) {
    MsgKind kind = static_cast<MsgKind>(k);
    if (name == kind_name(kind)) return kind;
  }
  return std::nullopt;
}

const char* mutation_name(Mutation m) {
  switch (m) {
    case Mutation::None: return "none";
    case Mutation::DropAck: return "drop-ack";
    case Mutation::EarlyForward: return "early-forward";
    case Mutation::SkipFreeze: return "skip-freeze";
    case Mutation::WrongReparent: return "wrong-reparent";
    case Mutation::PhaseOffByOne: return "phase-off-by-one";
  }
  return "?";
}

std::optional<Mutation> mutation_from_name(const std::string& name) {
  for (int m = 0; m <= static_cast<int>(Mutation::PhaseOffByOne); ++m) {
    Mutation mut = static_cast<Mutation>(m);
    if (name == mutation_name(mut)) return mut;
  }
  return std::nullopt;
}

void SimWorld::send(const Message& m) {
  Message tagged = m;
  tagged.seq = send_seq++;
  std::deque<Message>& q = channels[{tagged.src, tagged.dst}];
  if (q.empty()) fifo_index.emplace(tagged.seq, ChannelKey{tagged.src, tagged.dst});
  q.push_back(std::move(tagged));
  ++sent;
}

void SimWorld::apply_local(const HandlerResult& r) {
  nodes[r.state.id] = r.state;
  for (const auto& m : r.out) send(m);
  for (const auto& f : r.faults) faults.push_back(f);
  for (const auto& e : r.events) initial_events.push_back(e);
}

std::vector<ChannelKey> SimWorld::nonempty_channels() const {
  std::vector<ChannelKey> out;
  for (const auto& [ck, q] : channels)
    if (!q.empty()) out.push_back(ck);
  return out;
}

std::optional<TraceEvent> SimWorld::step() {
  if (fifo_index.empty()) return std::nullopt;
  // The index holds one entry per nonempty channel, keyed by the send seq of
  // its front message, so begin() is the globally oldest undelivered message.
  auto oldest = [&]() -> ChannelKey { return fifo_index.begin()->second; };
  std::optional<ChannelKey> pick;
  switch (policy.kind) {
    case SchedulePolicy::Kind::FifoGlobal:
      pick = oldest();
      break;
    case SchedulePolicy::Kind::SeededRandom: {
      std::vector<ChannelKey> ready = nonempty_channels();
      std::uniform_int_distribution<size_t> d(0, ready.size() - 1);
      pick = ready[d(rng)];
      break;
    }
    case SchedulePolicy::Kind::Explicit:
      while (policy.cursor < policy.schedule.size()) {
        const ChannelKey& ck = policy.schedule[policy.cursor];
        auto it = channels.find(ck);
        if (it != channels.end() && !it->second.empty()) {
          pick = ck;
          ++policy.cursor;
          break;
        }
        ++policy.cursor;
      }
      if (!pick) pick = oldest();
      break;
    case SchedulePolicy::Kind::AdversarialOnKind:
      // Starve the target kind: deliver anything else first, oldest first.
      for (const auto& [seq, ck] : fifo_index) {
        if (channels.at(ck).front().kind != policy.target) {
          pick = ck;
          break;
        }
      }
      if (!pick) pick = oldest();
      break;
  }
  return step_channel(*pick);
}

TraceEvent SimWorld::step_channel(const ChannelKey& ck) {
  std::deque<Message>& q = channels[ck];
  Message msg = q.front();
  q.pop_front();
  fifo_index.erase(msg.seq);
  if (!q.empty()) fifo_index.emplace(q.front().seq, ck);

  TraceEvent ev;
  ev.step = delivered;
  ev.delivered = msg;

  auto it = nodes.find(msg.dst);
  if (it == nodes.end()) {
    faults.push_back(Fault{FaultKind::DeadLetter, msg.dst, "message to unknown node"});
  } else {
    HandlerResult r = handle_message(it->second, msg, cfg);
    it->second = std::move(r.state);
    for (const auto& m : r.out) {
      send(m);
      ev.emitted.push_back(m);
    }
    for (const auto& f : r.faults) faults.push_back(f);
    ev.events = std::move(r.events);
    ev.digest = node_digest(it->second);
  }
  auto qit = channels.find(ck);
  if (qit != channels.end() && qit->second.empty()) channels.erase(qit);
  ++delivered;
  if (record_trace) trace.push_back(ev);
  return ev;
}

bool SimWorld::run_to_quiescence(uint64_t step_limit) {
  for (uint64_t i = 0; i < step_limit; ++i) {
    if (!step()) return true;
  }
  return pending() == 0;
}

uint64_t SimWorld::digest() const {
  Fnv1a f;
  for (const auto& [id, n] : nodes) {
    f.u32(id);
    f.u64(node_digest(n));
  }
  for (const auto& [ck, q] : channels) {
    if (q.empty()) continue;
    f.u32(ck.first);
    f.u32(ck.second);
    f.u64(q.size());
    for (const auto& m : q) m.digest(f);
  }
  return f.h;
}

bool SimWorld::structurally_equal(const SimWorld& o) const {
  if (nodes.size() != o.nodes.size()) return false;
  for (const auto& [id, n] : nodes) {
    auto it = o.nodes.find(id);
    if (it == o.nodes.end() || !node_equal(n, it->second)) return false;
  }
  auto nonempty = nonempty_channels();
  if (nonempty != o.nonempty_channels()) return false;
  for (const auto& ck : nonempty) {
    const auto& a = channels.at(ck);
    const auto& b = o.channels.at(ck);
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
      Fnv1a fa, fb;
      a[i].digest(fa);
      b[i].digest(fb);
      if (fa.h != fb.h) return false;
    }
  }
  return true;
}

namespace {

nlohmann::json message_json(const Message& m) {
  nlohmann::json j;
  j["src"] = m.src;
  j["dst"] = m.dst;
  j["kind"] = kind_name(m.kind);
  j["list"] = m.list == ListId::Scsl ? "scsl" : "snsl";
  j["phase"] = m.phase;
  j["level"] = m.level;
  if (m.origin != kNoNode) j["origin"] = m.origin;
  if (m.key != 0) j["key"] = m.key;
  if (m.peer != kNoNode) j["peer"] = m.peer;
  if (m.transfer_flag) j["transfer"] = true;
  if (m.fix_flag) j["fix"] = true;
  if (m.round >= 0) j["round"] = m.round;
  return j;
}

const char* annotation_name(Annotation::Type t) {
  switch (t) {
    case Annotation::Type::SignalCall: return "signal";
    case Annotation::Type::Unblock: return "unblock";
    case Annotation::Type::PhaseComplete: return "phase_complete";
    case Annotation::Type::InsertDone: return "insert_done";
    case Annotation::Type::PromoteDone: return "promote_done";
    case Annotation::Type::DeleteDone: return "delete_done";
  }
  return "?";
}

}  // namespace

std::string trace_event_json(const TraceEvent& ev) {
  nlohmann::json j;
  j["step"] = ev.step;
  j["deliver"] = message_json(ev.delivered);
  j["emit"] = nlohmann::json::array();
  for (const auto& m : ev.emitted) j["emit"].push_back(message_json(m));
  j["events"] = nlohmann::json::array();
  for (const auto& e : ev.events) {
    nlohmann::json a;
    a["type"] = annotation_name(e.type);
    a["node"] = e.node;
    a["phase"] = e.phase;
    a["list"] = e.list == ListId::Scsl ? "scsl" : "snsl";
    j["events"].push_back(a);
  }
  char digest_hex[17];
  snprintf(digest_hex, sizeof digest_hex, "%016llx", static_cast<unsigned long long>(ev.digest));
  j["digest"] = digest_hex;
  return j.dump();
}

void write_trace_jsonl(const SimWorld& w, const std::string& path) {
  std::ofstream out(path);
  for (const auto& ev : w.trace) out << trace_event_json(ev) << "\n";
}

}  // namespace dphaser
