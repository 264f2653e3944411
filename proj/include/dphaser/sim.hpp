#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dphaser/message.hpp"
#include "dphaser/node.hpp"
#include "dphaser/types.hpp"

namespace dphaser {

// Seeded protocol defects used by the mutation-detection suite.
enum class Mutation : uint8_t {
  None,
  DropAck,        // insert successor never acknowledges
  EarlyForward,   // aggregate forwarded before all children signaled
  SkipFreeze,     // insert splice skips the predecessor freeze
  WrongReparent,  // delete re-parents children to the wrong node
  PhaseOffByOne,  // head waiter notifies phase+1
};

std::optional<Mutation> mutation_from_name(const std::string& name);
const char* mutation_name(Mutation m);

struct WorldConfig {
  int max_height = 8;
  double p = 0.5;
  Phase phases = 1;  // phases the sentinels drive
  NodeId scsl_head = kNoNode;
  NodeId snsl_head = kNoNode;
  Mutation mutation = Mutation::None;
};

struct Annotation {
  enum class Type : uint8_t {
    SignalCall,     // task executed signal() for `phase`
    Unblock,        // waiter unblocked for `phase`
    PhaseComplete,  // SCSL head completed `phase`
    InsertDone,     // structural op completed on `list`
    PromoteDone,
    DeleteDone,
  } type;
  NodeId node = kNoNode;
  Phase phase = -1;
  ListId list = ListId::Scsl;
};

struct HandlerResult {
  NodeState state;
  std::vector<Message> out;
  std::vector<Fault> faults;
  std::vector<Annotation> events;
};

struct TraceEvent {
  uint64_t step = 0;
  Message delivered;
  std::vector<Message> emitted;
  std::vector<Annotation> events;
  uint64_t digest = 0;  // dst node state digest after handling
};

using ChannelKey = std::pair<NodeId, NodeId>;

struct SchedulePolicy {
  enum class Kind : uint8_t { SeededRandom, FifoGlobal, Explicit, AdversarialOnKind };
  Kind kind = Kind::FifoGlobal;
  uint64_t seed = 0;
  std::vector<ChannelKey> schedule;  // Explicit
  size_t cursor = 0;
  MsgKind target = MsgKind::Signal;  // AdversarialOnKind

  static SchedulePolicy seeded_random(uint64_t s) { return {Kind::SeededRandom, s, {}, 0, MsgKind::Signal}; }
  static SchedulePolicy fifo_global() { return {}; }
  static SchedulePolicy explicit_schedule(std::vector<ChannelKey> s) {
    return {Kind::Explicit, 0, std::move(s), 0, MsgKind::Signal};
  }
  static SchedulePolicy adversarial_on(MsgKind k) { return {Kind::AdversarialOnKind, 0, {}, 0, k}; }
};

class SimWorld {
 public:
  WorldConfig cfg;
  std::map<NodeId, NodeState> nodes;
  std::map<ChannelKey, std::deque<Message>> channels;
  std::map<uint64_t, ChannelKey> fifo_index;  // front-of-queue seq -> channel
  SchedulePolicy policy;
  std::mt19937_64 rng;

  uint64_t sent = 0;
  uint64_t delivered = 0;
  uint64_t send_seq = 0;  // global send order, drives the fifo-global policy

  bool record_trace = true;
  std::vector<TraceEvent> trace;
  std::vector<Annotation> initial_events;  // from pre-run injections
  std::vector<Fault> faults;

  NodeId next_node_id = 0;

  SimWorld() = default;
  explicit SimWorld(WorldConfig c, SchedulePolicy pol = SchedulePolicy::fifo_global(), uint64_t seed = 0)
      : cfg(c), policy(pol), rng(seed) {}

  NodeId fresh_id() { return next_node_id++; }

  uint64_t pending() const { return sent - delivered; }

  void send(const Message& m);

  // Injects the result of a local operation (signal, spawn, drop, ...).
  void apply_local(const HandlerResult& r);

  std::vector<ChannelKey> nonempty_channels() const;

  // Delivers one message per the policy. Returns nothing when quiescent.
  std::optional<TraceEvent> step();

  // Delivers from an explicitly named channel (used by the verifier).
  TraceEvent step_channel(const ChannelKey& ck);

  // Returns true if quiescence was reached within step_limit deliveries.
  bool run_to_quiescence(uint64_t step_limit);

  uint64_t digest() const;  // canonical world digest (nodes + channels)

  bool structurally_equal(const SimWorld& o) const;
};

// One JSON object per trace line, per the external trace contract.
std::string trace_event_json(const TraceEvent& ev);
void write_trace_jsonl(const SimWorld& w, const std::string& path);

}  // namespace dphaser
