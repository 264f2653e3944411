#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace dphaser {

using NodeId = uint32_t;
inline constexpr NodeId kNoNode = static_cast<NodeId>(-1);

using Key = uint64_t;
using Phase = int64_t;

enum class Mode : uint8_t { SignalOnly, WaitOnly, SignalWait, Sentinel };

inline bool is_signaler(Mode m) { return m == Mode::SignalOnly || m == Mode::SignalWait; }
inline bool is_waiter(Mode m) { return m == Mode::WaitOnly || m == Mode::SignalWait; }

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::SignalOnly: return "signal-only";
    case Mode::WaitOnly: return "wait-only";
    case Mode::SignalWait: return "signal-wait";
    case Mode::Sentinel: return "sentinel";
  }
  return "?";
}

inline Mode parse_mode(char c) {
  switch (c) {
    case 's': return Mode::SignalOnly;
    case 'w': return Mode::WaitOnly;
    case 'b': return Mode::SignalWait;  // "both"
    default: throw std::invalid_argument("unknown mode char");
  }
}

// The two augmented skip lists making up a phaser.
enum class ListId : uint8_t { Scsl, Snsl };

inline const char* list_name(ListId l) { return l == ListId::Scsl ? "scsl" : "snsl"; }

// Height cap: ceil(log2(max team size)) + 2.
inline int max_height_for(size_t max_team) {
  int bits = 0;
  size_t v = max_team > 1 ? max_team - 1 : 1;
  while (v > 0) { v >>= 1; ++bits; }
  return bits + 2;
}

enum class FaultKind : uint8_t {
  DeadLetter,
  ProtocolViolation,
  StaleSignal,
  OverCount,
};

inline const char* fault_name(FaultKind f) {
  switch (f) {
    case FaultKind::DeadLetter: return "dead-letter";
    case FaultKind::ProtocolViolation: return "protocol-violation";
    case FaultKind::StaleSignal: return "stale-signal";
    case FaultKind::OverCount: return "over-count";
  }
  return "?";
}

struct Fault {
  FaultKind kind;
  NodeId node;
  std::string detail;
};

// 64-bit FNV-1a, the digest primitive used for node and world hashing.
struct Fnv1a {
  uint64_t h = 1469598103934665603ull;
  void bytes(const void* p, size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  }
  void u64(uint64_t v) { bytes(&v, 8); }
  void i64(int64_t v) { bytes(&v, 8); }
  void u32(uint32_t v) { bytes(&v, 4); }
  void u8(uint8_t v) { bytes(&v, 1); }
};

}  // namespace dphaser
