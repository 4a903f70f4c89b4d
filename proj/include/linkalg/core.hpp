// Core data carriers: identifiers, messages, chunks, durations and the
// chunk-merge operator that drives the `rfr` variable of every process.
#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace linkalg {

/// Integer time, one unit per transmission slot.
using TimeValue = std::int64_t;

struct NodeId {
  std::uint16_t index = 0;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

/// Network-layer datum. Indices below `Universe::data_count` form the
/// finite payload alphabet; the remaining ones are reserved status codes.
struct Payload {
  std::uint16_t index = 0;
  friend auto operator<=>(const Payload&, const Payload&) = default;
};

/// Raised for malformed models: unbound variables, type errors, bad bounds.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MsgKind : std::uint8_t { data_frame, ack, rts, cts, user };

/// Link-layer frame. Fields not used by a kind stay zero so that
/// structural equality is exact.
struct Message {
  MsgKind kind = MsgKind::user;
  std::uint16_t tag = 0;  // user messages only
  NodeId src;
  NodeId dest;
  Payload data;
  TimeValue d = 0;  // rts/cts: requested silence; user: free integer field

  friend auto operator<=>(const Message&, const Message&) = default;
};

Message data_frame(Payload data, NodeId dest, NodeId src);
Message ack_frame(NodeId src, NodeId dest);
Message rts_frame(NodeId src, NodeId dest, TimeValue d);
Message cts_frame(NodeId src, NodeId dest, TimeValue d);
Message user_message(std::uint16_t tag, TimeValue field = 0);

enum class ChunkKind : std::uint8_t { idle, conflict, frag };

/// One slot of medium content: the c-th fragment of a message, a
/// conflict marker, or the idle marker.
struct Chunk {
  ChunkKind kind = ChunkKind::idle;
  std::uint16_t index = 0;  // 1-based fragment number for frag
  Message msg;

  static Chunk idle() { return {}; }
  static Chunk conflict() { return {ChunkKind::conflict, 0, {}}; }
  static Chunk frag(const Message& m, int c) {
    return {ChunkKind::frag, static_cast<std::uint16_t>(c), m};
  }

  friend auto operator<=>(const Chunk&, const Chunk&) = default;
};

struct DurationConfig {
  TimeValue ack = 1;
  TimeValue cts = 1;
  TimeValue rts = 1;
  TimeValue data_frame = 3;  // default for payloads without an override
  std::map<std::uint16_t, TimeValue> per_payload;
  TimeValue user = 1;

  void validate() const;
  friend bool operator==(const DurationConfig&, const DurationConfig&) = default;
};

/// Number of chunks (slots) needed to transmit `m`.
TimeValue dur(const Message& m, const DurationConfig& cfg);

/// rfr ⋆ ch: the five-row merge table, evaluated top to bottom.
Chunk chunk_merge(const Chunk& rfr, const Chunk& ch);

/// rfr holds the last fragment of `m`, received in order.
bool is_new(const Chunk& rfr, const Message& m, const DurationConfig& cfg);

bool is_idle(const Chunk& rfr);

/// Names of nodes and payloads. Payload indices [0, data_count) are the
/// data alphabet; `ok` and `fail` are appended as reserved status codes.
struct Universe {
  std::vector<std::string> nodes;
  std::vector<std::string> payloads;
  std::size_t data_count = 0;

  static Universe make(std::vector<std::string> node_names,
                       std::vector<std::string> data_alphabet);

  NodeId node(const std::string& name) const;
  Payload payload(const std::string& name) const;
  Payload status_ok() const { return Payload{static_cast<std::uint16_t>(data_count)}; }
  Payload status_fail() const { return Payload{static_cast<std::uint16_t>(data_count + 1)}; }
  const std::string& name(NodeId id) const { return nodes.at(id.index); }
  const std::string& name(Payload p) const { return payloads.at(p.index); }
};

std::string to_string(const Message& m, const Universe& u);
std::string to_string(const Chunk& c, const Universe& u);

inline void hash_mix(std::size_t& seed, std::size_t v) {
  seed ^= v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
}

std::size_t hash_value(const Message& m);
std::size_t hash_value(const Chunk& c);

}  // namespace linkalg
