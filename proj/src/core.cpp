#include "linkalg/core.hpp"

#include <algorithm>

namespace linkalg {

Message data_frame(Payload data, NodeId dest, NodeId src) {
  Message m;
  m.kind = MsgKind::data_frame;
  m.data = data;
  m.dest = dest;
  m.src = src;
  return m;
}

Message ack_frame(NodeId src, NodeId dest) {
  Message m;
  m.kind = MsgKind::ack;
  m.src = src;
  m.dest = dest;
  return m;
}

Message rts_frame(NodeId src, NodeId dest, TimeValue d) {
  Message m;
  m.kind = MsgKind::rts;
  m.src = src;
  m.dest = dest;
  m.d = d;
  return m;
}

Message cts_frame(NodeId src, NodeId dest, TimeValue d) {
  Message m = rts_frame(src, dest, d);
  m.kind = MsgKind::cts;
  return m;
}

Message user_message(std::uint16_t tag, TimeValue field) {
  Message m;
  m.kind = MsgKind::user;
  m.tag = tag;
  m.d = field;
  return m;
}

void DurationConfig::validate() const {
  auto check = [](TimeValue v, const char* what) {
    if (v < 1) throw ModelError(std::string("duration ") + what + " must be >= 1");
  };
  check(ack, "durAck");
  check(cts, "durCTS");
  check(rts, "durRTS");
  check(data_frame, "dataFrame");
  check(user, "user");
  for (const auto& [p, v] : per_payload) check(v, "per-payload data frame");
}

TimeValue dur(const Message& m, const DurationConfig& cfg) {
  switch (m.kind) {
    case MsgKind::ack:
      return cfg.ack;
    case MsgKind::cts:
      return cfg.cts;
    case MsgKind::rts:
      return cfg.rts;
    case MsgKind::data_frame: {
      auto it = cfg.per_payload.find(m.data.index);
      return it == cfg.per_payload.end() ? cfg.data_frame : it->second;
    }
    case MsgKind::user:
      return cfg.user;
  }
  return 1;
}

Chunk chunk_merge(const Chunk& rfr, const Chunk& ch) {
  if (ch.kind == ChunkKind::conflict) return Chunk::conflict();
  if (ch.kind == ChunkKind::idle) return Chunk::idle();
  if (ch.index == 1) return ch;
  if (rfr.kind == ChunkKind::frag && rfr.msg == ch.msg && rfr.index + 1 == ch.index) return ch;
  return Chunk::conflict();
}

bool is_new(const Chunk& rfr, const Message& m, const DurationConfig& cfg) {
  return rfr.kind == ChunkKind::frag && rfr.msg == m && rfr.index == dur(m, cfg);
}

bool is_idle(const Chunk& rfr) { return rfr.kind == ChunkKind::idle; }

Universe Universe::make(std::vector<std::string> node_names,
                        std::vector<std::string> data_alphabet) {
  Universe u;
  u.nodes = std::move(node_names);
  u.payloads = std::move(data_alphabet);
  u.data_count = u.payloads.size();
  u.payloads.push_back("ok");
  u.payloads.push_back("fail");
  if (u.nodes.size() > 64) throw ModelError("at most 64 nodes are supported");
  for (std::size_t i = 0; i < u.nodes.size(); ++i)
    for (std::size_t j = i + 1; j < u.nodes.size(); ++j)
      if (u.nodes[i] == u.nodes[j]) throw ModelError("duplicate node id " + u.nodes[i]);
  return u;
}

NodeId Universe::node(const std::string& name) const {
  auto it = std::find(nodes.begin(), nodes.end(), name);
  if (it == nodes.end()) throw ModelError("unknown node id '" + name + "'");
  return NodeId{static_cast<std::uint16_t>(it - nodes.begin())};
}

Payload Universe::payload(const std::string& name) const {
  auto it = std::find(payloads.begin(), payloads.end(), name);
  if (it == payloads.end()) throw ModelError("unknown payload '" + name + "'");
  return Payload{static_cast<std::uint16_t>(it - payloads.begin())};
}

std::string to_string(const Message& m, const Universe& u) {
  auto n = [&](NodeId id) {
    return id.index < u.nodes.size() ? u.nodes[id.index] : "#" + std::to_string(id.index);
  };
  switch (m.kind) {
    case MsgKind::data_frame:
      return "data(" + (m.data.index < u.payloads.size() ? u.payloads[m.data.index] : "?") +
             "," + n(m.dest) + "," + n(m.src) + ")";
    case MsgKind::ack:
      return "ack(" + n(m.src) + "," + n(m.dest) + ")";
    case MsgKind::rts:
      return "rts(" + n(m.src) + "," + n(m.dest) + "," + std::to_string(m.d) + ")";
    case MsgKind::cts:
      return "cts(" + n(m.src) + "," + n(m.dest) + "," + std::to_string(m.d) + ")";
    case MsgKind::user:
      return "user" + std::to_string(m.tag) + "(" + std::to_string(m.d) + ")";
  }
  return "?";
}

std::string to_string(const Chunk& c, const Universe& u) {
  switch (c.kind) {
    case ChunkKind::idle:
      return "idle";
    case ChunkKind::conflict:
      return "conflict";
    case ChunkKind::frag:
      return "(" + to_string(c.msg, u) + ":" + std::to_string(c.index) + ")";
  }
  return "?";
}

std::size_t hash_value(const Message& m) {
  std::size_t h = static_cast<std::size_t>(m.kind);
  hash_mix(h, m.tag);
  hash_mix(h, m.src.index);
  hash_mix(h, m.dest.index);
  hash_mix(h, m.data.index);
  hash_mix(h, std::hash<TimeValue>{}(m.d));
  return h;
}

std::size_t hash_value(const Chunk& c) {
  std::size_t h = static_cast<std::size_t>(c.kind) * 31 + c.index;
  if (c.kind == ChunkKind::frag) hash_mix(h, hash_value(c.msg));
  return h;
}

}  // namespace linkalg
