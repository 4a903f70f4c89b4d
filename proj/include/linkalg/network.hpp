// Nodes with transmission ranges, parallel composition, the collision
// union of transmitted chunks, and the closed-network transition relation.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "linkalg/process.hpp"

namespace linkalg {

/// Bit set over node indices (at most 64 nodes).
using NodeSet = std::uint64_t;

inline NodeSet bit(NodeId id) { return NodeSet{1} << id.index; }
inline bool contains(NodeSet s, NodeId id) { return (s & bit(id)) != 0; }

struct Node {
  NodeId id;
  ProcState state;
  NodeSet range = 0;

  friend bool operator==(const Node&, const Node&) = default;
};

/// Partial map from node ids to the chunk they receive in one slot.
struct ChunkMap {
  NodeSet dom = 0;
  std::vector<Chunk> at;  // indexed by node index; meaningful where dom has a bit

  explicit ChunkMap(std::size_t n = 0) : at(n) {}
  std::optional<Chunk> get(NodeId id) const {
    if (!contains(dom, id)) return std::nullopt;
    return at[id.index];
  }
  void put(NodeId id, const Chunk& c) {
    dom |= bit(id);
    at[id.index] = c;
  }
  friend bool operator==(const ChunkMap& a, const ChunkMap& b);
};

/// Pointwise union; ids in both domains receive a conflict.
ChunkMap uplus(const ChunkMap& a, const ChunkMap& b);

struct NodeAction {
  enum class Kind : std::uint8_t { traffic, deliver, newpkt, tau, connect, disconnect };
  Kind kind = Kind::tau;
  NodeId node;   // acting node (deliver/newpkt), first endpoint for mobility
  NodeId other;  // newpkt destination, second endpoint for mobility
  Payload data;
  ChunkMap transmitted;  // traffic
};

struct NodeStep {
  NodeAction action;
  Dist<Node> next;
};

/// Instantaneous node transitions: process steps lifted with the node's id.
std::vector<NodeStep> node_instant(const Node& n, const ProcessDefs& defs,
                                   const std::optional<Injection>& inj);

/// One way for a node to take part in a slot: what it puts on the medium
/// and the option used to continue once the received chunk is known.
struct NodeTimed {
  ChunkMap transmitted;
  TimedOption option;
};

std::vector<NodeTimed> node_timed_options(const Node& n, const ProcessDefs& defs,
                                          const std::optional<Injection>& inj);
/// First timed participation, if the node can take part in the slot at all.
std::optional<NodeTimed> node_timed(const Node& n, const ProcessDefs& defs,
                                    const std::optional<Injection>& inj);
Node node_advance(const Node& n, const NodeTimed& t, const Chunk& received,
                  const ProcessDefs& defs);

Node apply_connect(const Node& n, NodeId a, NodeId b, bool symmetric = true);
Node apply_disconnect(const Node& n, NodeId a, NodeId b, bool symmetric = true);

/// Shape of the parallel composition over node positions.
class Composition {
 public:
  static Composition leaf(std::size_t position);
  static Composition par(const Composition& left, const Composition& right);
  /// ((0 || 1) || 2) || ...
  static Composition chain(std::size_t n);

  /// Collision union of `per_position` following the tree shape.
  ChunkMap combine(const std::vector<ChunkMap>& per_position) const;
  std::vector<std::size_t> leaves() const;
  std::string to_string() const;

 private:
  struct Part {
    int position = -1;  // leaf when >= 0
    int left = -1;
    int right = -1;
  };
  std::vector<Part> parts_;  // root is last
  ChunkMap combine_at(int index, const std::vector<ChunkMap>& per_position) const;
};

struct InjectionEvent {
  TimeValue at = 0;
  NodeId node;
  Payload data;
  NodeId dest;
};

struct MobilityEvent {
  TimeValue at = 0;
  bool connect = true;
  NodeId a;
  NodeId b;
};

enum class MobilityMode : std::uint8_t { off, scripted, free };

struct Environment {
  std::vector<InjectionEvent> injections;
  MobilityMode mobility = MobilityMode::off;
  std::vector<MobilityEvent> script;
  bool symmetric = true;
};

/// Dynamic state of a closed network.
struct NetState {
  std::vector<Node> nodes;              // in composition position order
  std::vector<std::uint16_t> injected;  // per position: injections consumed
  std::uint32_t mobility_done = 0;      // scripted events consumed
  TimeValue epoch = 0;                  // absolute time minus the clocks' shared base

  friend bool operator==(const NetState&, const NetState&) = default;
};

struct NetAction {
  enum class Kind : std::uint8_t { tick, deliver, newpkt, tau, connect, disconnect };
  Kind kind = Kind::tau;
  NodeId node;
  NodeId other;
  Payload data;

  friend auto operator<=>(const NetAction&, const NetAction&) = default;
};

std::string to_string(const NetAction& a, const Universe& u);

struct NetTransition {
  NetAction label;
  int actor = -1;        // position of the acting node for instantaneous steps
  ChunkMap traffic;      // tick only: the medium content after the union
  Dist<NetState> next;
};

class Network {
 public:
  Network(DefsPtr defs, std::vector<Node> nodes, Environment env = {},
          std::optional<Composition> shape = std::nullopt);

  const ProcessDefs& defs() const { return *defs_; }
  const DefsPtr& defs_ptr() const { return defs_; }
  const Environment& environment() const { return env_; }
  const Composition& shape() const { return shape_; }
  const NetState& initial() const { return initial_; }
  std::size_t size() const { return initial_.nodes.size(); }

  /// All transitions of the closed network. With `with_environment` false the
  /// network layer offers no packets and no topology changes.
  std::vector<NetTransition> transitions(const NetState& s, bool with_environment = true) const;

  TimeValue absolute_time(const NetState& s) const;
  /// dest is in the range of id.
  bool cntd(const NetState& s, NodeId id, NodeId dest) const;
  std::optional<Injection> pending_injection(const NetState& s, std::size_t position) const;
  /// Every scheduled injection and scripted topology change has happened.
  bool environment_exhausted(const NetState& s) const;

  /// Shifts all time values so the smallest is zero, keeping absolute time
  /// in `epoch` while environment triggers remain. Requires shift-invariant
  /// process definitions.
  void normalize(NetState& s) const;
  std::size_t position_of(NodeId id) const;

 private:
  DefsPtr defs_;
  Environment env_;
  Composition shape_;
  NetState initial_;
  std::vector<std::vector<InjectionEvent>> queues_;  // per position, sorted by time
  std::vector<int> position_;                        // node index -> position
};

}  // namespace linkalg
