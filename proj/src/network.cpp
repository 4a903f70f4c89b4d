#include "linkalg/network.hpp"

#include <algorithm>
#include <limits>

namespace linkalg {

bool operator==(const ChunkMap& a, const ChunkMap& b) {
  if (a.dom != b.dom) return false;
  for (std::size_t i = 0; i < a.at.size() && i < 64; ++i)
    if ((a.dom >> i) & 1U)
      if (a.at[i] != b.at[i]) return false;
  return true;
}

ChunkMap uplus(const ChunkMap& a, const ChunkMap& b) {
  ChunkMap out(std::max(a.at.size(), b.at.size()));
  for (std::size_t i = 0; i < out.at.size(); ++i) {
    NodeId id{static_cast<std::uint16_t>(i)};
    bool in_a = contains(a.dom, id);
    bool in_b = contains(b.dom, id);
    if (in_a && in_b)
      out.put(id, Chunk::conflict());
    else if (in_a)
      out.put(id, a.at[i]);
    else if (in_b)
      out.put(id, b.at[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nodes

std::vector<NodeStep> node_instant(const Node& n, const ProcessDefs& defs,
                                   const std::optional<Injection>& inj) {
  std::vector<NodeStep> out;
  for (auto& step : instant_steps(n.state, defs, inj)) {
    NodeAction a;
    a.node = n.id;
    switch (step.action.kind) {
      case ProcAction::Kind::deliver:
        a.kind = NodeAction::Kind::deliver;
        a.data = step.action.data;
        break;
      case ProcAction::Kind::newpkt:
        a.kind = NodeAction::Kind::newpkt;
        a.data = step.action.data;
        a.other = step.action.dest;
        break;
      default:
        a.kind = NodeAction::Kind::tau;
        break;
    }
    auto next = step.next.map([&](const ProcState& p) { return Node{n.id, p, n.range}; });
    out.push_back({std::move(a), std::move(next)});
  }
  return out;
}

std::vector<NodeTimed> node_timed_options(const Node& n, const ProcessDefs& defs,
                                          const std::optional<Injection>& inj) {
  std::vector<NodeTimed> out;
  const std::size_t width = defs.universe().nodes.size();
  for (auto& opt : timed_options(n.state, defs, inj)) {
    NodeTimed t{ChunkMap(width), std::move(opt)};
    if (t.option.transmitting) {
      Chunk c = Chunk::frag(t.option.msg, t.option.chunk);
      for (std::size_t r = 0; r < width; ++r) {
        NodeId id{static_cast<std::uint16_t>(r)};
        if (contains(n.range, id)) t.transmitted.put(id, c);
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::optional<NodeTimed> node_timed(const Node& n, const ProcessDefs& defs,
                                    const std::optional<Injection>& inj) {
  auto opts = node_timed_options(n, defs, inj);
  if (opts.empty()) return std::nullopt;
  return std::move(opts.front());
}

Node node_advance(const Node& n, const NodeTimed& t, const Chunk& received,
                  const ProcessDefs& defs) {
  return Node{n.id, advance(n.state, t.option, received, defs), n.range};
}

Node apply_connect(const Node& n, NodeId a, NodeId b, bool symmetric) {
  Node out = n;
  if (n.id == a) out.range |= bit(b);
  if (symmetric && n.id == b) out.range |= bit(a);
  return out;
}

Node apply_disconnect(const Node& n, NodeId a, NodeId b, bool symmetric) {
  Node out = n;
  if (n.id == a) out.range &= ~bit(b);
  if (symmetric && n.id == b) out.range &= ~bit(a);
  return out;
}

// ---------------------------------------------------------------------------
// Composition

Composition Composition::leaf(std::size_t position) {
  Composition c;
  c.parts_.push_back({static_cast<int>(position), -1, -1});
  return c;
}

Composition Composition::par(const Composition& left, const Composition& right) {
  Composition c;
  c.parts_ = left.parts_;
  const int off = static_cast<int>(c.parts_.size());
  for (auto p : right.parts_) {
    if (p.position < 0) {
      p.left += off;
      p.right += off;
    }
    c.parts_.push_back(p);
  }
  c.parts_.push_back({-1, off - 1, static_cast<int>(c.parts_.size()) - 1});
  return c;
}

Composition Composition::chain(std::size_t n) {
  if (n == 0) throw ModelError("a network needs at least one node");
  Composition c = leaf(0);
  for (std::size_t i = 1; i < n; ++i) c = par(c, leaf(i));
  return c;
}

ChunkMap Composition::combine_at(int index, const std::vector<ChunkMap>& per_position) const {
  const Part& p = parts_[static_cast<std::size_t>(index)];
  if (p.position >= 0) return per_position.at(static_cast<std::size_t>(p.position));
  return uplus(combine_at(p.left, per_position), combine_at(p.right, per_position));
}

ChunkMap Composition::combine(const std::vector<ChunkMap>& per_position) const {
  return combine_at(static_cast<int>(parts_.size()) - 1, per_position);
}

std::vector<std::size_t> Composition::leaves() const {
  std::vector<std::size_t> out;
  for (const auto& p : parts_)
    if (p.position >= 0) out.push_back(static_cast<std::size_t>(p.position));
  return out;
}

std::string Composition::to_string() const {
  std::vector<std::string> s(parts_.size());
  for (std::size_t i = 0; i < parts_.size(); ++i) {
    const auto& p = parts_[i];
    s[i] = p.position >= 0 ? std::to_string(p.position)
                           : "(" + s[static_cast<std::size_t>(p.left)] + " || " +
                                 s[static_cast<std::size_t>(p.right)] + ")";
  }
  return s.back();
}

// ---------------------------------------------------------------------------
// Network

std::string to_string(const NetAction& a, const Universe& u) {
  switch (a.kind) {
    case NetAction::Kind::tick:
      return "tick";
    case NetAction::Kind::tau:
      return "tau";
    case NetAction::Kind::deliver:
      return u.name(a.node) + ":deliver(" + u.name(a.data) + ")";
    case NetAction::Kind::newpkt:
      return u.name(a.node) + ":newpkt(" + u.name(a.data) + "," + u.name(a.other) + ")";
    case NetAction::Kind::connect:
      return "connect(" + u.name(a.node) + "," + u.name(a.other) + ")";
    case NetAction::Kind::disconnect:
      return "disconnect(" + u.name(a.node) + "," + u.name(a.other) + ")";
  }
  return "?";
}

Network::Network(DefsPtr defs, std::vector<Node> nodes, Environment env,
                 std::optional<Composition> shape)
    : defs_(std::move(defs)), env_(std::move(env)), shape_(Composition::chain(nodes.size())) {
  const std::size_t width = defs_->universe().nodes.size();
  if (shape) shape_ = *shape;
  auto leaves = shape_.leaves();
  std::sort(leaves.begin(), leaves.end());
  for (std::size_t i = 0; i < leaves.size(); ++i)
    if (leaves[i] != i) throw ModelError("composition must use every node exactly once");
  if (leaves.size() != nodes.size()) throw ModelError("composition must use every node exactly once");

  position_.assign(width, -1);
  NodeSet declared = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id.index >= width) throw ModelError("node id outside the universe");
    if (position_[nodes[i].id.index] >= 0) throw ModelError("duplicate node id in network");
    position_[nodes[i].id.index] = static_cast<int>(i);
    declared |= bit(nodes[i].id);
    if (nodes[i].state.xi.now != nodes.front().state.xi.now)
      throw ModelError("all nodes must start with the same clock");
  }
  for (const auto& n : nodes)
    if ((n.range & ~declared) != 0) throw ModelError("range mentions an undeclared node");

  queues_.resize(nodes.size());
  for (const auto& e : env_.injections) {
    if (e.at < 0) throw ModelError("injection times must be non-negative");
    queues_[position_of(e.node)].push_back(e);
    position_of(e.dest);
    if (e.data.index >= defs_->universe().data_count)
      throw ModelError("injected payload outside the data alphabet");
  }
  for (auto& q : queues_)
    std::stable_sort(q.begin(), q.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
  std::stable_sort(env_.script.begin(), env_.script.end(),
                   [](const auto& a, const auto& b) { return a.at < b.at; });
  for (const auto& m : env_.script) {
    position_of(m.a);
    position_of(m.b);
  }

  initial_.nodes = std::move(nodes);
  initial_.injected.assign(initial_.nodes.size(), 0);
}

std::size_t Network::position_of(NodeId id) const {
  if (id.index >= position_.size() || position_[id.index] < 0)
    throw ModelError("node is not part of the network");
  return static_cast<std::size_t>(position_[id.index]);
}

TimeValue Network::absolute_time(const NetState& s) const {
  return s.nodes.front().state.xi.now + s.epoch;
}

bool Network::cntd(const NetState& s, NodeId id, NodeId dest) const {
  position_of(dest);
  return contains(s.nodes[position_of(id)].range, dest);
}

std::optional<Injection> Network::pending_injection(const NetState& s, std::size_t pos) const {
  const auto& q = queues_[pos];
  if (s.injected[pos] >= q.size()) return std::nullopt;
  const auto& e = q[s.injected[pos]];
  if (e.at > absolute_time(s)) return std::nullopt;
  return Injection{e.data, e.dest};
}

bool Network::environment_exhausted(const NetState& s) const {
  for (std::size_t i = 0; i < queues_.size(); ++i)
    if (s.injected[i] < queues_[i].size()) return false;
  if (env_.mobility == MobilityMode::scripted && s.mobility_done < env_.script.size())
    return false;
  return true;
}

void Network::normalize(NetState& s) const {
  TimeValue base = std::numeric_limits<TimeValue>::max();
  for (const auto& n : s.nodes) {
    base = std::min(base, n.state.xi.now);
    for (const auto& [v, val] : n.state.xi.bindings())
      if (const auto* t = std::get_if<TimePoint>(&val)) base = std::min(base, t->at);
  }
  if (base != 0) {
    for (auto& n : s.nodes) {
      n.state.xi.now -= base;
      for (auto& [v, val] : n.state.xi.mutable_bindings())
        if (auto* t = std::get_if<TimePoint>(&val)) t->at -= base;
    }
    s.epoch += base;
  }
  if (environment_exhausted(s)) s.epoch = 0;
}

std::vector<NetTransition> Network::transitions(const NetState& s, bool with_environment) const {
  std::vector<NetTransition> out;
  const ProcessDefs& defs = *defs_;
  const std::size_t n = s.nodes.size();

  std::vector<std::optional<Injection>> inj(n);
  if (with_environment)
    for (std::size_t i = 0; i < n; ++i) inj[i] = pending_injection(s, i);

  // Instantaneous steps interleave.
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& step : node_instant(s.nodes[i], defs, inj[i])) {
      NetTransition t;
      t.actor = static_cast<int>(i);
      t.label.node = step.action.node;
      switch (step.action.kind) {
        case NodeAction::Kind::deliver:
          t.label.kind = NetAction::Kind::deliver;
          t.label.data = step.action.data;
          break;
        case NodeAction::Kind::newpkt:
          t.label.kind = NetAction::Kind::newpkt;
          t.label.data = step.action.data;
          t.label.other = step.action.other;
          break;
        default:
          t.label.kind = NetAction::Kind::tau;
          t.label.node = NodeId{};
          break;
      }
      const bool consumed = step.action.kind == NodeAction::Kind::newpkt;
      t.next = step.next.map([&](const Node& node) {
        NetState ns = s;
        ns.nodes[i] = node;
        if (consumed) ++ns.injected[i];
        return ns;
      });
      out.push_back(std::move(t));
    }
  }

  // Topology changes synchronise all nodes.
  auto topology = [&](bool connect, NodeId a, NodeId b, bool scripted) {
    NetTransition t;
    t.label.kind = connect ? NetAction::Kind::connect : NetAction::Kind::disconnect;
    t.label.node = a;
    t.label.other = b;
    NetState ns = s;
    for (auto& node : ns.nodes)
      node = connect ? apply_connect(node, a, b, env_.symmetric)
                     : apply_disconnect(node, a, b, env_.symmetric);
    if (scripted) ++ns.mobility_done;
    t.next = Dist<NetState>::point(std::move(ns));
    out.push_back(std::move(t));
  };
  bool mobility_due = false;
  if (with_environment && env_.mobility == MobilityMode::scripted &&
      s.mobility_done < env_.script.size()) {
    const auto& e = env_.script[s.mobility_done];
    if (e.at <= absolute_time(s)) {
      mobility_due = true;
      topology(e.connect, e.a, e.b, true);
    }
  }
  if (with_environment && env_.mobility == MobilityMode::free) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        NodeId a = s.nodes[i].id, b = s.nodes[j].id;
        bool linked = contains(s.nodes[i].range, b);
        topology(!linked, std::min(a, b), std::max(a, b), false);
      }
  }

  // Time step: every node must take part.
  if (mobility_due) return out;
  std::vector<std::vector<NodeTimed>> options(n);
  for (std::size_t i = 0; i < n; ++i) {
    options[i] = node_timed_options(s.nodes[i], defs, inj[i]);
    if (options[i].empty()) return out;
  }
  std::vector<std::size_t> pick(n, 0);
  while (true) {
    std::vector<ChunkMap> sent(n);
    for (std::size_t i = 0; i < n; ++i) sent[i] = options[i][pick[i]].transmitted;
    NetTransition t;
    t.label.kind = NetAction::Kind::tick;
    t.traffic = shape_.combine(sent);
    NetState ns = s;
    for (std::size_t i = 0; i < n; ++i) {
      Chunk received = t.traffic.get(s.nodes[i].id).value_or(Chunk::idle());
      ns.nodes[i] = node_advance(s.nodes[i], options[i][pick[i]], received, defs);
    }
    t.next = Dist<NetState>::point(std::move(ns));
    out.push_back(std::move(t));

    std::size_t k = 0;
    while (k < n && ++pick[k] == options[k].size()) pick[k++] = 0;
    if (k == n) break;
  }
  return out;
}

}  // namespace linkalg
