#include "doctest.h"

#include "linkalg/plts.hpp"

using namespace linkalg;

namespace {

const Universe kU = Universe::make({"A", "B", "C"}, {"a"});
const NodeId kA{0}, kB{1}, kC{2};

// Stop waits forever, Send transmits a two-slot user message then stops,
// Coin flips a fair coin and delivers only on heads.
DefsPtr toy_defs() {
  DurationConfig d;
  d.user = 2;
  DefsBuilder b(kU, d);
  const VarId i = b.declare("i", VarType::integer(0, 1));
  const VarId x = b.declare("x", VarType::integer(0, 9));
  b.define("Stop", {}, b.guard(false, b.call("Stop")));
  b.define("Send", {}, b.transmit(mk_user(0, 0), b.call("Stop")));
  b.define("Busy", {}, b.assign(x, 1, b.call("Stop")));
  b.define("Give", {}, b.deliver(lit(Payload{0}), b.call("Stop")));
  b.define("Coin", {}, b.prob_choice(i, 1, b.call("Side", {b.v("i")})));
  b.define("Side", {i},
           b.choice(b.guard(b.v("i") == 1, b.deliver(lit(Payload{0}), b.call("Stop"))),
                    b.guard(b.v("i") == 0, b.call("Stop"))));
  return b.build();
}

Node node(const DefsPtr& defs, NodeId id, const std::string& proc, NodeSet range) {
  return {id, initial_state(*defs, proc, {}), range};
}

NetTransition only_tick(const std::vector<NetTransition>& ts) {
  std::vector<NetTransition> ticks;
  for (const auto& t : ts)
    if (t.label.kind == NetAction::Kind::tick) ticks.push_back(t);
  REQUIRE(ticks.size() == 1);
  return ticks[0];
}

}  // namespace

TEST_CASE("collision union examples") {
  const Message m = user_message(0), m2 = user_message(1);
  ChunkMap x(3), y(3), empty(3);
  x.put(kB, Chunk::frag(m, 1));
  y.put(kB, Chunk::frag(m2, 1));
  ChunkMap both(3);
  both.put(kB, Chunk::conflict());
  CHECK(uplus(x, y) == both);
  CHECK(uplus(empty, x) == x);
}

TEST_CASE("node level lifting") {
  DefsPtr defs = toy_defs();
  SUBCASE("a transmitting node sends to its range") {
    auto t = node_timed(node(defs, kA, "Send", bit(kB) | bit(kC)), *defs, std::nullopt);
    REQUIRE(t);
    CHECK(t->transmitted.dom == (bit(kB) | bit(kC)));
    CHECK(*t->transmitted.get(kB) == Chunk::frag(user_message(0), 1));
  }
  SUBCASE("a waiting node sends nothing") {
    auto t = node_timed(node(defs, kA, "Stop", bit(kB)), *defs, std::nullopt);
    REQUIRE(t);
    CHECK(t->transmitted.dom == 0);
  }
  SUBCASE("an assignment cannot take part in a slot") {
    CHECK_FALSE(node_timed(node(defs, kA, "Busy", bit(kB)), *defs, std::nullopt));
  }
  SUBCASE("deliver becomes a node action") {
    auto steps = node_instant(node(defs, kB, "Give", bit(kA)), *defs, std::nullopt);
    bool delivered = false;
    for (const auto& s : steps)
      if (s.action.kind == NodeAction::Kind::deliver) {
        delivered = true;
        CHECK(s.action.node == kB);
        CHECK(s.next.entries()[0].first.range == bit(kA));
      }
    CHECK(delivered);
  }
  SUBCASE("probabilistic choice keeps its weights") {
    auto steps = node_instant(node(defs, kA, "Coin", bit(kB)), *defs, std::nullopt);
    REQUIRE(steps.size() == 1);
    CHECK(steps[0].action.kind == NodeAction::Kind::tau);
    REQUIRE(steps[0].next.size() == 2);
    for (const auto& [n, p] : steps[0].next) CHECK(p == Rational(1, 2));
  }
}

TEST_CASE("connect and disconnect") {
  DefsPtr defs = toy_defs();
  Node a = node(defs, kA, "Stop", bit(kC));
  CHECK(apply_connect(a, kA, kB).range == (bit(kB) | bit(kC)));
  CHECK(apply_connect(apply_connect(a, kA, kB), kA, kB) == apply_connect(a, kA, kB));
  Node c = node(defs, kC, "Stop", bit(kA));
  CHECK(apply_disconnect(c, kA, kB) == c);
}

TEST_CASE("slot outcomes") {
  DefsPtr defs = toy_defs();
  const Message m = user_message(0);
  SUBCASE("everyone idle") {
    Network net(defs, {node(defs, kA, "Stop", bit(kB)), node(defs, kB, "Stop", bit(kA))});
    const NetTransition t = only_tick(net.transitions(net.initial()));
    const NetState& next = t.next.entries()[0].first;
    for (const auto& n : next.nodes) CHECK(n.state.xi.rfr == Chunk::idle());
  }
  SUBCASE("a transmission reaches the range only") {
    for (bool own : {false, true}) {
      const NodeSet ra = bit(kB) | (own ? bit(kA) : 0);
      Network net(defs, {node(defs, kA, "Send", ra), node(defs, kB, "Stop", bit(kA))});
      const NetTransition t = only_tick(net.transitions(net.initial()));
      const NetState& next = t.next.entries()[0].first;
      CHECK(next.nodes[1].state.xi.rfr == Chunk::frag(m, 1));
      CHECK(next.nodes[0].state.xi.rfr == (own ? Chunk::frag(m, 1) : Chunk::idle()));
    }
  }
  SUBCASE("two transmitters collide at a shared neighbour") {
    Network net(defs, {node(defs, kA, "Send", bit(kB)), node(defs, kB, "Stop", bit(kA) | bit(kC)),
                       node(defs, kC, "Send", bit(kB))});
    const NetTransition t = only_tick(net.transitions(net.initial()));
    CHECK(t.next.entries()[0].first.nodes[1].state.xi.rfr == Chunk::conflict());
    CHECK(*t.traffic.get(kB) == Chunk::conflict());
  }
  SUBCASE("cntd is range membership") {
    Network net(defs, {node(defs, kA, "Stop", bit(kA) | bit(kB)), node(defs, kB, "Stop", 0)});
    CHECK(net.cntd(net.initial(), kA, kA));
    CHECK(net.cntd(net.initial(), kA, kB));
    CHECK_FALSE(net.cntd(net.initial(), kB, kA));
  }
}

TEST_CASE("composition shapes") {
  const std::vector<std::size_t> leaves{0, 1, 2};
  auto nested = Composition::par(Composition::leaf(0),
                                 Composition::par(Composition::leaf(1), Composition::leaf(2)));
  CHECK(nested.leaves() == leaves);
  CHECK(Composition::chain(3).leaves() == leaves);
  CHECK(Composition::chain(3).to_string() != nested.to_string());
}

TEST_CASE("exploration of tiny networks") {
  DefsPtr defs = toy_defs();
  SUBCASE("a single idle node") {
    Network net(defs, {node(defs, kA, "Stop", 0)});
    Plts p = explore(net, {.horizon = 3});
    CHECK(p.num_states() == 4);
    CHECK(p.num_transitions() == 3);
    Plts q = explore(net, {.horizon = 3, .normalize = true});
    CHECK(q.num_states() == 1);
    CHECK(check_deadlock_freedom(p).ok);
    CHECK(check_deadlock_freedom(q).ok);
  }
  SUBCASE("a two-slot message arrives whole") {
    Network net(defs, {node(defs, kA, "Send", bit(kB)), node(defs, kB, "Stop", bit(kA))});
    Plts p = explore(net, {.horizon = 2});
    bool seen = false;
    for (StateId s = 0; s < p.num_states(); ++s)
      if (p.depth(s) == 2) {
        const Chunk r = p.state(s).nodes[1].state.xi.rfr;
        CHECK(r == Chunk::frag(user_message(0), 2));
        CHECK(is_new(r, user_message(0), defs->durations()));
        seen = true;
      }
    CHECK(seen);
  }
  SUBCASE("a coin at the root") {
    Network net(defs, {node(defs, kA, "Coin", bit(kB)), node(defs, kB, "Stop", bit(kA))});
    Plts p = explore(net, {.horizon = 3});
    auto [b, e] = p.out(0);
    REQUIRE(e - b == 1);
    const auto& t = p.transition(b);
    CHECK(t.label.kind == NetAction::Kind::tau);
    CHECK(t.last - t.first == 2);

    const std::vector<LabelPattern> post{LabelPattern::deliver(kA)};
    CHECK(transition_value(p, b, post, reach_values(p, post)) == Rational(1, 2));
    CHECK(min_prob(p, b, post).min_value == Rational(1, 2));

    EventualityQuery q{LabelPattern{NetAction::Kind::tau}, nullptr, post};
    // Tails idles until the horizon cuts it off; only the finite graph decides.
    CHECK(holds_outright(p, q).verdict == Verdict::unknown);
    Plts closed = explore(net, {.horizon = 3, .normalize = true});
    CHECK(closed.num_truncated() == 0);
    CHECK(holds_outright(closed, q).verdict == Verdict::fails);
    // Every label counts as discharging: nothing to avoid.
    EventualityQuery all{LabelPattern{NetAction::Kind::tau}, nullptr,
                         {LabelPattern::tick(), LabelPattern::deliver(kA),
                          LabelPattern{NetAction::Kind::tau}}};
    CHECK(holds_outright(p, all).verdict == Verdict::holds);
  }
}

TEST_CASE("bisimilarity of tiny networks") {
  DefsPtr defs = toy_defs();
  Network linked(defs, {node(defs, kA, "Send", bit(kB)), node(defs, kB, "Stop", bit(kA))});
  Network apart(defs, {node(defs, kA, "Send", 0), node(defs, kB, "Stop", bit(kA))});
  Plts p = explore(linked, {.horizon = 4, .normalize = true});
  Plts q = explore(apart, {.horizon = 4, .normalize = true});
  CHECK(strong_bisim(p, p).bisimilar);
  // Plain ticks cannot tell them apart; only local states differ.
  BisimResult r = strong_bisim(p, q);
  CHECK(r.bisimilar);

  Network coin(defs, {node(defs, kA, "Coin", bit(kB)), node(defs, kB, "Stop", bit(kA))});
  Network quiet(defs, {node(defs, kA, "Busy", bit(kB)), node(defs, kB, "Stop", bit(kA))});
  BisimResult d = strong_bisim(explore(coin, {.horizon = 4, .normalize = true}),
                               explore(quiet, {.horizon = 4, .normalize = true}));
  CHECK_FALSE(d.bisimilar);
  CHECK_FALSE(d.witness.empty());
}
