#include "doctest.h"

#include "linkalg/csma.hpp"
#include "linkalg/plts.hpp"

using namespace linkalg;

namespace {

Network pair_network(Protocol proto, const CsmaParams& params, DefsPtr& defs) {
  Universe u = Universe::make({"A", "B"}, {"a"});
  defs = build_defs(proto, params, u);
  NodeId a{0}, b{1};
  std::vector<Node> nodes{{a, csma_initial(proto, *defs, a), bit(a) | bit(b)},
                          {b, csma_initial(proto, *defs, b), bit(a) | bit(b)}};
  Environment env;
  env.injections.push_back({0, a, Payload{0}, b});
  return Network(defs, nodes, env);
}

}  // namespace

TEST_CASE("two nodes deliver a packet") {
  for (Protocol proto : {Protocol::csma, Protocol::csma_rts}) {
    CAPTURE(to_string(proto));
    DefsPtr defs;
    CsmaParams params;
    Network net = pair_network(proto, params, defs);
    Plts p = explore(net, {.horizon = 40});
    MESSAGE("states " << p.num_states() << " transitions " << p.num_transitions()
                      << " truncated " << p.num_truncated());
    auto q = packet_delivery(NodeId{0}, NodeId{1}, Payload{0});
    auto r = holds_outright(p, q);
    CHECK(r.pre_transitions == 1);
    CHECK(r.verdict == Verdict::holds);
    CHECK(check_deadlock_freedom(p).ok);
  }
}

TEST_CASE("contention window") {
  CsmaParams p;
  p.cwmin = 16;
  CHECK(cw_of(0, p) == 16);
  p.cwmin = 1;
  CHECK(cw_of(0, p) == 1);
  p.cwmin = 4;
  CHECK(cw_of(2, p) == 16);
  for (int be = 0; be < 5; ++be) CHECK(cw_of(be + 1, p) == 2 * cw_of(be, p));
  p.cwmax = 8;
  CHECK(cw_of(3, p) == 8);
}

TEST_CASE("rts duration") {
  const Universe u = Universe::make({"A", "B"}, {"a"});
  const Payload d = u.payload("a");
  CsmaParams p;
  p.sifs = 1;
  p.durations.cts = 1;
  p.durations.ack = 1;
  p.durations.data_frame = 3;
  CHECK(rts_duration(d, NodeId{0}, NodeId{1}, p) == 8);
  p.durations.data_frame = 1;
  CHECK(rts_duration(d, NodeId{0}, NodeId{1}, p) == 6);
  const TimeValue before = rts_duration(d, NodeId{0}, NodeId{1}, p);
  p.sifs = 2;
  p.difs = 3;
  CHECK(rts_duration(d, NodeId{0}, NodeId{1}, p) == before + 3);
}

TEST_CASE("parameter validation") {
  const Universe u = Universe::make({"A"}, {"a"});
  CsmaParams p;
  p.cwmin = 0;
  CHECK_THROWS_AS(build_csma_defs(p, u), ModelError);
  p = CsmaParams{};
  p.difs = p.sifs;
  CHECK_THROWS_AS(build_csma_rts_defs(p, u), ModelError);
  CHECK(protocol_from_string("rts") == Protocol::csma_rts);
  CHECK_THROWS(protocol_from_string("aloha"));
}

TEST_CASE("an unheard sender retries and then reports failure") {
  for (Protocol proto : {Protocol::csma, Protocol::csma_rts}) {
    CAPTURE(to_string(proto));
    Universe u = Universe::make({"A", "B"}, {"a"});
    CsmaParams params;
    params.cwmin = 1;
    params.max_retransmit = 2;
    DefsPtr defs = build_defs(proto, params, u);
    NodeId a{0}, b{1};
    Environment env;
    env.injections.push_back({0, a, Payload{0}, b});
    Network net(defs, {{a, csma_initial(proto, *defs, a), 0}, {b, csma_initial(proto, *defs, b), 0}},
                env);
    Plts p = explore(net, {.horizon = 60});
    CHECK(p.num_truncated() > 0);  // the failed node keeps idling
    const std::vector<LabelPattern> fail{LabelPattern::deliver(a, u.status_fail())};
    const std::vector<LabelPattern> got{LabelPattern::deliver(b)};
    CHECK(uniform_reach_from_root(p, fail) == 1);
    CHECK(reach_values(p, fail).value[0] == 1);
    CHECK(uniform_reach_from_root(p, got) == 0);
  }
}
