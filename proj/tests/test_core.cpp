#include <set>

#include "doctest.h"

#include "linkalg/process.hpp"

using namespace linkalg;

namespace {

const Universe kU = Universe::make({"A", "B", "C"}, {"a", "b", "c"});
const NodeId kA{0}, kB{1}, kC{2};

DurationConfig durations_with(TimeValue user) {
  DurationConfig d;
  d.user = user;
  return d;
}

}  // namespace

TEST_CASE("message durations read back the configuration") {
  DurationConfig d;
  d.ack = 1;
  d.rts = 2;
  d.data_frame = 5;
  CHECK(dur(ack_frame(kA, kB), d) == 1);
  CHECK(dur(data_frame(Payload{0}, kB, kA), d) == 5);
  d.per_payload[1] = 2;
  CHECK(dur(data_frame(Payload{1}, kB, kA), d) == 2);
  const Message r = rts_frame(kA, kB, 7);
  CHECK(dur(r, d) == 2);
  CHECK(is_new(Chunk::frag(r, 2), r, d));
  CHECK_FALSE(is_new(Chunk::frag(r, 1), r, d));
}

TEST_CASE("merge table examples") {
  const Message m = data_frame(Payload{0}, kB, kA);
  const Message m2 = data_frame(Payload{1}, kB, kA);
  CHECK(chunk_merge(Chunk::frag(m, 2), Chunk::frag(m, 3)) == Chunk::frag(m, 3));
  CHECK(chunk_merge(Chunk::frag(m2, 1), Chunk::frag(m, 3)) == Chunk::conflict());
  CHECK(chunk_merge(Chunk::conflict(), Chunk::frag(m, 1)) == Chunk::frag(m, 1));
  CHECK(chunk_merge(Chunk::frag(m, 2), Chunk::idle()) == Chunk::idle());
  CHECK(chunk_merge(Chunk::idle(), Chunk::conflict()) == Chunk::conflict());
  // Skipping a fragment is a conflict.
  CHECK(chunk_merge(Chunk::frag(m, 1), Chunk::frag(m, 3)) == Chunk::conflict());
}

TEST_CASE("is_new and is_idle") {
  DurationConfig d;
  const Message m = data_frame(Payload{0}, kB, kA);
  CHECK(is_new(Chunk::frag(m, 3), m, d));
  CHECK_FALSE(is_new(Chunk::frag(m, 2), m, d));
  CHECK_FALSE(is_new(Chunk::conflict(), m, d));
  CHECK(is_idle(Chunk::idle()));
  CHECK_FALSE(is_idle(Chunk::conflict()));
  CHECK_FALSE(is_idle(Chunk::frag(m, 1)));
}

TEST_CASE("assignment is a deterministic internal step") {
  DefsBuilder b(kU, {});
  const VarId x = b.declare("x", VarType::integer(0, 9));
  b.define("P", {}, b.assign(x, 5, b.call("Q", {b.v("x")})));
  b.define("Q", {x}, b.deliver(lit(Payload{0}), b.call("Q", {b.v("x")})));
  DefsPtr defs = b.build();
  auto steps = instant_steps(initial_state(*defs, "P", {}), *defs, std::nullopt);
  REQUIRE(steps.size() == 1);
  CHECK(steps[0].action.kind == ProcAction::Kind::tau);
  REQUIRE(steps[0].next.is_point());
  CHECK(steps[0].next.entries()[0].first.xi.get(x) == Value{std::int64_t{5}});
}

TEST_CASE("probabilistic choice over 0..1 is a fair coin") {
  DefsBuilder b(kU, {});
  const VarId i = b.declare("i", VarType::integer(0, 1));
  b.define("P", {}, b.prob_choice(i, 1, b.call("Q", {b.v("i")})));
  b.define("Q", {i}, b.deliver(lit(Payload{0}), b.call("Q", {b.v("i")})));
  DefsPtr defs = b.build();
  auto steps = instant_steps(initial_state(*defs, "P", {}), *defs, std::nullopt);
  REQUIRE(steps.size() == 1);
  REQUIRE(steps[0].next.size() == 2);
  for (const auto& [s, p] : steps[0].next) CHECK(p == Rational(1, 2));
}

TEST_CASE("a guard binds every satisfying value of an unbound variable") {
  DefsBuilder b(kU, {});
  const VarId x = b.declare("x", VarType::payload());
  const Term phi = b.v("x") == lit(Payload{0}) || b.v("x") == lit(Payload{1});
  b.define("P", {}, b.guard(phi, b.call("Q", {b.v("x")})));
  b.define("Q", {x}, b.deliver(b.v("x"), b.call("Q", {b.v("x")})));
  DefsPtr defs = b.build();
  auto steps = instant_steps(initial_state(*defs, "P", {}), *defs, std::nullopt);
  std::set<std::uint16_t> bound;
  for (const auto& st : steps) {
    CHECK(st.action.kind == ProcAction::Kind::tau);
    bound.insert(std::get<Payload>(st.next.entries()[0].first.xi.get(x)).index);
  }
  CHECK(steps.size() == 2);
  CHECK(bound == std::set<std::uint16_t>{0, 1});
}

TEST_CASE("pruned guard solving agrees with brute force") {
  DefsBuilder b(kU, {});
  b.declare("me", VarType::node());
  b.declare("d", VarType::payload());
  b.declare("s", VarType::node());
  b.declare("t", VarType::node());
  b.declare("k", VarType::integer(0, 4));
  b.define("Idle", {}, b.guard(false, b.call("Idle")));
  DefsPtr defs = b.build();
  const Term me = var(defs->var("me")), d = var(defs->var("d")), s = var(defs->var("s")),
             t = var(defs->var("t")), k = var(defs->var("k"));

  const std::vector<Term> formulas{
      is_new(mk_data(d, me, s)),
      is_new(mk_data(d, me, s)) && s != me,
      is_new(mk_rts(s, t, k)) && t != me,
      is_new(mk_cts(s, me, k)) || is_new(mk_ack(s, me)),
      !is_new(mk_ack(s, me)) && k < 2,
      idle() || is_new(mk_rts(s, me, k)),
      s == t && k + 1 == 3,
  };
  DurationConfig dc;
  dc.data_frame = 2;
  std::vector<Chunk> rfrs{Chunk::idle(), Chunk::conflict()};
  for (const Message& m : {data_frame(Payload{1}, kA, kB), ack_frame(kC, kA), rts_frame(kB, kC, 3),
                           cts_frame(kB, kA, 2), rts_frame(kB, kA, 9)})
    for (int c = 1; c <= dur(m, dc); ++c) rfrs.push_back(Chunk::frag(m, c));

  int nonempty = 0;
  for (const auto& phi : formulas)
    for (const auto& rfr : rfrs) {
      Valuation xi;
      xi.rfr = rfr;
      xi.set(defs->var("me"), kA);
      auto fast = solve_guard(phi, xi, *defs);
      auto slow = solve_guard_brute(phi, xi, *defs);
      CHECK(fast == slow);
      nonempty += !fast.empty();
    }
  CHECK(nonempty > 0);
}

TEST_CASE("timed offers") {
  DefsBuilder b(kU, durations_with(2));
  const VarId d = b.declare("d", VarType::payload());
  const VarId dst = b.declare("dst", VarType::node());
  const Term ms = mk_user(0, 0);
  b.define("Stop", {}, b.guard(false, b.call("Stop")));
  b.define("Send", {}, b.transmit(ms, b.call("Stop")));
  b.define("Take", {}, b.newpkt(d, dst, b.deliver(b.v("d"), b.call("Stop"))));
  b.define("Either", {}, b.choice(b.guard(false, b.call("Stop")), b.transmit(ms, b.call("Stop"))));
  DefsPtr defs = b.build();
  const Message msg = user_message(0, 0);

  Offer o = timed_offer(initial_state(*defs, "Send", {}), *defs, std::nullopt);
  CHECK(o.kind == Offer::Kind::transmitting);
  CHECK(o.chunk == Chunk::frag(msg, 1));

  CHECK(timed_offer(initial_state(*defs, "Take", {}), *defs, std::nullopt).kind ==
        Offer::Kind::wait_only);

  o = timed_offer(initial_state(*defs, "Either", {}), *defs, std::nullopt);
  CHECK(o.kind == Offer::Kind::transmitting);
  CHECK(o.chunk == Chunk::frag(msg, 1));
}

TEST_CASE("advancing through a two-slot transmission") {
  DefsBuilder b(kU, durations_with(2));
  b.define("Stop", {}, b.guard(false, b.call("Stop")));
  b.define("Send", {}, b.transmit(mk_user(0, 0), b.call("Stop")));
  DefsPtr defs = b.build();
  const Message msg = user_message(0, 0);

  ProcState s = initial_state(*defs, "Send", {});
  auto opts = timed_options(s, *defs, std::nullopt);
  REQUIRE(opts.size() == 1);
  ProcState s1 = advance(s, opts[0], Chunk::frag(msg, 1), *defs);
  CHECK(s1.xi.counter == 1);
  CHECK(s1.expr->kind == SeqExpr::Kind::transmit);
  CHECK(s1.xi.rfr == Chunk::frag(msg, 1));
  CHECK(s1.xi.now == 1);

  opts = timed_options(s1, *defs, std::nullopt);
  REQUIRE(opts.size() == 1);
  CHECK(opts[0].chunk == 2);
  ProcState s2 = advance(s1, opts[0], Chunk::frag(msg, 2), *defs);
  CHECK(s2.xi.counter == 0);
  CHECK(defs->head_name(s2.expr) == "Stop");
}

TEST_CASE("waiting keeps the expression") {
  DefsBuilder b(kU, {});
  b.define("Stop", {}, b.guard(false, b.call("Stop")));
  DefsPtr defs = b.build();
  ProcState s = initial_state(*defs, "Stop", {});
  s.xi.rfr = Chunk::conflict();
  auto opts = timed_options(s, *defs, std::nullopt);
  REQUIRE(opts.size() == 1);
  CHECK_FALSE(opts[0].transmitting);
  ProcState next = advance(s, opts[0], Chunk::idle(), *defs);
  CHECK(next.expr == s.expr);
  CHECK(next.xi.now == s.xi.now + 1);
  CHECK(next.xi.rfr == Chunk::idle());
}

TEST_CASE("static checks reject malformed definitions") {
  SUBCASE("unguarded recursion") {
    DefsBuilder b(kU, {});
    b.define("Loop", {}, b.call("Loop"));
    CHECK_THROWS_AS(b.build(), ModelError);
  }
  SUBCASE("unknown process") {
    DefsBuilder b(kU, {});
    b.define("P", {}, b.guard(true, b.call("Nowhere")));
    CHECK_THROWS_AS(b.build(), ModelError);
  }
  SUBCASE("arity") {
    DefsBuilder b(kU, {});
    const VarId x = b.declare("x", VarType::node());
    b.define("P", {x}, b.guard(true, b.call("P")));
    CHECK_THROWS_AS(b.build(), ModelError);
  }
  SUBCASE("redeclaration with another type") {
    DefsBuilder b(kU, {});
    b.declare("x", VarType::node());
    CHECK_THROWS_AS(b.declare("x", VarType::payload()), ModelError);
  }
}
