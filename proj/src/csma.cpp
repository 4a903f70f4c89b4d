#include "linkalg/csma.hpp"

#include <algorithm>
#include <functional>

namespace linkalg {

std::string to_string(Protocol p) { return p == Protocol::csma ? "csma" : "csma-rts"; }

Protocol protocol_from_string(const std::string& s) {
  if (s == "csma") return Protocol::csma;
  if (s == "csma_rts" || s == "csma-rts" || s == "rts") return Protocol::csma_rts;
  throw ModelError("unknown protocol '" + s + "'");
}

void CsmaParams::validate() const {
  durations.validate();
  if (cwmin <= 0) throw ModelError("cwmin must be positive");
  if (cwmax && *cwmax < cwmin) throw ModelError("cwmax must be at least cwmin");
  if (max_retransmit && *max_retransmit < 0) throw ModelError("maxRetransmit must be >= 0");
  if (sifs <= 0) throw ModelError("sifs must be positive");
  if (difs <= sifs) throw ModelError("difs must exceed sifs");
  if (cts_wait() < sifs + durations.cts)
    throw ModelError("maxCtsWait shorter than sifs + durCTS: a CTS can never arrive in time");
  if (ack_wait() < sifs + durations.ack)
    throw ModelError("maxAckWait shorter than sifs + durAck: an ACK can never arrive in time");
}

std::int64_t cw_of(std::int64_t backoffexp, const CsmaParams& p) {
  if (backoffexp < 0 || backoffexp > 40) throw ModelError("backoff exponent out of range");
  std::int64_t cw = p.cwmin << backoffexp;
  if (p.cwmax) cw = std::min(cw, *p.cwmax);
  return cw;
}

TimeValue rts_duration(Payload data, NodeId src, NodeId dest, const CsmaParams& p) {
  const auto& d = p.durations;
  return p.sifs + d.cts + p.sifs + dur(data_frame(data, dest, src), d) + p.sifs + d.ack;
}

namespace {

struct Model {
  const CsmaParams& p;
  const Universe& u;
  DefsBuilder b;

  Model(const CsmaParams& params, const Universe& universe)
      : p(params), u(universe), b(universe, params.durations) {
    p.validate();
    TimeValue longest = 0;
    for (std::size_t i = 0; i < u.data_count; ++i)
      longest = std::max(longest, dur(data_frame(Payload{static_cast<std::uint16_t>(i)}, {}, {}),
                                      p.durations));
    const TimeValue dmax = 3 * p.sifs + p.durations.cts + p.durations.ack + longest;

    b.declare("myip", VarType::node());
    b.declare("data", VarType::payload());
    b.declare("dest", VarType::node());
    b.declare("frm", VarType::message());
    b.declare("be", VarType::integer());
    b.declare("cw", VarType::integer());
    b.declare("bo", VarType::integer());
    b.declare("to", VarType::time());
    b.declare("t", VarType::time());
    b.declare("rd", VarType::payload());
    b.declare("src", VarType::node());
    b.declare("dst", VarType::node());
    b.declare("dd", VarType::integer(0, dmax));
    b.declare("nav", VarType::expiring_time());
    b.declare("rcv", VarType::time());
    b.declare("ndur", VarType::integer());
  }

  Term v(const char* n) const { return b.v(n); }
  VarId var(const char* n) const { return b.v(n)->var; }

  Term status(bool ok) const { return lit(Value{ok ? u.status_ok() : u.status_fail()}); }

  Term contention_window() const {
    Term cw = Term(p.cwmin) * pow2(v("be"));
    if (p.cwmax) cw = min_of(cw, Term(*p.cwmax));
    return cw;
  }

  // Receive a data frame addressed to us, hand it up, acknowledge after sifs.
  Proc handle_data(Proc ret) {
    return b.guard(
        is_new(mk_data(v("rd"), v("myip"), v("src"))),
        b.deliver(v("rd"),
                  b.assign(var("t"), v("now") + Term(p.sifs),
                           b.guard(v("now") >= v("t"),
                                   b.transmit(mk_ack(v("myip"), v("src")), ret)))));
  }

  // Overheard RTS/CTS for a third party extends the NAV.
  std::vector<Proc> nav_updates(const std::function<Proc(Term)>& ret) {
    std::vector<Proc> out;
    for (bool rts : {true, false}) {
      Term m = rts ? mk_rts(v("src"), v("dst"), v("dd")) : mk_cts(v("src"), v("dst"), v("dd"));
      out.push_back(b.guard(is_new(m) && v("dst") != v("myip") && v("src") != v("myip") &&
                                v("nav") < v("now") + v("dd"),
                            b.assign(var("nav"), v("now") + v("dd"), ret(v("nav")))));
    }
    return out;
  }

  // Answer an RTS addressed to us with a CTS after sifs, unless the NAV is set
  // or the medium turns busy in between.
  Proc cts_reply(const std::function<Proc(Term)>& ret) {
    Proc refuse = b.guard(!idle() && v("now") > v("rcv"), ret(v("nav")));
    Proc answer = b.guard(
        idle() && v("now") >= v("rcv") + Term(p.sifs),
        b.assign(var("ndur"), v("dd") - (v("now") - v("rcv")) - Term(p.durations.cts),
                 b.transmit(mk_cts(v("myip"), v("src"), v("ndur")),
                            b.assign(var("nav"), v("now") + v("ndur"), ret(v("nav"))))));
    return b.guard(is_new(mk_rts(v("src"), v("myip"), v("dd"))) && v("now") > v("nav"),
                   b.assign(var("rcv"), v("now"), b.choice(refuse, answer)));
  }

  void plain() {
    const Term myip = v("myip"), frm = v("frm"), be = v("be"), bo = v("bo"), to = v("to");
    b.define("CSMA", {var("myip")},
             b.choice(b.newpkt(var("data"), var("dest"),
                               b.call("INIT", {myip, mk_data(v("data"), v("dest"), myip), 0})),
                      handle_data(b.call("CSMA", {myip}))));

    std::vector<Proc> init{b.guard(
        max_retry_ok(),
        b.assign(var("cw"), contention_window(), b.call("CCA", {myip, frm, be, v("cw")})))};
    if (p.max_retransmit)
      init.push_back(b.guard(be >= Term(*p.max_retransmit),
                             b.deliver(status(false), b.call("CSMA", {myip}))));
    b.define("INIT", {var("myip"), var("frm"), var("be")}, b.choice(init));

    b.define("CCA", {var("myip"), var("frm"), var("be"), var("cw")},
             b.prob_choice(var("bo"), v("cw") - Term(1),
                           b.call("CCA_SENSE", {myip, frm, be, bo})));

    b.define("CCA_SENSE", {var("myip"), var("frm"), var("be"), var("bo")},
             b.choice(handle_data(b.call("CCA_SENSE", {myip, frm, be, bo})),
                      b.guard(idle(), b.assign(var("to"), v("now") + Term(p.difs - 1),
                                               b.call("CCA_IFS", {myip, frm, be, bo, to})))));

    b.define("CCA_IFS", {var("myip"), var("frm"), var("be"), var("bo"), var("to")},
             b.choice(b.guard(!idle(), b.call("CCA_SENSE", {myip, frm, be, bo})),
                      b.guard(idle() && v("now") >= to,
                              b.assign(var("to"), v("now") + bo,
                                       b.call("CCA_BACKOFF", {myip, frm, be, to})))));

    b.define("CCA_BACKOFF", {var("myip"), var("frm"), var("be"), var("to")},
             b.choice(b.guard(!idle(), b.assign(var("bo"), to - v("now") + Term(1),
                                                b.call("CCA_SENSE", {myip, frm, be, bo}))),
                      b.guard(idle() && v("now") >= to,
                              b.transmit(frm, b.assign(var("to"), v("now") + Term(p.ack_wait()),
                                                       b.call("ACKRECV", {myip, frm, be, to}))))));

    b.define("ACKRECV", {var("myip"), var("frm"), var("be"), var("to")},
             b.choice({handle_data(b.call("ACKRECV", {myip, frm, be, to})),
                       b.guard(is_new(mk_ack(dest_of(frm), myip)),
                               b.deliver(status(true), b.call("CSMA", {myip}))),
                       b.guard(v("now") > to, b.call("INIT", {myip, frm, be + Term(1)}))}));
  }

  Term max_retry_ok() const {
    if (!p.max_retransmit) return Term(true);
    return v("be") < Term(*p.max_retransmit);
  }

  void rts() {
    const Term myip = v("myip"), data = v("data"), dest = v("dest"), be = v("be"), bo = v("bo"),
               nav = v("nav"), to = v("to");
    const Term frame = mk_data(data, dest, myip);

    // Handlers shared by every state that listens: data frames, NAV, RTS.
    auto listening = [&](const std::string& self, const std::function<std::vector<Term>(Term)>& args,
                         bool data_frames, bool answer_rts) {
      std::vector<Proc> alts;
      if (data_frames) alts.push_back(handle_data(b.call(self, args(nav))));
      for (Proc q : nav_updates([&](Term n) { return b.call(self, args(n)); })) alts.push_back(q);
      if (answer_rts) alts.push_back(cts_reply([&](Term n) { return b.call(self, args(n)); }));
      return alts;
    };

    {
      auto alts = listening("CSMA_RTS", [&](Term n) { return std::vector<Term>{myip, n}; }, true, true);
      alts.insert(alts.begin(),
                  b.newpkt(var("data"), var("dest"), b.call("INIT_RTS", {myip, data, dest, 0, nav})));
      b.define("CSMA_RTS", {var("myip"), var("nav")}, b.choice(alts));
    }

    std::vector<Proc> init{b.guard(
        max_retry_ok(), b.assign(var("cw"), contention_window(),
                                 b.call("CCA_RTS", {myip, data, dest, be, v("cw"), nav})))};
    if (p.max_retransmit)
      init.push_back(b.guard(be >= Term(*p.max_retransmit),
                             b.deliver(status(false), b.call("CSMA_RTS", {myip, nav}))));
    b.define("INIT_RTS", {var("myip"), var("data"), var("dest"), var("be"), var("nav")},
             b.choice(init));

    b.define("CCA_RTS", {var("myip"), var("data"), var("dest"), var("be"), var("cw"), var("nav")},
             b.prob_choice(var("bo"), v("cw") - Term(1),
                           b.call("CCA_RTS_SENSE", {myip, data, dest, be, bo, nav})));

    {
      auto alts = listening(
          "CCA_RTS_SENSE",
          [&](Term n) { return std::vector<Term>{myip, data, dest, be, bo, n}; }, true, true);
      alts.push_back(b.guard(idle() && v("now") > nav,
                             b.assign(var("to"), v("now") + Term(p.difs - 1),
                                      b.call("CCA_RTS_IFS", {myip, data, dest, be, bo, nav, to}))));
      b.define("CCA_RTS_SENSE",
               {var("myip"), var("data"), var("dest"), var("be"), var("bo"), var("nav")},
               b.choice(alts));
    }

    b.define("CCA_RTS_IFS",
             {var("myip"), var("data"), var("dest"), var("be"), var("bo"), var("nav"), var("to")},
             b.choice(b.guard(!idle(), b.call("CCA_RTS_SENSE", {myip, data, dest, be, bo, nav})),
                      b.guard(idle() && v("now") >= to,
                              b.assign(var("to"), v("now") + bo,
                                       b.call("CCA_RTS_BACKOFF", {myip, data, dest, be, nav, to})))));

    const Term request = Term(3 * p.sifs + p.durations.cts + p.durations.ack) + dur_of(frame);
    b.define("CCA_RTS_BACKOFF",
             {var("myip"), var("data"), var("dest"), var("be"), var("nav"), var("to")},
             b.choice(b.guard(!idle(), b.assign(var("bo"), to - v("now") + Term(1),
                                                b.call("CCA_RTS_SENSE",
                                                       {myip, data, dest, be, bo, nav}))),
                      b.guard(idle() && v("now") >= to,
                              b.transmit(mk_rts(myip, dest, request),
                                         b.assign(var("to"), v("now") + Term(p.cts_wait()),
                                                  b.call("CTSRECV",
                                                         {myip, data, dest, be, nav, to}))))));

    {
      auto args = [&](Term n) { return std::vector<Term>{myip, data, dest, be, n, to}; };
      auto alts = listening("CTSRECV", args, false, false);
      alts.insert(alts.begin(),
                  b.guard(is_new(mk_cts(dest, myip, v("dd"))),
                          b.assign(var("t"), v("now") + Term(p.sifs),
                                   b.guard(v("now") >= v("t"),
                                           b.transmit(frame,
                                                      b.assign(var("to"), v("now") + Term(p.ack_wait()),
                                                               b.call("ACKRECV_RTS",
                                                                      {myip, data, dest, be, nav, to})))))));
      alts.insert(alts.begin() + 1,
                  b.guard(v("now") > to, b.call("INIT_RTS", {myip, data, dest, be + Term(1), nav})));
      b.define("CTSRECV",
               {var("myip"), var("data"), var("dest"), var("be"), var("nav"), var("to")},
               b.choice(alts));
    }

    {
      auto args = [&](Term n) { return std::vector<Term>{myip, data, dest, be, n, to}; };
      auto alts = listening("ACKRECV_RTS", args, false, false);
      alts.insert(alts.begin(), b.guard(is_new(mk_ack(dest, myip)),
                                        b.deliver(status(true), b.call("CSMA_RTS", {myip, nav}))));
      alts.insert(alts.begin() + 1,
                  b.guard(v("now") > to, b.call("INIT_RTS", {myip, data, dest, be + Term(1), nav})));
      b.define("ACKRECV_RTS",
               {var("myip"), var("data"), var("dest"), var("be"), var("nav"), var("to")},
               b.choice(alts));
    }
  }
};

}  // namespace

DefsPtr build_csma_defs(const CsmaParams& p, const Universe& u) {
  Model m(p, u);
  m.plain();
  return m.b.build();
}

DefsPtr build_csma_rts_defs(const CsmaParams& p, const Universe& u) {
  Model m(p, u);
  m.rts();
  return m.b.build();
}

DefsPtr build_defs(Protocol proto, const CsmaParams& p, const Universe& u) {
  return proto == Protocol::csma ? build_csma_defs(p, u) : build_csma_rts_defs(p, u);
}

ProcState csma_initial(Protocol proto, const ProcessDefs& defs, NodeId id) {
  if (proto == Protocol::csma) return initial_state(defs, "CSMA", {Value{id}});
  // The NAV starts just before the clock so that `now > nav` holds.
  return initial_state(defs, "CSMA_RTS", {Value{id}, Value{TimePoint{-1}}});
}

}  // namespace linkalg
