// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "oracles.hpp"

using namespace linkalg;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string str(const Rational& r) { return r.get_str(); }

Model model_of(ScenarioConfig cfg, std::optional<Protocol> proto = std::nullopt,
               std::optional<int> horizon = std::nullopt, std::optional<bool> normalize = std::nullopt) {
  if (proto) cfg.protocol = *proto;
  if (horizon) cfg.horizon = *horizon;
  if (normalize) cfg.normalize = *normalize;
  return build_model(cfg);
}

Plts explore_model(const Model& m) { return explore(*m.network, m.explore_options()); }

// ---------------------------------------------------------------------------

Outcome chunk_merge_table() {
  const Universe u = Universe::make({"A", "B"}, {"p", "q"});
  const NodeId a = u.node("A"), b = u.node("B");
  std::size_t pairs = 0, mismatches = 0, new_mismatches = 0;
  std::set<int> rows;
  for (int d1 = 1; d1 <= 3; ++d1)
    for (int d2 = 1; d2 <= 3; ++d2) {
      DurationConfig dc;
      dc.per_payload = {{0, d1}, {1, d2}};
      const Message m1 = data_frame(Payload{0}, b, a), m2 = data_frame(Payload{1}, b, a);
      std::vector<Chunk> chunks{Chunk::idle(), Chunk::conflict()};
      for (const auto& m : {m1, m2})
        for (int c = 1; c <= dur(m, dc); ++c) chunks.push_back(Chunk::frag(m, c));
      for (const auto& rfr : chunks) {
        for (const auto& ch : chunks) {
          ++pairs;
          rows.insert(oracle::merge_row(rfr, ch));
          if (chunk_merge(rfr, ch) != oracle::merge(rfr, ch)) ++mismatches;
        }
        for (const auto& m : {m1, m2}) {
          const bool expect = rfr == Chunk::frag(m, static_cast<int>(dur(m, dc)));
          if (is_new(rfr, m, dc) != expect) ++new_mismatches;
        }
      }
    }
  std::ostringstream os;
  os << pairs << " pairs, " << mismatches << " merge mismatches, " << new_mismatches
     << " is_new mismatches, rows exercised " << rows.size() << "/5";
  return {mismatches == 0 && new_mismatches == 0 && rows.size() == 5, os.str()};
}

Outcome deadlock_freedom() {
  std::ostringstream os;
  bool ok = true;
  std::size_t largest = 0;
  int runs = 0;
  for (auto make : {scenario_hidden_station, scenario_exposed_station, scenario_star_counterexample})
    for (Protocol proto : {Protocol::csma, Protocol::csma_rts}) {
      ScenarioConfig base = make();
      // Once as configured, once without normalization at 30 slots.
      for (int variant = 0; variant < 2; ++variant) {
        ScenarioConfig cfg = base;
        cfg.protocol = proto;
        cfg.budget = 1000000;
        cfg.horizon = std::max(30, cfg.horizon);
        if (variant == 1) {
          cfg.horizon = 30;
          cfg.normalize = false;
        }
        Model m = build_model(cfg);
        Plts p = explore_model(m);
        DeadlockReport r = check_deadlock_freedom(p);
        ++runs;
        largest = std::max(largest, p.num_states());
        if (!r.ok || r.checked == 0) {
          ok = false;
          os << cfg.name << "/" << to_string(proto) << " h=" << cfg.horizon << " has "
             << r.offending.size() << " offending states; ";
        }
      }
    }
  os << runs << " explorations, largest " << largest << " states";
  return {ok, os.str()};
}

Outcome uplus_algebra() {
  const Universe u = Universe::make({"A", "B", "C"}, {"p", "q"});
  const Message m = data_frame(Payload{0}, NodeId{1}, NodeId{0});
  const Message m2 = data_frame(Payload{1}, NodeId{1}, NodeId{2});
  const std::vector<Chunk> values{Chunk::frag(m, 1), Chunk::frag(m2, 1), Chunk::conflict()};

  std::vector<ChunkMap> maps;
  std::vector<std::map<int, Chunk>> plain;
  for (int code = 0; code < 64; ++code) {
    ChunkMap cm(3);
    std::map<int, Chunk> pm;
    for (int id = 0, c = code; id < 3; ++id, c /= 4)
      if (c % 4 != 3) {
        cm.put(NodeId{static_cast<std::uint16_t>(id)}, values[c % 4]);
        pm[id] = values[c % 4];
      }
    maps.push_back(cm);
    plain.push_back(pm);
  }
  auto as_plain = [](const ChunkMap& cm) {
    std::map<int, Chunk> out;
    for (int id = 0; id < 3; ++id)
      if (auto c = cm.get(NodeId{static_cast<std::uint16_t>(id)})) out[id] = *c;
    return out;
  };
  std::size_t checks = 0, bad = 0;
  for (std::size_t i = 0; i < maps.size(); ++i)
    for (std::size_t j = 0; j < maps.size(); ++j) {
      const ChunkMap ij = uplus(maps[i], maps[j]);
      ++checks;
      if (!(ij == uplus(maps[j], maps[i])) || as_plain(ij) != oracle::union_all({plain[i], plain[j]}))
        ++bad;
      for (std::size_t k = 0; k < maps.size(); ++k) {
        ++checks;
        const ChunkMap left = uplus(ij, maps[k]);
        const ChunkMap right = uplus(maps[i], uplus(maps[j], maps[k]));
        if (!(left == right) || as_plain(left) != oracle::union_all({plain[i], plain[j], plain[k]}))
          ++bad;
      }
    }
  return {bad == 0, std::to_string(checks) + " identities over 64 maps, " + std::to_string(bad) +
                        " violations"};
}

Outcome composition_bisim() {
  ScenarioConfig base = scenario_hidden_station();
  auto plts_for = [&](const std::string& shape) {
    ScenarioConfig cfg = base;
    cfg.composition = shape;
    Model m = build_model(cfg);
    return std::make_pair(m, explore_model(m));
  };
  auto [m0, left] = plts_for("((A|B)|C)");
  auto [m1, right] = plts_for("(A|(B|C))");
  auto [m2, inner] = plts_for("((B|A)|C)");
  auto [m3, outer] = plts_for("(C|(A|B))");
  std::ostringstream os;
  bool ok = left.num_states() <= 10000 && left.num_truncated() == 0;
  os << left.num_states() << " states; ";
  for (auto [name, other] : {std::pair<const char*, const Plts*>{"assoc", &right},
                             {"swap inner", &inner},
                             {"swap outer", &outer}}) {
    BisimResult r = strong_bisim(left, *other);
    ok = ok && r.bisimilar;
    os << name << (r.bisimilar ? " bisimilar" : " DIFFERENT") << " (" << r.classes << " classes); ";
  }
  // Control: a different backoff window must be told apart.
  ScenarioConfig wider = base;
  wider.params.cwmin = 4;
  Model mw = build_model(wider);
  Plts pw = explore_model(mw);
  BisimResult control = strong_bisim(left, pw);
  ok = ok && !control.bisimilar && !control.witness.empty();
  os << "control cwmin=4 " << (control.bisimilar ? "bisimilar" : "distinguished") << " after "
     << control.witness.size() << " labels";
  return {ok, os.str()};
}

Outcome prob_choice_rule() {
  const Universe u = Universe::make({"A"}, {"p"});
  DefsBuilder b(u, DurationConfig{});
  const VarId i = b.declare("i", VarType::integer(0, 3));
  const VarId n = b.declare("n", VarType::integer());
  b.define("Pick", {n}, b.prob_choice(i, b.v("n"), b.call("Hold", {b.v("i")})));
  b.define("Hold", {i}, b.deliver(lit(Payload{0}), b.call("Hold", {b.v("i")})));
  DefsPtr defs = b.build();
  const ProcState s = initial_state(*defs, "Pick", {Value{std::int64_t{3}}});
  const auto steps = instant_steps(s, *defs, std::nullopt);

  std::set<std::int64_t> drawn;
  bool ok = steps.size() == 1 && steps[0].action.kind == ProcAction::Kind::tau;
  Rational total = 0;
  if (ok) {
    for (const auto& [next, p] : steps[0].next) {
      ok = ok && p == Rational(1, 4);
      total += p;
      const Value v = next.xi.get(i);
      if (const auto* x = std::get_if<std::int64_t>(&v)) drawn.insert(*x);
    }
    ok = ok && steps[0].next.size() == 4 && total == 1 && drawn == std::set<std::int64_t>{0, 1, 2, 3};
  }
  std::ostringstream os;
  os << (steps.empty() ? 0 : steps[0].next.size()) << " successors, values";
  for (auto x : drawn) os << " " << x;
  os << ", mass " << str(total);
  return {ok, os.str()};
}

Outcome hidden_plain() {
  Model m = model_of(scenario_hidden_station(), Protocol::csma);
  Plts p = explore_model(m);
  const auto q = m.delivery_query();
  OutrightResult out = holds_outright(p, q);
  std::ostringstream os;
  bool conflict_at_b = false, replay_ok = false;
  std::size_t len = 0;
  if (out.verdict == Verdict::fails && out.counterexample) {
    auto lines = trace_of_path(m, p, *out.counterexample);
    len = lines.size() - 1;
    const std::string conflict = to_string(Chunk::conflict(), m.universe);
    for (std::size_t k = 1; k < lines.size(); ++k) {
      json rec = json::parse(lines[k]);
      if (rec.contains("traffic") && rec["traffic"].contains("B") && rec["traffic"]["B"] == conflict)
        conflict_at_b = true;
    }
    replay_ok = replay_trace(m, lines).ok;
  }
  ProbResult pr = prob_at_least(p, q);
  os << "outright " << to_string(out.verdict) << ", counterexample of " << len << " steps"
     << (conflict_at_b ? " with" : " without") << " conflict at B, replay "
     << (replay_ok ? "ok" : "FAILED") << "; min_prob " << str(pr.min_value)
     << (pr.exact ? "" : " (approx)") << " over " << pr.pre_transitions << " pre transitions";
  return {out.verdict == Verdict::fails && conflict_at_b && replay_ok && pr.min_value < 1 &&
              pr.pre_transitions > 0,
          os.str()};
}

Outcome hidden_rts_after_handshake() {
  Model m = model_of(scenario_hidden_station(), Protocol::csma_rts);
  Plts p = explore_model(m);
  const NodeId b = m.node("B");
  const DurationConfig& dc = m.defs->durations();
  std::ostringstream os;
  bool ok = p.num_truncated() == 0;
  os << p.num_states() << " states, " << p.num_truncated() << " truncated; ";
  for (const auto& [sender, data] : {std::pair<std::string, std::string>{"A", "a"}, {"C", "c"}}) {
    const NodeId x = m.node(sender);
    EventualityQuery q;
    q.pre = LabelPattern::tick();
    q.condition = [b, x, &dc](const Network& net, const NetState&, const NetState& t) {
      const Node& recv = t.nodes[net.position_of(b)];
      for (const Node& n : t.nodes) {
        if (n.id == b || !contains(recv.range, n.id)) continue;
        const Chunk& r = n.state.xi.rfr;
        if (r.kind != ChunkKind::frag || r.msg.kind != MsgKind::cts || r.msg.src != b ||
            r.msg.dest != x || !is_new(r, r.msg, dc))
          return false;
      }
      return true;
    };
    q.post = {LabelPattern::deliver(b, m.payload(data))};
    OutrightResult r = holds_outright(p, q);
    ok = ok && r.verdict == Verdict::holds && r.pre_transitions > 0;
    os << "CTS for " << sender << ": " << to_string(r.verdict) << " over " << r.pre_transitions
       << " pre transitions; ";
  }
  return {ok, os.str()};
}

Outcome exposed_monotone() {
  std::ostringstream os;
  std::vector<Rational> vals;
  bool exact = true;
  for (int k = 1; k <= 3; ++k) {
    ScenarioConfig cfg = scenario_exposed_station();
    cfg.params.max_retransmit = k;
    cfg.horizon = 60;
    cfg.normalize = false;
    Model m = build_model(cfg);
    Plts p = explore_model(m);
    ProbResult r = prob_at_least(p, m.delivery_query());
    exact = exact && r.exact && r.pre_transitions > 0;
    vals.push_back(r.min_value);
    os << "maxR=" << k << ": " << str(r.min_value) << " (" << p.num_states() << " states); ";
  }
  const bool increasing = vals[0] < vals[1] && vals[1] < vals[2];
  os << (increasing ? "strictly increasing" : "NOT strictly increasing");
  return {increasing && exact, os.str()};
}

Outcome star_zero() {
  std::ostringstream os;
  bool ok = true;
  for (Protocol proto : {Protocol::csma, Protocol::csma_rts}) {
    os << to_string(proto) << ":";
    for (int h : {20, 40, 60}) {
      Model m = model_of(scenario_star_counterexample(), proto, h);
      Plts p = explore_model(m);
      ProbResult r = prob_at_least(p, m.delivery_query());
      ok = ok && r.min_value == 0 && r.pre_transitions > 0;
      os << " h" << h << "=" << str(r.min_value);
    }
    // Control: without the outer senders A's packet always arrives.
    ScenarioConfig quiet = scenario_star_counterexample();
    quiet.protocol = proto;
    quiet.horizon = 40;
    std::erase_if(quiet.injections, [](const ScheduledPacket& s) { return s.node != "A"; });
    Model mq = build_model(quiet);
    Plts pq = explore_model(mq);
    ProbResult rq = prob_at_least(pq, mq.delivery_query());
    ok = ok && rq.min_value == 1;
    os << ", quiet control " << str(rq.min_value) << "; ";
  }
  return {ok, os.str()};
}

/// Min over pre transitions reachable from the root of the brute-force value.
Rational brute_force_min_prob(const Model& m, int horizon) {
  const Network& net = *m.network;
  const EventualityQuery q = m.delivery_query();
  oracle::MinReach reach(net, q.post, horizon);
  std::optional<Rational> best;
  std::set<std::pair<int, std::string>> seen;
  std::function<void(const NetState&, int)> walk = [&](const NetState& s, int ticks) {
    if (ticks >= horizon) return;
    for (const auto& t : net.transitions(s)) {
      const int next = ticks + (t.label.kind == NetAction::Kind::tick ? 1 : 0);
      for (const auto& [target, p] : t.next) {
        if (q.pre.matches(t.label) && (!q.condition || q.condition(net, s, target))) {
          Rational v = 0;
          for (const auto& [tt, pp] : t.next) v += pp * reach.from(tt, next);
          if (!best || v < *best) best = v;
          break;
        }
        // Only the prefix before the packet is injected matters here.
        if (next > 0) continue;
        if (seen.insert({next, reach.print(target)}).second) walk(target, next);
      }
    }
  };
  walk(net.initial(), 0);
  return best.value_or(Rational(1));
}

Outcome two_senders_oracle() {
  const int horizon = 40;
  Model exact_model = model_of(scenario_two_senders());
  Plts pe = explore_model(exact_model);
  ProbResult re = prob_at_least(pe, exact_model.delivery_query());

  Model bounded = model_of(scenario_two_senders(), std::nullopt, horizon, false);
  Plts pb = explore_model(bounded);
  ProbResult rb = prob_at_least(pb, bounded.delivery_query());
  const Rational brute = brute_force_min_prob(bounded, horizon);

  // Two draws from {0,1} per round, two rounds: fails only if both rounds tie.
  int ties = 0, total = 0;
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c, ++total) ties += a == c;
  const Rational by_hand = 1 - Rational(ties, total) * Rational(ties, total);

  std::ostringstream os;
  os << "engine " << str(re.min_value) << " (" << pe.num_states() << " states), engine h" << horizon
     << " " << str(rb.min_value) << ", brute force " << str(brute) << ", enumeration "
     << str(by_hand);
  const Rational three_quarters(3, 4);
  return {re.min_value == three_quarters && rb.min_value == brute && brute == three_quarters &&
              by_hand == three_quarters && re.exact,
          os.str()};
}

Outcome monte_carlo_soundness() {
  const int horizon = 40;
  const std::size_t trials = 10000;
  Model m = model_of(scenario_hidden_station(), Protocol::csma_rts, horizon, false);
  Plts p = explore_model(m);
  const Rational exact = uniform_reach_from_root(p, m.delivery_query().post);
  const double pe = exact.get_d();
  DeliveryStats st = monte_carlo(m, trials, 20240601, horizon, 4);
  const double sigma = std::sqrt(pe * (1 - pe) / static_cast<double>(trials));
  const double diff = std::abs(st.rate() - pe);
  std::ostringstream os;
  os << "exact " << str(exact) << " = " << pe << ", simulated " << st.rate() << " over " << trials
     << " trials, |diff| " << diff << " vs 3 sigma " << 3 * sigma << " (" << p.num_states()
     << " states)";
  return {diff <= 3 * sigma, os.str()};
}

Outcome trace_determinism() {
  Model m = model_of(scenario_hidden_station(), Protocol::csma_rts, 60, false);
  auto join = [](const std::vector<std::string>& lines) {
    std::string s;
    for (const auto& l : lines) s += l + "\n";
    return s;
  };
  bool ok = true;
  std::size_t bytes = 0, differing = 0;
  for (std::uint64_t seed : {1ULL, 7ULL, 123456789ULL}) {
    const TrialResult r1 = run_trial(m, seed, 60, true);
    const TrialResult r2 = run_trial(m, seed, 60, true);
    const std::string a = join(r1.trace), b = join(r2.trace);
    ok = ok && a == b && replay_trace(m, r1.trace).ok;
    bytes += a.size();
    if (join(run_trial(m, seed + 1, 60, true).trace) != a) ++differing;
  }
  return {ok, std::to_string(bytes) + " bytes compared over 3 seeds, replays ok, " +
                  std::to_string(differing) + "/3 neighbouring seeds differ"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"chunk merge table", chunk_merge_table},
      {"deadlock freedom", deadlock_freedom},
      {"collision union algebra", uplus_algebra},
      {"composition order bisimilarity", composition_bisim},
      {"probabilistic choice n=3", prob_choice_rule},
      {"hidden station, plain csma", hidden_plain},
      {"hidden station, rts after handshake", hidden_rts_after_handshake},
      {"exposed station monotone in retries", exposed_monotone},
      {"star counterexample", star_zero},
      {"two senders vs brute force", two_senders_oracle},
      {"monte carlo vs exact uniform", monte_carlo_soundness},
      {"trace determinism", trace_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << (i + 1 < 10 ? " " : "") << i + 1 << "] "
              << criteria[i].first << " (" << std::fixed << std::setprecision(2) << secs
              << "s): " << std::defaultfloat << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed ? 1 : 0;
}
