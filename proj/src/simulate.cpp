#include <atomic>
#include <random>
#include <thread>

#include "json.hpp"
#include "linkalg/harness.hpp"

namespace linkalg {

using nlohmann::json;

std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + index + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

// Uniform integer in [0, n) without modulo bias; std distributions are not
// reproducible across standard libraries.
std::uint64_t below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do x = rng();
  while (x >= limit);
  return x % n;
}

std::size_t sample(std::mt19937_64& rng, const Dist<NetState>& d) {
  if (d.size() == 1) return 0;
  mpz_class den = 1;
  for (const auto& [s, p] : d) mpz_lcm(den.get_mpz_t(), den.get_mpz_t(), p.get_den_mpz_t());
  if (!den.fits_ulong_p()) throw ModelError("distribution too fine for sampling");
  std::uint64_t r = below(rng, den.get_ui());
  for (std::size_t i = 0; i < d.size(); ++i) {
    mpz_class w = d.entries()[i].second.get_num() * (den / d.entries()[i].second.get_den());
    if (r < w.get_ui()) return i;
    r -= w.get_ui();
  }
  return d.size() - 1;
}

json node_record(const ProcessDefs& defs, const Node& n, TimeValue epoch) {
  const Universe& u = defs.universe();
  json vars = json::object();
  for (const auto& [v, val] : n.state.xi.bindings()) vars[defs.var_name(v)] = to_string(val, u);
  json j = {{"id", u.name(n.id)},
            {"head", defs.head_name(n.state.expr)},
            {"now", n.state.xi.now + epoch},
            {"rfr", to_string(n.state.xi.rfr, u)},
            {"vars", vars}};
  if (n.state.xi.counter) j["counter"] = n.state.xi.counter;
  return j;
}

json nodes_record(const Model& m, const NetState& s) {
  json arr = json::array();
  for (const auto& n : s.nodes) arr.push_back(node_record(*m.defs, n, s.epoch));
  return arr;
}

json traffic_record(const Model& m, const ChunkMap& t) {
  json j = json::object();
  for (std::size_t i = 0; i < t.at.size(); ++i) {
    NodeId id{static_cast<std::uint16_t>(i)};
    if (contains(t.dom, id)) j[m.universe.name(id)] = to_string(t.at[i], m.universe);
  }
  return j;
}

std::string record_line(const Model& m, std::size_t step, int slot, const NetTransition& t,
                        const NetState& next) {
  json j = {{"step", step},
            {"slot", slot},
            {"label", to_string(t.label, m.universe)},
            {"nodes", nodes_record(m, next)}};
  if (t.label.kind == NetAction::Kind::tick) j["traffic"] = traffic_record(m, t.traffic);
  return j.dump();
}

std::string header_line(const Model& m, std::optional<std::uint64_t> seed, bool normalized,
                        std::optional<std::size_t> loop_from) {
  json j = {{"schema", kTraceSchema},
            {"scenario", m.config.name},
            {"protocol", to_string(m.config.protocol)},
            {"normalized", normalized}};
  if (seed) j["seed"] = *seed;
  if (loop_from) j["loop_from_step"] = *loop_from;
  return j.dump();
}

bool conflict_somewhere(const ChunkMap& t) {
  for (std::size_t i = 0; i < t.at.size(); ++i)
    if (contains(t.dom, NodeId{static_cast<std::uint16_t>(i)}) && t.at[i].kind == ChunkKind::conflict)
      return true;
  return false;
}

}  // namespace

TrialResult run_trial(const Model& m, std::uint64_t seed, int horizon, bool record_trace) {
  const Network& net = *m.network;
  const ProcessDefs& defs = *m.defs;
  const auto target = m.target();
  const NodeId src = m.node(target.node), dest = m.node(target.dest);
  const Payload data = m.payload(target.data);
  const Message frame = data_frame(data, dest, src);
  const std::size_t src_pos = net.position_of(src);

  std::mt19937_64 rng(seed);
  TrialResult r;
  if (record_trace) r.trace.push_back(header_line(m, seed, false, std::nullopt));
  NetState s = net.initial();
  int slot = 0;
  std::optional<int> injected_at;
  for (std::size_t step = 0;; ++step) {
    if (slot >= horizon) {
      r.out_of_time = true;
      break;
    }
    auto ts = distinct_transitions(net.transitions(s));
    if (ts.empty()) break;
    const NetTransition& t = ts[below(rng, ts.size())];
    NetState next = t.next.entries()[sample(rng, t.next)].first;

    const NetAction& a = t.label;
    if (a.kind == NetAction::Kind::tick) {
      if (conflict_somewhere(t.traffic)) ++r.collision_slots;
      if (injected_at) {
        Offer o = timed_offer(s.nodes[src_pos].state, defs, net.pending_injection(s, src_pos));
        if (o.kind == Offer::Kind::transmitting && o.chunk.index == 1) {
          // An attempt starts with the RTS under virtual carrier sensing.
          const Message& msg = o.chunk.msg;
          if (m.config.protocol == Protocol::csma_rts
                  ? msg.kind == MsgKind::rts && msg.src == src && msg.dest == dest
                  : msg == frame)
            ++r.attempts;
        }
      }
    }
    if (record_trace) r.trace.push_back(record_line(m, step, slot, t, next));
    if (a.kind == NetAction::Kind::tick) ++slot;
    s = std::move(next);

    if (a.kind == NetAction::Kind::newpkt && a.node == src && a.other == dest && a.data == data &&
        !injected_at)
      injected_at = slot;
    if (a.kind == NetAction::Kind::deliver && a.node == dest && a.data == data) {
      r.delivered = true;
      r.latency = slot - injected_at.value_or(0);
      break;
    }
    if (a.kind == NetAction::Kind::connect || a.kind == NetAction::Kind::disconnect) break;
    if (a.kind == NetAction::Kind::deliver && a.node == src && a.data == m.universe.status_fail() &&
        injected_at) {
      r.failure_reported = true;
      break;
    }
  }
  return r;
}

DeliveryStats monte_carlo(const Model& m, std::size_t trials, std::uint64_t master_seed,
                          int horizon, unsigned threads) {
  if (trials == 0) throw ConfigError("at least one trial is required");
  std::vector<TrialResult> results(trials);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next++) < trials;)
      results[i] = run_trial(m, trial_seed(master_seed, i), horizon);
  };
  threads = std::max(1U, threads);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  DeliveryStats st;
  st.trials = trials;
  double latency = 0;
  for (const auto& r : results) {
    if (r.delivered) {
      ++st.delivered;
      latency += static_cast<double>(*r.latency);
    }
    if (r.out_of_time) ++st.out_of_time;
    if (r.failure_reported) ++st.failure_reported;
    st.collision_slots += r.collision_slots;
    ++st.attempts_histogram[r.attempts];
  }
  if (st.delivered) st.mean_latency = latency / static_cast<double>(st.delivered);
  return st;
}

// ---------------------------------------------------------------------------
// Traces

std::vector<std::string> trace_of_path(const Model& m, const Plts& p, const Path& path) {
  const Network& net = p.network();
  std::vector<std::string> out{header_line(m, std::nullopt, p.normalized(), path.loop_from)};
  int slot = 0;
  for (std::size_t i = 0; i < path.transitions.size(); ++i) {
    const PltsTransition& pt = p.transition(path.transitions[i]);
    NetState from = p.state(path.states[i]);
    NetState to = p.state(path.states[i + 1]);
    // Recover the medium content of ticks from the network itself.
    NetTransition shown{pt.label, pt.actor, ChunkMap(net.size()), Dist<NetState>{}};
    if (pt.label.kind == NetAction::Kind::tick) {
      for (auto& t : distinct_transitions(net.transitions(from))) {
        if (t.label != pt.label) continue;
        bool hit = false;
        for (auto [s, w] : t.next) {
          if (p.normalized()) net.normalize(s);
          if (s == to) hit = true;
        }
        if (hit) {
          shown.traffic = t.traffic;
          break;
        }
      }
    }
    out.push_back(record_line(m, i, slot, shown, to));
    if (pt.label.kind == NetAction::Kind::tick) ++slot;
  }
  return out;
}

ReplayResult replay_trace(const Model& m, const std::vector<std::string>& lines) {
  ReplayResult r;
  if (lines.empty()) {
    r.message = "empty trace";
    return r;
  }
  json header;
  try {
    header = json::parse(lines.front());
  } catch (const json::parse_error& e) {
    r.message = std::string("bad header: ") + e.what();
    return r;
  }
  if (header.value("schema", "") != kTraceSchema) {
    r.message = "not a trace file";
    return r;
  }
  const bool normalized = header.value("normalized", false);
  const Network& net = *m.network;
  NetState s = net.initial();
  if (normalized) net.normalize(s);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    json rec;
    try {
      rec = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      r.message = "record " + std::to_string(i - 1) + " is not JSON";
      return r;
    }
    const std::string label = rec.value("label", "");
    bool matched = false;
    for (const auto& t : distinct_transitions(net.transitions(s))) {
      if (to_string(t.label, m.universe) != label) continue;
      if (t.label.kind == NetAction::Kind::tick && rec.contains("traffic") &&
          traffic_record(m, t.traffic) != rec["traffic"])
        continue;
      for (auto [next, w] : t.next) {
        if (normalized) net.normalize(next);
        if (nodes_record(m, next) == rec["nodes"]) {
          s = std::move(next);
          matched = true;
          break;
        }
      }
      if (matched) break;
    }
    if (!matched) {
      r.steps = i - 1;
      r.message = "record " + std::to_string(i - 1) + " (" + label + ") has no matching transition";
      return r;
    }
  }
  r.ok = true;
  r.steps = lines.size() - 1;
  return r;
}

}  // namespace linkalg
