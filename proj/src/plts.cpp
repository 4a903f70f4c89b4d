#include "linkalg/plts.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace linkalg {

// ---------------------------------------------------------------------------
// Exploration

std::size_t Plts::num_truncated() const {
  return static_cast<std::size_t>(std::count(truncated_.begin(), truncated_.end(), true));
}

NetState Plts::state(StateId s) const {
  const NetState& init = net_->initial();
  const std::size_t n = init.nodes.size();
  const std::uint32_t* k = &keys_[static_cast<std::size_t>(s) * key_width_];
  const bool mobile = net_->environment().mobility != MobilityMode::off;
  NetState out;
  out.nodes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.nodes.push_back(Node{init.nodes[i].id, procs_[*k++], init.nodes[i].range});
  if (mobile)
    for (std::size_t i = 0; i < n; ++i) {
      out.nodes[i].range = NodeSet{k[0]} | (NodeSet{k[1]} << 32);
      k += 2;
    }
  out.injected.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.injected[i] = static_cast<std::uint16_t>(*k++);
  out.mobility_done = *k++;
  out.epoch = static_cast<TimeValue>(std::uint64_t{k[0]} | (std::uint64_t{k[1]} << 32));
  return out;
}

std::string Plts::describe(StateId s) const {
  const NetState st = state(s);
  const ProcessDefs& defs = net_->defs();
  const Universe& u = defs.universe();
  std::string out;
  for (const auto& n : st.nodes) {
    out += u.name(n.id) + ": " + defs.head_name(n.state.expr) + " now=" +
           std::to_string(n.state.xi.now + st.epoch) + " rfr=" + to_string(n.state.xi.rfr, u);
    if (n.state.xi.counter) out += " counter=" + std::to_string(n.state.xi.counter);
    for (const auto& [v, val] : n.state.xi.bindings())
      out += " " + defs.var_name(v) + "=" + to_string(val, u);
    out += "\n";
  }
  return out;
}

namespace {

struct KeyHash {
  const std::vector<std::uint32_t>* keys;
  std::size_t width;
  std::size_t operator()(std::uint32_t s) const {
    const std::uint32_t* k = keys->data() + static_cast<std::size_t>(s) * width;
    std::size_t h = 0x12345;
    for (std::size_t i = 0; i < width; ++i) hash_mix(h, k[i]);
    return h;
  }
};

struct KeyEq {
  const std::vector<std::uint32_t>* keys;
  std::size_t width;
  bool operator()(std::uint32_t a, std::uint32_t b) const {
    const std::uint32_t* x = keys->data() + static_cast<std::size_t>(a) * width;
    const std::uint32_t* y = keys->data() + static_cast<std::size_t>(b) * width;
    return std::equal(x, x + width, y);
  }
};

bool same_dist(const Dist<NetState>& a, const Dist<NetState>& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [s, p] : a) {
    bool found = false;
    for (const auto& [t, q] : b)
      if (p == q && s == t) {
        found = true;
        break;
      }
    if (!found) return false;
  }
  return true;
}

}  // namespace

std::vector<NetTransition> distinct_transitions(std::vector<NetTransition> ts) {
  std::vector<NetTransition> out;
  for (auto& t : ts) {
    if (!t.next.is_point()) {
      Dist<NetState> merged;
      std::vector<std::pair<NetState, Rational>> acc;
      for (const auto& [s, p] : t.next) {
        auto it = std::find_if(acc.begin(), acc.end(), [&](const auto& e) { return e.first == s; });
        if (it == acc.end())
          acc.emplace_back(s, p);
        else
          it->second += p;
      }
      for (auto& [s, p] : acc) merged.add(std::move(s), p);
      t.next = std::move(merged);
    }
    bool dup = std::any_of(out.begin(), out.end(), [&](const NetTransition& o) {
      return o.label == t.label && same_dist(o.next, t.next);
    });
    if (!dup) out.push_back(std::move(t));
  }
  return out;
}

namespace {
bool has_instant_cycle(const Plts& p);
}  // namespace

Plts explore(const Network& net, const ExploreOptions& opt) {
  if (opt.horizon < 0) throw ModelError("horizon must be non-negative");
  if (opt.normalize && !net.defs().shift_invariant())
    throw ModelError("clock normalization needs a model without absolute time literals");

  Plts p;
  p.net_ = &net;
  p.normalized_ = opt.normalize;
  p.reduced_ = opt.reduce;
  p.horizon_ = opt.horizon;
  const std::size_t n = net.size();
  const bool mobile = net.environment().mobility != MobilityMode::off;
  p.key_width_ = n + (mobile ? 2 * n : 0) + n + 1 + 2;
  const std::size_t w = p.key_width_;

  std::unordered_map<ProcState, std::uint32_t, ProcStateHash> proc_ids;
  std::unordered_set<std::uint32_t, KeyHash, KeyEq> index(1024, KeyHash{&p.keys_, w},
                                                          KeyEq{&p.keys_, w});

  auto intern_proc = [&](const ProcState& s) {
    auto [it, fresh] = proc_ids.emplace(s, static_cast<std::uint32_t>(p.procs_.size()));
    if (fresh) p.procs_.push_back(s);
    return it->second;
  };

  std::vector<int> dist;
  std::deque<std::pair<StateId, int>> queue;
  std::vector<bool> expanded;

  // Returns the id of `st`, adding it if new; the flag tells whether it was new.
  auto intern = [&](NetState st) -> std::pair<StateId, bool> {
    if (opt.normalize) net.normalize(st);
    const auto id = static_cast<StateId>(p.depth_.size());
    for (const auto& node : st.nodes) p.keys_.push_back(intern_proc(node.state));
    if (mobile)
      for (const auto& node : st.nodes) {
        p.keys_.push_back(static_cast<std::uint32_t>(node.range));
        p.keys_.push_back(static_cast<std::uint32_t>(node.range >> 32));
      }
    for (auto c : st.injected) p.keys_.push_back(c);
    p.keys_.push_back(st.mobility_done);
    auto e = static_cast<std::uint64_t>(st.epoch);
    p.keys_.push_back(static_cast<std::uint32_t>(e));
    p.keys_.push_back(static_cast<std::uint32_t>(e >> 32));
    auto it = index.find(id);
    if (it != index.end()) {
      p.keys_.resize(p.keys_.size() - w);
      return {*it, false};
    }
    if (p.depth_.size() >= opt.budget) throw BudgetExceeded(opt.budget);
    index.insert(id);
    p.depth_.push_back(0);
    p.truncated_.push_back(false);
    dist.push_back(std::numeric_limits<int>::max());
    expanded.push_back(false);
    return {id, true};
  };

  auto relax = [&](StateId s, int d, bool same_level) {
    if (d >= dist[s]) return;
    dist[s] = d;
    if (same_level)
      queue.emplace_front(s, d);
    else
      queue.emplace_back(s, d);
  };

  relax(intern(net.initial()).first, 0, true);

  std::vector<PltsTransition> trans;
  while (!queue.empty()) {
    auto [s, d] = queue.front();
    queue.pop_front();
    if (expanded[s] || d != dist[s]) continue;
    expanded[s] = true;
    p.depth_[s] = d;
    if (d >= opt.horizon) {
      p.truncated_[s] = true;
      continue;
    }
    const NetState st = p.state(s);
    std::vector<PltsTransition> local;
    std::vector<std::vector<PltsOutcome>> local_out;
    auto ts = net.transitions(st, opt.with_environment);
    if (opt.reduce) {
      for (auto& t : ts) {
        if (t.label.kind != NetAction::Kind::tau || t.actor < 0 || !t.next.is_point()) continue;
        const auto pos = static_cast<std::size_t>(t.actor);
        if (!node_timed_options(st.nodes[pos], net.defs(), net.pending_injection(st, pos)).empty())
          continue;
        NetTransition keep = std::move(t);
        ts.clear();
        ts.push_back(std::move(keep));
        break;
      }
    }
    for (auto& t : ts) {
      const bool tick = t.label.kind == NetAction::Kind::tick;
      std::vector<std::pair<StateId, Rational>> acc;
      for (const auto& [target, prob] : t.next) {
        StateId id = intern(target).first;
        relax(id, tick ? d + 1 : d, !tick);
        auto it = std::find_if(acc.begin(), acc.end(), [&](const auto& e) { return e.first == id; });
        if (it == acc.end())
          acc.emplace_back(id, prob);
        else
          it->second += prob;
      }
      std::sort(acc.begin(), acc.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      std::vector<PltsOutcome> outs;
      for (auto& [id, prob] : acc) {
        prob.canonicalize();
        outs.push_back({id, static_cast<std::uint32_t>(prob.get_num().get_ui()),
                        static_cast<std::uint32_t>(prob.get_den().get_ui())});
      }
      bool dup = false;
      for (std::size_t j = 0; j < local.size() && !dup; ++j) {
        if (local[j].label != t.label || local_out[j].size() != outs.size()) continue;
        dup = std::equal(outs.begin(), outs.end(), local_out[j].begin(), [](const auto& a, const auto& b) {
          return a.target == b.target && a.num == b.num && a.den == b.den;
        });
      }
      if (dup) continue;
      PltsTransition pt;
      pt.source = s;
      pt.label = t.label;
      pt.actor = t.actor;
      local.push_back(pt);
      local_out.push_back(std::move(outs));
    }
    for (std::size_t j = 0; j < local.size(); ++j) {
      local[j].first = static_cast<std::uint32_t>(p.outcomes_.size());
      for (const auto& o : local_out[j]) p.outcomes_.push_back(o);
      local[j].last = static_cast<std::uint32_t>(p.outcomes_.size());
      trans.push_back(local[j]);
    }
  }

  std::stable_sort(trans.begin(), trans.end(),
                   [](const auto& a, const auto& b) { return a.source < b.source; });
  p.transitions_ = std::move(trans);
  p.out_begin_.assign(p.depth_.size() + 1, 0);
  for (const auto& t : p.transitions_) ++p.out_begin_[t.source + 1];
  std::partial_sum(p.out_begin_.begin(), p.out_begin_.end(), p.out_begin_.begin());
  // A cycle without time steps could postpone the other nodes forever.
  if (opt.reduce && has_instant_cycle(p))
    throw ModelError("reduction not applicable: the model has a cycle of instantaneous steps");
  return p;
}

// ---------------------------------------------------------------------------
// Patterns and queries

bool LabelPattern::matches(const NetAction& a) const {
  if (a.kind != kind) return false;
  if (node && a.node != *node) return false;
  if (other && a.other != *other) return false;
  if (data && a.data != *data) return false;
  return true;
}

LabelPattern LabelPattern::deliver(NodeId at, std::optional<Payload> d) {
  LabelPattern p;
  p.kind = NetAction::Kind::deliver;
  p.node = at;
  p.data = d;
  return p;
}

LabelPattern LabelPattern::newpkt(std::optional<NodeId> at, std::optional<Payload> d,
                                  std::optional<NodeId> dest) {
  LabelPattern p;
  p.kind = NetAction::Kind::newpkt;
  p.node = at;
  p.data = d;
  p.other = dest;
  return p;
}

LabelPattern LabelPattern::tick() {
  LabelPattern p;
  p.kind = NetAction::Kind::tick;
  return p;
}

LabelPattern LabelPattern::any_connect() {
  LabelPattern p;
  p.kind = NetAction::Kind::connect;
  return p;
}

LabelPattern LabelPattern::any_disconnect() {
  LabelPattern p;
  p.kind = NetAction::Kind::disconnect;
  return p;
}

bool matches_any(const std::vector<LabelPattern>& ps, const NetAction& a) {
  return std::any_of(ps.begin(), ps.end(), [&](const auto& p) { return p.matches(a); });
}

EventualityQuery packet_delivery(NodeId id, NodeId dest, Payload d, bool weak) {
  EventualityQuery q;
  q.pre = LabelPattern::newpkt(id, d, dest);
  q.condition = [id, dest](const Network& net, const NetState& source, const NetState&) {
    return net.cntd(source, id, dest);
  };
  q.post = {LabelPattern::deliver(dest, d), LabelPattern::any_disconnect(),
            LabelPattern::any_connect()};
  if (weak) q.post.push_back(LabelPattern::newpkt());
  return q;
}

std::vector<std::size_t> matching_transitions(const Plts& p, const EventualityQuery& q) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < p.num_transitions(); ++t) {
    const auto& tr = p.transition(t);
    if (!q.pre.matches(tr.label)) continue;
    if (q.condition) {
      const NetState src = p.state(tr.source);
      bool ok = true;
      for (auto* o = p.outcomes_begin(tr); o != p.outcomes_end(tr) && ok; ++o)
        ok = q.condition(p.network(), src, p.state(o->target));
      if (!ok) continue;
    }
    out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Deadlock freedom

DeadlockReport check_deadlock_freedom(const Plts& p) {
  DeadlockReport r;
  for (StateId s = 0; s < p.num_states(); ++s) {
    if (p.truncated(s)) continue;
    ++r.checked;
    auto [b, e] = p.out(s);
    if (b == e) r.dead_ends.push_back(s);
    bool progress = false;
    for (const auto& t : p.network().transitions(p.state(s), false)) {
      auto k = t.label.kind;
      if (k == NetAction::Kind::tick || k == NetAction::Kind::tau || k == NetAction::Kind::deliver) {
        progress = true;
        break;
      }
    }
    if (!progress) r.offending.push_back(s);
  }
  r.ok = r.offending.empty() && r.dead_ends.empty();
  return r;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::fails: return "fails";
    case Verdict::unknown: return "unknown";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Graph helpers

namespace {

// Successor lists restricted to transitions accepted by `use`.
struct Graph {
  std::vector<std::uint32_t> begin;
  std::vector<StateId> succ;
  std::vector<std::uint32_t> via;  // transition index for each edge
};

template <class Use>
Graph build_graph(const Plts& p, Use use) {
  Graph g;
  g.begin.assign(p.num_states() + 1, 0);
  for (StateId s = 0; s < p.num_states(); ++s) {
    auto [b, e] = p.out(s);
    for (auto t = b; t < e; ++t) {
      const auto& tr = p.transition(t);
      if (!use(tr)) continue;
      for (auto* o = p.outcomes_begin(tr); o != p.outcomes_end(tr); ++o) {
        g.succ.push_back(o->target);
        g.via.push_back(t);
      }
    }
    g.begin[s + 1] = static_cast<std::uint32_t>(g.succ.size());
  }
  return g;
}

Graph reverse(const Graph& g) {
  Graph r;
  const std::size_t n = g.begin.size() - 1;
  r.begin.assign(n + 1, 0);
  for (auto t : g.succ) ++r.begin[t + 1];
  std::partial_sum(r.begin.begin(), r.begin.end(), r.begin.begin());
  r.succ.resize(g.succ.size());
  r.via.resize(g.succ.size());
  std::vector<std::uint32_t> fill(r.begin.begin(), r.begin.end() - 1);
  for (StateId s = 0; s < n; ++s)
    for (auto i = g.begin[s]; i < g.begin[s + 1]; ++i) {
      auto pos = fill[g.succ[i]]++;
      r.succ[pos] = s;
      r.via[pos] = g.via[i];
    }
  return r;
}

// Iterative Tarjan. Components are numbered in reverse topological order
// (a component's successors get smaller numbers).
std::vector<std::uint32_t> scc(const Graph& g, std::uint32_t& count) {
  const std::size_t n = g.begin.size() - 1;
  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> index(n, kNone), low(n, 0), comp(n, kNone);
  std::vector<StateId> stack;
  std::vector<bool> on_stack(n, false);
  std::vector<std::pair<StateId, std::uint32_t>> call;
  std::uint32_t next = 0;
  count = 0;
  for (StateId root = 0; root < n; ++root) {
    if (index[root] != kNone) continue;
    call.emplace_back(root, g.begin[root]);
    index[root] = low[root] = next++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      auto& [v, i] = call.back();
      if (i < g.begin[v + 1]) {
        StateId w = g.succ[i++];
        if (index[w] == kNone) {
          index[w] = low[w] = next++;
          stack.push_back(w);
          on_stack[w] = true;
          call.emplace_back(w, g.begin[w]);
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        StateId w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp[w] = count;
        } while (w != v);
        ++count;
      }
      StateId done = v;
      call.pop_back();
      if (!call.empty()) {
        StateId parent = call.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
    }
  }
  return comp;
}

bool has_instant_cycle(const Plts& p) {
  Graph g = build_graph(p, [](const PltsTransition& t) { return t.label.kind != NetAction::Kind::tick; });
  std::uint32_t count = 0;
  auto comp = scc(g, count);
  std::vector<std::uint32_t> size(count, 0);
  for (auto c : comp) ++size[c];
  for (StateId s = 0; s < p.num_states(); ++s)
    for (auto i = g.begin[s]; i < g.begin[s + 1]; ++i)
      if (g.succ[i] == s || size[comp[s]] > 1) return true;
  return false;
}

// States that can reach a state in `seed` (seed included).
std::vector<bool> backward_closure(const Graph& rev, const std::vector<bool>& seed) {
  std::vector<bool> mark = seed;
  std::vector<StateId> work;
  for (StateId s = 0; s < seed.size(); ++s)
    if (seed[s]) work.push_back(s);
  while (!work.empty()) {
    StateId s = work.back();
    work.pop_back();
    for (auto i = rev.begin[s]; i < rev.begin[s + 1]; ++i)
      if (!mark[rev.succ[i]]) {
        mark[rev.succ[i]] = true;
        work.push_back(rev.succ[i]);
      }
  }
  return mark;
}

// Breadth-first path in `g` from `from` to the first state satisfying `goal`,
// visiting only states accepted by `allowed`.
template <class Goal, class Allowed>
std::optional<Path> bfs_path(const Graph& g, StateId from, Goal goal, Allowed allowed,
                             bool require_step = false) {
  const std::size_t n = g.begin.size() - 1;
  std::vector<std::int64_t> parent(n, -1);
  std::vector<std::uint32_t> parent_edge(n, 0);
  std::vector<bool> seen(n, false);
  std::deque<StateId> q;
  if (!require_step && goal(from)) return Path{{from}, {}, std::nullopt};
  q.push_back(from);
  seen[from] = !require_step;
  while (!q.empty()) {
    StateId s = q.front();
    q.pop_front();
    for (auto i = g.begin[s]; i < g.begin[s + 1]; ++i) {
      StateId t = g.succ[i];
      if (seen[t] || !allowed(t)) continue;
      seen[t] = true;
      parent[t] = s;
      parent_edge[t] = i;
      if (goal(t)) {
        Path path;
        std::vector<std::uint32_t> edges;
        StateId cur = t;
        do {
          edges.push_back(parent_edge[cur]);
          cur = static_cast<StateId>(parent[cur]);
        } while (cur != from);
        std::reverse(edges.begin(), edges.end());
        path.states.push_back(from);
        for (auto e : edges) {
          path.transitions.push_back(g.via[e]);
          path.states.push_back(g.succ[e]);
        }
        return path;
      }
      q.push_back(t);
    }
  }
  return std::nullopt;
}

void append(Path& a, const Path& b) {
  // b starts where a ends
  for (std::size_t i = 0; i < b.transitions.size(); ++i) {
    a.transitions.push_back(b.transitions[i]);
    a.states.push_back(b.states[i + 1]);
  }
}

}  // namespace

Path path_to(const Plts& p, StateId s) {
  Graph g = build_graph(p, [](const PltsTransition&) { return true; });
  auto path = bfs_path(g, 0, [&](StateId x) { return x == s; }, [](StateId) { return true; });
  if (!path) throw ModelError("state is not reachable from the root");
  return *path;
}

// ---------------------------------------------------------------------------
// Holds outright

OutrightResult holds_outright(const Plts& p, const EventualityQuery& q) {
  OutrightResult r;
  auto pre = matching_transitions(p, q);
  r.pre_transitions = pre.size();
  if (pre.empty()) return r;

  const std::size_t n = p.num_states();
  Graph avoid = build_graph(p, [&](const PltsTransition& t) { return !matches_any(q.post, t.label); });
  std::uint32_t ncomp = 0;
  auto comp = scc(avoid, ncomp);
  std::vector<std::uint32_t> comp_size(ncomp, 0);
  for (StateId s = 0; s < n; ++s) ++comp_size[comp[s]];

  std::vector<bool> bad_root(n, false), trunc(n, false);
  for (StateId s = 0; s < n; ++s) {
    auto [b, e] = p.out(s);
    if (p.truncated(s)) {
      trunc[s] = true;
      continue;
    }
    if (b == e) bad_root[s] = true;
    if (comp_size[comp[s]] > 1) bad_root[s] = true;
    for (auto i = avoid.begin[s]; i < avoid.begin[s + 1]; ++i)
      if (avoid.succ[i] == s) bad_root[s] = true;
  }
  Graph rev = reverse(avoid);
  auto reach_bad = backward_closure(rev, bad_root);
  auto reach_trunc = backward_closure(rev, trunc);

  std::optional<std::pair<std::size_t, StateId>> failing, unknown;
  for (auto t : pre) {
    const auto& tr = p.transition(t);
    if (matches_any(q.post, tr.label)) continue;
    for (auto* o = p.outcomes_begin(tr); o != p.outcomes_end(tr); ++o) {
      if (reach_bad[o->target] && !failing) failing = {t, o->target};
      if (reach_trunc[o->target] && !unknown) unknown = {t, o->target};
    }
    if (failing) break;
  }

  if (failing) {
    r.verdict = Verdict::fails;
    auto [t, start] = *failing;
    Path path = path_to(p, p.transition(t).source);
    path.transitions.push_back(t);
    path.states.push_back(start);
    auto lead = bfs_path(avoid, start, [&](StateId s) { return bad_root[s]; },
                         [&](StateId s) { return reach_bad[s]; });
    append(path, *lead);
    StateId root = path.states.back();
    auto [b, e] = p.out(root);
    if (b != e) {
      // Close the lasso inside the component.
      auto loop = bfs_path(avoid, root, [&](StateId s) { return s == root; },
                           [&](StateId s) { return comp[s] == comp[root]; }, true);
      path.loop_from = path.states.size() - 1;
      append(path, *loop);
    }
    r.counterexample = std::move(path);
  } else if (unknown) {
    r.verdict = Verdict::unknown;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Reachability probabilities

namespace {

constexpr std::size_t kExactComponentLimit = 200;

// Solves A x = b in place (A square, nonsingular). Returns false if singular.
bool gauss(std::vector<std::vector<Rational>>& a, std::vector<Rational>& b) {
  const std::size_t m = b.size();
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t piv = c;
    while (piv < m && a[piv][c] == 0) ++piv;
    if (piv == m) return false;
    std::swap(a[piv], a[c]);
    std::swap(b[piv], b[c]);
    Rational inv = 1 / a[c][c];
    for (std::size_t k = c; k < m; ++k) a[c][k] *= inv;
    b[c] *= inv;
    for (std::size_t r = 0; r < m; ++r) {
      if (r == c || a[r][c] == 0) continue;
      Rational f = a[r][c];
      for (std::size_t k = c; k < m; ++k)
        if (a[c][k] != 0) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  return true;
}

class Solver {
 public:
  Solver(const Plts& p, const std::vector<LabelPattern>& post, Scheduler sched)
      : p_(p), sched_(sched), n_(p.num_states()) {
    is_post_.resize(p.num_transitions());
    for (std::size_t t = 0; t < p.num_transitions(); ++t)
      is_post_[t] = matches_any(post, p.transition(t).label);
  }

  ValueTable run() {
    ValueTable out;
    out.value.assign(n_, Rational(0));
    zero_ = sched_ == Scheduler::adversarial ? prob0_exists() : cannot_reach();
    Graph all = build_graph(p_, [](const PltsTransition&) { return true; });
    std::uint32_t ncomp = 0;
    auto comp = scc(all, ncomp);
    std::vector<std::vector<StateId>> members(ncomp);
    for (StateId s = 0; s < n_; ++s)
      if (!zero_[s]) members[comp[s]].push_back(s);
    value_ = &out.value;
    for (std::uint32_t c = 0; c < ncomp; ++c) {
      auto& ms = members[c];
      if (ms.empty()) continue;
      if (ms.size() == 1 && !self_loop(ms[0])) {
        out.value[ms[0]] = best(ms[0], nullptr);
        continue;
      }
      if (!solve_component(ms)) out.exact = false;
    }
    return out;
  }

 private:
  // Value of transition t under the current table.
  Rational action_value(std::uint32_t t) const {
    if (is_post_[t]) return 1;
    Rational v = 0;
    const auto& tr = p_.transition(t);
    for (auto* o = p_.outcomes_begin(tr); o != p_.outcomes_end(tr); ++o)
      if (!zero_[o->target]) v += o->prob() * (*value_)[o->target];
    return v;
  }

  Rational best(StateId s, std::uint32_t* choice) const {
    auto [b, e] = p_.out(s);
    if (b == e) return 0;
    if (sched_ == Scheduler::uniform) {
      Rational sum = 0;
      for (auto t = b; t < e; ++t) sum += action_value(t);
      return sum / Rational(e - b);
    }
    Rational m = 2;
    for (auto t = b; t < e; ++t) {
      Rational v = action_value(t);
      if (v < m) {
        m = v;
        if (choice) *choice = t;
      }
    }
    return m;
  }

  bool self_loop(StateId s) const {
    auto [b, e] = p_.out(s);
    for (auto t = b; t < e; ++t) {
      if (is_post_[t]) continue;
      const auto& tr = p_.transition(t);
      for (auto* o = p_.outcomes_begin(tr); o != p_.outcomes_end(tr); ++o)
        if (o->target == s) return true;
    }
    return false;
  }

  // Greatest set of states from which some scheduler avoids post forever
  // (or reaches a dead end or the frontier).
  std::vector<bool> prob0_exists() const {
    std::vector<bool> in(n_, true);
    std::vector<std::uint32_t> bad(p_.num_transitions(), 0), good(n_, 0);
    std::vector<std::vector<std::uint32_t>> into(n_);
    for (std::uint32_t t = 0; t < p_.num_transitions(); ++t) {
      if (is_post_[t]) continue;
      const auto& tr = p_.transition(t);
      ++good[tr.source];
      for (auto* o = p_.outcomes_begin(tr); o != p_.outcomes_end(tr); ++o) into[o->target].push_back(t);
    }
    auto terminal = [&](StateId s) {
      auto [b, e] = p_.out(s);
      return p_.truncated(s) || b == e;
    };
    std::vector<StateId> work;
    for (StateId s = 0; s < n_; ++s)
      if (good[s] == 0 && !terminal(s)) {
        in[s] = false;
        work.push_back(s);
      }
    while (!work.empty()) {
      StateId s = work.back();
      work.pop_back();
      for (auto t : into[s]) {
        if (bad[t]++ != 0) continue;
        StateId src = p_.transition(t).source;
        if (in[src] && --good[src] == 0 && !terminal(src)) {
          in[src] = false;
          work.push_back(src);
        }
      }
    }
    return in;
  }

  std::vector<bool> cannot_reach() const {
    std::vector<bool> seed(n_, false);
    for (std::uint32_t t = 0; t < p_.num_transitions(); ++t)
      if (is_post_[t]) seed[p_.transition(t).source] = true;
    Graph g = build_graph(p_, [](const PltsTransition&) { return true; });
    auto reach = backward_closure(reverse(g), seed);
    reach.flip();
    return reach;
  }

  // Fixed policy (or uniform averaging) on a component: exact linear solve.
  bool evaluate(const std::vector<StateId>& ms, const std::unordered_map<StateId, std::size_t>& pos,
                const std::vector<std::uint32_t>& policy) {
    const std::size_t m = ms.size();
    std::vector<std::vector<Rational>> a(m, std::vector<Rational>(m, Rational(0)));
    std::vector<Rational> b(m, Rational(0));
    for (std::size_t i = 0; i < m; ++i) {
      a[i][i] = 1;
      auto [lo, hi] = p_.out(ms[i]);
      std::vector<std::uint32_t> acts;
      if (sched_ == Scheduler::uniform)
        for (auto t = lo; t < hi; ++t) acts.push_back(t);
      else
        acts.push_back(policy[i]);
      Rational w = Rational(1) / Rational(acts.size());
      for (auto t : acts) {
        if (is_post_[t]) {
          b[i] += w;
          continue;
        }
        const auto& tr = p_.transition(t);
        for (auto* o = p_.outcomes_begin(tr); o != p_.outcomes_end(tr); ++o) {
          if (zero_[o->target]) continue;
          auto it = pos.find(o->target);
          if (it != pos.end())
            a[i][it->second] -= w * o->prob();
          else
            b[i] += w * o->prob() * (*value_)[o->target];
        }
      }
    }
    if (!gauss(a, b)) return false;
    for (std::size_t i = 0; i < m; ++i) (*value_)[ms[i]] = b[i];
    return true;
  }

  bool solve_component(const std::vector<StateId>& ms) {
    const std::size_t m = ms.size();
    std::unordered_map<StateId, std::size_t> pos;
    for (std::size_t i = 0; i < m; ++i) pos[ms[i]] = i;

    // Floating-point value iteration first: gives an initial policy, and the
    // answer itself when the component is too large to solve exactly.
    std::vector<double> approx(m, 0.0);
    auto dv = [&](std::uint32_t t) {
      if (is_post_[t]) return 1.0;
      double v = 0;
      const auto& tr = p_.transition(t);
      for (auto* o = p_.outcomes_begin(tr); o != p_.outcomes_end(tr); ++o) {
        if (zero_[o->target]) continue;
        double pr = static_cast<double>(o->num) / o->den;
        auto it = pos.find(o->target);
        v += pr * (it != pos.end() ? approx[it->second] : (*value_)[o->target].get_d());
      }
      return v;
    };
    std::vector<std::uint32_t> policy(m);
    for (int iter = 0; iter < 100000; ++iter) {
      double delta = 0;
      for (std::size_t i = 0; i < m; ++i) {
        auto [lo, hi] = p_.out(ms[i]);
        double v = sched_ == Scheduler::uniform ? 0.0 : 2.0;
        for (auto t = lo; t < hi; ++t) {
          double x = dv(t);
          if (sched_ == Scheduler::uniform)
            v += x / (hi - lo);
          else if (x < v) {
            v = x;
            policy[i] = t;
          }
        }
        delta = std::max(delta, std::abs(v - approx[i]));
        approx[i] = v;
      }
      if (delta < 1e-13) break;
    }

    if (m > kExactComponentLimit) {
      for (std::size_t i = 0; i < m; ++i) {
        double v = std::max(0.0, approx[i] - 1e-9);
        (*value_)[ms[i]] = Rational(v);
      }
      return false;
    }

    for (int round = 0; round < 1000; ++round) {
      if (!evaluate(ms, pos, policy)) throw ModelError("singular system in probability computation");
      if (sched_ == Scheduler::uniform) return true;
      bool changed = false;
      for (std::size_t i = 0; i < m; ++i) {
        std::uint32_t choice = policy[i];
        Rational v = best(ms[i], &choice);
        if (v < (*value_)[ms[i]] && choice != policy[i]) {
          policy[i] = choice;
          changed = true;
        }
      }
      if (!changed) return true;
    }
    return false;
  }

  const Plts& p_;
  Scheduler sched_;
  std::size_t n_;
  std::vector<bool> is_post_;
  std::vector<bool> zero_;
  std::vector<Rational>* value_ = nullptr;
};

}  // namespace

ValueTable reach_values(const Plts& p, const std::vector<LabelPattern>& post, Scheduler sched) {
  return Solver(p, post, sched).run();
}

Rational transition_value(const Plts& p, std::size_t t, const std::vector<LabelPattern>& post,
                          const ValueTable& v) {
  const auto& tr = p.transition(t);
  if (matches_any(post, tr.label)) return 1;
  Rational sum = 0;
  for (auto* o = p.outcomes_begin(tr); o != p.outcomes_end(tr); ++o)
    sum += o->prob() * v.value[o->target];
  return sum;
}

ProbResult min_prob(const Plts& p, std::size_t t, const std::vector<LabelPattern>& post) {
  ProbResult r;
  auto table = reach_values(p, post);
  r.min_value = transition_value(p, t, post, table);
  r.worst_transition = t;
  r.pre_transitions = 1;
  r.exact = table.exact;
  r.truncated = p.num_truncated() > 0;
  return r;
}

ProbResult prob_at_least(const Plts& p, const EventualityQuery& q) {
  ProbResult r;
  r.truncated = p.num_truncated() > 0;
  auto pre = matching_transitions(p, q);
  r.pre_transitions = pre.size();
  if (pre.empty()) return r;
  auto table = reach_values(p, q.post);
  r.exact = table.exact;
  for (auto t : pre) {
    Rational v = transition_value(p, t, q.post, table);
    if (!r.worst_transition || v < r.min_value) {
      r.min_value = v;
      r.worst_transition = t;
    }
  }
  return r;
}

Rational uniform_reach_from_root(const Plts& p, const std::vector<LabelPattern>& post) {
  return reach_values(p, post, Scheduler::uniform).value.at(0);
}

// ---------------------------------------------------------------------------
// Bisimulation

namespace {

std::uint64_t encode(const NetAction& a) {
  return (std::uint64_t{static_cast<std::uint8_t>(a.kind)} << 48) |
         (std::uint64_t{a.node.index} << 32) | (std::uint64_t{a.other.index} << 16) |
         std::uint64_t{a.data.index};
}

struct Joined {
  const Plts* a;
  const Plts* b;
  std::size_t na;
  std::size_t size() const { return na + b->num_states(); }
  const Plts& of(std::size_t s) const { return s < na ? *a : *b; }
  StateId local(std::size_t s) const { return static_cast<StateId>(s < na ? s : s - na); }
  std::size_t global(std::size_t s, StateId target) const { return s < na ? target : target + na; }
};

// Per transition: label code followed by (block, num, den) triples.
std::vector<std::vector<std::uint64_t>> transition_sigs(const Joined& j, std::size_t s,
                                                        const std::vector<std::uint32_t>& block) {
  const Plts& p = j.of(s);
  auto [b, e] = p.out(j.local(s));
  std::vector<std::vector<std::uint64_t>> sigs;
  for (auto t = b; t < e; ++t) {
    const auto& tr = p.transition(t);
    std::map<std::uint32_t, Rational> mass;
    for (auto* o = p.outcomes_begin(tr); o != p.outcomes_end(tr); ++o)
      mass[block[j.global(s, o->target)]] += o->prob();
    std::vector<std::uint64_t> sig{encode(tr.label)};
    for (auto& [blk, pr] : mass) {
      pr.canonicalize();
      sig.push_back(blk);
      sig.push_back(pr.get_num().get_ui());
      sig.push_back(pr.get_den().get_ui());
    }
    sigs.push_back(std::move(sig));
  }
  std::sort(sigs.begin(), sigs.end());
  sigs.erase(std::unique(sigs.begin(), sigs.end()), sigs.end());
  return sigs;
}

}  // namespace

BisimResult strong_bisim(const Plts& a, const Plts& b) {
  Joined j{&a, &b, a.num_states()};
  const std::size_t n = j.size();
  std::vector<std::vector<std::uint32_t>> history;
  std::vector<std::uint32_t> block(n);
  for (std::size_t s = 0; s < n; ++s) block[s] = j.of(s).truncated(j.local(s)) ? 1 : 0;
  history.push_back(block);
  std::size_t count = 0;
  while (true) {
    std::map<std::vector<std::uint64_t>, std::uint32_t> ids;
    std::vector<std::uint32_t> next(n);
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<std::uint64_t> key{block[s]};
      for (auto& sig : transition_sigs(j, s, block)) {
        key.push_back(sig.size());
        key.insert(key.end(), sig.begin(), sig.end());
      }
      auto [it, fresh] = ids.emplace(std::move(key), static_cast<std::uint32_t>(ids.size()));
      next[s] = it->second;
    }
    const std::size_t new_count = ids.size();
    block = std::move(next);
    history.push_back(block);
    if (new_count == count) break;
    count = new_count;
  }

  BisimResult r;
  r.classes = count;
  std::size_t x = 0, y = j.na;
  r.bisimilar = block[x] == block[y];
  if (r.bisimilar) return r;

  // Walk back through the refinement rounds collecting labels.
  auto first_split = [&](std::size_t u, std::size_t v) {
    std::size_t k = 0;
    while (history[k][u] == history[k][v]) ++k;
    return k;
  };
  std::size_t k = first_split(x, y);
  while (k > 0) {
    const auto& prev = history[k - 1];
    auto sx = transition_sigs(j, x, prev);
    auto sy = transition_sigs(j, y, prev);
    // A signature of one side missing on the other.
    const std::vector<std::uint64_t>* odd = nullptr;
    bool from_x = true;
    for (const auto& s : sx)
      if (!std::binary_search(sy.begin(), sy.end(), s)) {
        odd = &s;
        break;
      }
    if (!odd) {
      from_x = false;
      for (const auto& s : sy)
        if (!std::binary_search(sx.begin(), sx.end(), s)) {
          odd = &s;
          break;
        }
    }
    if (!odd) break;
    std::size_t u = from_x ? x : y, v = from_x ? y : x;
    const std::uint64_t label = (*odd)[0];
    // Recover the concrete transitions of u and v carrying this label.
    auto find = [&](std::size_t s, bool want_odd) -> std::optional<std::uint32_t> {
      const Plts& p = j.of(s);
      auto [lo, hi] = p.out(j.local(s));
      for (auto t = lo; t < hi; ++t) {
        if (encode(p.transition(t).label) != label) continue;
        if (!want_odd) return t;
        std::map<std::uint32_t, Rational> mass;
        const auto& tr = p.transition(t);
        for (auto* o = p.outcomes_begin(tr); o != p.outcomes_end(tr); ++o)
          mass[prev[j.global(s, o->target)]] += o->prob();
        std::vector<std::uint64_t> sig{label};
        for (auto& [blk, pr] : mass) {
          pr.canonicalize();
          sig.push_back(blk);
          sig.push_back(pr.get_num().get_ui());
          sig.push_back(pr.get_den().get_ui());
        }
        if (sig == *odd) return t;
      }
      return std::nullopt;
    };
    const Plts& pu = j.of(u);
    const auto& tu = pu.transition(*find(u, true));
    r.witness.push_back(tu.label);
    r.witness_in_first = u < j.na;
    auto tv_index = find(v, false);
    if (!tv_index) break;
    const Plts& pv = j.of(v);
    const auto& tv = pv.transition(*tv_index);
    std::map<std::uint32_t, Rational> mu, mv;
    for (auto* o = pu.outcomes_begin(tu); o != pu.outcomes_end(tu); ++o)
      mu[prev[j.global(u, o->target)]] += o->prob();
    for (auto* o = pv.outcomes_begin(tv); o != pv.outcomes_end(tv); ++o)
      mv[prev[j.global(v, o->target)]] += o->prob();
    std::optional<std::uint32_t> diff;
    for (auto& [blk, pr] : mu)
      if (mv[blk] != pr) {
        diff = blk;
        break;
      }
    if (!diff) break;
    // Pick successors on opposite sides of the differing block.
    bool u_heavier = mu[*diff] > mv[*diff];
    std::optional<std::size_t> nu, nv;
    for (auto* o = pu.outcomes_begin(tu); o != pu.outcomes_end(tu); ++o) {
      bool inside = prev[j.global(u, o->target)] == *diff;
      if (inside == u_heavier) {
        nu = j.global(u, o->target);
        break;
      }
    }
    for (auto* o = pv.outcomes_begin(tv); o != pv.outcomes_end(tv); ++o) {
      bool inside = prev[j.global(v, o->target)] == *diff;
      if (inside != u_heavier) {
        nv = j.global(v, o->target);
        break;
      }
    }
    if (!nu || !nv) break;
    x = *nu;
    y = *nv;
    k = first_split(x, y);
  }
  return r;
}

}  // namespace linkalg
