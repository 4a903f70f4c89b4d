#include "linkalg/process.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace linkalg {

// ---------------------------------------------------------------------------
// ProcessDefs

std::uint32_t ProcessDefs::find(const std::string& name) const {
  auto it = def_index_.find(name);
  if (it == def_index_.end()) throw ModelError("unknown process '" + name + "'");
  return it->second;
}

VarId ProcessDefs::var(const std::string& name) const {
  auto it = std::find(var_names_.begin(), var_names_.end(), name);
  if (it == var_names_.end()) throw ModelError("unknown variable '" + name + "'");
  return static_cast<VarId>(it - var_names_.begin());
}

const std::string& ProcessDefs::head_name(const SeqExpr* e) const {
  if (e->kind == SeqExpr::Kind::call) return defs_.at(e->callee).name;
  return defs_.at(e->owner).name;
}

std::string ProcessDefs::to_string(const SeqExpr* e) const {
  auto t = [&](const Term& x) { return linkalg::to_string(*x, var_names_); };
  switch (e->kind) {
    case SeqExpr::Kind::call: {
      std::string s = defs_.at(e->callee).name + "(";
      for (std::size_t i = 0; i < e->args.size(); ++i) s += (i ? ", " : "") + t(e->args[i]);
      return s + ")";
    }
    case SeqExpr::Kind::guard:
      return "[" + t(e->term) + "] " + to_string(e->next);
    case SeqExpr::Kind::assign:
      return "[[" + var_names_[e->var] + " := " + t(e->term) + "]] " + to_string(e->next);
    case SeqExpr::Kind::transmit:
      return "transmit(" + t(e->term) + "). " + to_string(e->next);
    case SeqExpr::Kind::newpkt:
      return "newpkt(" + var_names_[e->var] + ", " + var_names_[e->var2] + "). " +
             to_string(e->next);
    case SeqExpr::Kind::deliver:
      return "deliver(" + t(e->term) + "). " + to_string(e->next);
    case SeqExpr::Kind::choice:
      return "(" + to_string(e->next) + " + " + to_string(e->alt) + ")";
    case SeqExpr::Kind::prob_choice:
      return "pchoice " + var_names_[e->var] + " in 0.." + t(e->term) + ". " + to_string(e->next);
  }
  return "?";
}

// ---------------------------------------------------------------------------
// DefsBuilder

DefsBuilder::DefsBuilder(Universe u, DurationConfig d) : defs_(std::make_unique<ProcessDefs>()) {
  d.validate();
  defs_->universe_ = std::move(u);
  defs_->durations_ = std::move(d);
  defs_->var_names_ = {"now", "rfr", "counter"};
  defs_->var_types_ = {VarType::time(), VarType::chunk(), VarType::integer()};
  for (VarId i = 0; i < kFirstUserVar; ++i) var_index_[defs_->var_names_[i]] = i;
}

VarId DefsBuilder::declare(const std::string& name, VarType type) {
  if (auto it = var_index_.find(name); it != var_index_.end()) {
    const VarType& old = defs_->var_types_[it->second];
    if (old.kind != type.kind || old.lo != type.lo || old.hi != type.hi ||
        old.expiring != type.expiring)
      throw ModelError("variable '" + name + "' redeclared with a different type");
    return it->second;
  }
  auto id = static_cast<VarId>(defs_->var_names_.size());
  defs_->var_names_.push_back(name);
  defs_->var_types_.push_back(type);
  var_index_[name] = id;
  return id;
}

Term DefsBuilder::v(const std::string& name) const {
  auto it = var_index_.find(name);
  if (it == var_index_.end()) throw ModelError("undeclared variable '" + name + "'");
  return var(it->second);
}

SeqExpr* DefsBuilder::node(SeqExpr::Kind k) {
  if (built_) throw ModelError("builder already consumed");
  auto& e = defs_->arena_.emplace_back();
  e.kind = k;
  e.id = static_cast<std::uint32_t>(defs_->arena_.size() - 1);
  return &e;
}

namespace {
void require(Proc p) {
  if (!p) throw ModelError("missing continuation process");
}
void require_writable(VarId v, const char* what) {
  if (v < kFirstUserVar) throw ModelError(std::string(what) + " targets a read-only variable");
}
}  // namespace

Proc DefsBuilder::call(const std::string& name, std::vector<Term> args) {
  auto* e = node(SeqExpr::Kind::call);
  e->callee_name = name;
  e->args = std::move(args);
  return e;
}

Proc DefsBuilder::guard(Term phi, Proc p) {
  require(p);
  auto* e = node(SeqExpr::Kind::guard);
  e->term = std::move(phi);
  e->next = p;
  return e;
}

Proc DefsBuilder::assign(VarId target, Term value, Proc p) {
  require(p);
  require_writable(target, "assignment");
  auto* e = node(SeqExpr::Kind::assign);
  e->var = target;
  e->term = std::move(value);
  e->next = p;
  return e;
}

Proc DefsBuilder::transmit(Term msg, Proc p) {
  require(p);
  auto* e = node(SeqExpr::Kind::transmit);
  e->term = std::move(msg);
  e->next = p;
  return e;
}

Proc DefsBuilder::newpkt(VarId data, VarId dest, Proc p) {
  require(p);
  require_writable(data, "newpkt");
  require_writable(dest, "newpkt");
  if (defs_->var_types_.at(data).kind != VarType::Kind::payload ||
      defs_->var_types_.at(dest).kind != VarType::Kind::node)
    throw ModelError("newpkt expects a payload and a node variable");
  auto* e = node(SeqExpr::Kind::newpkt);
  e->var = data;
  e->var2 = dest;
  e->next = p;
  return e;
}

Proc DefsBuilder::deliver(Term data, Proc p) {
  require(p);
  auto* e = node(SeqExpr::Kind::deliver);
  e->term = std::move(data);
  e->next = p;
  return e;
}

Proc DefsBuilder::choice(Proc p, Proc q) {
  require(p);
  require(q);
  auto* e = node(SeqExpr::Kind::choice);
  e->next = p;
  e->alt = q;
  return e;
}

Proc DefsBuilder::choice(const std::vector<Proc>& alternatives) {
  if (alternatives.empty()) throw ModelError("empty choice");
  Proc acc = alternatives.back();
  for (auto it = alternatives.rbegin() + 1; it != alternatives.rend(); ++it) acc = choice(*it, acc);
  return acc;
}

Proc DefsBuilder::prob_choice(VarId index, Term bound, Proc p) {
  require(p);
  require_writable(index, "probabilistic choice");
  auto* e = node(SeqExpr::Kind::prob_choice);
  e->var = index;
  e->term = std::move(bound);
  e->next = p;
  return e;
}

void DefsBuilder::define(const std::string& name, std::vector<VarId> params, Proc body) {
  require(body);
  if (defs_->def_index_.count(name)) throw ModelError("process '" + name + "' defined twice");
  for (VarId p : params) require_writable(p, "parameter");
  std::set<VarId> uniq(params.begin(), params.end());
  if (uniq.size() != params.size()) throw ModelError("duplicate parameter in '" + name + "'");
  auto idx = static_cast<std::uint32_t>(defs_->defs_.size());
  defs_->defs_.push_back({name, std::move(params), body});
  defs_->def_index_[name] = idx;
}

namespace {

void term_vars(const Term& t, std::set<VarId>& out) {
  for (VarId v : vars_of(*t)) out.insert(v);
}

}  // namespace

DefsPtr DefsBuilder::build() {
  if (built_) throw ModelError("builder already consumed");
  ProcessDefs& d = *defs_;

  // Owners, call resolution, arity.
  std::vector<bool> seen(d.arena_.size(), false);
  for (std::uint32_t i = 0; i < d.defs_.size(); ++i) {
    std::function<void(const SeqExpr*)> walk = [&](const SeqExpr* e) {
      auto& m = d.arena_[e->id];
      if (seen[e->id] && m.owner != i)
        throw ModelError("process expression shared between definitions");
      seen[e->id] = true;
      m.owner = i;
      if (m.kind == SeqExpr::Kind::call) {
        m.callee = d.find(m.callee_name);
        if (d.defs_[m.callee].params.size() != m.args.size())
          throw ModelError("call to '" + m.callee_name + "' has wrong arity");
      }
      if (m.next) walk(m.next);
      if (m.alt) walk(m.alt);
    };
    walk(d.defs_[i].body);
  }
  for (const auto& e : d.arena_)
    if (e.kind == SeqExpr::Kind::call && !seen[e.id]) d.find(e.callee_name);

  // Bound variables.
  for (const auto& def : d.defs_) {
    std::function<void(const SeqExpr*, std::set<VarId>)> check = [&](const SeqExpr* e,
                                                                     std::set<VarId> bound) {
      auto need = [&](const Term& t) {
        std::set<VarId> vs;
        term_vars(t, vs);
        for (VarId v : vs)
          if (!bound.count(v))
            throw ModelError("variable '" + d.var_names_[v] + "' is unbound in '" + def.name + "'");
      };
      switch (e->kind) {
        case SeqExpr::Kind::call:
          for (const auto& a : e->args) need(a);
          return;
        case SeqExpr::Kind::guard: {
          std::set<VarId> vs;
          term_vars(e->term, vs);
          for (VarId v : vs)
            if (!bound.count(v)) {
              if (!d.var_types_[v].enumerable())
                throw ModelError("guard in '" + def.name + "' would bind '" + d.var_names_[v] +
                                 "' which has no finite domain");
              bound.insert(v);
            }
          check(e->next, bound);
          return;
        }
        case SeqExpr::Kind::assign:
        case SeqExpr::Kind::prob_choice:
          need(e->term);
          bound.insert(e->var);
          check(e->next, bound);
          return;
        case SeqExpr::Kind::transmit:
        case SeqExpr::Kind::deliver:
          need(e->term);
          check(e->next, bound);
          return;
        case SeqExpr::Kind::newpkt:
          bound.insert(e->var);
          bound.insert(e->var2);
          check(e->next, bound);
          return;
        case SeqExpr::Kind::choice:
          check(e->next, bound);
          check(e->alt, bound);
          return;
      }
    };
    std::set<VarId> bound(def.params.begin(), def.params.end());
    for (VarId r = 0; r < kFirstUserVar; ++r) bound.insert(r);
    check(def.body, bound);
  }

  // Guarded recursion: no cycle of calls reachable through choices only.
  {
    std::vector<std::vector<std::uint32_t>> unguarded(d.defs_.size());
    std::function<void(const SeqExpr*, std::vector<std::uint32_t>&)> heads =
        [&](const SeqExpr* e, std::vector<std::uint32_t>& out) {
          if (e->kind == SeqExpr::Kind::call) out.push_back(e->callee);
          if (e->kind == SeqExpr::Kind::choice) {
            heads(e->next, out);
            heads(e->alt, out);
          }
        };
    for (std::uint32_t i = 0; i < d.defs_.size(); ++i) heads(d.defs_[i].body, unguarded[i]);
    std::vector<int> color(d.defs_.size(), 0);
    std::function<void(std::uint32_t)> dfs = [&](std::uint32_t u) {
      color[u] = 1;
      for (auto w : unguarded[u]) {
        if (color[w] == 1)
          throw ModelError("unguarded recursion through '" + d.defs_[w].name + "'");
        if (color[w] == 0) dfs(w);
      }
      color[u] = 2;
    };
    for (std::uint32_t i = 0; i < d.defs_.size(); ++i)
      if (color[i] == 0) dfs(i);
  }

  // Live variables, computed bottom-up over each body tree.
  {
    std::vector<bool> done(d.arena_.size(), false);
    std::function<const std::vector<VarId>&(const SeqExpr*)> live =
        [&](const SeqExpr* e) -> const std::vector<VarId>& {
      auto& m = d.arena_[e->id];
      if (done[e->id]) return m.live;
      std::set<VarId> s;
      auto add_next = [&](const SeqExpr* n, std::initializer_list<VarId> killed) {
        for (VarId v : live(n))
          if (std::find(killed.begin(), killed.end(), v) == killed.end()) s.insert(v);
      };
      switch (m.kind) {
        case SeqExpr::Kind::call:
          for (const auto& a : m.args) term_vars(a, s);
          break;
        case SeqExpr::Kind::guard:
        case SeqExpr::Kind::transmit:
        case SeqExpr::Kind::deliver:
          term_vars(m.term, s);
          add_next(m.next, {});
          break;
        case SeqExpr::Kind::assign:
        case SeqExpr::Kind::prob_choice:
          term_vars(m.term, s);
          add_next(m.next, {m.var});
          break;
        case SeqExpr::Kind::newpkt:
          add_next(m.next, {m.var, m.var2});
          break;
        case SeqExpr::Kind::choice:
          add_next(m.next, {});
          add_next(m.alt, {});
          break;
      }
      m.live.clear();
      m.expiring.clear();
      for (VarId v : s)
        if (v >= kFirstUserVar) {
          m.live.push_back(v);
          if (d.var_types_[v].expiring) m.expiring.push_back(v);
        }
      done[e->id] = true;
      return m.live;
    };
    for (const auto& def : d.defs_) live(def.body);
  }

  // Expiring time variables: compared with now or now + k (k >= 0), or
  // passed on unchanged to another expiring parameter.
  {
    auto is_expiring = [&](const Expr& x) {
      return x.op == Op::var && d.var_types_[x.var].expiring;
    };
    auto nonneg = [&](const Expr& x) {
      if (x.op == Op::lit) {
        const auto* i = std::get_if<std::int64_t>(&x.literal);
        return i && *i >= 0;
      }
      if (x.op != Op::var) return false;
      const VarType& t = d.var_types_[x.var];
      return t.kind == VarType::Kind::integer && t.lo >= 0 && t.lo <= t.hi;
    };
    auto clock = [&](const Expr& x) {
      if (x.op == Op::var && x.var == kNow) return true;
      if (x.op != Op::add) return false;
      const Expr& l = *x.args[0];
      const Expr& r = *x.args[1];
      return (l.op == Op::var && l.var == kNow && nonneg(r)) ||
             (r.op == Op::var && r.var == kNow && nonneg(l));
    };
    std::function<void(const Expr&)> walk = [&](const Expr& x) {
      if (is_expiring(x))
        throw ModelError("expiring time variable '" + d.var_names_[x.var] +
                         "' used outside a comparison with now");
      if ((x.op == Op::lt || x.op == Op::le) &&
          ((is_expiring(*x.args[0]) && clock(*x.args[1])) ||
           (is_expiring(*x.args[1]) && clock(*x.args[0]))))
        return;
      for (const auto& a : x.args) walk(*a);
    };
    for (const auto& e : d.arena_) {
      if (e.kind == SeqExpr::Kind::call) {
        const auto& params = d.defs_[e.callee].params;
        for (std::size_t i = 0; i < e.args.size(); ++i) {
          const Expr& a = *e.args[i];
          if (is_expiring(a)) {
            if (!d.var_types_[params[i]].expiring)
              throw ModelError("expiring time variable '" + d.var_names_[a.var] +
                               "' passed to an ordinary parameter");
            continue;
          }
          walk(a);
        }
      } else if (static_cast<bool>(e.term)) {
        walk(*e.term);
      }
    }
  }

  for (const auto& e : d.arena_) {
    if (static_cast<bool>(e.term) && has_time_literal(*e.term)) d.shift_invariant_ = false;
    for (const auto& a : e.args)
      if (has_time_literal(*a)) d.shift_invariant_ = false;
  }

  built_ = true;
  return DefsPtr(std::move(defs_));
}

// ---------------------------------------------------------------------------
// Guard solving

namespace {

std::vector<Value> domain_of(const VarType& t, const ProcessDefs& defs) {
  std::vector<Value> out;
  switch (t.kind) {
    case VarType::Kind::node:
      for (std::size_t i = 0; i < defs.universe().nodes.size(); ++i)
        out.emplace_back(NodeId{static_cast<std::uint16_t>(i)});
      break;
    case VarType::Kind::payload:
      for (std::size_t i = 0; i < defs.universe().data_count; ++i)
        out.emplace_back(Payload{static_cast<std::uint16_t>(i)});
      break;
    case VarType::Kind::boolean:
      out.emplace_back(false);
      out.emplace_back(true);
      break;
    case VarType::Kind::integer:
      for (std::int64_t i = t.lo; i <= t.hi; ++i) out.emplace_back(i);
      break;
    default:
      break;
  }
  return out;
}

bool in_domain(const Value& v, const VarType& t, const ProcessDefs& defs) {
  switch (t.kind) {
    case VarType::Kind::node:
      if (auto* n = std::get_if<NodeId>(&v)) return n->index < defs.universe().nodes.size();
      return false;
    case VarType::Kind::payload:
      if (auto* p = std::get_if<Payload>(&v)) return p->index < defs.universe().data_count;
      return false;
    case VarType::Kind::integer:
      if (auto* i = std::get_if<std::int64_t>(&v)) return t.lo <= *i && *i <= t.hi;
      return false;
    case VarType::Kind::boolean:
      return std::holds_alternative<bool>(v);
    default:
      return false;
  }
}

std::vector<VarId> free_vars(const Term& phi, const Valuation& xi, const ProcessDefs& defs) {
  std::vector<VarId> out;
  for (VarId v : vars_of(*phi)) {
    if (xi.defined(v)) continue;
    if (!defs.var_type(v).enumerable())
      throw ModelError("guard cannot bind '" + defs.var_name(v) + "': no finite domain");
    out.push_back(v);
  }
  return out;
}

bool holds(const Term& phi, const Valuation& xi, const ProcessDefs& defs) {
  auto r = eval(*phi, xi, defs.durations());
  if (!r) throw ModelError("guard still undefined after binding its free variables");
  if (auto* b = std::get_if<bool>(&*r)) return *b;
  throw ModelError("guard does not evaluate to a boolean");
}

// Enumerates `vars` (with domains) in lexicographic order, collecting the
// extensions of `base` that satisfy `phi`.
void enumerate(const Term& phi, Valuation& xi, const std::vector<VarId>& vars,
               const std::vector<std::vector<Value>>& domains, std::size_t k,
               const ProcessDefs& defs, std::vector<Valuation>& out) {
  if (k == vars.size()) {
    if (holds(phi, xi, defs)) out.push_back(xi);
    return;
  }
  for (const auto& val : domains[k]) {
    xi.set(vars[k], val);
    enumerate(phi, xi, vars, domains, k + 1, defs, out);
  }
  xi.erase(vars[k]);
}

void conjuncts(const Term& phi, std::vector<const Expr*>& out) {
  if (phi->op == Op::logical_and) {
    conjuncts(Term(phi->args[0]), out);
    conjuncts(Term(phi->args[1]), out);
  } else {
    out.push_back(phi.operator->());
  }
}

}  // namespace

std::vector<Valuation> solve_guard_brute(const Term& phi, const Valuation& xi,
                                         const ProcessDefs& defs) {
  auto vars = free_vars(phi, xi, defs);
  std::vector<std::vector<Value>> domains;
  for (VarId v : vars) domains.push_back(domain_of(defs.var_type(v), defs));
  std::vector<Valuation> out;
  Valuation work = xi;
  enumerate(phi, work, vars, domains, 0, defs, out);
  return out;
}

std::vector<Valuation> solve_guard(const Term& phi, const Valuation& xi, const ProcessDefs& defs) {
  auto vars = free_vars(phi, xi, defs);
  if (vars.empty()) {
    if (holds(phi, xi, defs)) return {xi};
    return {};
  }

  // A conjunct new(ctor(...)) fixes every bare argument variable to the
  // corresponding field of the frame in rfr, or rules out all extensions.
  std::vector<std::optional<Value>> fixed(vars.size());
  std::vector<const Expr*> parts;
  conjuncts(phi, parts);
  for (const Expr* c : parts) {
    if (c->op != Op::is_new) continue;
    const Expr& ctor = *c->args[0];
    MsgKind kind;
    switch (ctor.op) {
      case Op::mk_data: kind = MsgKind::data_frame; break;
      case Op::mk_ack: kind = MsgKind::ack; break;
      case Op::mk_rts: kind = MsgKind::rts; break;
      case Op::mk_cts: kind = MsgKind::cts; break;
      default: continue;
    }
    const Chunk& rfr = xi.rfr;
    if (rfr.kind != ChunkKind::frag || rfr.msg.kind != kind ||
        rfr.index != dur(rfr.msg, defs.durations()))
      return {};
    const Message& m = rfr.msg;
    std::vector<Value> fields;
    switch (kind) {
      case MsgKind::data_frame: fields = {m.data, m.dest, m.src}; break;
      case MsgKind::ack: fields = {m.src, m.dest}; break;
      default: fields = {m.src, m.dest, m.d}; break;
    }
    for (std::size_t a = 0; a < ctor.args.size(); ++a) {
      if (ctor.args[a]->op != Op::var) continue;
      auto pos = std::find(vars.begin(), vars.end(), ctor.args[a]->var);
      if (pos == vars.end()) continue;
      auto k = static_cast<std::size_t>(pos - vars.begin());
      if (!in_domain(fields[a], defs.var_type(vars[k]), defs)) return {};
      if (fixed[k] && *fixed[k] != fields[a]) return {};
      fixed[k] = fields[a];
    }
  }

  std::vector<std::vector<Value>> domains;
  for (std::size_t k = 0; k < vars.size(); ++k) {
    if (fixed[k])
      domains.push_back({*fixed[k]});
    else
      domains.push_back(domain_of(defs.var_type(vars[k]), defs));
  }
  std::vector<Valuation> out;
  Valuation work = xi;
  enumerate(phi, work, vars, domains, 0, defs, out);
  return out;
}

// ---------------------------------------------------------------------------
// Transition rules

std::size_t hash_value(const ProcState& s) {
  std::size_t h = std::hash<const void*>{}(s.expr);
  hash_mix(h, hash_value(s.xi));
  if (s.sending) hash_mix(h, hash_value(*s.sending));
  return h;
}

void trim(ProcState& s) {
  auto& b = s.xi.mutable_bindings();
  const auto& live = s.expr->live;
  std::erase_if(b, [&](const auto& e) {
    return !std::binary_search(live.begin(), live.end(), e.first);
  });
  for (VarId v : s.expr->expiring)
    for (auto& [var, val] : b)
      if (var == v)
        if (auto* t = std::get_if<TimePoint>(&val); t && t->at < s.xi.now - 1) t->at = s.xi.now - 1;
  if (s.xi.counter == 0) s.sending.reset();
}

namespace {

// Valuation for the body of a call: read-only part plus parameters.
// nullopt when some argument is undefined.
std::optional<Valuation> call_frame(const SeqExpr& e, const Valuation& xi,
                                    const ProcessDefs& defs) {
  const auto& def = defs.def(e.callee);
  Valuation frame = xi.readonly_part();
  for (std::size_t i = 0; i < e.args.size(); ++i) {
    auto v = eval(*e.args[i], xi, defs.durations());
    if (!v) return std::nullopt;
    frame.set(def.params[i], std::move(*v));
  }
  return frame;
}

ProcState make_state(Proc p, Valuation xi) {
  ProcState s{p, std::move(xi), std::nullopt};
  trim(s);
  return s;
}

void collect_instant(Proc p, const Valuation& xi, const ProcessDefs& defs,
                     const std::optional<Injection>& inj, std::vector<InstantStep>& out) {
  const auto& cfg = defs.durations();
  switch (p->kind) {
    case SeqExpr::Kind::call: {
      auto frame = call_frame(*p, xi, defs);
      if (frame) collect_instant(defs.def(p->callee).body, *frame, defs, inj, out);
      return;
    }
    case SeqExpr::Kind::guard:
      for (auto& z : solve_guard(p->term, xi, defs))
        out.push_back({ProcAction::tau(), Dist<ProcState>::point(make_state(p->next, std::move(z)))});
      return;
    case SeqExpr::Kind::assign: {
      auto v = eval(*p->term, xi, cfg);
      if (!v) return;
      Valuation z = xi;
      z.set(p->var, std::move(*v));
      out.push_back({ProcAction::tau(), Dist<ProcState>::point(make_state(p->next, std::move(z)))});
      return;
    }
    case SeqExpr::Kind::transmit:
      return;
    case SeqExpr::Kind::newpkt: {
      if (!inj) return;
      Valuation z = xi;
      z.set(p->var, inj->data);
      z.set(p->var2, inj->dest);
      ProcAction a;
      a.kind = ProcAction::Kind::newpkt;
      a.data = inj->data;
      a.dest = inj->dest;
      out.push_back({a, Dist<ProcState>::point(make_state(p->next, std::move(z)))});
      return;
    }
    case SeqExpr::Kind::deliver: {
      auto v = eval(*p->term, xi, cfg);
      if (!v) return;
      const auto* d = std::get_if<Payload>(&*v);
      if (!d) throw ModelError("deliver expects a payload");
      ProcAction a;
      a.kind = ProcAction::Kind::deliver;
      a.data = *d;
      out.push_back({a, Dist<ProcState>::point(make_state(p->next, xi))});
      return;
    }
    case SeqExpr::Kind::choice:
      collect_instant(p->next, xi, defs, inj, out);
      collect_instant(p->alt, xi, defs, inj, out);
      return;
    case SeqExpr::Kind::prob_choice: {
      auto v = eval(*p->term, xi, cfg);
      if (!v) return;
      const auto* n = std::get_if<std::int64_t>(&*v);
      if (!n || *n < 0)
        throw ModelError("probabilistic choice bound must be a non-negative integer");
      std::vector<ProcState> outcomes;
      outcomes.reserve(static_cast<std::size_t>(*n) + 1);
      for (std::int64_t i = 0; i <= *n; ++i) {
        Valuation z = xi;
        z.set(p->var, i);
        outcomes.push_back(make_state(p->next, std::move(z)));
      }
      out.push_back({ProcAction::tau(), Dist<ProcState>::uniform(std::move(outcomes))});
      return;
    }
  }
}

// Returns whether the expression can wait; appends transmissions.
bool collect_timed(Proc p, const Valuation& xi, const std::optional<Message>& sending,
                   const ProcessDefs& defs, const std::optional<Injection>& inj,
                   std::vector<TimedOption>& out) {
  const auto& cfg = defs.durations();
  switch (p->kind) {
    case SeqExpr::Kind::call: {
      auto frame = call_frame(*p, xi, defs);
      if (!frame) return true;
      std::vector<TimedOption> body;
      bool waits = collect_timed(defs.def(p->callee).body, *frame, std::nullopt, defs, inj, body);
      for (auto& o : body) out.push_back(std::move(o));
      return waits;
    }
    case SeqExpr::Kind::guard:
      return solve_guard(p->term, xi, defs).empty();
    case SeqExpr::Kind::assign:
    case SeqExpr::Kind::deliver:
    case SeqExpr::Kind::prob_choice:
      return !eval(*p->term, xi, cfg).has_value();
    case SeqExpr::Kind::transmit: {
      Message m;
      if (xi.counter > 0 && sending) {
        m = *sending;
      } else {
        auto v = eval(*p->term, xi, cfg);
        if (!v) return true;
        const auto* msg = std::get_if<Message>(&*v);
        if (!msg) throw ModelError("transmit expects a message");
        m = *msg;
      }
      TimedOption o;
      o.transmitting = true;
      o.msg = m;
      o.chunk = static_cast<int>(xi.counter) + 1;
      o.state = ProcState{p, xi, m};
      trim(o.state);
      o.state.sending = m;
      out.push_back(std::move(o));
      return false;
    }
    case SeqExpr::Kind::newpkt:
      return !inj.has_value();
    case SeqExpr::Kind::choice: {
      bool l = collect_timed(p->next, xi, std::nullopt, defs, inj, out);
      bool r = collect_timed(p->alt, xi, std::nullopt, defs, inj, out);
      return l && r;
    }
  }
  return false;
}

}  // namespace

std::vector<InstantStep> instant_steps(const ProcState& s, const ProcessDefs& defs,
                                       const std::optional<Injection>& inj) {
  std::vector<InstantStep> out;
  collect_instant(s.expr, s.xi, defs, inj, out);
  return out;
}

std::vector<TimedOption> timed_options(const ProcState& s, const ProcessDefs& defs,
                                       const std::optional<Injection>& inj) {
  std::vector<TimedOption> out;
  bool waits = collect_timed(s.expr, s.xi, s.sending, defs, inj, out);
  if (waits) {
    TimedOption w;
    w.state = s;
    out.push_back(std::move(w));
  }
  return out;
}

Offer timed_offer(const ProcState& s, const ProcessDefs& defs, const std::optional<Injection>& inj) {
  auto opts = timed_options(s, defs, inj);
  Offer o;
  for (const auto& t : opts) {
    if (t.transmitting) {
      o.kind = Offer::Kind::transmitting;
      o.chunk = Chunk::frag(t.msg, t.chunk);
      return o;
    }
  }
  if (!opts.empty()) o.kind = Offer::Kind::wait_only;
  return o;
}

ProcState advance(const ProcState& from, const TimedOption& option, const Chunk& received,
                  const ProcessDefs& defs) {
  ProcState s = option.transmitting ? option.state : from;
  if (option.transmitting) {
    if (option.chunk < dur(option.msg, defs.durations())) {
      s.xi.counter = option.chunk;
      s.sending = option.msg;
    } else {
      s.xi.counter = 0;
      s.sending.reset();
      s.expr = s.expr->next;
    }
  }
  s.xi.rfr = chunk_merge(s.xi.rfr, received);
  s.xi.now += 1;
  trim(s);
  return s;
}

ProcState initial_state(const ProcessDefs& defs, const std::string& name,
                        const std::vector<Value>& args, TimeValue now) {
  const auto& def = defs.def(defs.find(name));
  if (def.params.size() != args.size())
    throw ModelError("wrong number of arguments for '" + name + "'");
  Valuation xi;
  xi.now = now;
  for (std::size_t i = 0; i < args.size(); ++i) xi.set(def.params[i], args[i]);
  return make_state(def.body, std::move(xi));
}

}  // namespace linkalg
