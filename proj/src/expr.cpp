#include "linkalg/expr.hpp"

#include <set>

namespace linkalg {

Term::Term(std::int64_t i) : e_(lit(Value{i}).ptr()) {}
Term::Term(bool b) : e_(lit(Value{b}).ptr()) {}

Term lit(Value v) {
  auto e = std::make_shared<Expr>();
  e->op = Op::lit;
  e->literal = std::move(v);
  return Term(std::move(e));
}

Term var(VarId v) {
  auto e = std::make_shared<Expr>();
  e->op = Op::var;
  e->var = v;
  return Term(std::move(e));
}

Term make(Op op, std::vector<Term> args) {
  auto e = std::make_shared<Expr>();
  e->op = op;
  for (auto& a : args) {
    if (!a.ptr()) throw ModelError("empty sub-expression");
    e->args.push_back(a.ptr());
  }
  return Term(std::move(e));
}

Term operator+(const Term& a, const Term& b) { return make(Op::add, {a, b}); }
Term operator-(const Term& a, const Term& b) { return make(Op::sub, {a, b}); }
Term operator*(const Term& a, const Term& b) { return make(Op::mul, {a, b}); }
Term operator==(const Term& a, const Term& b) { return make(Op::eq, {a, b}); }
Term operator!=(const Term& a, const Term& b) { return make(Op::ne, {a, b}); }
Term operator<(const Term& a, const Term& b) { return make(Op::lt, {a, b}); }
Term operator<=(const Term& a, const Term& b) { return make(Op::le, {a, b}); }
Term operator>(const Term& a, const Term& b) { return make(Op::lt, {b, a}); }
Term operator>=(const Term& a, const Term& b) { return make(Op::le, {b, a}); }
Term operator&&(const Term& a, const Term& b) { return make(Op::logical_and, {a, b}); }
Term operator||(const Term& a, const Term& b) { return make(Op::logical_or, {a, b}); }
Term operator!(const Term& a) { return make(Op::logical_not, {a}); }
Term max_of(const Term& a, const Term& b) { return make(Op::max, {a, b}); }
Term min_of(const Term& a, const Term& b) { return make(Op::min, {a, b}); }
Term pow2(const Term& a) { return make(Op::pow2, {a}); }

Term mk_data(const Term& data, const Term& dest, const Term& src) {
  return make(Op::mk_data, {data, dest, src});
}
Term mk_ack(const Term& src, const Term& dest) { return make(Op::mk_ack, {src, dest}); }
Term mk_rts(const Term& src, const Term& dest, const Term& d) {
  return make(Op::mk_rts, {src, dest, d});
}
Term mk_cts(const Term& src, const Term& dest, const Term& d) {
  return make(Op::mk_cts, {src, dest, d});
}
Term mk_user(std::uint16_t tag, const Term& field) {
  auto t = make(Op::mk_user, {field});
  auto e = std::make_shared<Expr>(*t);
  e->literal = static_cast<std::int64_t>(tag);
  return Term(std::move(e));
}
Term src_of(const Term& m) { return make(Op::src_of, {m}); }
Term dest_of(const Term& m) { return make(Op::dest_of, {m}); }
Term data_of(const Term& m) { return make(Op::data_of, {m}); }
Term d_of(const Term& m) { return make(Op::d_of, {m}); }
Term dur_of(const Term& m) { return make(Op::msg_dur, {m}); }
Term is_new(const Term& m) { return make(Op::is_new, {m}); }
Term idle() { return make(Op::is_idle, {}); }

namespace {

[[noreturn]] void type_error(const char* what) {
  throw ModelError(std::string("type error in expression: ") + what);
}

template <class T>
const T& as(const Value& v, const char* what) {
  if (const T* p = std::get_if<T>(&v)) return *p;
  type_error(what);
}

Value arith(Op op, const Value& a, const Value& b) {
  const auto* ai = std::get_if<std::int64_t>(&a);
  const auto* bi = std::get_if<std::int64_t>(&b);
  const auto* at = std::get_if<TimePoint>(&a);
  const auto* bt = std::get_if<TimePoint>(&b);
  switch (op) {
    case Op::add:
      if (ai && bi) return *ai + *bi;
      if (at && bi) return TimePoint{at->at + *bi};
      if (ai && bt) return TimePoint{*ai + bt->at};
      type_error("+ expects int+int or time+int");
    case Op::sub:
      if (ai && bi) return *ai - *bi;
      if (at && bi) return TimePoint{at->at - *bi};
      if (at && bt) return at->at - bt->at;
      type_error("- expects int-int, time-int or time-time");
    case Op::mul:
      if (ai && bi) return *ai * *bi;
      type_error("* expects integers");
    case Op::max:
    case Op::min: {
      const bool take_max = op == Op::max;
      if (ai && bi) return take_max ? std::max(*ai, *bi) : std::min(*ai, *bi);
      if (at && bt)
        return TimePoint{take_max ? std::max(at->at, bt->at) : std::min(at->at, bt->at)};
      type_error("max/min expects two integers or two time points");
    }
    default:
      break;
  }
  type_error("bad arithmetic operator");
}

bool ordered_less(const Value& a, const Value& b, bool or_equal) {
  if (a.index() != b.index()) type_error("ordering between different types");
  if (const auto* ai = std::get_if<std::int64_t>(&a)) {
    auto bi = std::get<std::int64_t>(b);
    return or_equal ? *ai <= bi : *ai < bi;
  }
  if (const auto* at = std::get_if<TimePoint>(&a)) {
    auto bt = std::get<TimePoint>(b);
    return or_equal ? at->at <= bt.at : at->at < bt.at;
  }
  type_error("ordering only on integers and time points");
}

}  // namespace

std::optional<Value> eval(const Expr& e, const Valuation& xi, const DurationConfig& durations) {
  if (e.op == Op::lit) return e.literal;
  if (e.op == Op::var) {
    Value v = xi.get(e.var);
    if (std::holds_alternative<std::monostate>(v)) return std::nullopt;
    return v;
  }
  if (e.op == Op::is_idle) return Value{is_idle(xi.rfr)};

  std::vector<Value> a;
  a.reserve(e.args.size());
  for (const auto& sub : e.args) {
    auto v = eval(*sub, xi, durations);
    if (!v) return std::nullopt;
    a.push_back(std::move(*v));
  }

  switch (e.op) {
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::max:
    case Op::min:
      return arith(e.op, a[0], a[1]);
    case Op::pow2: {
      auto x = as<std::int64_t>(a[0], "pow2 expects an integer");
      if (x < 0 || x > 60) throw ModelError("pow2 exponent out of range");
      return std::int64_t{1} << x;
    }
    case Op::eq:
    case Op::ne: {
      if (a[0].index() != a[1].index()) type_error("equality between different types");
      bool same = a[0] == a[1];
      return Value{e.op == Op::eq ? same : !same};
    }
    case Op::lt:
      return Value{ordered_less(a[0], a[1], false)};
    case Op::le:
      return Value{ordered_less(a[0], a[1], true)};
    case Op::logical_and:
      return Value{as<bool>(a[0], "&& expects booleans") && as<bool>(a[1], "&& expects booleans")};
    case Op::logical_or:
      return Value{as<bool>(a[0], "|| expects booleans") || as<bool>(a[1], "|| expects booleans")};
    case Op::logical_not:
      return Value{!as<bool>(a[0], "! expects a boolean")};
    case Op::mk_data:
      return Value{data_frame(as<Payload>(a[0], "data frame payload"),
                              as<NodeId>(a[1], "data frame dest"),
                              as<NodeId>(a[2], "data frame src"))};
    case Op::mk_ack:
      return Value{ack_frame(as<NodeId>(a[0], "ack src"), as<NodeId>(a[1], "ack dest"))};
    case Op::mk_rts:
      return Value{rts_frame(as<NodeId>(a[0], "rts src"), as<NodeId>(a[1], "rts dest"),
                             as<std::int64_t>(a[2], "rts duration"))};
    case Op::mk_cts:
      return Value{cts_frame(as<NodeId>(a[0], "cts src"), as<NodeId>(a[1], "cts dest"),
                             as<std::int64_t>(a[2], "cts duration"))};
    case Op::mk_user:
      return Value{user_message(static_cast<std::uint16_t>(std::get<std::int64_t>(e.literal)),
                                as<std::int64_t>(a[0], "user message field"))};
    case Op::src_of:
      return Value{as<Message>(a[0], "src() expects a message").src};
    case Op::dest_of:
      return Value{as<Message>(a[0], "dest() expects a message").dest};
    case Op::data_of:
      return Value{as<Message>(a[0], "data() expects a message").data};
    case Op::d_of:
      return Value{as<Message>(a[0], "d() expects a message").d};
    case Op::msg_dur:
      return Value{dur(as<Message>(a[0], "dur() expects a message"), durations)};
    case Op::is_new:
      return Value{is_new(xi.rfr, as<Message>(a[0], "new() expects a message"), durations)};
    default:
      break;
  }
  type_error("unknown operator");
}

namespace {
void collect_vars(const Expr& e, std::set<VarId>& out) {
  if (e.op == Op::var) out.insert(e.var);
  if (e.op == Op::is_new || e.op == Op::is_idle) out.insert(kRfr);
  for (const auto& a : e.args) collect_vars(*a, out);
}
}  // namespace

std::vector<VarId> vars_of(const Expr& e) {
  std::set<VarId> s;
  collect_vars(e, s);
  return {s.begin(), s.end()};
}

bool has_time_literal(const Expr& e) {
  if (e.op == Op::lit && std::holds_alternative<TimePoint>(e.literal)) return true;
  for (const auto& a : e.args)
    if (has_time_literal(*a)) return true;
  return false;
}

std::string to_string(const Expr& e, const std::vector<std::string>& names) {
  auto sub = [&](std::size_t i) { return to_string(*e.args[i], names); };
  auto bin = [&](const char* op) { return "(" + sub(0) + " " + op + " " + sub(1) + ")"; };
  switch (e.op) {
    case Op::lit:
      if (auto* i = std::get_if<std::int64_t>(&e.literal)) return std::to_string(*i);
      if (auto* b = std::get_if<bool>(&e.literal)) return *b ? "true" : "false";
      if (auto* n = std::get_if<NodeId>(&e.literal)) return "#node" + std::to_string(n->index);
      if (auto* p = std::get_if<Payload>(&e.literal)) return "#payload" + std::to_string(p->index);
      return "<lit>";
    case Op::var:
      return e.var < names.size() ? names[e.var] : "v" + std::to_string(e.var);
    case Op::add: return bin("+");
    case Op::sub: return bin("-");
    case Op::mul: return bin("*");
    case Op::max: return "max(" + sub(0) + ", " + sub(1) + ")";
    case Op::min: return "min(" + sub(0) + ", " + sub(1) + ")";
    case Op::pow2: return "2^" + sub(0);
    case Op::eq: return bin("=");
    case Op::ne: return bin("!=");
    case Op::lt: return bin("<");
    case Op::le: return bin("<=");
    case Op::logical_and: return bin("&&");
    case Op::logical_or: return bin("||");
    case Op::logical_not: return "!" + sub(0);
    case Op::mk_data: return "data(" + sub(0) + ", " + sub(1) + ", " + sub(2) + ")";
    case Op::mk_ack: return "ack(" + sub(0) + ", " + sub(1) + ")";
    case Op::mk_rts: return "rts(" + sub(0) + ", " + sub(1) + ", " + sub(2) + ")";
    case Op::mk_cts: return "cts(" + sub(0) + ", " + sub(1) + ", " + sub(2) + ")";
    case Op::mk_user: return "user(" + sub(0) + ")";
    case Op::src_of: return "src(" + sub(0) + ")";
    case Op::dest_of: return "dest(" + sub(0) + ")";
    case Op::data_of: return "data(" + sub(0) + ")";
    case Op::d_of: return "d(" + sub(0) + ")";
    case Op::msg_dur: return "dur(" + sub(0) + ")";
    case Op::is_new: return "new(" + sub(0) + ")";
    case Op::is_idle: return "idle";
  }
  return "?";
}

}  // namespace linkalg
