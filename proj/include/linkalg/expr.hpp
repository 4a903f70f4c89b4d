// Data expressions and formulas over the finite data structure.
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "linkalg/value.hpp"

namespace linkalg {

enum class Op : std::uint8_t {
  lit,
  var,
  add,
  sub,
  mul,
  max,
  min,
  pow2,  // 2^x for non-negative integers
  eq,
  ne,
  lt,
  le,
  logical_and,
  logical_or,
  logical_not,
  mk_data,  // (data, dest, src)
  mk_ack,   // (src, dest)
  mk_rts,   // (src, dest, d)
  mk_cts,   // (src, dest, d)
  mk_user,  // (field); tag stored in the literal
  src_of,
  dest_of,
  data_of,
  d_of,
  msg_dur,  // dur(m)
  is_new,   // new(m)
  is_idle,  // idle
};

struct Expr {
  Op op = Op::lit;
  Value literal;
  VarId var = 0;
  std::vector<std::shared_ptr<const Expr>> args;
};

/// Handle to an immutable expression tree with operator sugar.
class Term {
 public:
  Term() = default;
  Term(std::int64_t i);  // NOLINT: integer literals read naturally in models
  Term(int i) : Term(static_cast<std::int64_t>(i)) {}
  Term(bool b);
  explicit Term(std::shared_ptr<const Expr> e) : e_(std::move(e)) {}

  const Expr& operator*() const { return *e_; }
  const Expr* operator->() const { return e_.get(); }
  const std::shared_ptr<const Expr>& ptr() const { return e_; }
  explicit operator bool() const { return static_cast<bool>(e_); }

 private:
  std::shared_ptr<const Expr> e_;
};

Term lit(Value v);
Term var(VarId v);
Term make(Op op, std::vector<Term> args);

Term operator+(const Term& a, const Term& b);
Term operator-(const Term& a, const Term& b);
Term operator*(const Term& a, const Term& b);
Term operator==(const Term& a, const Term& b);
Term operator!=(const Term& a, const Term& b);
Term operator<(const Term& a, const Term& b);
Term operator<=(const Term& a, const Term& b);
Term operator>(const Term& a, const Term& b);
Term operator>=(const Term& a, const Term& b);
Term operator&&(const Term& a, const Term& b);
Term operator||(const Term& a, const Term& b);
Term operator!(const Term& a);
Term max_of(const Term& a, const Term& b);
Term min_of(const Term& a, const Term& b);
Term pow2(const Term& a);

Term mk_data(const Term& data, const Term& dest, const Term& src);
Term mk_ack(const Term& src, const Term& dest);
Term mk_rts(const Term& src, const Term& dest, const Term& d);
Term mk_cts(const Term& src, const Term& dest, const Term& d);
Term mk_user(std::uint16_t tag, const Term& field);
Term src_of(const Term& m);
Term dest_of(const Term& m);
Term data_of(const Term& m);
Term d_of(const Term& m);
Term dur_of(const Term& m);
Term is_new(const Term& m);
Term idle();

/// Declared type of a process variable. Integers carry an inclusive
/// range that bounds guard-side binding; an empty range means the
/// variable may only be compared, never bound by a guard.
struct VarType {
  enum class Kind : std::uint8_t { integer, time, boolean, node, payload, message, chunk };
  Kind kind = Kind::integer;
  std::int64_t lo = 0;
  std::int64_t hi = -1;
  /// Time point that is only ever compared against `now` or `now + k`
  /// with k >= 0, so every value in the past behaves alike.
  bool expiring = false;

  static VarType integer(std::int64_t lo = 0, std::int64_t hi = -1) {
    return {Kind::integer, lo, hi};
  }
  static VarType time() { return {Kind::time}; }
  static VarType expiring_time() { return {Kind::time, 0, -1, true}; }
  static VarType boolean() { return {Kind::boolean}; }
  static VarType node() { return {Kind::node}; }
  static VarType payload() { return {Kind::payload}; }
  static VarType message() { return {Kind::message}; }
  static VarType chunk() { return {Kind::chunk}; }

  bool enumerable() const {
    return kind == Kind::boolean || kind == Kind::node || kind == Kind::payload ||
           (kind == Kind::integer && lo <= hi);
  }
};

/// Evaluates `e` under `xi`. Returns nullopt when a variable is undefined.
/// Throws ModelError on type errors.
std::optional<Value> eval(const Expr& e, const Valuation& xi, const DurationConfig& durations);

/// Variables occurring in `e`, ascending and without duplicates.
std::vector<VarId> vars_of(const Expr& e);

/// True when `e` contains a TimePoint literal (breaks shift invariance).
bool has_time_literal(const Expr& e);

std::string to_string(const Expr& e, const std::vector<std::string>& var_names);

}  // namespace linkalg
