// Sequential process expressions, their defining equations, and the
// per-process transition rules (instantaneous steps, timed options).
#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "linkalg/expr.hpp"

namespace linkalg {

struct SeqExpr {
  enum class Kind : std::uint8_t {
    call,
    guard,
    assign,
    transmit,
    newpkt,
    deliver,
    choice,
    prob_choice,
  };

  Kind kind = Kind::call;
  std::uint32_t id = 0;     // arena index
  std::uint32_t owner = 0;  // index of the defining equation this node belongs to

  Term term;         // guard formula, assigned value, message, payload, or bound n
  VarId var = 0;     // assign target, newpkt data, prob_choice index
  VarId var2 = 0;    // newpkt dest
  std::vector<Term> args;       // call arguments
  std::string callee_name;      // call target before resolution
  std::uint32_t callee = 0;     // resolved call target
  const SeqExpr* next = nullptr;  // continuation / first branch
  const SeqExpr* alt = nullptr;   // second branch of a choice

  std::vector<VarId> live;      // variables the behaviour of this expression may read
  std::vector<VarId> expiring;  // live variables of expiring time type
};

struct ProcessDef {
  std::string name;
  std::vector<VarId> params;
  const SeqExpr* body = nullptr;
};

/// Immutable set of defining equations plus the data universe they range over.
class ProcessDefs {
 public:
  const Universe& universe() const { return universe_; }
  const DurationConfig& durations() const { return durations_; }

  const ProcessDef& def(std::uint32_t index) const { return defs_.at(index); }
  std::size_t size() const { return defs_.size(); }
  /// Throws ModelError for unknown names.
  std::uint32_t find(const std::string& name) const;

  const VarType& var_type(VarId v) const { return var_types_.at(v); }
  const std::string& var_name(VarId v) const { return var_names_.at(v); }
  const std::vector<std::string>& var_names() const { return var_names_; }
  /// Throws ModelError for unknown names.
  VarId var(const std::string& name) const;

  /// No expression mentions an absolute time literal, so shifting every
  /// time value in a state by the same amount preserves its behaviour.
  bool shift_invariant() const { return shift_invariant_; }

  /// Human-readable name of the process that `e` belongs to; for calls the
  /// callee is reported.
  const std::string& head_name(const SeqExpr* e) const;
  std::string to_string(const SeqExpr* e) const;

 private:
  friend class DefsBuilder;
  Universe universe_;
  DurationConfig durations_;
  std::deque<SeqExpr> arena_;
  std::vector<ProcessDef> defs_;
  std::unordered_map<std::string, std::uint32_t> def_index_;
  std::vector<std::string> var_names_;
  std::vector<VarType> var_types_;
  bool shift_invariant_ = true;
};

using DefsPtr = std::shared_ptr<const ProcessDefs>;
using Proc = const SeqExpr*;

/// Incremental construction of ProcessDefs. Calls are resolved by name and
/// all static checks run in build().
class DefsBuilder {
 public:
  DefsBuilder(Universe u, DurationConfig d);

  /// Declares a variable. Re-declaring a name with the same type returns
  /// the existing id; a different type is an error.
  VarId declare(const std::string& name, VarType type);
  Term v(const std::string& name) const;

  Proc call(const std::string& name, std::vector<Term> args = {});
  Proc guard(Term phi, Proc p);
  Proc assign(VarId target, Term value, Proc p);
  Proc transmit(Term msg, Proc p);
  Proc newpkt(VarId data, VarId dest, Proc p);
  Proc deliver(Term data, Proc p);
  Proc choice(Proc p, Proc q);
  Proc choice(const std::vector<Proc>& alternatives);
  Proc prob_choice(VarId index, Term bound, Proc p);

  void define(const std::string& name, std::vector<VarId> params, Proc body);

  const Universe& universe() const { return defs_->universe_; }
  const DurationConfig& durations() const { return defs_->durations_; }

  /// Resolves calls and validates arity, bound variables, read-only
  /// assignments and guardedness of recursion.
  DefsPtr build();

 private:
  SeqExpr* node(SeqExpr::Kind k);
  std::unique_ptr<ProcessDefs> defs_;
  std::unordered_map<std::string, VarId> var_index_;
  bool built_ = false;
};

/// Local state of a sequential process. `sending` holds the message whose
/// fragments are being transmitted while `xi.counter` is positive.
struct ProcState {
  Proc expr = nullptr;
  Valuation xi;
  std::optional<Message> sending;

  friend bool operator==(const ProcState&, const ProcState&) = default;
};

std::size_t hash_value(const ProcState& s);

struct ProcStateHash {
  std::size_t operator()(const ProcState& s) const { return hash_value(s); }
};

struct ProcAction {
  enum class Kind : std::uint8_t { transmit_chunk, wait, newpkt, deliver, tau };
  Kind kind = Kind::tau;
  Message msg;     // transmit_chunk
  int chunk = 0;   // transmit_chunk
  Payload data;    // newpkt, deliver
  NodeId dest;     // newpkt

  static ProcAction tau() { return {}; }
};

/// The network-layer packet waiting to be handed to this process, if any.
struct Injection {
  Payload data;
  NodeId dest;
  friend bool operator==(const Injection&, const Injection&) = default;
};

struct InstantStep {
  ProcAction action;
  Dist<ProcState> next;
};

/// One way of taking part in the next time slot. For a transmission,
/// `state` is the valuation and expression reached by resolving choices and
/// unfolding calls, before the slot's clock update.
struct TimedOption {
  bool transmitting = false;
  Message msg;
  int chunk = 0;
  ProcState state;
};

/// Summary of a process's timed behaviour for the next slot.
struct Offer {
  enum class Kind : std::uint8_t { none, wait_only, transmitting };
  Kind kind = Kind::none;
  Chunk chunk;
};

/// All satisfying extensions of `xi` for `phi`, binding the variables of
/// `phi` that `xi` leaves undefined. Ordered lexicographically by
/// ascending variable id, then by domain order.
std::vector<Valuation> solve_guard(const Term& phi, const Valuation& xi, const ProcessDefs& defs);
/// Same result without the rfr-driven pruning; reference implementation.
std::vector<Valuation> solve_guard_brute(const Term& phi, const Valuation& xi,
                                         const ProcessDefs& defs);

std::vector<InstantStep> instant_steps(const ProcState& s, const ProcessDefs& defs,
                                       const std::optional<Injection>& inj);
std::vector<TimedOption> timed_options(const ProcState& s, const ProcessDefs& defs,
                                       const std::optional<Injection>& inj);
/// Collapses timed_options: a transmission if one exists (the first), else
/// wait_only, else none.
Offer timed_offer(const ProcState& s, const ProcessDefs& defs, const std::optional<Injection>& inj);

/// Completes a slot: merges the received chunk into rfr and advances the
/// clock; a transmission moves the counter and possibly the expression.
/// For a wait, `from` is the state before the slot.
ProcState advance(const ProcState& from, const TimedOption& option, const Chunk& received,
                  const ProcessDefs& defs);

/// Drops bindings the expression can never read and moves expired time
/// points to now-1. Behaviour-preserving.
void trim(ProcState& s);

/// Initial state for `name(args...)` at clock `now`.
ProcState initial_state(const ProcessDefs& defs, const std::string& name,
                        const std::vector<Value>& args, TimeValue now = 0);

}  // namespace linkalg
