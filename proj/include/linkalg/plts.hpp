// Bounded construction of the probabilistic transition system of a closed
// network, and the analyses run on it.
#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "linkalg/network.hpp"

namespace linkalg {

/// Exploration stopped because the configured state budget was reached.
class BudgetExceeded : public std::runtime_error {
 public:
  explicit BudgetExceeded(std::size_t budget)
      : std::runtime_error("state budget of " + std::to_string(budget) + " states exceeded"),
        budget_(budget) {}
  std::size_t budget() const { return budget_; }

 private:
  std::size_t budget_;
};

struct ExploreOptions {
  int horizon = 20;               // number of time steps explored from the root
  std::size_t budget = 1000000;   // maximal number of states
  bool normalize = false;         // shift clocks so the smallest time value is 0
  bool with_environment = true;
  /// Partial-order reduction: where some node has a deterministic internal
  /// step and cannot take part in the next slot, only that step is
  /// explored. Preserves the eventuality and probability analyses, not
  /// strong bisimilarity of the full systems.
  bool reduce = false;
};

using StateId = std::uint32_t;

struct PltsOutcome {
  StateId target = 0;
  std::uint32_t num = 1;
  std::uint32_t den = 1;
  Rational prob() const { return Rational(num) / Rational(den); }
};

struct PltsTransition {
  StateId source = 0;
  NetAction label;
  int actor = -1;
  std::uint32_t first = 0;  // outcomes [first, last)
  std::uint32_t last = 0;
};

/// Explored fragment of the pLTS. States are stored compactly and decoded
/// on demand; state 0 is the root.
class Plts {
 public:
  const Network& network() const { return *net_; }
  std::size_t num_states() const { return depth_.size(); }
  std::size_t num_transitions() const { return transitions_.size(); }

  const PltsTransition& transition(std::size_t t) const { return transitions_[t]; }
  /// Transition indices leaving `s`, in generation order.
  std::pair<std::uint32_t, std::uint32_t> out(StateId s) const {
    return {out_begin_[s], out_begin_[s + 1]};
  }
  const PltsOutcome* outcomes_begin(const PltsTransition& t) const { return &outcomes_[t.first]; }
  const PltsOutcome* outcomes_end(const PltsTransition& t) const {
    return outcomes_.data() + t.last;
  }

  bool truncated(StateId s) const { return truncated_[s]; }
  int depth(StateId s) const { return depth_[s]; }
  std::size_t num_truncated() const;
  bool normalized() const { return normalized_; }
  bool reduced() const { return reduced_; }
  int horizon() const { return horizon_; }

  NetState state(StateId s) const;
  /// One line per node: head process, clock, rfr and local bindings.
  std::string describe(StateId s) const;

 private:
  friend Plts explore(const Network& net, const ExploreOptions& opt);
  const Network* net_ = nullptr;
  bool normalized_ = false;
  bool reduced_ = false;
  int horizon_ = 0;
  std::size_t key_width_ = 0;
  std::vector<std::uint32_t> keys_;  // key_width_ words per state
  std::vector<ProcState> procs_;     // interned local states
  std::vector<int> depth_;
  std::vector<bool> truncated_;
  std::vector<std::uint32_t> out_begin_;
  std::vector<PltsTransition> transitions_;
  std::vector<PltsOutcome> outcomes_;
};

/// Breadth-first construction up to `horizon` time steps. Throws
/// BudgetExceeded when more than `budget` states would be stored and
/// ModelError if normalization is requested for a model that reads
/// absolute time.
Plts explore(const Network& net, const ExploreOptions& opt);

/// Transitions of `s` with identical label and distribution merged, and
/// each distribution's equal outcomes summed. Used by the explorer and by
/// simulation so both see the same nondeterministic choices.
std::vector<NetTransition> distinct_transitions(std::vector<NetTransition> ts);

// ---------------------------------------------------------------------------
// Properties

/// Label pattern with wildcards.
struct LabelPattern {
  NetAction::Kind kind = NetAction::Kind::tau;
  std::optional<NodeId> node;
  std::optional<NodeId> other;
  std::optional<Payload> data;

  bool matches(const NetAction& a) const;
  static LabelPattern deliver(NodeId at, std::optional<Payload> d = std::nullopt);
  static LabelPattern newpkt(std::optional<NodeId> at = std::nullopt,
                             std::optional<Payload> d = std::nullopt,
                             std::optional<NodeId> dest = std::nullopt);
  static LabelPattern tick();
  static LabelPattern any_connect();
  static LabelPattern any_disconnect();
};

bool matches_any(const std::vector<LabelPattern>& ps, const NetAction& a);

/// Eventuality G(pre => F post): `pre` selects transitions by label and an
/// optional condition on source and (each) target state.
struct EventualityQuery {
  LabelPattern pre;
  std::function<bool(const Network&, const NetState& source, const NetState& target)> condition;
  std::vector<LabelPattern> post;
};

/// cntd(id,dest) and id:newpkt(d,dest) => F {dest:deliver(d), connect, disconnect}.
/// The weak variant also discharges on any newpkt.
EventualityQuery packet_delivery(NodeId id, NodeId dest, Payload d, bool weak = false);

std::vector<std::size_t> matching_transitions(const Plts& p, const EventualityQuery& q);

/// A rooted sequence of steps; if `loop_from` is set, the steps from that
/// index on repeat forever.
struct Path {
  std::vector<StateId> states;           // states[i] --transitions[i]--> states[i+1]
  std::vector<std::size_t> transitions;
  std::optional<std::size_t> loop_from;  // index into states
};

struct DeadlockReport {
  bool ok = true;
  std::size_t checked = 0;
  std::vector<StateId> offending;  // no tick, tau or deliver without environment input
  std::vector<StateId> dead_ends;  // no transition at all
};

/// Every non-truncated state can tick, deliver or do an internal step even
/// when the network layer stays silent.
DeadlockReport check_deadlock_freedom(const Plts& p);

enum class Verdict { holds, fails, unknown };
std::string to_string(Verdict v);

struct OutrightResult {
  Verdict verdict = Verdict::holds;
  std::size_t pre_transitions = 0;
  std::optional<Path> counterexample;  // rooted, includes the pre transition
};

OutrightResult holds_outright(const Plts& p, const EventualityQuery& q);

/// Minimal (over schedulers) or uniform-scheduler probability of eventually
/// performing a post transition, for every state. Truncated states and dead
/// ends count as failure.
struct ValueTable {
  std::vector<Rational> value;
  bool exact = true;  // false if some large cyclic component was approximated from below
};

enum class Scheduler { adversarial, uniform };

ValueTable reach_values(const Plts& p, const std::vector<LabelPattern>& post,
                        Scheduler sched = Scheduler::adversarial);

/// Prob(t, post) read off a value table.
Rational transition_value(const Plts& p, std::size_t t, const std::vector<LabelPattern>& post,
                          const ValueTable& v);

struct ProbResult {
  Rational min_value = 1;  // over all pre transitions; 1 when there are none
  std::optional<std::size_t> worst_transition;
  std::size_t pre_transitions = 0;
  bool exact = true;
  bool truncated = false;  // the explored fragment was cut at the horizon
};

ProbResult min_prob(const Plts& p, std::size_t t, const std::vector<LabelPattern>& post);
ProbResult prob_at_least(const Plts& p, const EventualityQuery& q);
/// Probability of reaching post from the root under the uniform scheduler.
Rational uniform_reach_from_root(const Plts& p, const std::vector<LabelPattern>& post);

struct BisimResult {
  bool bisimilar = false;
  std::size_t classes = 0;
  /// Labels along which the roots can be told apart (empty if bisimilar).
  std::vector<NetAction> witness;
  bool witness_in_first = true;  // the last label is possible in the first system only
};

/// Strong probabilistic bisimilarity of the two roots by partition refinement.
/// Truncated states form their own initial block.
BisimResult strong_bisim(const Plts& a, const Plts& b);

/// Rooted path to `s` of minimal length, found by breadth-first search.
Path path_to(const Plts& p, StateId s);

}  // namespace linkalg
