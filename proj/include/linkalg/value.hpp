// Data values, valuations and exact discrete distributions.
#pragma once

#include <gmpxx.h>

#include <algorithm>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "linkalg/core.hpp"

namespace linkalg {

/// Absolute clock reading. Kept apart from plain integers so that models
/// can be checked for shift invariance (only differences of time points
/// are observable).
struct TimePoint {
  TimeValue at = 0;
  friend auto operator<=>(const TimePoint&, const TimePoint&) = default;
};

using Value = std::variant<std::monostate, std::int64_t, TimePoint, bool, NodeId, Payload,
                           Message, Chunk>;

std::size_t hash_value(const Value& v);
std::string to_string(const Value& v, const Universe& u);

using VarId = std::uint16_t;

/// Reserved variables: every valuation defines them.
inline constexpr VarId kNow = 0;
inline constexpr VarId kRfr = 1;
inline constexpr VarId kCounter = 2;
inline constexpr VarId kFirstUserVar = 3;

/// Partial map from variables to values. `now`, `rfr` and `counter` are
/// always defined; all other bindings are kept sorted by variable id.
class Valuation {
 public:
  TimeValue now = 0;
  Chunk rfr = Chunk::idle();
  std::int64_t counter = 0;

  /// Returns an undefined (monostate) value for unbound variables.
  Value get(VarId v) const;
  bool defined(VarId v) const;
  void set(VarId v, Value value);
  void erase(VarId v);
  /// Restriction to the read-only variables.
  Valuation readonly_part() const;

  const std::vector<std::pair<VarId, Value>>& bindings() const { return bindings_; }
  std::vector<std::pair<VarId, Value>>& mutable_bindings() { return bindings_; }

  friend bool operator==(const Valuation&, const Valuation&) = default;

 private:
  std::vector<std::pair<VarId, Value>> bindings_;
};

std::size_t hash_value(const Valuation& xi);

using Rational = mpq_class;

/// Finite discrete distribution with exact rational weights.
template <class S>
class Dist {
 public:
  Dist() = default;

  static Dist point(S s) {
    Dist d;
    d.entries_.emplace_back(std::move(s), Rational(1));
    return d;
  }

  /// Uniform over the given outcomes (duplicates keep separate mass and
  /// are merged by `normalized`).
  static Dist uniform(std::vector<S> outcomes) {
    Dist d;
    Rational w(1, static_cast<unsigned long>(outcomes.size()));
    w.canonicalize();
    for (auto& s : outcomes) d.entries_.emplace_back(std::move(s), w);
    return d;
  }

  void add(S s, const Rational& p) { entries_.emplace_back(std::move(s), p); }

  template <class F>
  auto map(F&& f) const -> Dist<decltype(f(std::declval<const S&>()))> {
    Dist<decltype(f(std::declval<const S&>()))> out;
    for (const auto& [s, p] : entries_) out.add(f(s), p);
    return out;
  }

  Rational total() const {
    Rational t(0);
    for (const auto& e : entries_) t += e.second;
    return t;
  }

  bool is_point() const { return entries_.size() == 1; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<S, Rational>>& entries() const { return entries_; }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<std::pair<S, Rational>> entries_;
};

}  // namespace linkalg
