#include "linkalg/value.hpp"

namespace linkalg {

namespace {

struct ValueHasher {
  std::size_t operator()(std::monostate) const { return 0x51; }
  std::size_t operator()(std::int64_t i) const { return std::hash<std::int64_t>{}(i); }
  std::size_t operator()(TimePoint t) const { return std::hash<TimeValue>{}(t.at) * 7 + 1; }
  std::size_t operator()(bool b) const { return b ? 0x77 : 0x78; }
  std::size_t operator()(NodeId n) const { return 0x1000 + n.index; }
  std::size_t operator()(Payload p) const { return 0x2000 + p.index; }
  std::size_t operator()(const Message& m) const { return hash_value(m); }
  std::size_t operator()(const Chunk& c) const { return hash_value(c); }
};

}  // namespace

std::size_t hash_value(const Value& v) {
  std::size_t h = v.index();
  hash_mix(h, std::visit(ValueHasher{}, v));
  return h;
}

std::string to_string(const Value& v, const Universe& u) {
  struct Printer {
    const Universe& u;
    std::string operator()(std::monostate) const { return "undef"; }
    std::string operator()(std::int64_t i) const { return std::to_string(i); }
    std::string operator()(TimePoint t) const { return "@" + std::to_string(t.at); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(NodeId n) const { return u.name(n); }
    std::string operator()(Payload p) const { return u.name(p); }
    std::string operator()(const Message& m) const { return to_string(m, u); }
    std::string operator()(const Chunk& c) const { return to_string(c, u); }
  };
  return std::visit(Printer{u}, v);
}

Value Valuation::get(VarId v) const {
  switch (v) {
    case kNow:
      return TimePoint{now};
    case kRfr:
      return rfr;
    case kCounter:
      return counter;
    default:
      break;
  }
  auto it = std::lower_bound(bindings_.begin(), bindings_.end(), v,
                             [](const auto& e, VarId key) { return e.first < key; });
  if (it == bindings_.end() || it->first != v) return std::monostate{};
  return it->second;
}

bool Valuation::defined(VarId v) const {
  if (v < kFirstUserVar) return true;
  auto it = std::lower_bound(bindings_.begin(), bindings_.end(), v,
                             [](const auto& e, VarId key) { return e.first < key; });
  return it != bindings_.end() && it->first == v;
}

void Valuation::set(VarId v, Value value) {
  if (v < kFirstUserVar) throw ModelError("attempt to assign a read-only variable");
  if (std::holds_alternative<std::monostate>(value)) {
    erase(v);
    return;
  }
  auto it = std::lower_bound(bindings_.begin(), bindings_.end(), v,
                             [](const auto& e, VarId key) { return e.first < key; });
  if (it != bindings_.end() && it->first == v)
    it->second = std::move(value);
  else
    bindings_.insert(it, {v, std::move(value)});
}

void Valuation::erase(VarId v) {
  auto it = std::lower_bound(bindings_.begin(), bindings_.end(), v,
                             [](const auto& e, VarId key) { return e.first < key; });
  if (it != bindings_.end() && it->first == v) bindings_.erase(it);
}

Valuation Valuation::readonly_part() const {
  Valuation r;
  r.now = now;
  r.rfr = rfr;
  r.counter = counter;
  return r;
}

std::size_t hash_value(const Valuation& xi) {
  std::size_t h = std::hash<TimeValue>{}(xi.now);
  hash_mix(h, hash_value(xi.rfr));
  hash_mix(h, std::hash<std::int64_t>{}(xi.counter));
  for (const auto& [v, val] : xi.bindings()) {
    hash_mix(h, v);
    hash_mix(h, hash_value(val));
  }
  return h;
}

}  // namespace linkalg
