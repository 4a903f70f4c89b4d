#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <ranges>
#include <set>
#include <sstream>

#include "json.hpp"
#include "linkalg/harness.hpp"

namespace linkalg {

using nlohmann::json;

namespace {

std::vector<ScheduledPacket> periodic(const std::string& node, const std::string& dest,
                                      const std::string& data, TimeValue first, TimeValue period,
                                      TimeValue until) {
  std::vector<ScheduledPacket> out;
  for (TimeValue t = first; t <= until; t += period) out.push_back({t, node, data, dest});
  return out;
}

}  // namespace

ScenarioConfig scenario_hidden_station() {
  ScenarioConfig c;
  c.name = "hidden";
  c.nodes = {"A", "B", "C"};
  c.edges = {{"A", "B"}, {"B", "C"}};
  c.payloads = {"a", "c"};
  c.injections = {{0, "A", "a", "B"}, {0, "C", "c", "B"}};
  c.params.cwmin = 2;
  c.params.max_retransmit = 2;
  c.horizon = 80;
  c.normalize = true;
  return c;
}

ScenarioConfig scenario_exposed_station() {
  ScenarioConfig c;
  c.name = "exposed";
  c.nodes = {"A", "B", "C", "D"};
  c.edges = {{"A", "B"}, {"B", "C"}, {"C", "D"}};
  c.protocol = Protocol::csma_rts;
  c.payloads = {"a", "c"};
  c.injections = {{0, "A", "a", "B"}};
  for (auto& p : periodic("C", "D", "c", 0, 3, 60)) c.injections.push_back(p);
  c.params.cwmin = 2;
  c.params.max_retransmit = 2;
  c.horizon = 60;
  return c;
}

ScenarioConfig scenario_star_counterexample() {
  ScenarioConfig c;
  c.name = "star";
  c.nodes = {"A", "B", "C1", "C2", "C3", "D1", "D2", "D3"};
  c.edges = {{"B", "A"},   {"A", "C1"},  {"A", "C2"},  {"A", "C3"},
             {"C1", "D1"}, {"C2", "D2"}, {"C3", "D3"}};
  c.protocol = Protocol::csma_rts;
  c.payloads = {"a", "c"};
  c.payload_durations = {{"c", 6}};
  c.injections = {{2, "A", "a", "B"}};
  const char* cs[] = {"C1", "C2", "C3"};
  const char* ds[] = {"D1", "D2", "D3"};
  // Each Ci is idle again before its next packet, and the three are offset
  // so that A always hears one of them.
  for (int i = 0; i < 3; ++i)
    for (auto& p : periodic(cs[i], ds[i], "c", 5 * i, 15, 60)) c.injections.push_back(p);
  c.params.cwmin = 2;
  c.params.max_retransmit = std::nullopt;
  c.horizon = 60;
  return c;
}

ScenarioConfig scenario_two_senders() {
  ScenarioConfig c;
  c.name = "two-senders";
  c.nodes = {"A", "B", "C"};
  c.edges = {{"A", "B"}, {"B", "C"}, {"A", "C"}};
  c.payloads = {"a", "c"};
  c.injections = {{0, "A", "a", "B"}, {0, "C", "c", "B"}};
  c.params.cwmin = 2;
  c.params.cwmax = 2;
  c.params.max_retransmit = 2;
  c.horizon = 40;
  c.normalize = true;
  return c;
}

ScenarioConfig scenario_pair() {
  ScenarioConfig c;
  c.name = "pair";
  c.nodes = {"A", "B"};
  c.edges = {{"A", "B"}};
  c.payloads = {"a"};
  c.injections = {{0, "A", "a", "B"}};
  c.params.max_retransmit = 1;
  c.horizon = 30;
  c.normalize = true;
  return c;
}

std::vector<std::string> scenario_names() { return {"hidden", "exposed", "star", "two-senders", "pair"}; }

ScenarioConfig resolve_scenario(const std::string& name_or_path) {
  if (name_or_path == "hidden") return scenario_hidden_station();
  if (name_or_path == "exposed") return scenario_exposed_station();
  if (name_or_path == "star") return scenario_star_counterexample();
  if (name_or_path == "two-senders") return scenario_two_senders();
  if (name_or_path == "pair") return scenario_pair();
  return load_scenario(name_or_path);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

std::string mobility_name(MobilityMode m) {
  switch (m) {
    case MobilityMode::off:
      return "off";
    case MobilityMode::scripted:
      return "scripted";
    case MobilityMode::free:
      return "free";
  }
  return "off";
}

MobilityMode mobility_from(const std::string& s) {
  if (s == "off") return MobilityMode::off;
  if (s == "scripted") return MobilityMode::scripted;
  if (s == "free") return MobilityMode::free;
  throw ConfigError("unknown mobility mode '" + s + "'");
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

}  // namespace

std::string scenario_to_json(const ScenarioConfig& c) {
  json j;
  j["schema"] = kScenarioSchema;
  j["name"] = c.name;
  j["nodes"] = c.nodes;
  j["edges"] = json::array();
  for (const auto& [a, b] : c.edges) j["edges"].push_back({a, b});
  if (!c.own_range.empty()) j["own_range"] = c.own_range;
  j["protocol"] = to_string(c.protocol);

  const auto& p = c.params;
  json params;
  params["cwmin"] = p.cwmin;
  params["maxRetransmit"] = p.max_retransmit ? json(*p.max_retransmit) : json("unbounded");
  params["cwmax"] = p.cwmax ? json(*p.cwmax) : json(nullptr);
  params["sifs"] = p.sifs;
  params["difs"] = p.difs;
  params["maxCtsWait"] = p.max_cts_wait ? json(*p.max_cts_wait) : json(nullptr);
  params["maxAckWait"] = p.max_ack_wait ? json(*p.max_ack_wait) : json(nullptr);
  params["durations"] = {{"ack", p.durations.ack},
                         {"cts", p.durations.cts},
                         {"rts", p.durations.rts},
                         {"frame", p.durations.data_frame},
                         {"user", p.durations.user}};
  j["params"] = params;

  j["payloads"] = c.payloads;
  j["payload_durations"] = c.payload_durations;
  j["injections"] = json::array();
  for (const auto& e : c.injections)
    j["injections"].push_back({{"at", e.at}, {"node", e.node}, {"data", e.data}, {"dest", e.dest}});
  json mob;
  mob["mode"] = mobility_name(c.mobility);
  mob["symmetric"] = c.symmetric_mobility;
  mob["script"] = json::array();
  for (const auto& m : c.mobility_script)
    mob["script"].push_back({{"at", m.at}, {"connect", m.connect}, {"a", m.a}, {"b", m.b}});
  j["mobility"] = mob;
  if (c.target) j["target"] = {{"node", c.target->node}, {"dest", c.target->dest}, {"data", c.target->data}};
  if (c.composition) j["composition"] = *c.composition;
  j["horizon"] = c.horizon;
  j["budget"] = c.budget;
  j["seed"] = c.seed;
  j["normalize"] = c.normalize;
  j["reduce"] = c.reduce;
  return j.dump(2) + "\n";
}

ScenarioConfig scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  }
  try {
    only_keys(j,
              {"schema", "name", "nodes", "edges", "own_range", "protocol", "params", "payloads",
               "payload_durations", "injections", "mobility", "target", "composition", "horizon",
               "budget", "seed", "normalize", "reduce"},
              "scenario");
    if (get_or<std::string>(j, "schema", "") != kScenarioSchema)
      throw ConfigError(std::string("scenario schema must be \"") + kScenarioSchema + "\"");
    ScenarioConfig c;
    c.name = get_or<std::string>(j, "name", "custom");
    c.nodes = j.at("nodes").get<std::vector<std::string>>();
    for (const auto& e : get_or<json>(j, "edges", json::array())) {
      if (!e.is_array() || e.size() != 2) throw ConfigError("an edge is a pair of node names");
      c.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
    c.own_range = get_or<std::map<std::string, bool>>(j, "own_range", {});
    c.protocol = protocol_from_string(get_or<std::string>(j, "protocol", "csma"));

    if (j.contains("params")) {
      const json& p = j.at("params");
      only_keys(p, {"cwmin", "maxRetransmit", "cwmax", "sifs", "difs", "maxCtsWait", "maxAckWait",
                    "durations"},
                "params");
      auto& q = c.params;
      q.cwmin = get_or<std::int64_t>(p, "cwmin", q.cwmin);
      if (p.contains("maxRetransmit")) {
        const json& m = p.at("maxRetransmit");
        if (m.is_string() && m.get<std::string>() == "unbounded")
          q.max_retransmit = std::nullopt;
        else if (m.is_number_integer())
          q.max_retransmit = m.get<std::int64_t>();
        else
          throw ConfigError("maxRetransmit must be an integer or \"unbounded\"");
      }
      if (p.contains("cwmax") && !p.at("cwmax").is_null()) q.cwmax = p.at("cwmax").get<std::int64_t>();
      q.sifs = get_or<TimeValue>(p, "sifs", q.sifs);
      q.difs = get_or<TimeValue>(p, "difs", q.difs);
      if (p.contains("maxCtsWait") && !p.at("maxCtsWait").is_null())
        q.max_cts_wait = p.at("maxCtsWait").get<TimeValue>();
      if (p.contains("maxAckWait") && !p.at("maxAckWait").is_null())
        q.max_ack_wait = p.at("maxAckWait").get<TimeValue>();
      if (p.contains("durations")) {
        const json& d = p.at("durations");
        only_keys(d, {"ack", "cts", "rts", "frame", "user"}, "durations");
        q.durations.ack = get_or<TimeValue>(d, "ack", q.durations.ack);
        q.durations.cts = get_or<TimeValue>(d, "cts", q.durations.cts);
        q.durations.rts = get_or<TimeValue>(d, "rts", q.durations.rts);
        q.durations.data_frame = get_or<TimeValue>(d, "frame", q.durations.data_frame);
        q.durations.user = get_or<TimeValue>(d, "user", q.durations.user);
      }
    }

    c.payloads = j.at("payloads").get<std::vector<std::string>>();
    c.payload_durations = get_or<std::map<std::string, TimeValue>>(j, "payload_durations", {});
    for (const auto& e : get_or<json>(j, "injections", json::array())) {
      only_keys(e, {"at", "node", "data", "dest"}, "injection");
      c.injections.push_back({e.at("at").get<TimeValue>(), e.at("node").get<std::string>(),
                              e.at("data").get<std::string>(), e.at("dest").get<std::string>()});
    }
    if (j.contains("mobility")) {
      const json& m = j.at("mobility");
      only_keys(m, {"mode", "symmetric", "script"}, "mobility");
      c.mobility = mobility_from(get_or<std::string>(m, "mode", "off"));
      c.symmetric_mobility = get_or<bool>(m, "symmetric", true);
      for (const auto& e : get_or<json>(m, "script", json::array())) {
        only_keys(e, {"at", "connect", "a", "b"}, "mobility event");
        c.mobility_script.push_back({e.at("at").get<TimeValue>(), e.at("connect").get<bool>(),
                                     e.at("a").get<std::string>(), e.at("b").get<std::string>()});
      }
    }
    if (j.contains("target")) {
      const json& t = j.at("target");
      only_keys(t, {"node", "dest", "data"}, "target");
      c.target = PacketOfInterest{t.at("node").get<std::string>(), t.at("dest").get<std::string>(),
                                  t.at("data").get<std::string>()};
    }
    if (j.contains("composition")) c.composition = j.at("composition").get<std::string>();
    c.horizon = get_or<int>(j, "horizon", c.horizon);
    c.budget = get_or<std::size_t>(j, "budget", c.budget);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    c.normalize = get_or<bool>(j, "normalize", c.normalize);
    c.reduce = get_or<bool>(j, "reduce", c.reduce);
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad scenario: ") + e.what());
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario '" + path + "' (built-in names: hidden, exposed, star, two-senders, pair)");
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json(ss.str());
}

// ---------------------------------------------------------------------------
// Model

Composition parse_composition(const std::string& text, const std::vector<std::string>& nodes) {
  std::size_t pos = 0;
  auto skip = [&] {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  };
  std::function<Composition()> term = [&]() -> Composition {
    skip();
    if (pos < text.size() && text[pos] == '(') {
      ++pos;
      Composition left = term();
      skip();
      if (pos >= text.size() || text[pos] != '|') throw ConfigError("expected '|' in composition");
      ++pos;
      Composition right = term();
      skip();
      if (pos >= text.size() || text[pos] != ')') throw ConfigError("expected ')' in composition");
      ++pos;
      return Composition::par(left, right);
    }
    std::size_t start = pos;
    while (pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      ++pos;
    std::string name = text.substr(start, pos - start);
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (nodes[i] == name) return Composition::leaf(i);
    throw ConfigError("unknown node '" + name + "' in composition");
  };
  Composition c = term();
  skip();
  if (pos != text.size()) throw ConfigError("trailing text in composition");
  auto used = c.leaves();
  std::sort(used.begin(), used.end());
  if (used.size() != nodes.size() || std::adjacent_find(used.begin(), used.end()) != used.end())
    throw ConfigError("composition must name every node exactly once");
  return c;
}

NodeId Model::node(const std::string& name) const {
  try {
    return universe.node(name);
  } catch (const ModelError&) {
    throw ConfigError("unknown node '" + name + "'");
  }
}

Payload Model::payload(const std::string& name) const {
  try {
    return universe.payload(name);
  } catch (const ModelError&) {
    throw ConfigError("unknown payload '" + name + "'");
  }
}

PacketOfInterest Model::target() const {
  if (config.target) return *config.target;
  if (config.injections.empty()) throw ConfigError("scenario has no packet to track");
  const auto& e = config.injections.front();
  return {e.node, e.dest, e.data};
}

EventualityQuery Model::delivery_query(bool weak) const {
  auto t = target();
  return packet_delivery(node(t.node), node(t.dest), payload(t.data), weak);
}

ExploreOptions Model::explore_options() const {
  ExploreOptions o;
  o.horizon = config.horizon;
  o.budget = config.budget;
  o.normalize = config.normalize;
  o.reduce = config.reduce;
  return o;
}

Model build_model(const ScenarioConfig& cfg) {
  Model m;
  m.config = cfg;
  if (cfg.nodes.empty()) throw ConfigError("scenario declares no nodes");
  if (cfg.nodes.size() > 64) throw ConfigError("at most 64 nodes are supported");
  if (cfg.horizon < 0) throw ConfigError("horizon must be non-negative");
  try {
    m.universe = Universe::make(cfg.nodes, cfg.payloads);
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
  CsmaParams params = cfg.params;
  for (const auto& [name, d] : cfg.payload_durations)
    params.durations.per_payload[m.payload(name).index] = d;
  try {
    m.defs = build_defs(cfg.protocol, params, m.universe);
  } catch (const ModelError& e) {
    throw ConfigError(std::string("invalid parameters: ") + e.what());
  }

  std::vector<Node> nodes;
  for (const auto& name : cfg.nodes) {
    NodeId id = m.node(name);
    bool own = true;
    if (auto it = cfg.own_range.find(name); it != cfg.own_range.end()) own = it->second;
    nodes.push_back({id, csma_initial(cfg.protocol, *m.defs, id), own ? bit(id) : NodeSet{0}});
  }
  for (const auto& name : cfg.own_range | std::views::keys) m.node(name);
  for (const auto& [a, b] : cfg.edges) {
    NodeId x = m.node(a), y = m.node(b);
    nodes[x.index].range |= bit(y);
    nodes[y.index].range |= bit(x);
  }

  Environment env;
  for (const auto& e : cfg.injections) {
    if (e.at < 0) throw ConfigError("injection times must be non-negative");
    Payload d = m.payload(e.data);
    if (d.index >= m.universe.data_count) throw ConfigError("'" + e.data + "' is not a data payload");
    env.injections.push_back({e.at, m.node(e.node), d, m.node(e.dest)});
  }
  env.mobility = cfg.mobility;
  env.symmetric = cfg.symmetric_mobility;
  for (const auto& e : cfg.mobility_script) {
    if (e.at < 0) throw ConfigError("mobility times must be non-negative");
    env.script.push_back({e.at, e.connect, m.node(e.a), m.node(e.b)});
  }
  if (cfg.target) {
    m.node(cfg.target->node);
    m.node(cfg.target->dest);
    m.payload(cfg.target->data);
  }

  std::optional<Composition> shape;
  if (cfg.composition) shape = parse_composition(*cfg.composition, cfg.nodes);
  try {
    m.network = std::make_shared<const Network>(m.defs, std::move(nodes), env, shape);
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
  return m;
}

}  // namespace linkalg
