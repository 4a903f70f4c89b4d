// Scenario configuration, the shipped scenarios, Monte-Carlo simulation and
// line-oriented traces.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "linkalg/csma.hpp"
#include "linkalg/plts.hpp"

namespace linkalg {

inline constexpr const char* kScenarioSchema = "linkalg-scenario/1";
inline constexpr const char* kTraceSchema = "linkalg-trace/1";

/// Scenario errors: bad files, unknown names, inconsistent settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScheduledPacket {
  TimeValue at = 0;
  std::string node;
  std::string data;
  std::string dest;
  friend bool operator==(const ScheduledPacket&, const ScheduledPacket&) = default;
};

struct ScheduledLinkChange {
  TimeValue at = 0;
  bool connect = true;
  std::string a;
  std::string b;
  friend bool operator==(const ScheduledLinkChange&, const ScheduledLinkChange&) = default;
};

/// The packet whose delivery the analyses and the simulator track.
struct PacketOfInterest {
  std::string node;
  std::string dest;
  std::string data;
  friend bool operator==(const PacketOfInterest&, const PacketOfInterest&) = default;
};

struct ScenarioConfig {
  std::string name = "custom";
  std::vector<std::string> nodes;
  std::vector<std::pair<std::string, std::string>> edges;  // symmetric links
  std::map<std::string, bool> own_range;                   // default true
  Protocol protocol = Protocol::csma;
  CsmaParams params;
  std::vector<std::string> payloads;
  std::map<std::string, TimeValue> payload_durations;
  std::vector<ScheduledPacket> injections;
  MobilityMode mobility = MobilityMode::off;
  std::vector<ScheduledLinkChange> mobility_script;
  bool symmetric_mobility = true;
  std::optional<PacketOfInterest> target;  // default: the first injection
  std::optional<std::string> composition;  // e.g. "((A|B)|C)"; default left-nested
  int horizon = 30;
  std::size_t budget = 1000000;
  std::uint64_t seed = 1;
  bool normalize = false;
  bool reduce = false;  // partial-order reduction during exploration

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

ScenarioConfig scenario_hidden_station();
ScenarioConfig scenario_exposed_station();
ScenarioConfig scenario_star_counterexample();
/// Fully connected A, B, C; A and C each send one packet to B with a
/// backoff window of two slots and two attempts.
ScenarioConfig scenario_two_senders();
/// A and B in range, a single packet A to B.
ScenarioConfig scenario_pair();

std::vector<std::string> scenario_names();
/// Built-in scenario by name, or a scenario file path.
ScenarioConfig resolve_scenario(const std::string& name_or_path);

std::string scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_from_json(const std::string& text);
ScenarioConfig load_scenario(const std::string& path);

/// A scenario turned into process definitions and a closed network.
struct Model {
  ScenarioConfig config;
  Universe universe;
  DefsPtr defs;
  std::shared_ptr<const Network> network;

  NodeId node(const std::string& name) const;
  Payload payload(const std::string& name) const;
  PacketOfInterest target() const;
  /// Packet delivery (or its weak variant) for the packet of interest.
  EventualityQuery delivery_query(bool weak = false) const;
  ExploreOptions explore_options() const;
};

Model build_model(const ScenarioConfig& cfg);

/// Parses "((A|B)|C)" against the declared node order.
Composition parse_composition(const std::string& text, const std::vector<std::string>& nodes);

// ---------------------------------------------------------------------------
// Simulation

/// Seed of trial `index`: splitmix64 applied to master + index.
std::uint64_t trial_seed(std::uint64_t master, std::uint64_t index);

struct TrialResult {
  bool delivered = false;
  bool out_of_time = false;      // horizon reached before delivery
  bool failure_reported = false; // the sender gave up on the packet
  int collision_slots = 0;       // slots in which some node received a conflict
  int attempts = 0;              // data frames sent (RTS frames under csma-rts)
  std::optional<TimeValue> latency;  // slots from injection to delivery
  std::vector<std::string> trace;    // JSON lines, when requested
};

/// One run resolving nondeterminism uniformly over distinct transitions and
/// probabilistic choices by their weights. Stops at delivery of the packet
/// of interest or after `horizon` time steps.
TrialResult run_trial(const Model& m, std::uint64_t seed, int horizon, bool record_trace = false);

struct DeliveryStats {
  std::size_t trials = 0;
  std::size_t delivered = 0;
  std::size_t out_of_time = 0;
  std::size_t failure_reported = 0;
  std::uint64_t collision_slots = 0;
  std::map<int, std::size_t> attempts_histogram;
  double mean_latency = 0;  // over delivered trials

  double rate() const { return trials ? static_cast<double>(delivered) / trials : 0; }
};

/// Trials run on `threads` workers; results do not depend on the count.
DeliveryStats monte_carlo(const Model& m, std::size_t trials, std::uint64_t master_seed,
                          int horizon, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Traces

/// Header line followed by one record per transition.
std::vector<std::string> trace_of_path(const Model& m, const Plts& p, const Path& path);

struct ReplayResult {
  bool ok = false;
  std::size_t steps = 0;
  std::string message;
};

/// Re-executes a trace: every record must be matched by a transition of the
/// current state with the same label leading to the recorded node states.
ReplayResult replay_trace(const Model& m, const std::vector<std::string>& lines);

}  // namespace linkalg
