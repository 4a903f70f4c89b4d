// Command-line front end: explore, check, simulate, bisim, trace, scenarios.
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "linkalg/harness.hpp"

using namespace linkalg;
using nlohmann::json;

namespace {

constexpr const char* kReportSchema = "linkalg-report/1";

enum Exit { kHolds = 0, kFails = 1, kUnknown = 2, kUsage = 3 };

struct Common {
  std::string scenario = "hidden";
  std::string protocol;
  std::optional<int> horizon;
  std::optional<std::size_t> budget;
  std::optional<std::uint64_t> seed;
  std::string max_retransmit;
  std::optional<std::int64_t> cwmin;
  std::optional<std::string> composition;
  bool normalize = false, no_normalize = false, reduce = false;
  std::string format = "text";

  bool machine() const { return format != "text"; }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--scenario", c.scenario, "hidden|exposed|star|two-senders|pair or a JSON file")
      ->capture_default_str();
  cmd->add_option("--protocol", c.protocol, "csma|csma-rts (default: from the scenario)");
  cmd->add_option("--horizon", c.horizon, "time steps to explore or simulate");
  cmd->add_option("--budget", c.budget, "maximal number of explored states");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--max-retransmit", c.max_retransmit, "attempts per packet, or 'unbounded'");
  cmd->add_option("--cwmin", c.cwmin, "initial contention window");
  cmd->add_option("--composition", c.composition, "parallel shape, e.g. '((A|B)|C)'");
  cmd->add_flag("--normalize", c.normalize, "shift clocks so equal situations coincide");
  cmd->add_flag("--no-normalize", c.no_normalize, "keep absolute clocks");
  cmd->add_flag("--reduce", c.reduce, "partial-order reduction (not for bisim)");
  cmd->add_option("--format", c.format, "text|machine-readable")
      ->check(CLI::IsMember({"text", "machine-readable", "json"}))
      ->capture_default_str();
}

ScenarioConfig config_of(const Common& c) {
  ScenarioConfig cfg = resolve_scenario(c.scenario);
  try {
    if (!c.protocol.empty()) cfg.protocol = protocol_from_string(c.protocol);
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
  if (c.horizon) cfg.horizon = *c.horizon;
  if (c.budget) cfg.budget = *c.budget;
  if (c.seed) cfg.seed = *c.seed;
  if (c.cwmin) cfg.params.cwmin = *c.cwmin;
  if (c.composition) cfg.composition = *c.composition;
  if (!c.max_retransmit.empty()) {
    if (c.max_retransmit == "unbounded") {
      cfg.params.max_retransmit.reset();
    } else {
      try {
        std::size_t used = 0;
        cfg.params.max_retransmit = std::stoll(c.max_retransmit, &used);
        if (used != c.max_retransmit.size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ConfigError("--max-retransmit expects an integer or 'unbounded'");
      }
    }
  }
  if (c.normalize && c.no_normalize) throw ConfigError("--normalize and --no-normalize conflict");
  if (c.normalize) cfg.normalize = true;
  if (c.no_normalize) cfg.normalize = false;
  if (c.reduce) cfg.reduce = true;
  if (cfg.horizon < 1) throw ConfigError("horizon must be positive");
  return cfg;
}

json base_report(const std::string& command, const Model& m) {
  return {{"schema", kReportSchema},
          {"command", command},
          {"scenario", m.config.name},
          {"protocol", to_string(m.config.protocol)},
          {"horizon", m.config.horizon}};
}

json plts_report(const Plts& p) {
  return {{"states", p.num_states()},
          {"transitions", p.num_transitions()},
          {"truncated_states", p.num_truncated()},
          {"normalized", p.normalized()},
          {"reduced", p.reduced()}};
}

void print_text_plts(const Plts& p) {
  std::cout << "states:      " << p.num_states() << "\n"
            << "transitions: " << p.num_transitions() << "\n"
            << "truncated:   " << p.num_truncated() << "\n"
            << "normalized:  " << (p.normalized() ? "yes" : "no")
            << (p.reduced() ? ", reduced" : "") << "\n";
}

std::string rational(const Rational& r) { return r.get_str(); }

void emit(const Common& c, const json& report) {
  if (c.machine()) std::cout << report.dump() << std::endl;
}

std::string default_trace_path(const Model& m, const std::string& what) {
  std::string name = m.config.name;
  for (char& ch : name)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-') ch = '_';
  return name + "-" + to_string(m.config.protocol) + "-" + what + ".jsonl";
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (path != "-") {
    file.open(path);
    if (!file) throw ConfigError("cannot write '" + path + "'");
    out = &file;
  }
  for (const auto& l : lines) *out << l << "\n";
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

// ---------------------------------------------------------------------------

int run_explore(const Common& c) {
  Model m = build_model(config_of(c));
  Plts p = explore(*m.network, m.explore_options());
  DeadlockReport d = check_deadlock_freedom(p);
  json r = base_report("explore", m);
  r["plts"] = plts_report(p);
  r["deadlock_free"] = d.ok;
  r["dead_ends"] = d.dead_ends.size();
  if (c.machine()) {
    emit(c, r);
  } else {
    std::cout << "scenario:    " << m.config.name << " (" << to_string(m.config.protocol) << ")\n";
    print_text_plts(p);
    std::cout << "deadlock:    " << (d.ok ? "none" : "FOUND") << "\n";
  }
  return kHolds;
}

struct CheckOptions {
  bool outright = false;
  bool min_prob = false;
  std::string threshold = "1";
  bool weak = false;
  std::string trace_out;
};

int run_check(const Common& c, const CheckOptions& o) {
  Model m = build_model(config_of(c));
  Plts p = explore(*m.network, m.explore_options());
  json r = base_report("check", m);
  r["plts"] = plts_report(p);
  const std::string trace_path =
      o.trace_out.empty() ? default_trace_path(m, "counterexample") : o.trace_out;

  DeadlockReport d = check_deadlock_freedom(p);
  r["deadlock_free"] = d.ok;
  if (!d.ok) {
    const StateId bad = d.offending.front();
    write_lines(trace_path, trace_of_path(m, p, path_to(p, bad)));
    r["verdict"] = "fails";
    r["counterexample"] = trace_path;
    if (c.machine()) {
      emit(c, r);
    } else {
      std::cout << "deadlock in state " << bad << ":\n" << p.describe(bad) << "\npath written to "
                << trace_path << "\n";
    }
    return kFails;
  }

  const EventualityQuery q = m.delivery_query(o.weak);
  const auto target = m.target();
  r["property"] = std::string(o.weak ? "weak " : "") + "packet delivery " + target.data + " from " +
                  target.node + " to " + target.dest;
  Verdict verdict;
  std::optional<Path> cex;
  if (o.min_prob) {
    Rational threshold;
    try {
      threshold = Rational(o.threshold);
      threshold.canonicalize();
    } catch (const std::exception&) {
      throw ConfigError("--threshold expects a rational such as 3/4");
    }
    ProbResult pr = prob_at_least(p, q);
    r["mode"] = "min-prob";
    r["min_prob"] = rational(pr.min_value);
    r["min_prob_decimal"] = pr.min_value.get_d();
    r["threshold"] = rational(threshold);
    r["pre_transitions"] = pr.pre_transitions;
    r["exact"] = pr.exact;
    r["lower_bound_only"] = pr.truncated;
    if (pr.min_value >= threshold)
      verdict = Verdict::holds;
    else if (pr.truncated || !pr.exact)
      verdict = Verdict::unknown;
    else
      verdict = Verdict::fails;
    if (verdict == Verdict::fails) {
      cex = holds_outright(p, q).counterexample;
      if (!cex && pr.worst_transition) {
        const auto& t = p.transition(*pr.worst_transition);
        cex = path_to(p, t.source);
        cex->transitions.push_back(*pr.worst_transition);
        cex->states.push_back(p.outcomes_begin(t)->target);
      }
    }
  } else {
    OutrightResult out = holds_outright(p, q);
    r["mode"] = "outright";
    r["pre_transitions"] = out.pre_transitions;
    verdict = out.verdict;
    cex = out.counterexample;
  }
  r["verdict"] = to_string(verdict);
  if (verdict == Verdict::fails && cex) {
    write_lines(trace_path, trace_of_path(m, p, *cex));
    r["counterexample"] = trace_path;
  }

  if (c.machine()) {
    emit(c, r);
  } else {
    std::cout << "scenario:    " << m.config.name << " (" << to_string(m.config.protocol) << ")\n";
    print_text_plts(p);
    std::cout << "deadlock:    none\n"
              << "property:    " << r["property"].get<std::string>() << "\n";
    if (o.min_prob)
      std::cout << "min prob:    " << r["min_prob"].get<std::string>() << " (~"
                << r["min_prob_decimal"].get<double>() << ")"
                << (r["lower_bound_only"].get<bool>() ? ", lower bound: horizon reached" : "")
                << (r["exact"].get<bool>() ? "" : ", approximated") << "\n";
    std::cout << "verdict:     " << to_string(verdict) << "\n";
    if (r.contains("counterexample"))
      std::cout << "counterexample written to " << r["counterexample"].get<std::string>() << "\n";
  }
  return verdict == Verdict::holds ? kHolds : verdict == Verdict::fails ? kFails : kUnknown;
}

struct SimOptions {
  std::size_t trials = 10000;
  unsigned threads = 0;
};

int run_simulate(const Common& c, const SimOptions& o) {
  Model m = build_model(config_of(c));
  const unsigned threads = o.threads ? o.threads : std::max(1U, std::thread::hardware_concurrency());
  DeliveryStats st = monte_carlo(m, o.trials, m.config.seed, m.config.horizon, threads);
  const double rate = st.rate();
  const double sigma = std::sqrt(rate * (1 - rate) / static_cast<double>(st.trials));
  json r = base_report("simulate", m);
  r["seed"] = m.config.seed;
  r["trials"] = st.trials;
  r["delivered"] = st.delivered;
  r["delivery_rate"] = rate;
  r["std_error"] = sigma;
  r["out_of_time"] = st.out_of_time;
  r["failure_reported"] = st.failure_reported;
  r["collision_slots"] = st.collision_slots;
  r["mean_latency"] = st.mean_latency;
  json hist = json::object();
  for (const auto& [k, n] : st.attempts_histogram) hist[std::to_string(k)] = n;
  r["attempts_histogram"] = hist;
  if (c.machine()) {
    emit(c, r);
  } else {
    std::cout << "scenario:      " << m.config.name << " (" << to_string(m.config.protocol) << ")\n"
              << "trials:        " << st.trials << " (seed " << m.config.seed << ", horizon "
              << m.config.horizon << ")\n"
              << "delivered:     " << st.delivered << " (rate " << rate << " +- " << sigma << ")\n"
              << "out of time:   " << st.out_of_time << "\n"
              << "gave up:       " << st.failure_reported << "\n"
              << "collisions:    " << st.collision_slots << " slots in total\n"
              << "mean latency:  " << st.mean_latency << " slots\n"
              << "attempts:     ";
    for (const auto& [k, n] : st.attempts_histogram) std::cout << " " << k << ":" << n;
    std::cout << "\n";
  }
  return kHolds;
}

struct BisimOptions {
  std::string shape_a, shape_b;
  std::string scenario_b;
};

std::string nested_shape(const std::vector<std::string>& nodes, bool left) {
  if (nodes.size() == 1) return nodes[0];
  std::string s = left ? nodes[0] : nodes.back();
  if (left) {
    for (std::size_t i = 1; i < nodes.size(); ++i) s = "(" + s + "|" + nodes[i] + ")";
  } else {
    for (std::size_t i = nodes.size() - 1; i-- > 0;) s = "(" + nodes[i] + "|" + s + ")";
  }
  return s;
}

int run_bisim(const Common& c, const BisimOptions& o) {
  ScenarioConfig a = config_of(c);
  if (a.reduce) throw ConfigError("bisim needs the unreduced systems");
  ScenarioConfig b = a;
  if (!o.scenario_b.empty()) {
    Common cb = c;
    cb.scenario = o.scenario_b;
    cb.composition.reset();
    b = config_of(cb);
  }
  if (o.scenario_b.empty() || !o.shape_a.empty() || !o.shape_b.empty()) {
    a.composition = o.shape_a.empty() ? nested_shape(a.nodes, true) : o.shape_a;
    b.composition = o.shape_b.empty() ? nested_shape(b.nodes, false) : o.shape_b;
  }
  Model ma = build_model(a), mb = build_model(b);
  Plts pa = explore(*ma.network, ma.explore_options());
  Plts pb = explore(*mb.network, mb.explore_options());
  BisimResult res = strong_bisim(pa, pb);
  const bool truncated = pa.num_truncated() + pb.num_truncated() > 0;
  json r = base_report("bisim", ma);
  r["first"] = {{"scenario", a.name}, {"composition", a.composition.value_or("")},
                {"plts", plts_report(pa)}};
  r["second"] = {{"scenario", b.name}, {"composition", b.composition.value_or("")},
                 {"plts", plts_report(pb)}};
  r["bisimilar"] = res.bisimilar;
  r["classes"] = res.classes;
  json w = json::array();
  for (const auto& l : res.witness) w.push_back(to_string(l, ma.universe));
  r["witness"] = w;
  if (!res.bisimilar) r["witness_possible_in"] = res.witness_in_first ? "first" : "second";
  r["definitive"] = !truncated;
  if (c.machine()) {
    emit(c, r);
  } else {
    std::cout << "first:     " << a.name << " " << a.composition.value_or("") << " ("
              << pa.num_states() << " states)\n"
              << "second:    " << b.name << " " << b.composition.value_or("") << " ("
              << pb.num_states() << " states)\n"
              << "result:    " << (res.bisimilar ? "bisimilar" : "not bisimilar") << ", "
              << res.classes << " classes" << (truncated ? " (horizon reached, not definitive)" : "")
              << "\n";
    if (!res.bisimilar) {
      std::cout << "witness:  ";
      for (const auto& l : w) std::cout << " " << l.get<std::string>();
      std::cout << " (last step only in the " << (res.witness_in_first ? "first" : "second")
                << ")\n";
    }
  }
  if (truncated) return kUnknown;
  return res.bisimilar ? kHolds : kFails;
}

struct TraceOptions {
  std::string out = "-";
  std::string file;
};

int run_trace_export(const Common& c, const TraceOptions& o) {
  Model m = build_model(config_of(c));
  TrialResult t = run_trial(m, m.config.seed, m.config.horizon, true);
  write_lines(o.out, t.trace);
  if (o.out != "-") {
    json r = base_report("trace export", m);
    r["seed"] = m.config.seed;
    r["records"] = t.trace.size() - 1;
    r["delivered"] = t.delivered;
    r["file"] = o.out;
    if (c.machine())
      emit(c, r);
    else
      std::cout << t.trace.size() - 1 << " records written to " << o.out
                << (t.delivered ? " (delivered)" : " (not delivered)") << "\n";
  }
  return kHolds;
}

int run_trace_replay(Common c, bool scenario_given, bool protocol_given, const TraceOptions& o) {
  const auto lines = read_lines(o.file);
  if (lines.empty()) throw ConfigError("empty trace file");
  json header;
  try {
    header = json::parse(lines.front());
  } catch (const json::parse_error&) {
    throw ConfigError("trace header is not JSON");
  }
  if (!scenario_given && header.contains("scenario")) c.scenario = header["scenario"];
  if (!protocol_given && header.contains("protocol")) c.protocol = header["protocol"];
  Model m = build_model(config_of(c));
  ReplayResult res = replay_trace(m, lines);
  json r = base_report("trace replay", m);
  r["file"] = o.file;
  r["ok"] = res.ok;
  r["steps"] = res.steps;
  if (!res.ok) r["message"] = res.message;
  if (c.machine())
    emit(c, r);
  else
    std::cout << (res.ok ? "replayed " + std::to_string(res.steps) + " records" : res.message)
              << "\n";
  return res.ok ? kHolds : kFails;
}

int run_scenarios(const Common& c, const std::string& show) {
  if (!show.empty()) {
    std::cout << scenario_to_json(resolve_scenario(show)) << std::endl;
    return kHolds;
  }
  if (c.machine()) {
    json r = {{"schema", kReportSchema}, {"command", "scenarios"}, {"names", scenario_names()}};
    emit(c, r);
  } else {
    for (const auto& n : scenario_names()) std::cout << n << "\n";
  }
  return kHolds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Analysis of CSMA/CA link-layer models in a broadcast process algebra"};
  app.require_subcommand(1);

  Common common;
  CheckOptions check;
  SimOptions sim;
  BisimOptions bis;
  TraceOptions tr;
  std::string show;

  auto* explore_cmd = app.add_subcommand("explore", "build the state space and print statistics");
  add_common(explore_cmd, common);

  auto* check_cmd = app.add_subcommand("check", "deadlock freedom and packet delivery");
  add_common(check_cmd, common);
  auto* outright = check_cmd->add_flag("--outright", check.outright, "every path delivers (default)");
  auto* minp = check_cmd->add_flag("--min-prob", check.min_prob, "minimal delivery probability");
  outright->excludes(minp);
  check_cmd->add_option("--threshold", check.threshold, "required probability for --min-prob")
      ->capture_default_str();
  check_cmd->add_flag("--weak", check.weak, "also discharge on further packet injections");
  check_cmd->add_option("--trace-out", check.trace_out, "counterexample file ('-' for stdout)");

  auto* sim_cmd = app.add_subcommand("simulate", "Monte-Carlo estimate of the delivery rate");
  add_common(sim_cmd, common);
  sim_cmd->add_option("--trials", sim.trials, "number of runs")->capture_default_str();
  sim_cmd->add_option("--threads", sim.threads, "worker threads (0: all cores)");

  auto* bisim_cmd = app.add_subcommand("bisim", "compare two compositions for bisimilarity");
  add_common(bisim_cmd, common);
  bisim_cmd->add_option("--shape-a", bis.shape_a, "first composition (default left-nested)");
  bisim_cmd->add_option("--shape-b", bis.shape_b, "second composition (default right-nested)");
  bisim_cmd->add_option("--scenario-b", bis.scenario_b, "compare against another scenario");

  auto* trace_cmd = app.add_subcommand("trace", "export or replay traces");
  trace_cmd->require_subcommand(1);
  auto* export_cmd = trace_cmd->add_subcommand("export", "record one simulated run");
  add_common(export_cmd, common);
  export_cmd->add_option("--out", tr.out, "output file ('-' for stdout)")->capture_default_str();
  auto* replay_cmd = trace_cmd->add_subcommand("replay", "re-execute a trace file");
  add_common(replay_cmd, common);
  replay_cmd->add_option("file", tr.file, "trace file")->required();

  auto* scen_cmd = app.add_subcommand("scenarios", "list built-in scenarios");
  scen_cmd->add_option("--format", common.format, "text|machine-readable")
      ->check(CLI::IsMember({"text", "machine-readable", "json"}));
  scen_cmd->add_option("--show", show, "print one scenario as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (explore_cmd->parsed()) return run_explore(common);
    if (check_cmd->parsed()) return run_check(common, check);
    if (sim_cmd->parsed()) return run_simulate(common, sim);
    if (bisim_cmd->parsed()) return run_bisim(common, bis);
    if (export_cmd->parsed()) return run_trace_export(common, tr);
    if (replay_cmd->parsed())
      return run_trace_replay(common, replay_cmd->count("--scenario") > 0,
                              replay_cmd->count("--protocol") > 0, tr);
    if (scen_cmd->parsed()) return run_scenarios(common, show);
  } catch (const BudgetExceeded& e) {
    std::cerr << "linkalg: " << e.what() << " (raise --budget or lower --horizon)\n";
    return kUnknown;
  } catch (const ConfigError& e) {
    std::cerr << "linkalg: " << e.what() << "\n";
    return kUsage;
  } catch (const ModelError& e) {
    std::cerr << "linkalg: model error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
