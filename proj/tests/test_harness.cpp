#include <cmath>

#include "doctest.h"
#include "json.hpp"

#include "linkalg/harness.hpp"

using namespace linkalg;
using nlohmann::json;

TEST_CASE("scenarios survive a JSON round trip") {
  for (const auto& name : scenario_names()) {
    CAPTURE(name);
    ScenarioConfig cfg = resolve_scenario(name);
    CHECK(scenario_from_json(scenario_to_json(cfg)) == cfg);
    cfg.protocol = cfg.protocol == Protocol::csma ? Protocol::csma_rts : Protocol::csma;
    cfg.params.max_retransmit.reset();
    cfg.params.cwmax = 8;
    CHECK(scenario_from_json(scenario_to_json(cfg)) == cfg);
  }
}

TEST_CASE("bad scenario files are rejected") {
  json j = json::parse(scenario_to_json(scenario_pair()));
  SUBCASE("unknown key") {
    j["colour"] = "blue";
    CHECK_THROWS_AS(scenario_from_json(j.dump()), ConfigError);
  }
  SUBCASE("wrong schema") {
    j["schema"] = "something-else/9";
    CHECK_THROWS_AS(scenario_from_json(j.dump()), ConfigError);
  }
  SUBCASE("not JSON") { CHECK_THROWS_AS(scenario_from_json("{nodes: ["), ConfigError); }
  SUBCASE("edge to an unknown node") {
    ScenarioConfig cfg = scenario_pair();
    cfg.edges.push_back({"A", "Z"});
    CHECK_THROWS_AS(build_model(cfg), ConfigError);
  }
  SUBCASE("inconsistent timing") {
    ScenarioConfig cfg = scenario_pair();
    cfg.params.difs = cfg.params.sifs;
    CHECK_THROWS_AS(build_model(cfg), ConfigError);
  }
  CHECK_THROWS_AS(resolve_scenario("no-such-scenario"), ConfigError);
}

TEST_CASE("composition strings") {
  const std::vector<std::string> nodes{"A", "B", "C"};
  CHECK(parse_composition("((A|B)|C)", nodes).leaves() == std::vector<std::size_t>{0, 1, 2});
  CHECK(parse_composition("(C|(A|B))", nodes).leaves() == std::vector<std::size_t>{2, 0, 1});
  CHECK_THROWS_AS(parse_composition("(A|B)", nodes), ConfigError);
  CHECK_THROWS_AS(parse_composition("((A|A)|C)", nodes), ConfigError);
  CHECK_THROWS_AS(parse_composition("((A|B)|D)", nodes), ConfigError);
  CHECK_THROWS_AS(parse_composition("((A|B)|C", nodes), ConfigError);
}

TEST_CASE("a clean channel always delivers") {
  Model m = build_model(scenario_pair());
  Plts p = explore(*m.network, m.explore_options());
  CHECK(holds_outright(p, m.delivery_query()).verdict == Verdict::holds);
  DeliveryStats st = monte_carlo(m, 200, 5, 30);
  CHECK(st.delivered == 200);
  CHECK(st.rate() == 1.0);
}

TEST_CASE("a missing link is visible to bisimilarity") {
  ScenarioConfig linked = scenario_pair();
  ScenarioConfig apart = linked;
  apart.edges.clear();
  Model ml = build_model(linked), ma = build_model(apart);
  BisimResult r = strong_bisim(explore(*ml.network, ml.explore_options()),
                               explore(*ma.network, ma.explore_options()));
  CHECK_FALSE(r.bisimilar);
  CHECK_FALSE(r.witness.empty());
}

TEST_CASE("simulation is reproducible") {
  Model m = build_model(scenario_hidden_station());
  const DeliveryStats a = monte_carlo(m, 300, 11, 50, 1);
  const DeliveryStats b = monte_carlo(m, 300, 11, 50, 3);
  CHECK(a.delivered == b.delivered);
  CHECK(a.collision_slots == b.collision_slots);
  CHECK(a.attempts_histogram == b.attempts_histogram);
  CHECK(a.mean_latency == b.mean_latency);
  CHECK(trial_seed(11, 0) != trial_seed(11, 1));
  CHECK(trial_seed(11, 1) == trial_seed(12, 0));
  CHECK(a.delivered + a.out_of_time + a.failure_reported == a.trials);
}

TEST_CASE("traces replay") {
  Model m = build_model(scenario_hidden_station());
  TrialResult r = run_trial(m, 3, 50, true);
  REQUIRE(r.trace.size() > 2);
  CHECK(json::parse(r.trace[0])["schema"] == kTraceSchema);
  ReplayResult ok = replay_trace(m, r.trace);
  CHECK(ok.ok);
  CHECK(ok.steps == r.trace.size() - 1);

  SUBCASE("a tampered record is caught") {
    auto lines = r.trace;
    const std::size_t k = lines.size() / 2;
    json rec = json::parse(lines[k]);
    rec["nodes"][0]["now"] = rec["nodes"][0]["now"].get<int>() + 5;
    lines[k] = rec.dump();
    ReplayResult bad = replay_trace(m, lines);
    CHECK_FALSE(bad.ok);
    CHECK(bad.steps == k - 1);
  }
  SUBCASE("a trace of another scenario does not replay") {
    Model other = build_model(scenario_two_senders());
    CHECK_FALSE(replay_trace(other, r.trace).ok);
  }
  SUBCASE("counterexamples replay on the normalized system") {
    Plts p = explore(*m.network, m.explore_options());
    OutrightResult out = holds_outright(p, m.delivery_query());
    REQUIRE(out.counterexample);
    auto lines = trace_of_path(m, p, *out.counterexample);
    CHECK(json::parse(lines[0])["normalized"] == true);
    CHECK(replay_trace(m, lines).ok);
  }
}

TEST_CASE("partial-order reduction keeps the probabilities") {
  struct Case {
    ScenarioConfig cfg;
    Protocol proto;
    int horizon;
  };
  const std::vector<Case> cases{{scenario_hidden_station(), Protocol::csma, 40},
                                {scenario_hidden_station(), Protocol::csma_rts, 40},
                                {scenario_exposed_station(), Protocol::csma_rts, 40},
                                {scenario_two_senders(), Protocol::csma, 30},
                                {scenario_star_counterexample(), Protocol::csma_rts, 30}};
  for (auto c : cases) {
    CAPTURE(c.cfg.name);
    CAPTURE(to_string(c.proto));
    c.cfg.protocol = c.proto;
    c.cfg.horizon = c.horizon;
    c.cfg.normalize = false;
    Model full = build_model(c.cfg);
    c.cfg.reduce = true;
    Model red = build_model(c.cfg);
    Plts pf = explore(*full.network, full.explore_options());
    Plts pr = explore(*red.network, red.explore_options());
    CHECK(pr.reduced());
    CHECK(pr.num_states() <= pf.num_states());
    CHECK(prob_at_least(pf, full.delivery_query()).min_value ==
          prob_at_least(pr, red.delivery_query()).min_value);
    CHECK(holds_outright(pf, full.delivery_query()).verdict ==
          holds_outright(pr, red.delivery_query()).verdict);
    CHECK(check_deadlock_freedom(pr).ok);
  }
}

TEST_CASE("simulated rates do not undercut the minimal probability") {
  for (auto make : {scenario_hidden_station, scenario_two_senders}) {
    for (Protocol proto : {Protocol::csma, Protocol::csma_rts}) {
      ScenarioConfig cfg = make();
      cfg.protocol = proto;
      cfg.horizon = 40;
      cfg.normalize = false;
      CAPTURE(cfg.name);
      CAPTURE(to_string(proto));
      Model m = build_model(cfg);
      Plts p = explore(*m.network, m.explore_options());
      const double lower = prob_at_least(p, m.delivery_query()).min_value.get_d();
      DeliveryStats st = monte_carlo(m, 2000, 99, cfg.horizon, 2);
      const double sigma = std::sqrt(std::max(lower * (1 - lower), 1e-4) / 2000.0);
      CHECK(st.rate() >= lower - 3 * sigma);
    }
  }
}

TEST_CASE("plain csma cannot promise delivery next to a busy pair") {
  ScenarioConfig cfg = scenario_exposed_station();
  cfg.protocol = Protocol::csma;
  cfg.horizon = 30;
  Model m = build_model(cfg);
  Plts p = explore(*m.network, m.explore_options());
  CHECK(holds_outright(p, m.delivery_query()).verdict != Verdict::holds);
  CHECK(prob_at_least(p, m.delivery_query()).min_value < 1);
}
