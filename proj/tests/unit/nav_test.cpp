#include <gtest/gtest.h>

#include <json.hpp>

#include "uavnav/config.hpp"
#include "uavnav/nav.hpp"

using namespace uavnav;
using namespace uavnav::nav;

namespace {

const std::size_t kDim = world::joint_state_length(4);

// V(s) = k * (velocity component toward the destination): a goal-seeking stub.
neuro::NetworkParams goal_seeker(double k) {
  neuro::NetworkParams p;
  p.layers.push_back({{kDim, 1, neuro::Activation::identity}, Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(kDim)),
                      Eigen::VectorXd::Zero(1)});
  p.layers[0].weights(0, 0) = k;
  p.standardizer = neuro::Standardizer::identity(kDim);
  return p;
}

const config::RunConfig& cfg() {
  static const auto c = config::load_config(UAVNAV_CONFIG_DIR "/default.yaml");
  return c;
}

NavParams nav_params() {
  NavParams p;
  p.gamma = cfg().training.episode.gamma;
  p.reward_scale = cfg().training.episode.reward_scale;
  p.gated_lookahead = false;
  p.observation = cfg().observation;
  p.rewards = cfg().world.rewards;
  return p;
}

world::UavState uav(Vec2 p, Vec2 dest) {
  world::UavState s;
  s.position = p;
  s.destination = dest;
  const Vec2 d = dest - p;
  s.orientation = std::atan2(d.y, d.x);
  return s;
}

EvalOptions eval_options(bool stop_on_disconnect) {
  EvalOptions o;
  o.nav = nav_params();
  o.world = cfg().world;
  o.world.terminate_on_disconnect = stop_on_disconnect;
  return o;
}

}  // namespace

TEST(Nav, PerfectModeEqualsLookahead) {
  const auto env = cfg().environment("center_1w");
  NavPolicy pol{goal_seeker(0.1), MapMode::perfect, std::nullopt};
  const auto oracle = make_oracle(pol, env);
  const world::ScenarioConfig sc;
  const auto params = nav_params();
  for (double x : {-14.0, -10.0, -6.0}) {
    const auto self = uav({x, 1}, {30, 0});
    const auto a = navigate_step(pol, oracle, self, {}, sc, 0, params);
    valuetrain::LookaheadContext ctx;
    ctx.gamma = params.gamma;
    ctx.reward_scale = params.reward_scale;
    ctx.gated = false;
    ctx.rewards = params.rewards;
    ctx.observation = params.observation;
    const valuetrain::SinrOracle truth = [&](const Vec2& p) { return radio::sinr_level(env, p).level; };
    const auto space = world::sample_action_space(self, sc, params.n_speeds, params.n_headings);
    const auto b = valuetrain::lookahead_select(pol.value_net, self, {}, space, truth, ctx);
    EXPECT_EQ(a.speed, b.speed);
    EXPECT_EQ(a.heading, b.heading);
  }
}

TEST(Nav, PerfectModeNeverEntersHoleWhenAvoidable) {
  const auto env = cfg().environment("center_1w");
  // Small k: the value gain of any move stays below the hole penalty.
  NavPolicy pol{goal_seeker(0.01), MapMode::perfect, std::nullopt};
  const auto oracle = make_oracle(pol, env);
  const world::ScenarioConfig sc;
  const auto params = nav_params();
  // walk toward the hole along x and check every chosen step
  auto self = uav({-30, 0}, {30, 0});
  for (int t = 0; t < 40; ++t) {
    const auto a = navigate_step(pol, oracle, self, {}, sc, t, params);
    const auto next = world::propagate(self, a, sc.dt, sc.arrival_tolerance);
    EXPECT_GT(oracle(next.position), 0) << "t=" << t;
    self = next;
  }
  EXPECT_EQ(oracle({self.position.x + 3, self.position.y}), 0);  // stopped at the edge
}

TEST(Nav, LearnedModeWithExactMapMatchesPerfect) {
  const auto env = cfg().environment("center_1w");
  const world::ScenarioConfig sc;
  const auto params = nav_params();
  const auto self = uav({-13, 2}, {30, 0});
  const auto space = world::sample_action_space(self, sc, params.n_speeds, params.n_headings);

  // fit the map to ground truth on exactly the candidate next positions
  std::vector<sinrmap::Measurement> ms;
  for (const auto& a : space) {
    const auto p = world::propagate(self, a, sc.dt, sc.arrival_tolerance).position;
    ms.push_back({sinrmap::featurize(p, env.stations(), env.uav_altitude(), 6), radio::sinr_level(env, p).level, 0});
  }
  sinrmap::MeasurementCloud cloud(ms.size());
  for (const auto& m : ms) cloud.record(m);
  Rng rng(1);
  auto map = sinrmap::make_map_model(6, rng);
  map.train.epochs = 200;
  map.train.learning_rate = 0.01;
  for (int round = 0; round < 20 && sinrmap::evaluate_accuracy(map, ms) < 1.0; ++round) {
    sinrmap::retrain(map, cloud, rng, 0.0);
  }
  ASSERT_EQ(sinrmap::evaluate_accuracy(map, ms), 1.0);

  NavPolicy learned{goal_seeker(0.1), MapMode::learned, map};
  NavPolicy perfect{goal_seeker(0.1), MapMode::perfect, std::nullopt};
  const auto a = navigate_step(learned, make_oracle(learned, env), self, {}, sc, 0, params);
  const auto b = navigate_step(perfect, make_oracle(perfect, env), self, {}, sc, 0, params);
  EXPECT_EQ(a.speed, b.speed);
  EXPECT_EQ(a.heading, b.heading);
}

TEST(Nav, OutdatedIgnoresJammer) {
  NavPolicy pol{goal_seeker(0.1), MapMode::outdated, std::nullopt};
  const world::ScenarioConfig sc;
  const auto params = nav_params();
  const auto on = make_oracle(pol, cfg().environment("center_1w"));
  const auto off = make_oracle(pol, cfg().environment("off"));
  for (double x : {-20.0, -12.0, -5.0, 0.0}) {
    const auto self = uav({x, 0}, {30, 0});
    const auto a = navigate_step(pol, on, self, {}, sc, 0, params);
    const auto b = navigate_step(pol, off, self, {}, sc, 0, params);
    EXPECT_EQ(a.speed, b.speed);
    EXPECT_EQ(a.heading, b.heading);
  }
}

TEST(Nav, TrivialScenarioSucceeds) {
  world::ScenarioConfig sc;
  sc.agents = {{{0, 0}, {1.5, 0}, 0.5, 3.0}};
  NavPolicy pol{goal_seeker(0.1), MapMode::perfect, std::nullopt};
  const auto r = run_evaluation(pol, std::span(&sc, 1), cfg().environment("off"), eval_options(true));
  EXPECT_EQ(r.success_rate, 1.0);
  EXPECT_EQ(r.disconnection_rate, 0.0);
  EXPECT_EQ(r.collision_rate, 0.0);
  EXPECT_EQ(r.agent_trials, 1u);
}

TEST(Nav, CorridorCollision) {
  // straight-ahead value dominates the collision penalty
  world::ScenarioConfig sc;
  sc.agents = {{{-6, 0}, {6, 0}, 0.5, 3.0}, {{6, 0}, {-6, 0}, 0.5, 3.0}};
  NavPolicy pol{goal_seeker(10.0), MapMode::perfect, std::nullopt};
  const auto r = run_evaluation(pol, std::span(&sc, 1), cfg().environment("off"), eval_options(true));
  EXPECT_EQ(r.collision_rate, 1.0);
  EXPECT_EQ(r.success_rate, 0.0);
}

TEST(Nav, OutdatedDisconnectsMoreThanPerfect) {
  const auto env = cfg().environment("center_1w");
  std::vector<world::ScenarioConfig> scs;
  for (double y : {-6.0, -2.0, 0.0, 3.0, 7.0}) {
    world::ScenarioConfig sc = cfg().scenarios.base;
    sc.agents = {{{-40, y}, {40, -y}, 0.5, 3.0}};
    scs.push_back(sc);
  }
  const auto opt = eval_options(true);
  const auto outdated = run_evaluation({goal_seeker(0.01), MapMode::outdated, std::nullopt}, scs, env, opt);
  const auto perfect = run_evaluation({goal_seeker(0.01), MapMode::perfect, std::nullopt}, scs, env, opt);
  EXPECT_GT(outdated.disconnection_rate, perfect.disconnection_rate);
  EXPECT_EQ(perfect.disconnection_rate, 0.0);
}

TEST(Nav, JammerOffModesCoincide) {
  const auto env = cfg().environment("off");
  const auto scs = evaluation_scenarios(cfg().scenarios, env, 4, 11);
  Rng rng(2);
  const auto map = sinrmap::make_map_model(6, rng);
  ProposedMapCheck check;
  check.probes = 300;
  const auto cmp = compare_modes(goal_seeker(0.1), map, env, scs, eval_options(true), check, 11);
  ASSERT_EQ(cmp.reports.size(), 3u);
  EXPECT_EQ(cmp.proposed.prior_accuracy, 1.0);
  EXPECT_FALSE(cmp.proposed.use_learned);
  EXPECT_EQ(cmp.reports[0].mode, "proposed");
  for (std::size_t k = 1; k < 3; ++k) {
    EXPECT_EQ(cmp.reports[k].success_rate, cmp.reports[0].success_rate);
    EXPECT_EQ(cmp.reports[k].disconnection_rate, cmp.reports[0].disconnection_rate);
    EXPECT_EQ(cmp.reports[k].collision_rate, cmp.reports[0].collision_rate);
    for (std::size_t t = 0; t < scs.size(); ++t) {
      for (std::size_t a = 0; a < cmp.reports[k].logs[t].agents.size(); ++a) {
        EXPECT_EQ(cmp.reports[k].logs[t].agents[a].steps, cmp.reports[0].logs[t].agents[a].steps);
      }
    }
  }
}

TEST(Nav, PriorCheckDetectsJammer) {
  ProposedMapCheck check;
  check.probes = 1000;
  EXPECT_TRUE(check_prior_map(cfg().environment("center_1w"), check, 5).use_learned);
  EXPECT_TRUE(check_prior_map(cfg().environment("southeast_1w"), check, 5).use_learned);
  EXPECT_FALSE(check_prior_map(cfg().environment("off"), check, 5).use_learned);
}

TEST(Nav, SummaryMatchesLogs) {
  MetricsReport r;
  r.logs.resize(2);
  r.logs[0].agents = {{true, false, false, 10}, {true, true, false, 10}};
  r.logs[1].agents = {{false, false, true, 4}, {true, false, true, 30}};
  summarize(r);
  EXPECT_EQ(r.trials, 2u);
  EXPECT_EQ(r.agent_trials, 4u);
  EXPECT_DOUBLE_EQ(r.success_rate, 0.5);
  EXPECT_DOUBLE_EQ(r.collision_rate, 0.25);
  EXPECT_DOUBLE_EQ(r.disconnection_rate, 0.5);
}

TEST(Nav, EvaluationDeterministicAndJson) {
  const auto env = cfg().environment("center_1w");
  const auto scs = evaluation_scenarios(cfg().scenarios, env, 3, 4);
  Rng rng(2);
  const auto map = sinrmap::make_map_model(6, rng);
  const auto a = compare_modes(goal_seeker(0.1), map, env, scs, eval_options(true), ProposedMapCheck{}, 4);
  const auto b = compare_modes(goal_seeker(0.1), map, env, scs, eval_options(true), ProposedMapCheck{}, 4);
  const auto ja = report_json(a, "d", "center_1w");
  EXPECT_EQ(ja, report_json(b, "d", "center_1w"));
  const auto j = nlohmann::json::parse(ja);
  EXPECT_EQ(j["preset"], "center_1w");
  ASSERT_EQ(j["modes"].size(), 3u);
  EXPECT_EQ(j["modes"][1]["mode"], "outdated");
  EXPECT_EQ(j["modes"][2]["mode"], "perfect");
  EXPECT_EQ(j["modes"][0]["agent_trials"], 3u * cfg().scenarios.num_agents);
}
