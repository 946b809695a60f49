#include "uavnav/nav.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

namespace uavnav::nav {

std::string to_string(MapMode m) {
  switch (m) {
    case MapMode::learned: return "proposed";
    case MapMode::perfect: return "perfect";
    case MapMode::outdated: return "outdated";
  }
  return "perfect";
}

MapMode map_mode_from_string(const std::string& s) {
  if (s == "proposed" || s == "learned") return MapMode::learned;
  if (s == "perfect") return MapMode::perfect;
  if (s == "outdated") return MapMode::outdated;
  throw std::invalid_argument("unknown map mode '" + s + "'");
}

valuetrain::SinrOracle make_oracle(const NavPolicy& policy, const radio::RadioEnvironment& env_truth) {
  switch (policy.mode) {
    case MapMode::perfect:
      return [env = env_truth](const Vec2& p) { return radio::sinr_level(env, p).level; };
    case MapMode::outdated:
      return [env = env_truth.without_jammer()](const Vec2& p) {
        return radio::sinr_level(env, p).level;
      };
    case MapMode::learned: {
      if (!policy.map) throw std::invalid_argument("learned map mode needs a map model");
      // Station geometry is observable; only the level comes from the regressor.
      return [map = *policy.map, stations = env_truth.stations(),
              altitude = env_truth.uav_altitude()](const Vec2& p) {
        return sinrmap::predict_level(map, sinrmap::featurize(p, stations, altitude, map.k_n));
      };
    }
  }
  throw std::logic_error("unreachable map mode");
}

world::Action navigate_step(const NavPolicy& policy, const valuetrain::SinrOracle& oracle,
                            const world::UavState& self,
                            std::span<const world::ObservedNeighbor> neighbors,
                            const world::ScenarioConfig& scenario, int t, const NavParams& params) {
  if (self.arrived) throw std::invalid_argument("navigate_step: agent already arrived");
  const auto space = world::sample_action_space(self, scenario, params.n_speeds, params.n_headings);
  valuetrain::LookaheadContext ctx;
  ctx.gamma = params.gamma;
  ctx.dt = scenario.dt;
  ctx.t = t;
  ctx.n_t = scenario.n_t;
  ctx.arrival_tolerance = scenario.arrival_tolerance;
  ctx.reward_scale = params.reward_scale;
  ctx.gated = params.gated_lookahead;
  ctx.rewards = params.rewards;
  ctx.observation = params.observation;
  return valuetrain::lookahead_select(policy.value_net, self, neighbors, space, oracle, ctx);
}

void summarize(MetricsReport& r) {
  r.trials = r.logs.size();
  r.agent_trials = r.successes = r.disconnections = r.collisions = 0;
  for (const auto& log : r.logs) {
    for (const auto& a : log.agents) {
      ++r.agent_trials;
      if (a.arrived && !a.collided) ++r.successes;
      if (a.disconnected) ++r.disconnections;
      if (a.collided) ++r.collisions;
    }
  }
  const double n = r.agent_trials ? static_cast<double>(r.agent_trials) : 1.0;
  r.success_rate = static_cast<double>(r.successes) / n;
  r.disconnection_rate = static_cast<double>(r.disconnections) / n;
  r.collision_rate = static_cast<double>(r.collisions) / n;
}

MetricsReport run_evaluation(const NavPolicy& policy, std::span<const world::ScenarioConfig> scenarios,
                             const radio::RadioEnvironment& env_truth, const EvalOptions& options,
                             std::vector<world::TrajectoryRow>* trajectories) {
  if (scenarios.empty()) throw std::invalid_argument("run_evaluation: need at least one trial");
  MetricsReport report;
  report.mode = to_string(policy.mode);
  const auto oracle = make_oracle(policy, env_truth);

  for (std::size_t trial = 0; trial < scenarios.size(); ++trial) {
    const auto& scenario = scenarios[trial];
    world::World w(scenario, options.world);
    const std::size_t n = w.agents().size();
    const bool record = trajectories && std::find(options.record_trials.begin(),
                                                  options.record_trials.end(),
                                                  trial) != options.record_trials.end();
    if (record) world::record_trajectory(w, env_truth, static_cast<long long>(trial), *trajectories);
    std::vector<world::Action> actions(n);
    while (!w.done()) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!w.active(i)) continue;
        const auto neighbors = w.neighbors_of(i);
        actions[i] = navigate_step(policy, oracle, w.agents()[i], neighbors, scenario, w.t(), options.nav);
      }
      w.step_all(actions, env_truth);
      if (record) world::record_trajectory(w, env_truth, static_cast<long long>(trial), *trajectories);
    }
    TrialLog log;
    log.trial = trial;
    for (const auto& st : w.status()) {
      log.agents.push_back({st.arrived, st.collided, st.ever_disconnected, st.steps});
    }
    report.logs.push_back(std::move(log));
  }
  summarize(report);
  return report;
}

std::vector<world::ScenarioConfig> evaluation_scenarios(const world::ScenarioGenerator& generator,
                                                        const radio::RadioEnvironment& env_truth,
                                                        std::size_t trials, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x45564131ULL));
  std::vector<world::ScenarioConfig> out;
  out.reserve(trials);
  for (std::size_t i = 0; i < trials; ++i) out.push_back(generator.generate(rng, env_truth));
  return out;
}

ProposedDecision check_prior_map(const radio::RadioEnvironment& env_truth,
                                 const ProposedMapCheck& check, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x50524f42ULL));
  const auto prior = env_truth.without_jammer();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < check.probes; ++i) {
    const Vec2 p{uniform(rng, check.bounds.xmin, check.bounds.xmax),
                 uniform(rng, check.bounds.ymin, check.bounds.ymax)};
    if (radio::sinr_level(prior, p).level == radio::sinr_level(env_truth, p).level) ++hits;
  }
  ProposedDecision d;
  d.prior_accuracy = check.probes == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(check.probes);
  // The prior map was exact when it was made, so its baseline accuracy is 1.
  d.use_learned = sinrmap::detect_change(d.prior_accuracy, 1.0, check.drop_threshold);
  return d;
}

ModeComparison compare_modes(const neuro::NetworkParams& value_net, const sinrmap::MapModel& map_model,
                             const radio::RadioEnvironment& env_truth,
                             std::span<const world::ScenarioConfig> scenarios, const EvalOptions& options,
                             const ProposedMapCheck& check, std::uint64_t seed,
                             bool keep_trajectories) {
  ModeComparison cmp;
  cmp.seed = seed;
  cmp.proposed = check_prior_map(env_truth, check, seed);

  NavPolicy proposed{value_net, cmp.proposed.use_learned ? MapMode::learned : MapMode::outdated,
                     map_model};
  NavPolicy outdated{value_net, MapMode::outdated, std::nullopt};
  NavPolicy perfect{value_net, MapMode::perfect, std::nullopt};

  for (const NavPolicy* p : {&proposed, &outdated, &perfect}) {
    std::vector<world::TrajectoryRow> rows;
    auto report = run_evaluation(*p, scenarios, env_truth, options, keep_trajectories ? &rows : nullptr);
    report.mode = to_string(p->mode);
    cmp.reports.push_back(std::move(report));
    if (keep_trajectories) cmp.trajectories.push_back(std::move(rows));
  }
  cmp.reports[0].mode = "proposed";
  return cmp;
}

std::string report_json(const ModeComparison& cmp, const std::string& env_digest,
                        const std::string& preset) {
  nlohmann::ordered_json j;
  j["format"] = "uavnav-eval v1";
  j["env_digest"] = env_digest;
  j["preset"] = preset;
  j["seed"] = cmp.seed;
  j["proposed_prior_accuracy"] = cmp.proposed.prior_accuracy;
  j["proposed_uses_learned_map"] = cmp.proposed.use_learned;
  auto modes = nlohmann::ordered_json::array();
  for (const auto& r : cmp.reports) {
    nlohmann::ordered_json m;
    m["mode"] = r.mode;
    m["trials"] = r.trials;
    m["agent_trials"] = r.agent_trials;
    m["success_rate"] = r.success_rate;
    m["disconnection_rate"] = r.disconnection_rate;
    m["collision_rate"] = r.collision_rate;
    m["successes"] = r.successes;
    m["disconnections"] = r.disconnections;
    m["collisions"] = r.collisions;
    modes.push_back(std::move(m));
  }
  j["modes"] = std::move(modes);
  return j.dump(2) + "\n";
}

}  // namespace uavnav::nav
