#pragma once

// Real-time navigation with a trained value network and a radio map, plus the
// evaluation harness that compares three map sources on identical scenarios.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uavnav/neuro.hpp"
#include "uavnav/radio.hpp"
#include "uavnav/sinrmap.hpp"
#include "uavnav/valuetrain.hpp"
#include "uavnav/world.hpp"

namespace uavnav::nav {

enum class MapMode { learned, perfect, outdated };

std::string to_string(MapMode m);
MapMode map_mode_from_string(const std::string& s);

struct NavPolicy {
  neuro::NetworkParams value_net;
  MapMode mode = MapMode::perfect;
  /// Required in learned mode.
  std::optional<sinrmap::MapModel> map;
};

/// Radio map the policy believes in, evaluated against the true environment
/// only where the mode allows it.
valuetrain::SinrOracle make_oracle(const NavPolicy& policy, const radio::RadioEnvironment& env_truth);

struct NavParams {
  std::size_t n_speeds = 4;
  std::size_t n_headings = 7;
  double gamma = 0.95;
  double reward_scale = 0.5;
  bool gated_lookahead = true;
  world::ObservationConfig observation;
  world::RewardParams rewards;
};

world::Action navigate_step(const NavPolicy& policy, const valuetrain::SinrOracle& oracle,
                            const world::UavState& self,
                            std::span<const world::ObservedNeighbor> neighbors,
                            const world::ScenarioConfig& scenario, int t, const NavParams& params);

struct AgentOutcome {
  bool arrived = false;
  bool collided = false;
  bool disconnected = false;
  int steps = 0;
};

struct TrialLog {
  std::size_t trial = 0;
  std::vector<AgentOutcome> agents;
};

struct MetricsReport {
  std::string mode;
  double success_rate = 0.0;
  double disconnection_rate = 0.0;
  double collision_rate = 0.0;
  std::size_t trials = 0;
  std::size_t agent_trials = 0;
  std::size_t successes = 0;
  std::size_t disconnections = 0;
  std::size_t collisions = 0;
  std::vector<TrialLog> logs;
};

/// Recomputes the summary counts and rates from the per-trial logs.
void summarize(MetricsReport& report);

struct EvalOptions {
  NavParams nav;
  world::WorldOptions world;
  /// Trials whose trajectories are recorded.
  std::vector<std::size_t> record_trials;
};

MetricsReport run_evaluation(const NavPolicy& policy, std::span<const world::ScenarioConfig> scenarios,
                             const radio::RadioEnvironment& env_truth, const EvalOptions& options,
                             std::vector<world::TrajectoryRow>* trajectories = nullptr);

/// Scenarios for evaluation come from the training generator on a separate seed stream.
std::vector<world::ScenarioConfig> evaluation_scenarios(const world::ScenarioGenerator& generator,
                                                        const radio::RadioEnvironment& env_truth,
                                                        std::size_t trials, std::uint64_t seed);

struct ProposedMapCheck {
  std::size_t probes = 200;
  double drop_threshold = 0.10;
  radio::Bounds bounds{-50.0, -50.0, 50.0, 50.0};
};

struct ProposedDecision {
  double prior_accuracy = 1.0;
  bool use_learned = false;
};

/// The proposed scheme flies on the jammer-free prior map until probe
/// measurements show it has gone stale, then on the learned map.
ProposedDecision check_prior_map(const radio::RadioEnvironment& env_truth,
                                 const ProposedMapCheck& check, std::uint64_t seed);

struct ModeComparison {
  std::vector<MetricsReport> reports;  // proposed, outdated, perfect
  ProposedDecision proposed;
  std::uint64_t seed = 0;
  std::vector<std::vector<world::TrajectoryRow>> trajectories;
};

ModeComparison compare_modes(const neuro::NetworkParams& value_net, const sinrmap::MapModel& map_model,
                             const radio::RadioEnvironment& env_truth,
                             std::span<const world::ScenarioConfig> scenarios, const EvalOptions& options,
                             const ProposedMapCheck& check, std::uint64_t seed,
                             bool keep_trajectories = false);

/// JSON text of a comparison. `env_digest` identifies the resolved configuration.
std::string report_json(const ModeComparison& cmp, const std::string& env_digest,
                        const std::string& preset);

}  // namespace uavnav::nav
