#pragma once

// Run configuration: one YAML file covering the radio environment, the world,
// bootstrap, training, mapping and evaluation. Unknown keys are rejected and
// every error carries the line it refers to.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "uavnav/nav.hpp"
#include "uavnav/orca.hpp"
#include "uavnav/radio.hpp"
#include "uavnav/sinrmap.hpp"
#include "uavnav/valuetrain.hpp"
#include "uavnav/world.hpp"

namespace uavnav::config {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

struct JammerPreset {
  Vec2 position;
  double tx_power = 1.0;
  bool active = true;
};

struct MappingConfig {
  std::size_t k_n = sinrmap::kDefaultNearest;
  neuro::TrainConfig train{0.005, 200, 1e-4, 60};
  std::size_t measurements = 20000;
  sinrmap::MapperConfig mapper;
};

struct EvaluationConfig {
  std::size_t trials = 100;
  /// Added to the run seed so evaluation scenarios never coincide with training ones.
  std::uint64_t seed_offset = 1000003;
  std::size_t probes = 200;
  std::vector<std::size_t> record_trials{0, 1, 2};
};

struct RunConfig {
  std::uint64_t seed = 1;

  std::vector<radio::GroundStation> stations;
  radio::RadioParams radio;
  std::optional<radio::Jammer> jammer;
  std::map<std::string, JammerPreset> presets;
  double jammer_height = 0.0;

  world::ScenarioGenerator scenarios;
  world::ObservationConfig observation;
  world::WorldOptions world;
  std::size_t n_speeds = 4;
  std::size_t n_headings = 7;

  std::size_t bootstrap_episodes = 500;
  orca::OrcaConfig orca;

  valuetrain::TrainRunConfig training;
  MappingConfig mapping;
  EvaluationConfig evaluation;

  radio::Bounds arena() const;
  /// Environment with the configured jammer, or with a named preset applied.
  radio::RadioEnvironment environment(const std::string& preset = "") const;
  /// Re-derives the module configs that mirror shared settings (seed, rewards,
  /// action grid) and checks every cross-module invariant.
  void finalize();
};

RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

/// Canonical text of the resolved configuration; its SHA-256 is the environment digest.
std::string canonical_text(const RunConfig& config);
std::string digest(const RunConfig& config);

}  // namespace uavnav::config
