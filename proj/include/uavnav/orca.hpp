#pragma once

// Optimal reciprocal collision avoidance (van den Berg et al.) for the bootstrap
// policy. Each neighbor contributes one half-plane of permitted velocities and the
// new velocity solves a small 2D linear program over those half-planes and the
// max-speed disc.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uavnav/radio.hpp"
#include "uavnav/world.hpp"

namespace uavnav::orca {

/// Velocities v with dot(v - point, normal) >= 0 are permitted.
struct HalfPlane {
  Vec2 point;
  Vec2 normal;

  bool permits(const Vec2& v, double tol = 0.0) const { return dot(v - point, normal) >= -tol; }
};

struct OrcaConfig {
  double time_horizon = 5.0;
  double neighbor_range = 15.0;
  /// Rotation applied to every preferred velocity, radians.
  double perturbation = 1e-3;
  /// Added to the own radius when building constraints. With a 0.5 s step an
  /// exactly tangent avoidance velocity grazes the neighbor.
  double safety_margin = 0.2;
};

HalfPlane orca_halfplane(const world::UavState& self, const world::ObservedNeighbor& neighbor,
                         double time_horizon, double dt);

/// Velocity closest to `preferred` satisfying every neighbor half-plane and
/// |v| <= max_speed. Falls back to the velocity that minimizes the largest
/// violation when the program is infeasible.
Vec2 orca_velocity(const world::UavState& self, std::span<const world::ObservedNeighbor> neighbors,
                   const Vec2& preferred, const OrcaConfig& config, double dt);

/// v_max toward the destination (slowed to land on it), rotated by the perturbation.
Vec2 preferred_velocity(const world::UavState& self, double dt, double perturbation);

/// Closest admissible action: heading clamped to the turn cone, speed projected on it.
world::Action to_admissible_action(const world::UavState& self, const Vec2& velocity,
                                   const world::ScenarioConfig& scenario);

/// One ORCA step for every active agent of the world.
std::vector<world::Action> orca_actions(const world::World& w, const OrcaConfig& config);

struct BootstrapPair {
  std::vector<double> features;
  double value = 0.0;
};

struct BootstrapSet {
  std::vector<BootstrapPair> pairs;
  std::size_t episodes = 0;
  std::size_t skipped_episodes = 0;
  std::size_t collisions = 0;
};

struct BootstrapEpisode {
  world::ScenarioConfig scenario;
  radio::RadioEnvironment env;
};

struct BootstrapOptions {
  double gamma = 0.95;
  world::ObservationConfig observation;
  world::WorldOptions world;
  OrcaConfig orca;
};

/// Rolls out ORCA on every scenario and labels each visited joint state with its
/// discounted return-to-go (unscaled).
BootstrapSet generate_bootstrap_set(std::span<const BootstrapEpisode> episodes,
                                    const BootstrapOptions& options);
BootstrapSet generate_bootstrap_set(std::span<const world::ScenarioConfig> scenarios,
                                    const radio::RadioEnvironment& env,
                                    const BootstrapOptions& options);

/// Text format: "# uavnav-bootstrap v1" header, metadata comment lines, then one
/// CSV row per pair (features..., value).
void write_bootstrap(std::ostream& os, const BootstrapSet& set, const std::vector<double>& mean,
                     const std::vector<double>& std_dev, const std::string& digest);

struct LoadedBootstrap {
  BootstrapSet set;
  std::vector<double> mean;
  std::vector<double> std_dev;
  std::string digest;
};

LoadedBootstrap read_bootstrap(std::istream& is);

}  // namespace uavnav::orca
