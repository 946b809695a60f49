#pragma once

// Multi-UAV kinematics, agent-centric observations, per-transition rewards and
// synchronous stepping of all agents.

#include <cstddef>
#include <deque>
#include <iosfwd>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "uavnav/geometry.hpp"
#include "uavnav/radio.hpp"

namespace uavnav::world {

struct UavState {
  Vec2 position;
  Vec2 velocity;
  double radius = 0.5;
  Vec2 destination;
  double max_speed = 3.0;
  /// Heading in (-pi, pi].
  double orientation = 0.0;
  bool arrived = false;
};

/// What other agents can see of a UAV, plus the velocity used to extrapolate it.
struct ObservedNeighbor {
  Vec2 position;
  Vec2 velocity;
  double radius = 0.5;
  Vec2 filtered_velocity;
};

struct Action {
  double speed = 0.0;
  double heading = 0.0;
};

struct AgentSpec {
  Vec2 start;
  Vec2 destination;
  double radius = 0.5;
  double max_speed = 3.0;
};

struct ScenarioConfig {
  std::vector<AgentSpec> agents;
  double dt = 0.5;
  int n_t = 4;
  double turn_rate_limit = std::numbers::pi / 3.0;
  int max_episode_steps = 200;
  double arrival_tolerance = 0.5;

  /// Throws std::invalid_argument on a broken invariant.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Observation

inline constexpr std::size_t kSelfFeatures = 9;
inline constexpr std::size_t kNeighborFeatures = 6;

struct ObservationConfig {
  std::size_t max_neighbors = 4;
  /// Distance written into empty neighbor slots.
  double absent_distance = 400.0;
};

inline constexpr std::size_t joint_state_length(std::size_t max_neighbors) {
  return kSelfFeatures + kNeighborFeatures * max_neighbors + 1;
}

/// Flattened joint state: [self(9) | neighbor blocks(6 each) | sinr level].
/// Self block: vx, vy, dest_x, dest_y, dest_dist, dest_azimuth, radius, v_max, heading.
/// Neighbor block: px, py, vx, vy, dist, azimuth.
struct JointState {
  std::vector<double> features;

  std::size_t max_neighbors() const {
    return (features.size() - kSelfFeatures - 1) / kNeighborFeatures;
  }
  int sinr_level() const { return static_cast<int>(features.back()); }
};

/// Expresses the observation in a frame centered on `self` whose +x axis points at
/// the destination. Neighbors are sorted by distance and the nearest
/// max_neighbors are kept.
JointState to_agent_frame(const UavState& self, std::span<const ObservedNeighbor> neighbors,
                          int sinr_level, const ObservationConfig& cfg);

// ---------------------------------------------------------------------------
// Actions and kinematics

/// Grid of n_speeds evenly spaced speeds in [0, v_max] times n_headings evenly
/// spaced headings within the turn-rate cone, speed-major. The current heading is
/// always included.
std::vector<Action> sample_action_space(const UavState& self, const ScenarioConfig& config,
                                        std::size_t n_speeds, std::size_t n_headings);

bool admissible(const UavState& self, const Action& action, double dt, double turn_rate_limit);

/// Moves one step. If the destination is within arrival_tolerance of the traversed
/// segment the UAV snaps onto it and is marked arrived.
UavState propagate(const UavState& state, const Action& action, double dt,
                   double arrival_tolerance = 0.0);

/// Closest approach between `mover` (at its position, moving with its velocity) and
/// each neighbor (moving with its filtered velocity) over [0, dt]. Infinity when
/// there are no neighbors.
double min_future_distance(const UavState& mover, std::span<const ObservedNeighbor> neighbors,
                           double dt);

// ---------------------------------------------------------------------------
// Rewards

struct RewardParams {
  double sinr_threshold = 0.50118723362727224;
  double margin = 0.1;
  double collision_ramp = 0.2;
  double arrival_reward = 2.0;
  double step_penalty = -0.05;
};

struct RewardBreakdown {
  double connectivity = 0.0;
  double collision = 0.0;
  double arrival = 0.0;
  double movement = 0.0;
  double total = 0.0;
};

bool gated_step(int t, int n_t);

double reward_connectivity(int t, int n_t, double next_sinr, const RewardParams& params);
/// Same bands expressed on a quantized level (0, 1, 2).
double reward_connectivity_level(int t, int n_t, int next_level);
double reward_collision(double d_min, double r_i, double r_j, double ramp = 0.2);

RewardBreakdown reward_total(int t, int n_t, double next_sinr, double d_min, double r_i,
                             double r_j, bool arrived_next, const RewardParams& params);
RewardBreakdown combine_rewards(double connectivity, double collision, bool arrived_next,
                                const RewardParams& params);

/// Most negative collision reward of `mover` against all neighbors over the step.
double collision_reward_against(const UavState& mover, std::span<const ObservedNeighbor> neighbors,
                                double dt, double ramp);

// ---------------------------------------------------------------------------
// Episode state

struct AgentStatus {
  bool arrived = false;
  bool collided = false;
  bool terminated = false;
  bool ever_disconnected = false;
  int consecutive_disconnects = 0;
  int steps = 0;
};

struct WorldOptions {
  RewardParams rewards;
  std::size_t velocity_filter_window = 1;
  /// A collided agent stops and leaves the simulation.
  bool terminate_on_collision = true;
  /// A failed gated connectivity check ends that agent's mission.
  bool terminate_on_disconnect = false;
};

struct StepFlags {
  bool arrived = false;
  bool collided = false;
  bool disconnected = false;
};

class World {
 public:
  World(ScenarioConfig scenario, WorldOptions options);

  const ScenarioConfig& scenario() const { return scenario_; }
  const WorldOptions& options() const { return options_; }
  const std::vector<UavState>& agents() const { return agents_; }
  const std::vector<AgentStatus>& status() const { return status_; }
  int t() const { return t_; }

  /// Still flying: not arrived and not terminated.
  bool active(std::size_t i) const;
  std::size_t active_count() const;
  bool done() const;

  /// Other agents still flying, as seen by agent i.
  std::vector<ObservedNeighbor> neighbors_of(std::size_t i) const;
  Vec2 filtered_velocity(std::size_t i) const;

  struct StepResult {
    std::vector<RewardBreakdown> rewards;
    std::vector<StepFlags> flags;
  };

  /// Moves all active agents simultaneously. `actions` has one entry per agent;
  /// entries of inactive agents are ignored.
  StepResult step_all(std::span<const Action> actions, const radio::RadioEnvironment& env);

 private:
  ScenarioConfig scenario_;
  WorldOptions options_;
  std::vector<UavState> agents_;
  std::vector<AgentStatus> status_;
  std::vector<std::deque<Vec2>> velocity_history_;
  int t_ = 0;
};

// ---------------------------------------------------------------------------
// Scenario sampling

struct ScenarioGenerator {
  double half_width = 50.0;
  /// Keeps sampled points this far inside the arena edge.
  double edge_margin = 5.0;
  std::size_t num_agents = 4;
  double radius = 0.5;
  double max_speed = 3.0;
  double min_start_goal_distance = 50.0;
  /// Pairwise start (and goal) separation, in multiples of the radius sum.
  double separation_factor = 4.0;
  /// Starts and goals must see at least this quantized level.
  int min_endpoint_level = radio::kLevelConnected;
  ScenarioConfig base;

  ScenarioConfig generate(Rng& rng, const radio::RadioEnvironment& env) const;
};

// ---------------------------------------------------------------------------
// Trajectory export

struct TrajectoryRow {
  long long episode = 0;
  int t = 0;
  std::size_t agent = 0;
  Vec2 position;
  Vec2 velocity;
  double sinr_db = 0.0;
  int level = 0;
  bool arrived = false;
  bool collided = false;
  bool disconnected = false;
};

void record_trajectory(const World& world, const radio::RadioEnvironment& env, long long episode,
                       std::vector<TrajectoryRow>& out);
void write_trajectory_csv(std::ostream& os, std::span<const TrajectoryRow> rows);
std::vector<TrajectoryRow> read_trajectory_csv(std::istream& is);

inline constexpr const char* kTrajectoryHeader =
    "episode,t,agent,x,y,vx,vy,sinr_db,level,arrived,collided,disconnected";

}  // namespace uavnav::world
