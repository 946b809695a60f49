#pragma once

// Offline value-network learning: epsilon-greedy rollouts scored by one-step
// lookahead against a radio map, Monte-Carlo targets, replay and a jammer that
// moves every few thousand episodes.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uavnav/neuro.hpp"
#include "uavnav/orca.hpp"
#include "uavnav/radio.hpp"
#include "uavnav/world.hpp"

namespace uavnav::valuetrain {

struct EpsilonSchedule {
  double start = 0.5;
  double end = 0.1;
  long long decay_episodes = 2000;
};

double epsilon(long long episode, const EpsilonSchedule& schedule);

/// Maps a position to a quantized SINR level.
using SinrOracle = std::function<int(const Vec2&)>;

struct LookaheadContext {
  double gamma = 0.95;
  double dt = 0.5;
  /// Step index of the transition being chosen; decides whether the gated
  /// connectivity term applies.
  int t = 0;
  int n_t = 4;
  double arrival_tolerance = 0.5;
  double reward_scale = 0.5;
  /// false scores a disconnected candidate on every step, not only on steps
  /// where the world checks it. The marginal band stays gated either way.
  bool gated = true;
  world::RewardParams rewards;
  world::ObservationConfig observation;
};

struct LookaheadScore {
  double reward = 0.0;
  double value = 0.0;
  double score = 0.0;
  int next_level = 0;
};

/// Scores every candidate; the returned vector is parallel to `actions`.
std::vector<LookaheadScore> lookahead_scores(const neuro::NetworkParams& value_net,
                                             const world::UavState& self,
                                             std::span<const world::ObservedNeighbor> neighbors,
                                             std::span<const world::Action> actions,
                                             const SinrOracle& oracle, const LookaheadContext& ctx);

/// argmax of reward_scale * R + gamma * V(next state); first candidate wins ties.
world::Action lookahead_select(const neuro::NetworkParams& value_net, const world::UavState& self,
                               std::span<const world::ObservedNeighbor> neighbors,
                               std::span<const world::Action> actions, const SinrOracle& oracle,
                               const LookaheadContext& ctx);
std::size_t lookahead_index(const neuro::NetworkParams& value_net, const world::UavState& self,
                            std::span<const world::ObservedNeighbor> neighbors,
                            std::span<const world::Action> actions, const SinrOracle& oracle,
                            const LookaheadContext& ctx);

/// target_t = sum over t' >= t of gamma^(t'-t) * R_t'
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma,
                                       double tail_value = 0.0);

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(std::span<const double> features, double target);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  /// i-th oldest entry.
  std::span<const double> features(std::size_t i) const;
  double target(std::size_t i) const;

  /// Draws `n` entries uniformly with replacement into column-major matrices.
  void sample(std::size_t n, Rng& rng, Eigen::MatrixXd& inputs, Eigen::MatrixXd& targets) const;
  std::string digest() const;

  void write_binary(std::ostream& os) const;
  static ReplayBuffer read_binary(std::istream& is);

 private:
  std::size_t slot(std::size_t i) const { return (head_ + i) % capacity_; }

  std::size_t capacity_;
  std::size_t dim_ = 0;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
  std::vector<double> data_;  // capacity * dim, allocated on first push
  std::vector<double> targets_;
};

struct JammerSchedule {
  long long change_period = 2000;
  double half_width = 50.0;
  std::vector<double> power_choices{0.5, 1.0};
  double height = 0.0;
  /// When set, the first period uses this jammer instead of a random draw.
  std::optional<radio::Jammer> initial;

  radio::Jammer jammer_for_episode(long long episode, std::uint64_t seed) const;
};

struct EpisodeLog {
  std::vector<double> reward_sums;
  std::vector<bool> arrived;
  std::vector<bool> collided;
  std::vector<bool> disconnected;
  int steps = 0;
  double epsilon = 0.0;

  /// Mean over agents of the per-agent reward sum.
  double accumulated_reward() const;
};

struct EpisodeOptions {
  std::size_t n_speeds = 4;
  std::size_t n_headings = 7;
  double gamma = 0.95;
  double reward_scale = 0.5;
  bool gated_lookahead = true;
  /// Adds gamma^k * V(s_T) to returns of agents cut off by the step cap.
  bool bootstrap_truncated = true;
  world::ObservationConfig observation;
  world::WorldOptions world;
};

/// Rolls out one episode against `env` (which doubles as the radio map) and pushes
/// scaled (state, return) pairs into the buffer.
EpisodeLog run_episode(const neuro::NetworkParams& value_net, const radio::RadioEnvironment& env,
                       const world::ScenarioConfig& scenario, double eps, ReplayBuffer& buffer,
                       Rng& rng, const EpisodeOptions& options);

struct TrainRunConfig {
  long long total_episodes = 5000;
  EpsilonSchedule epsilon;
  double epsilon_decay_fraction = 0.4;
  EpisodeOptions episode;
  std::size_t replay_capacity = 100000;
  std::size_t updates_per_episode = 1;
  neuro::TrainConfig optimizer{0.001, 200, 1e-4, 1};
  std::size_t pretrain_epochs = 20;
  long long checkpoint_every = 1000;
  std::uint64_t seed = 1;
  JammerSchedule jammers;
  world::ScenarioGenerator scenarios;
};

struct CurveRow {
  long long episode = 0;
  double accumulated_reward = 0.0;
  double epsilon = 0.0;
  radio::Jammer jammer;
  double success_fraction = 0.0;
};

struct TrainResult {
  neuro::NetworkParams net;
  std::vector<CurveRow> curve;
  std::vector<double> pretrain_loss;
  long long start_episode = 0;
};

struct TrainIo {
  /// Directory for the rolling checkpoint; empty disables checkpoints.
  std::string checkpoint_dir;
  bool resume = false;
  std::function<void(const CurveRow&)> on_episode;
};

/// `base_env` supplies stations and radio constants; its jammer is replaced by the schedule.
TrainResult train(const TrainRunConfig& config, const radio::RadioEnvironment& base_env,
                  const orca::BootstrapSet& bootstrap, const TrainIo& io = {});

void write_curve_csv(std::ostream& os, std::span<const CurveRow> rows);
std::vector<CurveRow> read_curve_csv(std::istream& is);

inline constexpr const char* kCurveHeader =
    "episode,accumulated_reward,epsilon,jammer_x,jammer_y,jammer_power,success_fraction";

}  // namespace uavnav::valuetrain
