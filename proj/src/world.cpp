#include "uavnav/world.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "uavnav/io.hpp"

namespace uavnav::world {

void ScenarioConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("scenario: dt must be > 0");
  if (n_t < 1) throw std::invalid_argument("scenario: n_t must be >= 1");
  if (!(turn_rate_limit > 0.0)) throw std::invalid_argument("scenario: turn_rate_limit must be > 0");
  if (max_episode_steps < 1) throw std::invalid_argument("scenario: max_episode_steps must be >= 1");
  if (!(arrival_tolerance >= 0.0)) throw std::invalid_argument("scenario: arrival_tolerance must be >= 0");
  if (agents.empty()) throw std::invalid_argument("scenario: no agents");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    if (!(a.radius > 0.0)) throw std::invalid_argument("scenario: radius must be > 0");
    if (!(a.max_speed > 0.0)) throw std::invalid_argument("scenario: max_speed must be > 0");
    for (std::size_t j = 0; j < i; ++j) {
      if (!(distance(a.start, agents[j].start) > a.radius + agents[j].radius)) {
        throw std::invalid_argument("scenario: starts " + std::to_string(j) + " and " +
                                    std::to_string(i) + " overlap");
      }
    }
  }
}

JointState to_agent_frame(const UavState& self, std::span<const ObservedNeighbor> neighbors,
                          int sinr_level, const ObservationConfig& cfg) {
  JointState js;
  js.features.assign(joint_state_length(cfg.max_neighbors), 0.0);
  auto& f = js.features;

  const Vec2 to_dest = self.destination - self.position;
  const double dest_dist = norm(to_dest);
  const double frame = dest_dist > 0.0 ? std::atan2(to_dest.y, to_dest.x) : 0.0;

  const Vec2 v = rotate(self.velocity, -frame);
  f[0] = v.x;
  f[1] = v.y;
  f[2] = dest_dist;
  f[3] = 0.0;
  f[4] = dest_dist;
  f[5] = 0.0;
  f[6] = self.radius;
  f[7] = self.max_speed;
  f[8] = wrap_angle(self.orientation - frame);

  std::vector<std::size_t> order(neighbors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return distance(neighbors[a].position, self.position) <
           distance(neighbors[b].position, self.position);
  });

  for (std::size_t slot = 0; slot < cfg.max_neighbors; ++slot) {
    double* block = f.data() + kSelfFeatures + slot * kNeighborFeatures;
    if (slot >= order.size()) {
      block[4] = cfg.absent_distance;
      continue;
    }
    const auto& n = neighbors[order[slot]];
    const Vec2 p = rotate(n.position - self.position, -frame);
    const Vec2 nv = rotate(n.velocity, -frame);
    block[0] = p.x;
    block[1] = p.y;
    block[2] = nv.x;
    block[3] = nv.y;
    block[4] = norm(p);
    block[5] = std::atan2(p.y, p.x);
  }
  f.back() = static_cast<double>(sinr_level);
  return js;
}

std::vector<Action> sample_action_space(const UavState& self, const ScenarioConfig& config,
                                        std::size_t n_speeds, std::size_t n_headings) {
  if (n_speeds < 2) throw std::invalid_argument("sample_action_space: n_speeds must be >= 2");
  if (n_headings < 3) throw std::invalid_argument("sample_action_space: n_headings must be >= 3");

  const double cone = config.dt * config.turn_rate_limit;
  std::vector<double> offsets;
  for (std::size_t k = 0; k < n_headings; ++k) {
    offsets.push_back(-cone + 2.0 * cone * static_cast<double>(k) / static_cast<double>(n_headings - 1));
  }
  if (n_headings % 2 == 0) {
    offsets.insert(offsets.begin() + static_cast<std::ptrdiff_t>(n_headings / 2), 0.0);
  } else {
    offsets[n_headings / 2] = 0.0;
  }

  std::vector<Action> actions;
  actions.reserve(n_speeds * offsets.size());
  for (std::size_t s = 0; s < n_speeds; ++s) {
    const double speed =
        self.max_speed * static_cast<double>(s) / static_cast<double>(n_speeds - 1);
    for (double off : offsets) {
      actions.push_back({speed, wrap_angle(self.orientation + off)});
    }
  }
  return actions;
}

bool admissible(const UavState& self, const Action& action, double dt, double turn_rate_limit) {
  constexpr double kTol = 1e-9;
  if (action.speed < -kTol || action.speed > self.max_speed + kTol) return false;
  return std::abs(wrap_angle(action.heading - self.orientation)) <= dt * turn_rate_limit + kTol;
}

UavState propagate(const UavState& state, const Action& action, double dt,
                   double arrival_tolerance) {
  UavState next = state;
  const double speed = std::clamp(action.speed, 0.0, state.max_speed);
  const Vec2 dir = unit_vector(action.heading);
  next.velocity = dir * speed;
  next.orientation = wrap_angle(action.heading);
  next.position = state.position + next.velocity * dt;
  if (!state.arrived &&
      point_segment_distance(state.destination, state.position, next.position) <= arrival_tolerance) {
    next.position = state.destination;
    next.arrived = true;
  }
  return next;
}

double min_future_distance(const UavState& mover, std::span<const ObservedNeighbor> neighbors,
                           double dt) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& n : neighbors) {
    best = std::min(best, closest_approach(mover.position, mover.velocity, n.position,
                                           n.filtered_velocity, dt));
  }
  return best;
}

bool gated_step(int t, int n_t) { return t % n_t == 0; }

double reward_connectivity(int t, int n_t, double next_sinr, const RewardParams& params) {
  if (!gated_step(t, n_t)) return 0.0;
  if (next_sinr < params.sinr_threshold) return -1.0;
  if (next_sinr < params.sinr_threshold + params.margin) return -0.5;
  return 0.0;
}

double reward_connectivity_level(int t, int n_t, int next_level) {
  if (!gated_step(t, n_t)) return 0.0;
  if (next_level <= radio::kLevelDisconnected) return -1.0;
  if (next_level == radio::kLevelMarginal) return -0.5;
  return 0.0;
}

double reward_collision(double d_min, double r_i, double r_j, double ramp) {
  const double gap = d_min - r_i - r_j;
  if (gap <= 0.0) return -1.0;
  if (gap <= ramp) return -(1.0 - gap / ramp);
  return 0.0;
}

RewardBreakdown combine_rewards(double connectivity, double collision, bool arrived_next,
                                const RewardParams& params) {
  RewardBreakdown r;
  r.connectivity = connectivity;
  r.collision = collision;
  r.arrival = arrived_next ? params.arrival_reward : 0.0;
  r.movement = params.step_penalty;
  r.total = r.connectivity + r.collision + r.arrival + r.movement;
  return r;
}

RewardBreakdown reward_total(int t, int n_t, double next_sinr, double d_min, double r_i,
                             double r_j, bool arrived_next, const RewardParams& params) {
  return combine_rewards(reward_connectivity(t, n_t, next_sinr, params),
                         reward_collision(d_min, r_i, r_j, params.collision_ramp), arrived_next,
                         params);
}

double collision_reward_against(const UavState& mover, std::span<const ObservedNeighbor> neighbors,
                                double dt, double ramp) {
  double worst = 0.0;
  for (const auto& n : neighbors) {
    const double d =
        closest_approach(mover.position, mover.velocity, n.position, n.filtered_velocity, dt);
    worst = std::min(worst, reward_collision(d, mover.radius, n.radius, ramp));
  }
  return worst;
}

// ---------------------------------------------------------------------------

World::World(ScenarioConfig scenario, WorldOptions options)
    : scenario_(std::move(scenario)), options_(options) {
  scenario_.validate();
  if (options_.velocity_filter_window < 1) {
    throw std::invalid_argument("world: velocity_filter_window must be >= 1");
  }
  for (const auto& spec : scenario_.agents) {
    UavState s;
    s.position = spec.start;
    s.destination = spec.destination;
    s.radius = spec.radius;
    s.max_speed = spec.max_speed;
    const Vec2 d = spec.destination - spec.start;
    s.orientation = abs_sq(d) > 0.0 ? std::atan2(d.y, d.x) : 0.0;
    agents_.push_back(s);
  }
  status_.resize(agents_.size());
  velocity_history_.resize(agents_.size());
}

bool World::active(std::size_t i) const {
  return !status_[i].arrived && !status_[i].terminated;
}

std::size_t World::active_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < agents_.size(); ++i) n += active(i) ? 1 : 0;
  return n;
}

bool World::done() const { return active_count() == 0 || t_ >= scenario_.max_episode_steps; }

Vec2 World::filtered_velocity(std::size_t i) const {
  const auto& hist = velocity_history_[i];
  if (hist.empty()) return agents_[i].velocity;
  Vec2 sum;
  for (const auto& v : hist) sum += v;
  return sum / static_cast<double>(hist.size());
}

std::vector<ObservedNeighbor> World::neighbors_of(std::size_t i) const {
  std::vector<ObservedNeighbor> out;
  for (std::size_t j = 0; j < agents_.size(); ++j) {
    if (j == i || !active(j)) continue;
    out.push_back({agents_[j].position, agents_[j].velocity, agents_[j].radius, filtered_velocity(j)});
  }
  return out;
}

World::StepResult World::step_all(std::span<const Action> actions,
                                  const radio::RadioEnvironment& env) {
  const std::size_t n = agents_.size();
  if (actions.size() != n) {
    throw std::invalid_argument("step_all: expected " + std::to_string(n) + " actions, got " +
                                std::to_string(actions.size()));
  }
  std::vector<bool> moving(n);
  for (std::size_t i = 0; i < n; ++i) {
    moving[i] = active(i);
    if (moving[i] &&
        !admissible(agents_[i], actions[i], scenario_.dt, scenario_.turn_rate_limit)) {
      throw std::invalid_argument("step_all: inadmissible action for agent " + std::to_string(i));
    }
  }

  std::vector<UavState> next = agents_;
  std::vector<Vec2> displacement_velocity(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!moving[i]) continue;
    next[i] = propagate(agents_[i], actions[i], scenario_.dt, scenario_.arrival_tolerance);
    displacement_velocity[i] = (next[i].position - agents_[i].position) / scenario_.dt;
  }

  StepResult result;
  result.rewards.resize(n);
  result.flags.resize(n);
  std::vector<double> collision_reward(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!moving[i]) continue;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!moving[j]) continue;
      const double d = closest_approach(agents_[i].position, displacement_velocity[i],
                                        agents_[j].position, displacement_velocity[j], scenario_.dt);
      const double rc =
          reward_collision(d, agents_[i].radius, agents_[j].radius, options_.rewards.collision_ramp);
      collision_reward[i] = std::min(collision_reward[i], rc);
      collision_reward[j] = std::min(collision_reward[j], rc);
      if (d <= agents_[i].radius + agents_[j].radius) {
        result.flags[i].collided = true;
        result.flags[j].collided = true;
      }
    }
  }

  const bool gated = gated_step(t_, scenario_.n_t);
  for (std::size_t i = 0; i < n; ++i) {
    if (!moving[i]) continue;
    const double s = radio::sinr(env, next[i].position);
    const double rs = reward_connectivity(t_, scenario_.n_t, s, options_.rewards);
    result.rewards[i] = combine_rewards(rs, collision_reward[i], next[i].arrived, options_.rewards);

    auto& st = status_[i];
    st.steps += 1;
    if (gated) {
      if (s < options_.rewards.sinr_threshold) {
        st.consecutive_disconnects += 1;
        st.ever_disconnected = true;
        result.flags[i].disconnected = true;
      } else {
        st.consecutive_disconnects = 0;
      }
    }
    if (result.flags[i].collided) st.collided = true;
    if (next[i].arrived) {
      st.arrived = true;
      result.flags[i].arrived = true;
      next[i].velocity = Vec2{};
    }
    if ((result.flags[i].collided && options_.terminate_on_collision) ||
        (result.flags[i].disconnected && options_.terminate_on_disconnect)) {
      if (!st.arrived) st.terminated = true;
    }
    auto& hist = velocity_history_[i];
    hist.push_back(next[i].velocity);
    while (hist.size() > options_.velocity_filter_window) hist.pop_front();
  }
  agents_ = std::move(next);
  ++t_;
  return result;
}

// ---------------------------------------------------------------------------

ScenarioConfig ScenarioGenerator::generate(Rng& rng, const radio::RadioEnvironment& env) const {
  constexpr int kMaxAttempts = 100000;
  const double lo = -half_width + edge_margin;
  const double hi = half_width - edge_margin;
  const double min_sep = separation_factor * 2.0 * radius;

  auto sample_point = [&](const std::vector<Vec2>& taken, const Vec2* away_from) {
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      const Vec2 p{uniform(rng, lo, hi), uniform(rng, lo, hi)};
      if (away_from && distance(p, *away_from) < min_start_goal_distance) continue;
      bool clear = true;
      for (const auto& q : taken) clear = clear && distance(p, q) >= min_sep;
      if (!clear) continue;
      if (radio::sinr_level(env, p).level < min_endpoint_level) continue;
      return p;
    }
    throw std::runtime_error("scenario generator: could not place an endpoint");
  };

  ScenarioConfig cfg = base;
  cfg.agents.clear();
  std::vector<Vec2> starts;
  std::vector<Vec2> goals;
  for (std::size_t i = 0; i < num_agents; ++i) {
    const Vec2 s = sample_point(starts, nullptr);
    starts.push_back(s);
    const Vec2 g = sample_point(goals, &s);
    goals.push_back(g);
    cfg.agents.push_back({s, g, radius, max_speed});
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------

void record_trajectory(const World& world, const radio::RadioEnvironment& env, long long episode,
                       std::vector<TrajectoryRow>& out) {
  for (std::size_t i = 0; i < world.agents().size(); ++i) {
    const auto& a = world.agents()[i];
    const auto& st = world.status()[i];
    const auto lvl = radio::sinr_level(env, a.position);
    out.push_back({episode, world.t(), i, a.position, a.velocity, lvl.db, lvl.level, st.arrived,
                   st.collided, st.ever_disconnected});
  }
}

void write_trajectory_csv(std::ostream& os, std::span<const TrajectoryRow> rows) {
  os << kTrajectoryHeader << '\n';
  for (const auto& r : rows) {
    os << r.episode << ',' << r.t << ',' << r.agent << ',' << io::fmt(r.position.x) << ','
       << io::fmt(r.position.y) << ',' << io::fmt(r.velocity.x) << ',' << io::fmt(r.velocity.y)
       << ',' << io::fmt(r.sinr_db) << ',' << r.level << ',' << int(r.arrived) << ','
       << int(r.collided) << ',' << int(r.disconnected) << '\n';
  }
}

std::vector<TrajectoryRow> read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTrajectoryHeader) {
    throw std::runtime_error("trajectory csv: bad header");
  }
  std::vector<TrajectoryRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = io::split(line, ',');
    if (f.size() != 12) {
      throw std::runtime_error("trajectory csv: line " + std::to_string(lineno) + " has " +
                               std::to_string(f.size()) + " fields");
    }
    TrajectoryRow r;
    r.episode = io::parse_int(f[0]);
    r.t = static_cast<int>(io::parse_int(f[1]));
    r.agent = static_cast<std::size_t>(io::parse_int(f[2]));
    r.position = {io::parse_double(f[3]), io::parse_double(f[4])};
    r.velocity = {io::parse_double(f[5]), io::parse_double(f[6])};
    r.sinr_db = io::parse_double(f[7]);
    r.level = static_cast<int>(io::parse_int(f[8]));
    r.arrived = io::parse_int(f[9]) != 0;
    r.collided = io::parse_int(f[10]) != 0;
    r.disconnected = io::parse_int(f[11]) != 0;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace uavnav::world
