#include "uavnav/orca.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "uavnav/io.hpp"
#include "uavnav/valuetrain.hpp"

namespace uavnav::orca {

namespace {

constexpr double kEpsilon = 1e-9;

// Internal line form: permitted side is to the left of `direction`.
struct Line {
  Vec2 point;
  Vec2 direction;
};

Line to_line(const HalfPlane& h) { return {h.point, Vec2{h.normal.y, -h.normal.x}}; }

bool linear_program1(const std::vector<Line>& lines, std::size_t line_no, double radius,
                     const Vec2& opt_velocity, bool direction_opt, Vec2& result) {
  const Line& line = lines[line_no];
  const double dot_product = dot(line.point, line.direction);
  const double discriminant = dot_product * dot_product + radius * radius - abs_sq(line.point);
  if (discriminant < 0.0) return false;  // speed disc misses the line entirely

  const double sqrt_disc = std::sqrt(discriminant);
  double t_left = -dot_product - sqrt_disc;
  double t_right = -dot_product + sqrt_disc;

  for (std::size_t i = 0; i < line_no; ++i) {
    const double denominator = det(line.direction, lines[i].direction);
    const double numerator = det(lines[i].direction, line.point - lines[i].point);
    if (std::abs(denominator) <= kEpsilon) {
      if (numerator < 0.0) return false;
      continue;
    }
    const double t = numerator / denominator;
    if (denominator >= 0.0) {
      t_right = std::min(t_right, t);
    } else {
      t_left = std::max(t_left, t);
    }
    if (t_left > t_right) return false;
  }

  if (direction_opt) {
    result = dot(opt_velocity, line.direction) > 0.0 ? line.point + t_right * line.direction
                                                     : line.point + t_left * line.direction;
  } else {
    const double t = dot(line.direction, opt_velocity - line.point);
    result = line.point + std::clamp(t, t_left, t_right) * line.direction;
  }
  return true;
}

std::size_t linear_program2(const std::vector<Line>& lines, double radius, const Vec2& opt_velocity,
                            bool direction_opt, Vec2& result) {
  if (direction_opt) {
    result = opt_velocity * radius;
  } else if (abs_sq(opt_velocity) > radius * radius) {
    result = normalized(opt_velocity) * radius;
  } else {
    result = opt_velocity;
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) > 0.0) {
      const Vec2 previous = result;
      if (!linear_program1(lines, i, radius, opt_velocity, direction_opt, result)) {
        result = previous;
        return i;
      }
    }
  }
  return lines.size();
}

void linear_program3(const std::vector<Line>& lines, std::size_t begin_line, double radius,
                     Vec2& result) {
  double violation = 0.0;
  for (std::size_t i = begin_line; i < lines.size(); ++i) {
    if (det(lines[i].direction, lines[i].point - result) <= violation) continue;

    std::vector<Line> projected;
    for (std::size_t j = 0; j < i; ++j) {
      Line line;
      const double determinant = det(lines[i].direction, lines[j].direction);
      if (std::abs(determinant) <= kEpsilon) {
        if (dot(lines[i].direction, lines[j].direction) > 0.0) continue;
        line.point = 0.5 * (lines[i].point + lines[j].point);
      } else {
        line.point = lines[i].point +
                     (det(lines[j].direction, lines[i].point - lines[j].point) / determinant) *
                         lines[i].direction;
      }
      line.direction = normalized(lines[j].direction - lines[i].direction);
      projected.push_back(line);
    }

    const Vec2 previous = result;
    if (linear_program2(projected, radius, Vec2{-lines[i].direction.y, lines[i].direction.x}, true,
                        result) < projected.size()) {
      // Only reachable through round-off; keep the previous point.
      result = previous;
    }
    violation = det(lines[i].direction, lines[i].point - result);
  }
}

}  // namespace

HalfPlane orca_halfplane(const world::UavState& self, const world::ObservedNeighbor& neighbor,
                         double time_horizon, double dt) {
  const Vec2 rel_pos = neighbor.position - self.position;
  const Vec2 rel_vel = self.velocity - neighbor.velocity;
  const double dist_sq = abs_sq(rel_pos);
  const double combined = self.radius + neighbor.radius;
  const double combined_sq = combined * combined;

  Vec2 direction;
  Vec2 u;
  if (dist_sq > combined_sq) {
    const double inv_tau = 1.0 / time_horizon;
    const Vec2 w = rel_vel - inv_tau * rel_pos;  // from cutoff center to relative velocity
    const double w_len_sq = abs_sq(w);
    const double dot_product = dot(w, rel_pos);

    if (dot_product < 0.0 && dot_product * dot_product > combined_sq * w_len_sq) {
      // Closest boundary point lies on the cutoff circle.
      const double w_len = std::sqrt(w_len_sq);
      const Vec2 unit_w = w / w_len;
      direction = {unit_w.y, -unit_w.x};
      u = (combined * inv_tau - w_len) * unit_w;
    } else {
      const double leg = std::sqrt(dist_sq - combined_sq);
      if (det(rel_pos, w) > 0.0) {
        direction = Vec2{rel_pos.x * leg - rel_pos.y * combined,
                         rel_pos.x * combined + rel_pos.y * leg} /
                    dist_sq;
      } else {
        direction = -Vec2{rel_pos.x * leg + rel_pos.y * combined,
                          -rel_pos.x * combined + rel_pos.y * leg} /
                    dist_sq;
      }
      u = dot(rel_vel, direction) * direction - rel_vel;
    }
  } else {
    // Already overlapping: push apart within one time step.
    const double inv_dt = 1.0 / dt;
    const Vec2 w = rel_vel - inv_dt * rel_pos;
    double w_len = norm(w);
    Vec2 unit_w = w_len > 0.0 ? w / w_len : normalized(-rel_pos);
    if (w_len == 0.0 && abs_sq(unit_w) == 0.0) unit_w = {1.0, 0.0};
    direction = {unit_w.y, -unit_w.x};
    u = (combined * inv_dt - w_len) * unit_w;
  }

  const Vec2 point = self.velocity + 0.5 * u;
  return {point, Vec2{-direction.y, direction.x}};
}

Vec2 orca_velocity(const world::UavState& self, std::span<const world::ObservedNeighbor> neighbors,
                   const Vec2& preferred, const OrcaConfig& config, double dt) {
  std::vector<Line> lines;
  world::UavState padded = self;
  padded.radius += config.safety_margin;
  const double range_sq = config.neighbor_range * config.neighbor_range;
  for (const auto& n : neighbors) {
    if (abs_sq(n.position - self.position) > range_sq) continue;
    lines.push_back(to_line(orca_halfplane(padded, n, config.time_horizon, dt)));
  }
  Vec2 result;
  const std::size_t fail = linear_program2(lines, self.max_speed, preferred, false, result);
  if (fail < lines.size()) linear_program3(lines, fail, self.max_speed, result);
  // Round-off in the programs can leave |result| a hair above the disc.
  const double speed = norm(result);
  if (speed > self.max_speed) result = result * (self.max_speed / speed);
  return result;
}

Vec2 preferred_velocity(const world::UavState& self, double dt, double perturbation) {
  const Vec2 to_dest = self.destination - self.position;
  const double dist = norm(to_dest);
  if (dist == 0.0) return {};
  const double speed = std::min(self.max_speed, dist / dt);
  return rotate(to_dest / dist * speed, perturbation);
}

world::Action to_admissible_action(const world::UavState& self, const Vec2& velocity,
                                   const world::ScenarioConfig& scenario) {
  const double cone = scenario.dt * scenario.turn_rate_limit;
  const double speed = norm(velocity);
  if (speed < 1e-12) return {0.0, self.orientation};
  const double desired = std::atan2(velocity.y, velocity.x);
  const double delta = std::clamp(wrap_angle(desired - self.orientation), -cone, cone);
  const double heading = wrap_angle(self.orientation + delta);
  const double along = std::clamp(dot(velocity, unit_vector(heading)), 0.0, self.max_speed);
  return {along, heading};
}

std::vector<world::Action> orca_actions(const world::World& w, const OrcaConfig& config) {
  const auto& scenario = w.scenario();
  std::vector<world::Action> actions(w.agents().size());
  for (std::size_t i = 0; i < w.agents().size(); ++i) {
    if (!w.active(i)) continue;
    const auto& self = w.agents()[i];
    const auto neighbors = w.neighbors_of(i);
    const Vec2 pref = preferred_velocity(self, scenario.dt, config.perturbation);
    const Vec2 v = orca_velocity(self, neighbors, pref, config, scenario.dt);
    actions[i] = to_admissible_action(self, v, scenario);
  }
  return actions;
}

namespace {

void rollout_into(const world::ScenarioConfig& scenario, const radio::RadioEnvironment& env,
                  const BootstrapOptions& options, BootstrapSet& out) {
  world::World w(scenario, options.world);
  const std::size_t n = w.agents().size();
  std::vector<std::vector<std::vector<double>>> states(n);
  std::vector<std::vector<double>> rewards(n);

  while (!w.done()) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!w.active(i)) continue;
      const auto& self = w.agents()[i];
      const auto neighbors = w.neighbors_of(i);
      const int level = radio::sinr_level(env, self.position).level;
      states[i].push_back(world::to_agent_frame(self, neighbors, level, options.observation).features);
    }
    const auto actions = orca_actions(w, options.orca);
    std::vector<bool> was_active(n);
    for (std::size_t i = 0; i < n; ++i) was_active[i] = w.active(i);
    const auto step = w.step_all(actions, env);
    for (std::size_t i = 0; i < n; ++i) {
      if (!was_active[i]) continue;
      rewards[i].push_back(step.rewards[i].total);
      if (step.flags[i].collided) ++out.collisions;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto values = valuetrain::discounted_returns(rewards[i], options.gamma);
    for (std::size_t k = 0; k < values.size(); ++k) {
      out.pairs.push_back({std::move(states[i][k]), values[k]});
    }
  }
}

}  // namespace

BootstrapSet generate_bootstrap_set(std::span<const BootstrapEpisode> episodes,
                                    const BootstrapOptions& options) {
  BootstrapSet out;
  for (const auto& ep : episodes) {
    ++out.episodes;
    try {
      rollout_into(ep.scenario, ep.env, options, out);
    } catch (const std::exception&) {
      ++out.skipped_episodes;
    }
  }
  return out;
}

BootstrapSet generate_bootstrap_set(std::span<const world::ScenarioConfig> scenarios,
                                    const radio::RadioEnvironment& env,
                                    const BootstrapOptions& options) {
  std::vector<BootstrapEpisode> episodes;
  episodes.reserve(scenarios.size());
  for (const auto& s : scenarios) episodes.push_back({s, env});
  return generate_bootstrap_set(episodes, options);
}

void write_bootstrap(std::ostream& os, const BootstrapSet& set, const std::vector<double>& mean,
                     const std::vector<double>& std_dev, const std::string& digest) {
  const std::size_t dim = set.pairs.empty() ? mean.size() : set.pairs.front().features.size();
  os << "# uavnav-bootstrap v1\n";
  os << "# digest " << digest << '\n';
  os << "# dim " << dim << '\n';
  os << "# episodes " << set.episodes << " skipped " << set.skipped_episodes << " collisions "
     << set.collisions << '\n';
  os << "# mean " << io::join(mean) << '\n';
  os << "# std " << io::join(std_dev) << '\n';
  for (const auto& p : set.pairs) {
    os << io::join(p.features) << ',' << io::fmt(p.value) << '\n';
  }
}

LoadedBootstrap read_bootstrap(std::istream& is) {
  LoadedBootstrap out;
  std::string line;
  if (!std::getline(is, line) || line != "# uavnav-bootstrap v1") {
    throw std::runtime_error("bootstrap file: unsupported or missing version header");
  }
  auto expect = [&](const std::string& key) {
    if (!std::getline(is, line) || line.rfind("# " + key + " ", 0) != 0) {
      throw std::runtime_error("bootstrap file: missing '" + key + "' line");
    }
    return line.substr(key.size() + 3);
  };
  out.digest = expect("digest");
  const auto dim = static_cast<std::size_t>(io::parse_int(expect("dim")));
  {
    const auto f = io::split(expect("episodes"), ' ');
    if (f.size() != 5) throw std::runtime_error("bootstrap file: malformed episodes line");
    out.set.episodes = static_cast<std::size_t>(io::parse_int(f[0]));
    out.set.skipped_episodes = static_cast<std::size_t>(io::parse_int(f[2]));
    out.set.collisions = static_cast<std::size_t>(io::parse_int(f[4]));
  }
  for (const auto& s : io::split(expect("mean"), ',')) out.mean.push_back(io::parse_double(s));
  for (const auto& s : io::split(expect("std"), ',')) out.std_dev.push_back(io::parse_double(s));
  if (out.mean.size() != dim || out.std_dev.size() != dim) {
    throw std::runtime_error("bootstrap file: standardizer size does not match dim");
  }
  std::size_t lineno = 6;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = io::split(line, ',');
    if (fields.size() != dim + 1) {
      throw std::runtime_error("bootstrap file: line " + std::to_string(lineno) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(dim + 1));
    }
    BootstrapPair p;
    p.features.reserve(dim);
    for (std::size_t k = 0; k < dim; ++k) p.features.push_back(io::parse_double(fields[k]));
    p.value = io::parse_double(fields[dim]);
    out.set.pairs.push_back(std::move(p));
  }
  return out;
}

}  // namespace uavnav::orca
