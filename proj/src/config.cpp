#include "uavnav/config.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "uavnav/io.hpp"

namespace uavnav::config {

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : "") + ": " + message),
      line_(line) {}

radio::Bounds RunConfig::arena() const {
  const double h = scenarios.half_width;
  return {-h, -h, h, h};
}

radio::RadioEnvironment RunConfig::environment(const std::string& preset) const {
  std::optional<radio::Jammer> j = jammer;
  if (!preset.empty()) {
    const auto it = presets.find(preset);
    if (it == presets.end()) throw std::invalid_argument("unknown jammer preset '" + preset + "'");
    if (it->second.active) {
      radio::Jammer pj;
      pj.position = it->second.position;
      pj.tx_power = it->second.tx_power;
      pj.height = jammer_height;
      j = pj;
    } else {
      j = std::nullopt;
    }
  }
  return radio::RadioEnvironment(stations, j, radio);
}

void RunConfig::finalize() {
  world.rewards.sinr_threshold = radio.sinr_threshold;
  world.rewards.margin = radio.margin;

  training.seed = seed;
  training.scenarios = scenarios;
  training.episode.n_speeds = n_speeds;
  training.episode.n_headings = n_headings;
  training.episode.observation = observation;
  training.episode.world = world;
  training.jammers.half_width = scenarios.half_width;
  training.jammers.height = jammer_height;

  mapping.mapper.holdout_fraction = std::clamp(mapping.mapper.holdout_fraction, 0.0, 0.9);

  if (stations.empty()) throw std::invalid_argument("environment: at least one station is required");
  (void)environment();
  for (const auto& [name, p] : presets) (void)environment(name);
  world::ScenarioConfig probe = scenarios.base;
  probe.agents = {world::AgentSpec{{0.0, 0.0}, {1.0, 0.0}, scenarios.radius, scenarios.max_speed}};
  probe.validate();
  if (scenarios.num_agents < 1) throw std::invalid_argument("world: agents must be >= 1");
  if (scenarios.half_width <= scenarios.edge_margin) {
    throw std::invalid_argument("world: half_width must exceed edge_margin");
  }
  if (n_speeds < 1 || n_headings < 1) throw std::invalid_argument("world: action grid must be non-empty");
  if (bootstrap_episodes < 1) throw std::invalid_argument("bootstrap: episodes must be >= 1");
  if (training.total_episodes < 1) throw std::invalid_argument("training: episodes must be >= 1");
  if (!(training.episode.gamma >= 0.0 && training.episode.gamma < 1.0)) {
    throw std::invalid_argument("training: gamma must lie in [0, 1)");
  }
  if (mapping.measurements < 1) throw std::invalid_argument("mapping: measurements must be >= 1");
  if (evaluation.trials < 1) throw std::invalid_argument("evaluation: trials must be >= 1");
}

namespace {

// Walks one YAML mapping, remembering which keys were consumed so the rest can
// be reported as unknown.
class Block {
 public:
  Block(YAML::Node node, std::string path, const std::string& source)
      : node_(std::move(node)), path_(std::move(path)), source_(source) {
    if (node_ && !node_.IsMap()) fail(node_, "expected a mapping");
  }

  bool present() const { return static_cast<bool>(node_); }
  int line() const { return node_ ? node_.Mark().line + 1 : 0; }

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
    throw ConfigError(source_, at.Mark().line + 1, (path_.empty() ? "" : path_ + ": ") + msg);
  }

  YAML::Node raw(const std::string& key) {
    known_.insert(key);
    return node_ ? node_[key] : YAML::Node();
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    const YAML::Node v = raw(key);
    if (!v) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      fail(v, "'" + key + "' has the wrong type");
    }
  }

  template <typename T>
  void get_min(const std::string& key, T& out, T min, bool strict) {
    get(key, out);
    const YAML::Node v = raw(key);
    if (v && (strict ? !(out > min) : !(out >= min))) {
      std::ostringstream ss;
      ss << "'" << key << "' must be " << (strict ? "> " : ">= ") << min;
      fail(v, ss.str());
    }
  }

  void get_positive(const std::string& key, double& out) { get_min(key, out, 0.0, true); }

  void get_count(const std::string& key, std::size_t& out, std::size_t min = 1) {
    long long v = static_cast<long long>(out);
    get(key, v);
    const YAML::Node n = raw(key);
    if (n && v < static_cast<long long>(min)) {
      fail(n, "'" + key + "' must be >= " + std::to_string(min));
    }
    out = static_cast<std::size_t>(v);
  }

  Block child(const std::string& key) { return Block(raw(key), join(key), source_); }

  void finish() const {
    if (!node_) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!known_.count(key)) fail(kv.first, "unknown key '" + key + "'");
    }
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  const std::string& source() const { return source_; }

 private:
  YAML::Node node_;
  std::string path_;
  const std::string& source_;
  std::set<std::string> known_;
};

void read_station_defaults(Block b, radio::GroundStation& s) {
  b.get_positive("height", s.height);
  b.get_positive("tx_power", s.tx_power);
  b.get("tilt_deg", s.tilt_deg);
  b.get_positive("beamwidth_deg", s.beamwidth_deg);
  b.get_min("max_atten_db", s.max_atten_db, 0.0, false);
  b.finish();
}

void read_environment(Block b, RunConfig& c) {
  b.get_positive("noise_power", c.radio.noise_power);
  b.get_positive("uav_altitude", c.radio.uav_altitude);
  b.get_min("pathloss_exponent", c.radio.pathloss_exponent, 2.0, false);
  double threshold_db = 10.0 * std::log10(c.radio.sinr_threshold);
  b.get("sinr_threshold_db", threshold_db);
  c.radio.sinr_threshold = std::pow(10.0, threshold_db / 10.0);
  b.get_min("margin", c.radio.margin, 0.0, false);
  b.get("jammer_height", c.jammer_height);

  radio::GroundStation defaults;
  read_station_defaults(b.child("station_defaults"), defaults);

  const YAML::Node st = b.raw("stations");
  if (st) {
    if (!st.IsSequence()) b.fail(st, "'stations' must be a list");
    c.stations.clear();
    std::size_t i = 0;
    for (const auto& item : st) {
      Block sb(item, b.join("stations[" + std::to_string(i++) + "]"), b.source());
      radio::GroundStation s = defaults;
      sb.get("x", s.position.x);
      sb.get("y", s.position.y);
      if (!sb.raw("x") || !sb.raw("y")) sb.fail(item, "station needs x and y");
      read_station_defaults(sb, s);
      c.stations.push_back(s);
    }
  }

  Block jb = b.child("jammer");
  if (jb.present()) {
    radio::Jammer j;
    j.height = c.jammer_height;
    jb.get("x", j.position.x);
    jb.get("y", j.position.y);
    jb.get("height", j.height);
    jb.get_min("power", j.tx_power, 0.0, false);
    jb.get("active", j.active);
    jb.finish();
    c.jammer = j;
  }

  const YAML::Node presets = b.raw("presets");
  if (presets) {
    if (!presets.IsMap()) b.fail(presets, "'presets' must be a mapping");
    c.presets.clear();
    for (const auto& kv : presets) {
      const auto name = kv.first.as<std::string>();
      Block pb(kv.second, b.join("presets." + name), b.source());
      JammerPreset p;
      pb.get("x", p.position.x);
      pb.get("y", p.position.y);
      pb.get_min("power", p.tx_power, 0.0, false);
      pb.get("active", p.active);
      pb.finish();
      c.presets[name] = p;
    }
  }

  Block sched = b.child("jammer_schedule");
  {
    long long period = c.training.jammers.change_period;
    sched.get_min("change_period", period, 1LL, false);
    c.training.jammers.change_period = period;
    const YAML::Node pc = sched.raw("power_choices");
    if (pc) {
      try {
        c.training.jammers.power_choices = pc.as<std::vector<double>>();
      } catch (const YAML::Exception&) {
        sched.fail(pc, "'power_choices' must be a list of numbers");
      }
      if (c.training.jammers.power_choices.empty()) sched.fail(pc, "'power_choices' is empty");
    }
    const YAML::Node init = sched.raw("initial_preset");
    if (init) {
      const auto name = init.as<std::string>();
      const auto it = c.presets.find(name);
      if (it == c.presets.end()) sched.fail(init, "unknown preset '" + name + "'");
      radio::Jammer j;
      j.position = it->second.position;
      j.tx_power = it->second.tx_power;
      j.active = it->second.active;
      j.height = c.jammer_height;
      c.training.jammers.initial = j;
    }
    sched.finish();
  }
  b.finish();
}

void read_world(Block b, RunConfig& c) {
  auto& g = c.scenarios;
  auto& base = g.base;
  b.get_positive("half_width", g.half_width);
  b.get_min("edge_margin", g.edge_margin, 0.0, false);
  b.get_count("agents", g.num_agents);
  b.get_positive("radius", g.radius);
  b.get_positive("max_speed", g.max_speed);
  b.get_min("min_start_goal_distance", g.min_start_goal_distance, 0.0, false);
  b.get_min("separation_factor", g.separation_factor, 1.0, false);
  b.get("min_endpoint_level", g.min_endpoint_level);
  b.get_positive("dt", base.dt);
  b.get_min("n_t", base.n_t, 1, false);
  double turn_deg = base.turn_rate_limit * 180.0 / std::numbers::pi;
  b.get_positive("turn_rate_deg", turn_deg);
  base.turn_rate_limit = turn_deg * std::numbers::pi / 180.0;
  b.get_min("max_episode_steps", base.max_episode_steps, 1, false);
  b.get_min("arrival_tolerance", base.arrival_tolerance, 0.0, false);
  b.get_count("n_speeds", c.n_speeds);
  b.get_count("n_headings", c.n_headings);
  b.get_count("max_neighbors", c.observation.max_neighbors, 0);
  b.get_positive("absent_distance", c.observation.absent_distance);
  b.get_count("velocity_filter_window", c.world.velocity_filter_window);
  Block r = b.child("rewards");
  r.get_positive("collision_ramp", c.world.rewards.collision_ramp);
  r.get("arrival", c.world.rewards.arrival_reward);
  r.get("step_penalty", c.world.rewards.step_penalty);
  r.finish();
  b.finish();
}

void read_bootstrap(Block b, RunConfig& c) {
  b.get_count("episodes", c.bootstrap_episodes);
  b.get_positive("time_horizon", c.orca.time_horizon);
  b.get_positive("neighbor_range", c.orca.neighbor_range);
  b.get("perturbation", c.orca.perturbation);
  b.get_min("safety_margin", c.orca.safety_margin, 0.0, false);
  b.finish();
}

void read_training(Block b, RunConfig& c) {
  auto& t = c.training;
  b.get_min("episodes", t.total_episodes, 1LL, false);
  b.get_min("gamma", t.episode.gamma, 0.0, false);
  b.get("epsilon_start", t.epsilon.start);
  b.get("epsilon_end", t.epsilon.end);
  b.get_min("epsilon_decay_fraction", t.epsilon_decay_fraction, 0.0, false);
  b.get_count("replay_capacity", t.replay_capacity);
  b.get_count("updates_per_episode", t.updates_per_episode, 0);
  b.get_positive("learning_rate", t.optimizer.learning_rate);
  b.get_count("batch_size", t.optimizer.batch_size);
  b.get_min("l2", t.optimizer.l2, 0.0, false);
  b.get_count("pretrain_epochs", t.pretrain_epochs, 0);
  b.get_min("checkpoint_every", t.checkpoint_every, 0LL, false);
  b.get_positive("reward_scale", t.episode.reward_scale);
  b.get("bootstrap_truncated", t.episode.bootstrap_truncated);
  b.get("gated_lookahead", t.episode.gated_lookahead);
  for (const char* k : {"epsilon_start", "epsilon_end"}) {
    const YAML::Node v = b.raw(k);
    const double e = std::string(k) == "epsilon_start" ? t.epsilon.start : t.epsilon.end;
    if (v && !(e >= 0.0 && e <= 1.0)) b.fail(v, std::string("'") + k + "' must lie in [0, 1]");
  }
  const YAML::Node g = b.raw("gamma");
  if (g && !(t.episode.gamma < 1.0)) b.fail(g, "'gamma' must be < 1");
  b.finish();
}

void read_mapping(Block b, RunConfig& c) {
  auto& m = c.mapping;
  b.get_count("k_n", m.k_n);
  b.get_positive("learning_rate", m.train.learning_rate);
  b.get_count("batch_size", m.train.batch_size);
  b.get_min("l2", m.train.l2, 0.0, false);
  b.get_count("epochs", m.train.epochs);
  b.get_count("measurements", m.measurements);
  b.get_count("cloud_capacity", m.mapper.cloud_capacity);
  b.get_count("check_cadence", m.mapper.check_cadence);
  b.get_min("drop_threshold", m.mapper.drop_threshold, 0.0, false);
  b.get_count("min_retrain_size", m.mapper.min_retrain_size);
  b.get_min("holdout_fraction", m.mapper.holdout_fraction, 0.0, false);
  b.finish();
}

void read_evaluation(Block b, RunConfig& c) {
  auto& e = c.evaluation;
  b.get_count("trials", e.trials);
  b.get("seed_offset", e.seed_offset);
  b.get_count("probes", e.probes);
  const YAML::Node rt = b.raw("record_trials");
  if (rt) {
    try {
      e.record_trials = rt.as<std::vector<std::size_t>>();
    } catch (const YAML::Exception&) {
      b.fail(rt, "'record_trials' must be a list of trial indices");
    }
  }
  b.finish();
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source, e.mark.line + 1, e.msg);
  }
  RunConfig c;
  if (!root || root.IsNull()) throw ConfigError(source, 0, "empty configuration");
  Block top(root, "", source);
  top.get("seed", c.seed);
  read_environment(top.child("environment"), c);
  read_world(top.child("world"), c);
  read_bootstrap(top.child("bootstrap"), c);
  read_training(top.child("training"), c);
  read_mapping(top.child("mapping"), c);
  read_evaluation(top.child("evaluation"), c);
  top.finish();
  try {
    c.finalize();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(source, 0, e.what());
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "cannot open configuration file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string canonical_text(const RunConfig& c) {
  std::ostringstream o;
  const auto f = [](double v) { return io::fmt(v); };
  o << "seed=" << c.seed << '\n';
  o << "radio=" << f(c.radio.noise_power) << ',' << f(c.radio.uav_altitude) << ','
    << f(c.radio.pathloss_exponent) << ',' << f(c.radio.sinr_threshold) << ',' << f(c.radio.margin)
    << '\n';
  for (const auto& s : c.stations) {
    o << "station=" << f(s.position.x) << ',' << f(s.position.y) << ',' << f(s.height) << ','
      << f(s.tx_power) << ',' << f(s.tilt_deg) << ',' << f(s.beamwidth_deg) << ','
      << f(s.max_atten_db) << '\n';
  }
  if (c.jammer) {
    o << "jammer=" << f(c.jammer->position.x) << ',' << f(c.jammer->position.y) << ','
      << f(c.jammer->height) << ',' << f(c.jammer->tx_power) << ',' << c.jammer->active << '\n';
  }
  o << "jammer_height=" << f(c.jammer_height) << '\n';
  for (const auto& [name, p] : c.presets) {
    o << "preset." << name << '=' << f(p.position.x) << ',' << f(p.position.y) << ','
      << f(p.tx_power) << ',' << p.active << '\n';
  }
  const auto& g = c.scenarios;
  o << "world=" << f(g.half_width) << ',' << f(g.edge_margin) << ',' << g.num_agents << ','
    << f(g.radius) << ',' << f(g.max_speed) << ',' << f(g.min_start_goal_distance) << ','
    << f(g.separation_factor) << ',' << g.min_endpoint_level << ',' << f(g.base.dt) << ','
    << g.base.n_t << ',' << f(g.base.turn_rate_limit) << ',' << g.base.max_episode_steps << ','
    << f(g.base.arrival_tolerance) << ',' << c.n_speeds << ',' << c.n_headings << ','
    << c.observation.max_neighbors << ',' << f(c.observation.absent_distance) << ','
    << c.world.velocity_filter_window << '\n';
  o << "rewards=" << f(c.world.rewards.collision_ramp) << ',' << f(c.world.rewards.arrival_reward)
    << ',' << f(c.world.rewards.step_penalty) << '\n';
  o << "bootstrap=" << c.bootstrap_episodes << ',' << f(c.orca.time_horizon) << ','
    << f(c.orca.neighbor_range) << ',' << f(c.orca.perturbation) << ',' << f(c.orca.safety_margin) << '\n';
  const auto& t = c.training;
  o << "training=" << t.total_episodes << ',' << f(t.episode.gamma) << ',' << f(t.epsilon.start)
    << ',' << f(t.epsilon.end) << ',' << f(t.epsilon_decay_fraction) << ',' << t.replay_capacity
    << ',' << t.updates_per_episode << ',' << f(t.optimizer.learning_rate) << ','
    << t.optimizer.batch_size << ',' << f(t.optimizer.l2) << ',' << t.pretrain_epochs << ','
    << t.checkpoint_every << ',' << f(t.episode.reward_scale) << ','
    << t.episode.bootstrap_truncated << ',' << t.episode.gated_lookahead << ','
    << t.jammers.change_period << ','
    << io::join(t.jammers.power_choices, ';') << '\n';
  if (t.jammers.initial) {
    o << "training.initial_jammer=" << f(t.jammers.initial->position.x) << ','
      << f(t.jammers.initial->position.y) << ',' << f(t.jammers.initial->tx_power) << '\n';
  }
  const auto& m = c.mapping;
  o << "mapping=" << m.k_n << ',' << f(m.train.learning_rate) << ',' << m.train.batch_size << ','
    << f(m.train.l2) << ',' << m.train.epochs << ',' << m.measurements << ','
    << m.mapper.cloud_capacity << ',' << m.mapper.check_cadence << ','
    << f(m.mapper.drop_threshold) << ',' << m.mapper.min_retrain_size << ','
    << f(m.mapper.holdout_fraction) << '\n';
  o << "evaluation=" << c.evaluation.trials << ',' << c.evaluation.seed_offset << ','
    << c.evaluation.probes << '\n';
  return o.str();
}

std::string digest(const RunConfig& c) { return io::sha256_hex(canonical_text(c)); }

}  // namespace uavnav::config
