#include "uavnav/valuetrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "uavnav/io.hpp"

namespace uavnav::valuetrain {

double epsilon(long long episode, const EpsilonSchedule& s) {
  if (episode < 0) throw std::invalid_argument("epsilon: negative episode");
  if (s.decay_episodes <= 0 || episode >= s.decay_episodes) return s.end;
  const double f = static_cast<double>(episode) / static_cast<double>(s.decay_episodes);
  return s.start + (s.end - s.start) * f;
}

// ---------------------------------------------------------------------------
// Lookahead

std::vector<LookaheadScore> lookahead_scores(const neuro::NetworkParams& value_net,
                                             const world::UavState& self,
                                             std::span<const world::ObservedNeighbor> neighbors,
                                             std::span<const world::Action> actions,
                                             const SinrOracle& oracle, const LookaheadContext& ctx) {
  std::vector<world::ObservedNeighbor> predicted(neighbors.begin(), neighbors.end());
  for (auto& n : predicted) {
    n.position = n.position + n.filtered_velocity * ctx.dt;
    n.velocity = n.filtered_velocity;
  }

  std::vector<LookaheadScore> scores(actions.size());
  std::vector<std::size_t> need_value;
  std::vector<std::vector<double>> states;
  for (std::size_t k = 0; k < actions.size(); ++k) {
    const world::UavState next = world::propagate(self, actions[k], ctx.dt, ctx.arrival_tolerance);
    world::UavState mover = self;
    mover.velocity = (next.position - self.position) / ctx.dt;
    const int level = oracle(next.position);
    const double rc = world::collision_reward_against(mover, neighbors, ctx.dt,
                                                      ctx.rewards.collision_ramp);
    // Ungated: a level-0 cell is charged on every step since the next check will
    // catch a UAV inside it; the marginal band is charged only when the world charges it.
    const bool charge_now = ctx.gated ? world::gated_step(ctx.t, ctx.n_t)
                                      : level == radio::kLevelDisconnected ||
                                            world::gated_step(ctx.t, ctx.n_t);
    const double rs = charge_now ? world::reward_connectivity_level(0, 1, level) : 0.0;
    scores[k].reward = world::combine_rewards(rs, rc, next.arrived, ctx.rewards).total;
    scores[k].next_level = level;
    if (!next.arrived) {
      need_value.push_back(k);
      states.push_back(world::to_agent_frame(next, predicted, level, ctx.observation).features);
    }
  }
  if (!states.empty()) {
    const Eigen::MatrixXd v = neuro::forward_batch(value_net, neuro::to_columns(states));
    for (std::size_t j = 0; j < need_value.size(); ++j) {
      scores[need_value[j]].value = v(0, static_cast<Eigen::Index>(j));
    }
  }
  for (auto& s : scores) s.score = ctx.reward_scale * s.reward + ctx.gamma * s.value;
  return scores;
}

std::size_t lookahead_index(const neuro::NetworkParams& value_net, const world::UavState& self,
                            std::span<const world::ObservedNeighbor> neighbors,
                            std::span<const world::Action> actions, const SinrOracle& oracle,
                            const LookaheadContext& ctx) {
  if (actions.empty()) throw std::invalid_argument("lookahead_select: empty action space");
  const auto scores = lookahead_scores(value_net, self, neighbors, actions, oracle, ctx);
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    if (scores[k].score > scores[best].score) best = k;
  }
  return best;
}

world::Action lookahead_select(const neuro::NetworkParams& value_net, const world::UavState& self,
                               std::span<const world::ObservedNeighbor> neighbors,
                               std::span<const world::Action> actions, const SinrOracle& oracle,
                               const LookaheadContext& ctx) {
  return actions[lookahead_index(value_net, self, neighbors, actions, oracle, ctx)];
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma,
                                       double tail_value) {
  std::vector<double> out(rewards.size());
  double acc = tail_value;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    acc = rewards[k] + gamma * acc;
    out[k] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Replay

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be >= 1");
}

void ReplayBuffer::push(std::span<const double> features, double target) {
  if (dim_ == 0) {
    if (features.empty()) throw std::invalid_argument("replay: empty feature vector");
    dim_ = features.size();
    data_.assign(capacity_ * dim_, 0.0);
    targets_.assign(capacity_, 0.0);
  }
  if (features.size() != dim_) throw std::invalid_argument("replay: feature length mismatch");
  std::size_t s;
  if (size_ < capacity_) {
    s = slot(size_);
    ++size_;
  } else {
    s = head_;
    head_ = (head_ + 1) % capacity_;
  }
  std::copy(features.begin(), features.end(), data_.begin() + static_cast<std::ptrdiff_t>(s * dim_));
  targets_[s] = target;
}

std::span<const double> ReplayBuffer::features(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay index");
  return {data_.data() + slot(i) * dim_, dim_};
}

double ReplayBuffer::target(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("replay index");
  return targets_[slot(i)];
}

void ReplayBuffer::sample(std::size_t n, Rng& rng, Eigen::MatrixXd& inputs,
                          Eigen::MatrixXd& targets) const {
  if (size_ == 0) throw std::logic_error("replay: sample from empty buffer");
  const auto dim = static_cast<Eigen::Index>(dim_);
  inputs.resize(dim, static_cast<Eigen::Index>(n));
  targets.resize(1, static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t s = slot(uniform_index(rng, size_));
    inputs.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::VectorXd>(data_.data() + s * dim_, dim);
    targets(0, static_cast<Eigen::Index>(j)) = targets_[s];
  }
}

std::string ReplayBuffer::digest() const {
  std::string bytes;
  bytes.reserve(size_ * (dim_ + 1) * sizeof(double));
  for (std::size_t i = 0; i < size_; ++i) {
    const auto f = features(i);
    bytes.append(reinterpret_cast<const char*>(f.data()), f.size() * sizeof(double));
    const double t = target(i);
    bytes.append(reinterpret_cast<const char*>(&t), sizeof(double));
  }
  return io::sha256_hex(bytes);
}

void ReplayBuffer::write_binary(std::ostream& os) const {
  const std::uint64_t header[3] = {capacity_, dim_, size_};
  os.write(reinterpret_cast<const char*>(header), sizeof(header));
  for (std::size_t i = 0; i < size_; ++i) {
    const auto f = features(i);
    os.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(double)));
    const double t = target(i);
    os.write(reinterpret_cast<const char*>(&t), sizeof(double));
  }
}

ReplayBuffer ReplayBuffer::read_binary(std::istream& is) {
  std::uint64_t header[3] = {0, 0, 0};
  if (!is.read(reinterpret_cast<char*>(header), sizeof(header))) {
    throw std::runtime_error("replay file: truncated header");
  }
  ReplayBuffer b(header[0]);
  std::vector<double> f(header[1]);
  for (std::uint64_t i = 0; i < header[2]; ++i) {
    double t = 0.0;
    if (!is.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(double))) ||
        !is.read(reinterpret_cast<char*>(&t), sizeof(double))) {
      throw std::runtime_error("replay file: truncated entries");
    }
    b.push(f, t);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Jammer schedule

radio::Jammer JammerSchedule::jammer_for_episode(long long episode, std::uint64_t seed) const {
  if (change_period < 1) throw std::invalid_argument("jammer schedule: change_period must be >= 1");
  if (power_choices.empty()) throw std::invalid_argument("jammer schedule: no power choices");
  const long long period = episode / change_period;
  if (period == 0 && initial) return *initial;
  Rng rng(derive_seed(seed, 0x4a414d00ULL + static_cast<std::uint64_t>(period)));
  radio::Jammer j;
  j.position.x = uniform(rng, -half_width, half_width);
  j.position.y = uniform(rng, -half_width, half_width);
  j.tx_power = power_choices[uniform_index(rng, power_choices.size())];
  j.height = height;
  j.active = true;
  return j;
}

// ---------------------------------------------------------------------------
// Episodes

double EpisodeLog::accumulated_reward() const {
  if (reward_sums.empty()) return 0.0;
  double s = 0.0;
  for (double r : reward_sums) s += r;
  return s / static_cast<double>(reward_sums.size());
}

EpisodeLog run_episode(const neuro::NetworkParams& value_net, const radio::RadioEnvironment& env,
                       const world::ScenarioConfig& scenario, double eps, ReplayBuffer& buffer,
                       Rng& rng, const EpisodeOptions& options) {
  world::World w(scenario, options.world);
  const std::size_t n = w.agents().size();
  std::vector<std::vector<std::vector<double>>> states(n);
  std::vector<std::vector<double>> rewards(n);
  const SinrOracle oracle = [&env](const Vec2& p) { return radio::sinr_level(env, p).level; };

  LookaheadContext ctx;
  ctx.gamma = options.gamma;
  ctx.dt = scenario.dt;
  ctx.n_t = scenario.n_t;
  ctx.arrival_tolerance = scenario.arrival_tolerance;
  ctx.reward_scale = options.reward_scale;
  ctx.gated = options.gated_lookahead;
  ctx.rewards = options.world.rewards;
  ctx.observation = options.observation;

  EpisodeLog log;
  log.epsilon = eps;
  std::vector<world::Action> actions(n);
  std::vector<bool> was_active(n);
  while (!w.done()) {
    ctx.t = w.t();
    for (std::size_t i = 0; i < n; ++i) {
      was_active[i] = w.active(i);
      if (!was_active[i]) continue;
      const auto& self = w.agents()[i];
      const auto neighbors = w.neighbors_of(i);
      states[i].push_back(
          world::to_agent_frame(self, neighbors, oracle(self.position), options.observation).features);
      const auto space = world::sample_action_space(self, scenario, options.n_speeds, options.n_headings);
      const double c = uniform01(rng);
      if (c < eps) {
        actions[i] = space[uniform_index(rng, space.size())];
      } else {
        actions[i] = lookahead_select(value_net, self, neighbors, space, oracle, ctx);
      }
    }
    const auto step = w.step_all(actions, env);
    for (std::size_t i = 0; i < n; ++i) {
      if (was_active[i]) rewards[i].push_back(step.rewards[i].total);
    }
  }
  log.steps = w.t();

  for (std::size_t i = 0; i < n; ++i) {
    const auto& st = w.status()[i];
    double tail = 0.0;
    if (options.bootstrap_truncated && !st.arrived && !st.terminated) {
      const auto& self = w.agents()[i];
      const auto f = world::to_agent_frame(self, w.neighbors_of(i), oracle(self.position),
                                           options.observation).features;
      // V is trained on scaled returns; undo the scale for the raw tail.
      tail = neuro::forward(value_net, f)[0] / options.reward_scale;
    }
    const auto targets = discounted_returns(rewards[i], options.gamma, tail);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      buffer.push(states[i][k], options.reward_scale * targets[k]);
    }
    double sum = 0.0;
    for (double r : rewards[i]) sum += r;
    log.reward_sums.push_back(sum);
    log.arrived.push_back(st.arrived && !st.collided);
    log.collided.push_back(st.collided);
    log.disconnected.push_back(st.ever_disconnected);
  }
  return log;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

struct Checkpoint {
  long long next_episode = 0;
  double epsilon = 0.0;
  std::string rng_state;
  std::string buffer_digest;
  long long adam_step = 0;
};

void write_moments(std::ostream& os, const neuro::Gradients& g) {
  for (std::size_t k = 0; k < g.weights.size(); ++k) {
    os.write(reinterpret_cast<const char*>(g.weights[k].data()),
             static_cast<std::streamsize>(g.weights[k].size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(g.bias[k].data()),
             static_cast<std::streamsize>(g.bias[k].size() * sizeof(double)));
  }
}

void read_moments(std::istream& is, neuro::Gradients& g) {
  for (std::size_t k = 0; k < g.weights.size(); ++k) {
    is.read(reinterpret_cast<char*>(g.weights[k].data()),
            static_cast<std::streamsize>(g.weights[k].size() * sizeof(double)));
    is.read(reinterpret_cast<char*>(g.bias[k].data()),
            static_cast<std::streamsize>(g.bias[k].size() * sizeof(double)));
  }
  if (!is) throw std::runtime_error("checkpoint: truncated optimizer state");
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& c,
                     const neuro::NetworkParams& net, const neuro::AdamState& adam,
                     const ReplayBuffer& buffer, std::span<const CurveRow> curve) {
  std::filesystem::create_directories(dir);
  neuro::save_network((dir / "value_net.txt").string(), net);
  {
    std::ostringstream bin;
    write_moments(bin, adam.m);
    write_moments(bin, adam.v);
    buffer.write_binary(bin);
    io::write_file_atomic(dir / "state.bin", bin.str());
  }
  {
    std::ostringstream ss;
    write_curve_csv(ss, curve);
    io::write_file_atomic(dir / "curve.csv", ss.str());
  }
  std::ostringstream ss;
  ss << "uavnav-train-state v1\n";
  ss << "next_episode " << c.next_episode << '\n';
  ss << "epsilon " << io::fmt(c.epsilon) << '\n';
  ss << "adam_step " << c.adam_step << '\n';
  ss << "buffer_digest " << c.buffer_digest << '\n';
  ss << "rng " << c.rng_state << '\n';
  io::write_file_atomic(dir / "state.txt", ss.str());
}

}  // namespace

TrainResult train(const TrainRunConfig& config, const radio::RadioEnvironment& base_env,
                  const orca::BootstrapSet& bootstrap, const TrainIo& io_opts) {
  if (bootstrap.pairs.empty()) throw std::invalid_argument("train: empty bootstrap set");
  if (!(config.episode.gamma >= 0.0 && config.episode.gamma < 1.0)) {
    throw std::invalid_argument("train: gamma must lie in [0, 1)");
  }
  if (config.total_episodes < 1) throw std::invalid_argument("train: total_episodes must be >= 1");

  EpsilonSchedule eps_schedule = config.epsilon;
  eps_schedule.decay_episodes = static_cast<long long>(
      std::llround(config.epsilon_decay_fraction * static_cast<double>(config.total_episodes)));

  TrainResult result;
  ReplayBuffer buffer(config.replay_capacity);
  neuro::AdamState adam;
  Rng rng(derive_seed(config.seed, 1));

  const std::filesystem::path ckdir = io_opts.checkpoint_dir;
  const bool resuming = io_opts.resume && !ckdir.empty() && std::filesystem::exists(ckdir / "state.txt");
  if (resuming) {
    result.net = neuro::load_network((ckdir / "value_net.txt").string());
    adam = neuro::AdamState::for_params(result.net);
    std::istringstream state(io::read_file(ckdir / "state.txt"));
    std::string line;
    std::getline(state, line);
    if (line != "uavnav-train-state v1") throw std::runtime_error("checkpoint: bad state header");
    Checkpoint c;
    std::string key;
    state >> key >> c.next_episode >> key;
    std::string eps_text;
    state >> eps_text >> key >> c.adam_step >> key >> c.buffer_digest >> key;
    std::getline(state, c.rng_state);
    std::istringstream rs(c.rng_state);
    rs >> rng;
    if (!rs) throw std::runtime_error("checkpoint: bad rng state");
    adam.step = c.adam_step;
    std::istringstream bin(io::read_file(ckdir / "state.bin"));
    read_moments(bin, adam.m);
    read_moments(bin, adam.v);
    buffer = ReplayBuffer::read_binary(bin);
    if (buffer.digest() != c.buffer_digest) throw std::runtime_error("checkpoint: buffer digest mismatch");
    std::istringstream curve(io::read_file(ckdir / "curve.csv"));
    result.curve = read_curve_csv(curve);
    result.start_episode = c.next_episode;
  } else {
    Rng init_rng(derive_seed(config.seed, 2));
    const std::size_t dim = bootstrap.pairs.front().features.size();
    const auto specs = neuro::value_net_specs(dim);
    result.net = neuro::make_network(specs, init_rng);
    std::vector<std::vector<double>> xs;
    xs.reserve(bootstrap.pairs.size());
    Eigen::MatrixXd ys(1, static_cast<Eigen::Index>(bootstrap.pairs.size()));
    for (std::size_t i = 0; i < bootstrap.pairs.size(); ++i) {
      xs.push_back(bootstrap.pairs[i].features);
      ys(0, static_cast<Eigen::Index>(i)) = config.episode.reward_scale * bootstrap.pairs[i].value;
    }
    const Eigen::MatrixXd x = neuro::to_columns(xs);
    result.net.standardizer = neuro::fit_standardizer(x);
    adam = neuro::AdamState::for_params(result.net);
    neuro::TrainConfig pre = config.optimizer;
    pre.epochs = config.pretrain_epochs;
    if (pre.epochs > 0) result.pretrain_loss = neuro::train_epochs(result.net, adam, x, ys, pre, init_rng);
    for (std::size_t i = 0; i < bootstrap.pairs.size(); ++i) {
      buffer.push(bootstrap.pairs[i].features, ys(0, static_cast<Eigen::Index>(i)));
    }
  }

  Eigen::MatrixXd bx, by;
  for (long long ep = result.start_episode; ep < config.total_episodes; ++ep) {
    const radio::Jammer jammer = config.jammers.jammer_for_episode(ep, config.seed);
    const radio::RadioEnvironment env = base_env.with_jammer(jammer);
    const world::ScenarioConfig scenario = config.scenarios.generate(rng, env);
    const double eps = epsilon(ep, eps_schedule);
    const EpisodeLog log = run_episode(result.net, env, scenario, eps, buffer, rng, config.episode);
    for (std::size_t u = 0; u < config.updates_per_episode; ++u) {
      buffer.sample(config.optimizer.batch_size, rng, bx, by);
      const double loss = neuro::minibatch_update(result.net, adam, bx, by, config.optimizer);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("train: non-finite loss at episode " + std::to_string(ep));
      }
    }
    CurveRow row;
    row.episode = ep;
    row.accumulated_reward = log.accumulated_reward();
    row.epsilon = eps;
    row.jammer = jammer;
    double ok = 0.0;
    for (bool a : log.arrived) ok += a ? 1.0 : 0.0;
    row.success_fraction = log.arrived.empty() ? 0.0 : ok / static_cast<double>(log.arrived.size());
    result.curve.push_back(row);
    if (io_opts.on_episode) io_opts.on_episode(row);

    if (!ckdir.empty() && config.checkpoint_every > 0 && (ep + 1) % config.checkpoint_every == 0) {
      Checkpoint c;
      c.next_episode = ep + 1;
      c.epsilon = eps;
      std::ostringstream rs;
      rs << rng;
      c.rng_state = rs.str();
      c.buffer_digest = buffer.digest();
      c.adam_step = adam.step;
      save_checkpoint(ckdir, c, result.net, adam, buffer, result.curve);
    }
  }
  return result;
}

void write_curve_csv(std::ostream& os, std::span<const CurveRow> rows) {
  os << kCurveHeader << '\n';
  for (const auto& r : rows) {
    const double power = r.jammer.active ? r.jammer.tx_power : 0.0;
    os << r.episode << ',' << io::fmt(r.accumulated_reward) << ',' << io::fmt(r.epsilon) << ','
       << io::fmt(r.jammer.position.x) << ',' << io::fmt(r.jammer.position.y) << ','
       << io::fmt(power) << ',' << io::fmt(r.success_fraction) << '\n';
  }
}

std::vector<CurveRow> read_curve_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCurveHeader) {
    throw std::runtime_error("curve file: unexpected header");
  }
  std::vector<CurveRow> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = io::split(line, ',');
    if (f.size() != 7) {
      throw std::runtime_error("curve file: line " + std::to_string(lineno) + " has " +
                               std::to_string(f.size()) + " fields");
    }
    CurveRow r;
    r.episode = io::parse_int(f[0]);
    r.accumulated_reward = io::parse_double(f[1]);
    r.epsilon = io::parse_double(f[2]);
    r.jammer.position = {io::parse_double(f[3]), io::parse_double(f[4])};
    r.jammer.tx_power = io::parse_double(f[5]);
    r.jammer.active = r.jammer.tx_power > 0.0;
    r.success_fraction = io::parse_double(f[6]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace uavnav::valuetrain
