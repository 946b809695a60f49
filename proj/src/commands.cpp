#include "uavnav/commands.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "uavnav/io.hpp"

namespace uavnav::cli {

namespace fs = std::filesystem;

void apply_overrides(config::RunConfig& c, const Overrides& o, Command command) {
  if (o.seed) c.seed = *o.seed;
  if (o.episodes) {
    const long long n = *o.episodes;
    if (n < 1) throw config::ConfigError("--episodes", 0, "override must be >= 1, got " + std::to_string(n));
    switch (command) {
      case Command::bootstrap: c.bootstrap_episodes = static_cast<std::size_t>(n); break;
      case Command::train: c.training.total_episodes = n; break;
      case Command::trainmap: c.mapping.measurements = static_cast<std::size_t>(n); break;
      case Command::eval: c.evaluation.trials = static_cast<std::size_t>(n); break;
      case Command::covmap: break;
    }
  }
  try {
    c.finalize();
  } catch (const std::invalid_argument& e) {
    throw config::ConfigError("<overrides>", 0, e.what());
  }
}

config::RunConfig resolve_config(const std::string& path, const Overrides& overrides, Command command) {
  auto c = config::load_config(path);
  apply_overrides(c, overrides, command);
  return c;
}

BootstrapSummary cmd_bootstrap(const config::RunConfig& c, const fs::path& out) {
  Rng rng(derive_seed(c.seed, 3));
  valuetrain::JammerSchedule jammers = c.training.jammers;
  jammers.change_period = 1;
  jammers.initial.reset();
  const auto base = c.environment();

  std::vector<orca::BootstrapEpisode> episodes;
  episodes.reserve(c.bootstrap_episodes);
  for (std::size_t e = 0; e < c.bootstrap_episodes; ++e) {
    const auto env = base.with_jammer(jammers.jammer_for_episode(static_cast<long long>(e), c.seed ^ 0xB0075ULL));
    episodes.push_back({c.scenarios.generate(rng, env), env});
  }
  orca::BootstrapOptions opts;
  opts.gamma = c.training.episode.gamma;
  opts.observation = c.observation;
  opts.world = c.world;
  opts.orca = c.orca;
  const auto set = orca::generate_bootstrap_set(episodes, opts);
  if (set.pairs.empty()) throw std::runtime_error("bootstrap produced no state-value pairs");

  std::vector<std::vector<double>> xs;
  xs.reserve(set.pairs.size());
  for (const auto& p : set.pairs) xs.push_back(p.features);
  const auto s = neuro::fit_standardizer(xs);
  std::ostringstream ss;
  orca::write_bootstrap(ss, set, {s.mean.data(), s.mean.data() + s.mean.size()},
                        {s.std_dev.data(), s.std_dev.data() + s.std_dev.size()}, config::digest(c));
  io::write_file_atomic(out, ss.str());
  return {set.pairs.size(), set.episodes, set.collisions};
}

TrainSummary cmd_train(const config::RunConfig& c, const fs::path& bootstrap, const fs::path& out_dir,
                       bool resume, bool progress) {
  std::ifstream in(bootstrap);
  if (!in) throw std::runtime_error("cannot open bootstrap file " + bootstrap.string());
  const auto loaded = orca::read_bootstrap(in);
  const std::size_t expected = world::joint_state_length(c.observation.max_neighbors);
  if (!loaded.set.pairs.empty() && loaded.set.pairs.front().features.size() != expected) {
    throw ArchitectureError("bootstrap states have " +
                            std::to_string(loaded.set.pairs.front().features.size()) +
                            " features, configuration expects " + std::to_string(expected));
  }

  fs::create_directories(out_dir);
  valuetrain::TrainIo tio;
  tio.checkpoint_dir = (out_dir / "checkpoint").string();
  tio.resume = resume;
  if (progress) {
    tio.on_episode = [](const valuetrain::CurveRow& r) {
      if ((r.episode + 1) % 250 == 0) {
        std::cerr << "episode " << r.episode + 1 << " reward " << r.accumulated_reward
                  << " eps " << r.epsilon << '\n';
      }
    };
  }
  const auto result = valuetrain::train(c.training, c.environment(), loaded.set, tio);

  neuro::save_network((out_dir / "value_net.txt").string(), result.net);
  std::ostringstream curve;
  valuetrain::write_curve_csv(curve, result.curve);
  io::write_file_atomic(out_dir / "reward_curve.csv", curve.str());

  TrainSummary s;
  s.episodes = static_cast<long long>(result.curve.size());
  const std::size_t w = std::min<std::size_t>(100, result.curve.size());
  for (std::size_t i = result.curve.size() - w; i < result.curve.size(); ++i) {
    s.final_moving_average += result.curve[i].accumulated_reward / static_cast<double>(w);
  }
  return s;
}

TrainMapSummary cmd_trainmap(const config::RunConfig& c, const std::string& preset,
                             const std::optional<fs::path>& measurements, const fs::path& out_dir) {
  std::vector<sinrmap::Measurement> data;
  if (measurements) {
    std::ifstream in(*measurements);
    if (!in) throw std::runtime_error("cannot open measurement file " + measurements->string());
    data = sinrmap::read_measurements_csv(in);
  } else {
    Rng rng(derive_seed(c.seed, 4));
    data = sinrmap::generate_measurements(c.environment(preset), c.arena(), c.mapping.measurements,
                                          c.mapping.k_n, rng);
  }
  if (data.empty()) throw std::runtime_error("measurement source is empty");
  const std::size_t dim = c.mapping.k_n * sinrmap::kStationFeatures;
  if (data.front().features.size() != dim) {
    throw ArchitectureError("measurements have " + std::to_string(data.front().features.size()) +
                            " features, configuration expects " + std::to_string(dim));
  }

  Rng rng(derive_seed(c.seed, 5));
  auto model = sinrmap::make_map_model(c.mapping.k_n, rng);
  model.train = c.mapping.train;
  sinrmap::MeasurementCloud cloud(data.size());
  for (auto& m : data) cloud.record(m);
  const auto r = sinrmap::retrain(model, cloud, rng, c.mapping.mapper.holdout_fraction);

  fs::create_directories(out_dir);
  neuro::save_network((out_dir / "map_net.txt").string(), model.net);
  std::ostringstream acc;
  acc << "epoch,accuracy,loss\n";
  for (std::size_t e = 0; e < r.accuracy.size(); ++e) {
    acc << e + 1 << ',' << io::fmt(r.accuracy[e]) << ',' << io::fmt(r.loss[e]) << '\n';
  }
  io::write_file_atomic(out_dir / "map_accuracy.csv", acc.str());
  if (!measurements) {
    std::ostringstream ms;
    sinrmap::write_measurements_csv(ms, data);
    io::write_file_atomic(out_dir / "measurements.csv", ms.str());
  }
  return {data.size(), r.accuracy.empty() ? 0.0 : r.accuracy.back()};
}

nav::ModeComparison cmd_eval(const config::RunConfig& c, const fs::path& value_model,
                             const fs::path& map_model, const std::string& preset, const fs::path& out,
                             const std::optional<fs::path>& trajectories) {
  const auto value_net = neuro::load_network(value_model.string());
  const std::size_t expected = world::joint_state_length(c.observation.max_neighbors);
  if (value_net.input_size() != expected || value_net.output_size() != 1) {
    throw ArchitectureError("value model takes " + std::to_string(value_net.input_size()) +
                            " inputs, configuration expects " + std::to_string(expected));
  }
  sinrmap::MapModel map;
  map.net = neuro::load_network(map_model.string());
  map.k_n = c.mapping.k_n;
  if (map.net.input_size() != c.mapping.k_n * sinrmap::kStationFeatures || map.net.output_size() != 1) {
    throw ArchitectureError("map model takes " + std::to_string(map.net.input_size()) +
                            " inputs, configuration expects " +
                            std::to_string(c.mapping.k_n * sinrmap::kStationFeatures));
  }

  const auto env = c.environment(preset);
  const std::uint64_t eval_seed = c.seed + c.evaluation.seed_offset;
  const auto scenarios = nav::evaluation_scenarios(c.scenarios, env, c.evaluation.trials, eval_seed);
  nav::EvalOptions opts;
  opts.nav.n_speeds = c.n_speeds;
  opts.nav.n_headings = c.n_headings;
  opts.nav.gamma = c.training.episode.gamma;
  opts.nav.reward_scale = c.training.episode.reward_scale;
  opts.nav.gated_lookahead = c.training.episode.gated_lookahead;
  opts.nav.observation = c.observation;
  opts.nav.rewards = c.world.rewards;
  opts.world = c.world;
  opts.world.terminate_on_disconnect = true;
  opts.record_trials = c.evaluation.record_trials;
  nav::ProposedMapCheck check;
  check.probes = c.evaluation.probes;
  check.drop_threshold = c.mapping.mapper.drop_threshold;
  check.bounds = c.arena();

  auto cmp = nav::compare_modes(value_net, map, env, scenarios, opts, check, eval_seed,
                                trajectories.has_value());
  io::write_file_atomic(out, nav::report_json(cmp, config::digest(c), preset));
  if (trajectories) {
    fs::create_directories(*trajectories);
    for (std::size_t k = 0; k < cmp.reports.size(); ++k) {
      std::ostringstream ss;
      world::write_trajectory_csv(ss, cmp.trajectories[k]);
      io::write_file_atomic(*trajectories / (cmp.reports[k].mode + "_trajectories.csv"), ss.str());
    }
  }
  return cmp;
}

void cmd_covmap(const config::RunConfig& c, const std::string& preset, double resolution,
                const fs::path& out) {
  const auto grid = radio::coverage_grid(c.environment(preset), c.arena(), resolution);
  std::ostringstream ss;
  radio::write_coverage_csv(ss, grid);
  io::write_file_atomic(out, ss.str());
}

}  // namespace uavnav::cli
