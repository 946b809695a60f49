// uavnav: bootstrap, train, trainmap, eval and covmap entry points.
// Exit codes: 0 ok, 2 invalid configuration or arguments, 3 runtime failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "uavnav/commands.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<long long> episodes;
  std::string out;
  std::string preset;
};

void add_common(CLI::App* sub, Common& c, bool with_preset) {
  sub->add_option("--config", c.config, "YAML run configuration")->required()->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "override the configured seed");
  sub->add_option("--out", c.out, "output file or directory")->required();
  if (with_preset) sub->add_option("--preset", c.preset, "named jammer preset from the configuration");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace uavnav;
  CLI::App app{"Connectivity-aware multi-UAV navigation under jamming"};
  app.require_subcommand(1);

  Common common;
  std::string bootstrap_path, value_model, map_model, measurements, trajectories;
  bool resume = false;
  bool quiet = false;
  double resolution = 1.0;

  auto* boot = app.add_subcommand("bootstrap", "generate ORCA state-value pairs");
  add_common(boot, common, false);
  boot->add_option("--episodes", common.episodes, "number of ORCA episodes");

  auto* train = app.add_subcommand("train", "train the value network");
  add_common(train, common, false);
  train->add_option("--bootstrap", bootstrap_path, "bootstrap file from 'bootstrap'")->required();
  train->add_option("--episodes", common.episodes, "number of training episodes");
  train->add_flag("--resume", resume, "continue from out/checkpoint");
  train->add_flag("--quiet", quiet, "no progress output");

  auto* trainmap = app.add_subcommand("trainmap", "train the SINR map regressor");
  add_common(trainmap, common, true);
  trainmap->add_option("--measurements", measurements, "measurement CSV; synthetic when omitted");
  trainmap->add_option("--episodes", common.episodes, "number of synthetic measurements");

  auto* eval = app.add_subcommand("eval", "compare proposed, outdated and perfect maps");
  add_common(eval, common, true);
  eval->add_option("--value-model", value_model, "value network file")->required();
  eval->add_option("--map-model", map_model, "map network file")->required();
  eval->add_option("--trajectories", trajectories, "directory for per-mode trajectory CSVs");
  eval->add_option("--episodes", common.episodes, "number of evaluation trials");

  auto* covmap = app.add_subcommand("covmap", "rasterize the coverage map");
  add_common(covmap, common, true);
  covmap->add_option("--resolution", resolution, "cell size in meters")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  cli::Command which = cli::Command::bootstrap;
  if (*train) which = cli::Command::train;
  if (*trainmap) which = cli::Command::trainmap;
  if (*eval) which = cli::Command::eval;
  if (*covmap) which = cli::Command::covmap;

  config::RunConfig cfg;
  try {
    cfg = cli::resolve_config(common.config, {common.seed, common.episodes}, which);
    if (!common.preset.empty() && !cfg.presets.count(common.preset)) {
      throw config::ConfigError(common.config, 0, "unknown preset '" + common.preset + "'");
    }
  } catch (const config::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    switch (which) {
      case cli::Command::bootstrap: {
        const auto s = cli::cmd_bootstrap(cfg, common.out);
        std::cout << "bootstrap: " << s.pairs << " pairs from " << s.episodes << " episodes ("
                  << s.collisions << " collisions)\n";
        break;
      }
      case cli::Command::train: {
        const auto s = cli::cmd_train(cfg, bootstrap_path, common.out, resume, !quiet);
        std::cout << "train: " << s.episodes << " episodes, final moving average "
                  << s.final_moving_average << '\n';
        break;
      }
      case cli::Command::trainmap: {
        std::optional<std::filesystem::path> src;
        if (!measurements.empty()) src = measurements;
        const auto s = cli::cmd_trainmap(cfg, common.preset, src, common.out);
        std::cout << "trainmap: " << s.measurements << " measurements, held-out accuracy "
                  << s.final_accuracy << '\n';
        break;
      }
      case cli::Command::eval: {
        std::optional<std::filesystem::path> traj;
        if (!trajectories.empty()) traj = trajectories;
        const auto cmp = cli::cmd_eval(cfg, value_model, map_model, common.preset, common.out, traj);
        for (const auto& r : cmp.reports) {
          std::cout << r.mode << ": success " << r.success_rate << " disconnection "
                    << r.disconnection_rate << " collision " << r.collision_rate << '\n';
        }
        break;
      }
      case cli::Command::covmap:
        cli::cmd_covmap(cfg, common.preset, resolution, common.out);
        break;
    }
  } catch (const cli::ArchitectureError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
