#pragma once

// The five command-line operations as library calls. Each is a pure function of
// (configuration, input files) to output bytes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "uavnav/config.hpp"
#include "uavnav/nav.hpp"

namespace uavnav::cli {

enum class Command { bootstrap, train, trainmap, eval, covmap };

struct Overrides {
  std::optional<std::uint64_t> seed;
  /// Episodes for bootstrap/train, measurements for trainmap, trials for eval.
  std::optional<long long> episodes;
};

/// Loads the file, applies overrides and re-validates. Throws config::ConfigError.
config::RunConfig resolve_config(const std::string& path, const Overrides& overrides, Command command);
void apply_overrides(config::RunConfig& config, const Overrides& overrides, Command command);

struct BootstrapSummary {
  std::size_t pairs = 0;
  std::size_t episodes = 0;
  std::size_t collisions = 0;
};

BootstrapSummary cmd_bootstrap(const config::RunConfig& config, const std::filesystem::path& out);

struct TrainSummary {
  long long episodes = 0;
  double final_moving_average = 0.0;
};

/// Writes value_net.txt and reward_curve.csv into out_dir, plus a rolling
/// checkpoint under out_dir/checkpoint.
TrainSummary cmd_train(const config::RunConfig& config, const std::filesystem::path& bootstrap,
                       const std::filesystem::path& out_dir, bool resume, bool progress);

struct TrainMapSummary {
  std::size_t measurements = 0;
  double final_accuracy = 0.0;
};

/// Trains the map regressor from a measurement CSV, or from synthetic measurements
/// of the configured environment when `measurements` is empty. Writes map_net.txt
/// and map_accuracy.csv (and measurements.csv when synthetic) into out_dir.
TrainMapSummary cmd_trainmap(const config::RunConfig& config, const std::string& preset,
                             const std::optional<std::filesystem::path>& measurements,
                             const std::filesystem::path& out_dir);

/// Runs the three-mode comparison and writes the JSON report. With a trajectory
/// directory, one CSV per mode is written there.
nav::ModeComparison cmd_eval(const config::RunConfig& config, const std::filesystem::path& value_model,
                             const std::filesystem::path& map_model, const std::string& preset,
                             const std::filesystem::path& out,
                             const std::optional<std::filesystem::path>& trajectories);

void cmd_covmap(const config::RunConfig& config, const std::string& preset, double resolution,
                const std::filesystem::path& out);

/// Model file does not fit the configuration.
class ArchitectureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace uavnav::cli
