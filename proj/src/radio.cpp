#include "uavnav/radio.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "uavnav/io.hpp"

namespace uavnav::radio {

namespace {

void validate_station(const GroundStation& s, double uav_altitude) {
  if (!(s.tx_power > 0.0)) throw std::invalid_argument("station tx_power must be > 0");
  if (!(s.beamwidth_deg > 0.0)) throw std::invalid_argument("station beamwidth_deg must be > 0");
  if (!(s.max_atten_db >= 0.0)) throw std::invalid_argument("station max_atten_db must be >= 0");
  if (!(s.height > 0.0)) throw std::invalid_argument("station height must be > 0");
  if (!(uav_altitude > s.height)) {
    throw std::invalid_argument("uav_altitude must exceed every station height");
  }
}

}  // namespace

RadioEnvironment::RadioEnvironment(std::vector<GroundStation> stations,
                                   std::optional<Jammer> jammer, RadioParams params)
    : stations_(std::move(stations)), jammer_(std::move(jammer)), params_(params) {
  if (stations_.empty()) throw std::invalid_argument("radio environment needs at least one station");
  if (!(params_.noise_power > 0.0)) throw std::invalid_argument("noise_power must be > 0");
  if (!(params_.pathloss_exponent >= 2.0)) throw std::invalid_argument("pathloss_exponent must be >= 2");
  if (!(params_.sinr_threshold > 0.0)) throw std::invalid_argument("sinr_threshold must be > 0");
  if (!(params_.margin >= 0.0)) throw std::invalid_argument("margin must be >= 0");
  for (const auto& s : stations_) validate_station(s, params_.uav_altitude);
  if (jammer_) {
    if (!(jammer_->tx_power >= 0.0)) throw std::invalid_argument("jammer tx_power must be >= 0");
    if (!(jammer_->height < params_.uav_altitude)) {
      throw std::invalid_argument("jammer height must be below the UAV altitude");
    }
  }
}

bool RadioEnvironment::jammer_effective() const {
  return jammer_ && jammer_->active && jammer_->tx_power > 0.0;
}

RadioEnvironment RadioEnvironment::with_jammer(std::optional<Jammer> jammer) const {
  return RadioEnvironment(stations_, std::move(jammer), params_);
}

double gbs_antenna_gain(double horizontal_distance, const GroundStation& station,
                        double uav_altitude) {
  // atan2 gives the +-90 degree convention at d = 0.
  const double elevation_deg =
      rad2deg(std::atan2(station.height - uav_altitude, horizontal_distance));
  const double x = (elevation_deg - station.tilt_deg) / station.beamwidth_deg;
  const double atten = std::min(1.2 * x * x, station.max_atten_db / 10.0);
  return std::pow(10.0, -atten);
}

double uav_antenna_gain(double horizontal_distance, double station_height, double uav_altitude) {
  const double dh = uav_altitude - station_height;
  if (!(dh > 0.0)) throw std::invalid_argument("uav_antenna_gain: UAV must fly above the transmitter");
  return dh / std::sqrt(horizontal_distance * horizontal_distance + dh * dh);
}

double path_loss(double horizontal_distance, double height_difference, double alpha) {
  const double r_sq =
      horizontal_distance * horizontal_distance + height_difference * height_difference;
  if (r_sq == 0.0) throw std::invalid_argument("path_loss: zero separation");
  return std::pow(r_sq, alpha / 2.0);
}

double jammer_interference(const RadioEnvironment& env, const Vec2& uav_position) {
  const auto& j = env.jammer();
  if (!j || !j->active || j->tx_power == 0.0) return 0.0;
  const double d = distance(uav_position, j->position);
  const double dh = env.uav_altitude() - j->height;
  return j->tx_power / path_loss(d, dh, env.pathloss_exponent()) *
         uav_antenna_gain(d, j->height, env.uav_altitude());
}

double received_power(const GroundStation& station, const RadioEnvironment& env,
                      const Vec2& uav_position) {
  const double d = distance(uav_position, station.position);
  const double dh = env.uav_altitude() - station.height;
  return station.tx_power * gbs_antenna_gain(d, station, env.uav_altitude()) *
         uav_antenna_gain(d, station.height, env.uav_altitude()) /
         path_loss(d, dh, env.pathloss_exponent());
}

std::size_t serving_gbs(const RadioEnvironment& env, const Vec2& uav_position) {
  const auto& stations = env.stations();
  std::size_t best = 0;
  double best_power = received_power(stations[0], env, uav_position);
  for (std::size_t k = 1; k < stations.size(); ++k) {
    const double p = received_power(stations[k], env, uav_position);
    if (p > best_power) {
      best_power = p;
      best = k;
    }
  }
  return best;
}

double sinr(const RadioEnvironment& env, const Vec2& uav_position) {
  double best_power = 0.0;
  double total = 0.0;
  for (const auto& station : env.stations()) {
    const double p = received_power(station, env, uav_position);
    total += p;
    best_power = std::max(best_power, p);
  }
  const double others = total - best_power;
  return best_power / (env.noise_power() + jammer_interference(env, uav_position) + others);
}

int quantize_sinr(double linear_sinr, const RadioEnvironment& env) {
  if (linear_sinr < env.sinr_threshold()) return kLevelDisconnected;
  if (linear_sinr < env.sinr_threshold() + env.margin()) return kLevelMarginal;
  return kLevelConnected;
}

SinrLevel sinr_level(const RadioEnvironment& env, const Vec2& uav_position) {
  SinrLevel out;
  out.linear = sinr(env, uav_position);
  out.db = 10.0 * std::log10(out.linear);
  out.level = quantize_sinr(out.linear, env);
  return out;
}

Vec2 CoverageGrid::cell_center(std::size_t col, std::size_t row) const {
  return {xmin + (static_cast<double>(col) + 0.5) * resolution,
          ymin + (static_cast<double>(row) + 0.5) * resolution};
}

std::size_t CoverageGrid::count_level(int level) const {
  return static_cast<std::size_t>(std::count_if(
      cells.begin(), cells.end(), [level](const SinrLevel& c) { return c.level == level; }));
}

CoverageGrid coverage_grid(const RadioEnvironment& env, const Bounds& bounds, double resolution) {
  if (!(resolution > 0.0)) throw std::invalid_argument("coverage_grid: resolution must be > 0");
  if (!(bounds.xmax > bounds.xmin) || !(bounds.ymax > bounds.ymin)) {
    throw std::invalid_argument("coverage_grid: empty bounds");
  }
  CoverageGrid grid;
  grid.xmin = bounds.xmin;
  grid.ymin = bounds.ymin;
  grid.resolution = resolution;
  // A cell count within 1e-9 of an integer is taken as exact.
  grid.ncols = static_cast<std::size_t>(std::ceil((bounds.xmax - bounds.xmin) / resolution - 1e-9));
  grid.nrows = static_cast<std::size_t>(std::ceil((bounds.ymax - bounds.ymin) / resolution - 1e-9));
  grid.cells.reserve(grid.ncols * grid.nrows);
  for (std::size_t r = 0; r < grid.nrows; ++r) {
    for (std::size_t c = 0; c < grid.ncols; ++c) {
      grid.cells.push_back(sinr_level(env, grid.cell_center(c, r)));
    }
  }
  return grid;
}

void write_coverage_csv(std::ostream& os, const CoverageGrid& grid) {
  os << "# xmin,ymin,resolution,ncols,nrows\n";
  os << "# " << io::fmt(grid.xmin) << ',' << io::fmt(grid.ymin) << ',' << io::fmt(grid.resolution)
     << ',' << grid.ncols << ',' << grid.nrows << '\n';
  for (std::size_t r = 0; r < grid.nrows; ++r) {
    for (std::size_t c = 0; c < grid.ncols; ++c) {
      if (c) os << ',';
      os << grid.at(c, r).level;
    }
    os << '\n';
  }
}

CoverageGrid read_coverage_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "# xmin,ymin,resolution,ncols,nrows") {
    throw std::runtime_error("coverage csv: missing header");
  }
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) {
    throw std::runtime_error("coverage csv: missing header values");
  }
  const auto head = io::split(line.substr(2), ',');
  if (head.size() != 5) throw std::runtime_error("coverage csv: header needs 5 fields");
  CoverageGrid grid;
  grid.xmin = io::parse_double(head[0]);
  grid.ymin = io::parse_double(head[1]);
  grid.resolution = io::parse_double(head[2]);
  grid.ncols = static_cast<std::size_t>(io::parse_int(head[3]));
  grid.nrows = static_cast<std::size_t>(io::parse_int(head[4]));
  grid.cells.reserve(grid.ncols * grid.nrows);
  for (std::size_t r = 0; r < grid.nrows; ++r) {
    if (!std::getline(is, line)) throw std::runtime_error("coverage csv: truncated grid");
    const auto fields = io::split(line, ',');
    if (fields.size() != grid.ncols) {
      throw std::runtime_error("coverage csv: row " + std::to_string(r) + " has wrong width");
    }
    for (const auto& f : fields) {
      SinrLevel cell;
      cell.level = static_cast<int>(io::parse_int(f));
      grid.cells.push_back(cell);
    }
  }
  return grid;
}

}  // namespace uavnav::radio
