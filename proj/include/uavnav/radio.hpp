#pragma once

// Analytic cellular downlink model for UAVs flying at a fixed altitude above a
// set of ground base stations (GBS), with an optional jammer.
//
// Conventions:
//  * distances are horizontal, in meters; heights are absolute, in meters
//  * powers are in watts, gains and SINR are linear unless a name says _db
//  * the GBS pattern attenuates quadratically in the beam mismatch angle and is
//    capped at max_atten_db, i.e. G_B = 10^(-min(1.2 x^2, G_m / 10))

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "uavnav/geometry.hpp"

namespace uavnav::radio {

struct GroundStation {
  Vec2 position;
  double height = 32.0;
  double tx_power = 1.0;
  double tilt_deg = 10.0;
  double beamwidth_deg = 15.0;
  double max_atten_db = 30.0;
};

struct Jammer {
  Vec2 position;
  double height = 0.0;
  double tx_power = 1.0;
  bool active = true;
};

struct RadioParams {
  double noise_power = 1e-6;
  double uav_altitude = 50.0;
  double pathloss_exponent = 2.0;
  /// Linear threshold; -3 dB by default.
  double sinr_threshold = 0.50118723362727224;
  /// Width of the marginal band above the threshold, linear.
  double margin = 0.1;
};

/// Immutable radio world. Construction validates every invariant; a jammer change
/// produces a new value via with_jammer().
class RadioEnvironment {
 public:
  RadioEnvironment(std::vector<GroundStation> stations, std::optional<Jammer> jammer,
                   RadioParams params);

  const std::vector<GroundStation>& stations() const { return stations_; }
  const std::optional<Jammer>& jammer() const { return jammer_; }
  const RadioParams& params() const { return params_; }

  double noise_power() const { return params_.noise_power; }
  double uav_altitude() const { return params_.uav_altitude; }
  double pathloss_exponent() const { return params_.pathloss_exponent; }
  double sinr_threshold() const { return params_.sinr_threshold; }
  double margin() const { return params_.margin; }

  /// True if a jammer is present and active with positive power.
  bool jammer_effective() const;

  RadioEnvironment with_jammer(std::optional<Jammer> jammer) const;
  RadioEnvironment without_jammer() const { return with_jammer(std::nullopt); }

 private:
  std::vector<GroundStation> stations_;
  std::optional<Jammer> jammer_;
  RadioParams params_;
};

struct SinrLevel {
  double linear = 0.0;
  double db = 0.0;
  int level = 0;
};

inline constexpr int kLevelDisconnected = 0;
inline constexpr int kLevelMarginal = 1;
inline constexpr int kLevelConnected = 2;

double gbs_antenna_gain(double horizontal_distance, const GroundStation& station,
                        double uav_altitude);

/// Sine of the elevation angle seen from the UAV. Throws if the UAV is not above
/// the station.
double uav_antenna_gain(double horizontal_distance, double station_height, double uav_altitude);

/// (d^2 + dh^2)^(alpha/2). Throws when both distances are zero.
double path_loss(double horizontal_distance, double height_difference, double alpha);

/// Jammer power at the UAV. Zero when the jammer is absent or inactive.
double jammer_interference(const RadioEnvironment& env, const Vec2& uav_position);

double received_power(const GroundStation& station, const RadioEnvironment& env,
                      const Vec2& uav_position);

/// Index of the station with the largest received power; lowest index wins ties.
std::size_t serving_gbs(const RadioEnvironment& env, const Vec2& uav_position);

double sinr(const RadioEnvironment& env, const Vec2& uav_position);

int quantize_sinr(double linear_sinr, const RadioEnvironment& env);

SinrLevel sinr_level(const RadioEnvironment& env, const Vec2& uav_position);

struct Bounds {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;
};

/// Row-major grid of levels sampled at cell centers; row 0 is the ymin edge.
struct CoverageGrid {
  double xmin = 0.0;
  double ymin = 0.0;
  double resolution = 1.0;
  std::size_t ncols = 0;
  std::size_t nrows = 0;
  std::vector<SinrLevel> cells;

  const SinrLevel& at(std::size_t col, std::size_t row) const { return cells[row * ncols + col]; }
  Vec2 cell_center(std::size_t col, std::size_t row) const;
  std::size_t count_level(int level) const;
};

CoverageGrid coverage_grid(const RadioEnvironment& env, const Bounds& bounds, double resolution);

/// CSV export: two comment lines (field names, then values of
/// xmin,ymin,resolution,ncols,nrows) followed by one line of integer levels per row.
void write_coverage_csv(std::ostream& os, const CoverageGrid& grid);

/// Reads back the integer levels written by write_coverage_csv. linear/db fields are
/// not stored in the file and are left at zero.
CoverageGrid read_coverage_csv(std::istream& is);

}  // namespace uavnav::radio
