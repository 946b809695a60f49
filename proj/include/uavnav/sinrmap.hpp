#pragma once

// Online SINR mapping. A UAV describes its position by the geometry of the K_n
// nearest ground stations; a small regressor maps that description to a
// quantized SINR level. Accuracy on fresh measurements is watched to notice
// jammer changes, after which the stale measurements are dropped and the
// regressor is retrained.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uavnav/neuro.hpp"
#include "uavnav/radio.hpp"

namespace uavnav::sinrmap {

inline constexpr std::size_t kStationFeatures = 5;
inline constexpr std::size_t kDefaultNearest = 6;

/// Per station, nearest first: [dx, dy, horizontal distance, elevation, azimuth],
/// offsets taken from the UAV. Angles are radians; a station directly below has
/// elevation pi/2 and azimuth 0. Missing stations are padded with
/// [absent, 0, absent, 0, 0].
std::vector<double> featurize(const Vec2& uav_position,
                              std::span<const radio::GroundStation> stations, double uav_altitude,
                              std::size_t k_n, double absent_distance = 400.0);

struct Measurement {
  std::vector<double> features;
  int level = 0;
  long long timestamp = 0;
};

class MeasurementCloud {
 public:
  explicit MeasurementCloud(std::size_t capacity);

  void record(Measurement m);
  /// Drops every measurement with timestamp < t.
  void purge_before(long long t);
  void clear() { items_.clear(); }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const Measurement& operator[](std::size_t i) const { return items_[i]; }
  /// Most recent n (or fewer) measurements, oldest first.
  std::vector<Measurement> recent(std::size_t n) const;
  std::vector<Measurement> all() const { return {items_.begin(), items_.end()}; }

 private:
  std::size_t capacity_;
  std::deque<Measurement> items_;
};

struct MapModel {
  neuro::NetworkParams net;
  std::size_t k_n = kDefaultNearest;
  neuro::TrainConfig train{0.005, 200, 1e-4, 60};
};

MapModel make_map_model(std::size_t k_n, Rng& rng);

double predict_raw(const MapModel& model, std::span<const double> features);
/// Nearest integer (ties to even), clamped to {0, 1, 2}.
int level_from_raw(double raw);
int predict_level(const MapModel& model, std::span<const double> features);

double evaluate_accuracy(const MapModel& model, std::span<const Measurement> measurements);

bool detect_change(double accuracy_now, double baseline, double drop_threshold);

struct RetrainResult {
  std::vector<double> accuracy;  // held-out accuracy after each epoch
  std::vector<double> loss;
  std::size_t train_size = 0;
  std::size_t holdout_size = 0;
};

/// Warm-started retraining on the cloud. A shuffled `holdout_fraction` of the cloud
/// is kept out of training and scored after every epoch.
RetrainResult retrain(MapModel& model, const MeasurementCloud& cloud, Rng& rng,
                      double holdout_fraction = 0.1);

struct MapperConfig {
  std::size_t cloud_capacity = 20000;
  std::size_t check_cadence = 200;
  double drop_threshold = 0.10;
  /// Measurements collected after a detected change before the model is retrained.
  std::size_t min_retrain_size = 20000;
  double holdout_fraction = 0.1;
};

/// Single-writer online loop: ingest measurements, check accuracy every cadence,
/// purge and retrain after a detected change.
class OnlineSinrMapper {
 public:
  OnlineSinrMapper(MapModel model, MapperConfig config, std::uint64_t seed);

  struct Event {
    bool checked = false;
    double accuracy = 0.0;
    bool change_detected = false;
    bool retrained = false;
  };

  Event ingest(Measurement m);
  /// Trains on whatever the cloud holds and resets the baseline.
  RetrainResult retrain_now();

  const MapModel& model() const { return model_; }
  const MeasurementCloud& cloud() const { return cloud_; }
  double baseline() const { return baseline_; }
  bool awaiting_retrain() const { return awaiting_retrain_; }
  const std::vector<double>& accuracy_history() const { return history_; }

 private:
  MapModel model_;
  MapperConfig config_;
  MeasurementCloud cloud_;
  Rng rng_;
  double baseline_ = 0.0;
  std::size_t since_check_ = 0;
  bool awaiting_retrain_ = false;
  std::vector<double> history_;
};

/// Uniformly placed labelled measurements from the true environment.
std::vector<Measurement> generate_measurements(const radio::RadioEnvironment& env,
                                               const radio::Bounds& bounds, std::size_t count,
                                               std::size_t k_n, Rng& rng,
                                               long long first_timestamp = 0);

void write_measurements_csv(std::ostream& os, std::span<const Measurement> measurements);
/// Throws std::runtime_error naming the offending line.
std::vector<Measurement> read_measurements_csv(std::istream& is);

}  // namespace uavnav::sinrmap
