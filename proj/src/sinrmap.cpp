#include "uavnav/sinrmap.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "uavnav/io.hpp"

namespace uavnav::sinrmap {

std::vector<double> featurize(const Vec2& uav_position,
                              std::span<const radio::GroundStation> stations, double uav_altitude,
                              std::size_t k_n, double absent_distance) {
  if (stations.empty()) throw std::invalid_argument("featurize: no stations");
  if (k_n == 0) throw std::invalid_argument("featurize: k_n must be >= 1");

  std::vector<std::size_t> order(stations.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> dist(stations.size());
  for (std::size_t i = 0; i < stations.size(); ++i) {
    dist[i] = distance(uav_position, stations[i].position);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

  std::vector<double> f;
  f.reserve(k_n * kStationFeatures);
  for (std::size_t k = 0; k < k_n; ++k) {
    if (k >= order.size()) {
      f.insert(f.end(), {absent_distance, 0.0, absent_distance, 0.0, 0.0});
      continue;
    }
    const auto& s = stations[order[k]];
    const Vec2 rel = s.position - uav_position;
    const double d = dist[order[k]];
    double elevation = std::numbers::pi / 2.0;
    double azimuth = 0.0;
    if (d > 0.0) {
      elevation = std::atan2(uav_altitude - s.height, d);
      azimuth = std::atan2(rel.y, rel.x);
    }
    f.insert(f.end(), {rel.x, rel.y, d, elevation, azimuth});
  }
  return f;
}

MeasurementCloud::MeasurementCloud(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("measurement cloud capacity must be >= 1");
}

void MeasurementCloud::record(Measurement m) {
  if (m.level < radio::kLevelDisconnected || m.level > radio::kLevelConnected) {
    throw std::invalid_argument("measurement level out of range");
  }
  for (double v : m.features) {
    if (!std::isfinite(v)) throw std::invalid_argument("measurement has non-finite features");
  }
  items_.push_back(std::move(m));
  while (items_.size() > capacity_) items_.pop_front();
}

void MeasurementCloud::purge_before(long long t) {
  std::erase_if(items_, [t](const Measurement& m) { return m.timestamp < t; });
}

std::vector<Measurement> MeasurementCloud::recent(std::size_t n) const {
  const std::size_t k = std::min(n, items_.size());
  return {items_.end() - static_cast<std::ptrdiff_t>(k), items_.end()};
}

MapModel make_map_model(std::size_t k_n, Rng& rng) {
  MapModel m;
  m.k_n = k_n;
  const auto specs = neuro::map_net_specs(k_n * kStationFeatures);
  m.net = neuro::make_network(specs, rng);
  return m;
}

double predict_raw(const MapModel& model, std::span<const double> features) {
  if (features.size() != model.k_n * kStationFeatures) {
    throw std::invalid_argument("predict_level: expected " +
                                std::to_string(model.k_n * kStationFeatures) + " features, got " +
                                std::to_string(features.size()));
  }
  return neuro::forward(model.net, features)[0];
}

int level_from_raw(double raw) {
  // nearbyint honours the default round-to-nearest-even mode.
  const double r = std::nearbyint(raw);
  return static_cast<int>(std::clamp(r, 0.0, 2.0));
}

int predict_level(const MapModel& model, std::span<const double> features) {
  return level_from_raw(predict_raw(model, features));
}

double evaluate_accuracy(const MapModel& model, std::span<const Measurement> measurements) {
  if (measurements.empty()) throw std::invalid_argument("evaluate_accuracy: empty slice");
  std::vector<std::vector<double>> xs;
  xs.reserve(measurements.size());
  for (const auto& m : measurements) xs.push_back(m.features);
  const Eigen::MatrixXd out = neuro::forward_batch(model.net, neuro::to_columns(xs));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < measurements.size(); ++i) {
    if (level_from_raw(out(0, static_cast<Eigen::Index>(i))) == measurements[i].level) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(measurements.size());
}

bool detect_change(double accuracy_now, double baseline, double drop_threshold) {
  return baseline - accuracy_now > drop_threshold;
}

RetrainResult retrain(MapModel& model, const MeasurementCloud& cloud, Rng& rng,
                      double holdout_fraction) {
  if (cloud.empty()) throw std::invalid_argument("retrain: empty measurement cloud");
  const std::size_t n = cloud.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

  std::size_t n_hold = static_cast<std::size_t>(std::floor(holdout_fraction * static_cast<double>(n)));
  if (n_hold >= n) n_hold = 0;
  RetrainResult r;
  r.holdout_size = n_hold;
  r.train_size = n - n_hold;

  std::vector<Measurement> holdout;
  holdout.reserve(n_hold);
  for (std::size_t i = 0; i < n_hold; ++i) holdout.push_back(cloud[order[i]]);
  std::vector<std::vector<double>> xs;
  xs.reserve(r.train_size);
  Eigen::MatrixXd ys(1, static_cast<Eigen::Index>(r.train_size));
  for (std::size_t i = n_hold; i < n; ++i) {
    const auto& m = cloud[order[i]];
    ys(0, static_cast<Eigen::Index>(xs.size())) = m.level;
    xs.push_back(m.features);
  }
  const Eigen::MatrixXd x = neuro::to_columns(xs);
  model.net.standardizer = neuro::fit_standardizer(x);
  auto adam = neuro::AdamState::for_params(model.net);
  neuro::TrainConfig one = model.train;
  one.epochs = 1;
  const auto& eval_set = holdout.empty() ? cloud.all() : holdout;
  for (std::size_t e = 0; e < model.train.epochs; ++e) {
    r.loss.push_back(neuro::train_epochs(model.net, adam, x, ys, one, rng).front());
    r.accuracy.push_back(evaluate_accuracy(model, eval_set));
  }
  return r;
}

OnlineSinrMapper::OnlineSinrMapper(MapModel model, MapperConfig config, std::uint64_t seed)
    : model_(std::move(model)), config_(config), cloud_(config.cloud_capacity), rng_(seed) {
  if (config_.check_cadence == 0) throw std::invalid_argument("mapper: check cadence must be >= 1");
}

OnlineSinrMapper::Event OnlineSinrMapper::ingest(Measurement m) {
  Event ev;
  cloud_.record(std::move(m));
  ++since_check_;
  if (awaiting_retrain_) {
    if (cloud_.size() >= std::min(config_.min_retrain_size, config_.cloud_capacity)) {
      retrain_now();
      ev.retrained = true;
    }
    return ev;
  }
  if (since_check_ >= config_.check_cadence) {
    since_check_ = 0;
    const auto batch = cloud_.recent(config_.check_cadence);
    ev.checked = true;
    ev.accuracy = evaluate_accuracy(model_, batch);
    history_.push_back(ev.accuracy);
    if (detect_change(ev.accuracy, baseline_, config_.drop_threshold)) {
      ev.change_detected = true;
      awaiting_retrain_ = true;
      // Everything before the batch that exposed the drop belongs to the old regime.
      cloud_.purge_before(batch.front().timestamp);
    }
  }
  return ev;
}

RetrainResult OnlineSinrMapper::retrain_now() {
  auto r = retrain(model_, cloud_, rng_, config_.holdout_fraction);
  baseline_ = r.accuracy.empty() ? 0.0 : r.accuracy.back();
  awaiting_retrain_ = false;
  since_check_ = 0;
  return r;
}

std::vector<Measurement> generate_measurements(const radio::RadioEnvironment& env,
                                               const radio::Bounds& bounds, std::size_t count,
                                               std::size_t k_n, Rng& rng,
                                               long long first_timestamp) {
  std::vector<Measurement> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Vec2 p{uniform(rng, bounds.xmin, bounds.xmax), uniform(rng, bounds.ymin, bounds.ymax)};
    Measurement m;
    m.features = featurize(p, env.stations(), env.uav_altitude(), k_n);
    m.level = radio::sinr_level(env, p).level;
    m.timestamp = first_timestamp + static_cast<long long>(i);
    out.push_back(std::move(m));
  }
  return out;
}

void write_measurements_csv(std::ostream& os, std::span<const Measurement> measurements) {
  const std::size_t dim = measurements.empty() ? 0 : measurements.front().features.size();
  os << "timestamp";
  for (std::size_t k = 0; k < dim; ++k) os << ",f" << k;
  os << ",label\n";
  for (const auto& m : measurements) {
    os << m.timestamp << ',' << io::join(m.features) << ',' << m.level << '\n';
  }
}

std::vector<Measurement> read_measurements_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("measurement file: empty");
  const auto header = io::split(line, ',');
  if (header.size() < 3 || header.front() != "timestamp" || header.back() != "label") {
    throw std::runtime_error("measurement file: line 1: unexpected header");
  }
  const std::size_t dim = header.size() - 2;
  std::vector<Measurement> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = io::split(line, ',');
    try {
      if (f.size() != dim + 2) {
        throw std::invalid_argument("has " + std::to_string(f.size()) + " fields, expected " +
                                    std::to_string(dim + 2));
      }
      Measurement m;
      m.timestamp = io::parse_int(f[0]);
      for (std::size_t k = 0; k < dim; ++k) m.features.push_back(io::parse_double(f[k + 1]));
      m.level = static_cast<int>(io::parse_int(f.back()));
      if (m.level < 0 || m.level > 2) throw std::invalid_argument("label out of range");
      out.push_back(std::move(m));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("measurement file: line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace uavnav::sinrmap
