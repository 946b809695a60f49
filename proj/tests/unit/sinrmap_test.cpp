#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "uavnav/config.hpp"
#include "uavnav/sinrmap.hpp"

using namespace uavnav;
using namespace uavnav::sinrmap;

namespace {

radio::GroundStation station_at(double x, double y) {
  radio::GroundStation s;
  s.position = {x, y};
  return s;
}

// One-layer linear model whose raw output is bias + w * features[0].
MapModel linear_map(double w, double b) {
  MapModel m;
  m.k_n = 1;
  m.net.layers.push_back({{5, 1, neuro::Activation::identity}, Eigen::MatrixXd::Zero(1, 5),
                          Eigen::VectorXd::Constant(1, b)});
  m.net.layers[0].weights(0, 0) = w;
  m.net.standardizer = neuro::Standardizer::identity(5);
  return m;
}

Measurement meas(double f0, int level, long long ts = 0) {
  return {{f0, 0, 0, 0, 0}, level, ts};
}

}  // namespace

TEST(SinrMap, FeaturizeStationBelow) {
  const std::vector<radio::GroundStation> st{station_at(3, 4)};
  const auto f = featurize({3, 4}, st, 50.0, 1);
  ASSERT_EQ(f.size(), 5u);
  EXPECT_EQ(f[2], 0.0);
  EXPECT_DOUBLE_EQ(f[3], std::numbers::pi / 2);
  EXPECT_EQ(f[4], 0.0);
}

TEST(SinrMap, FeaturizeElevation) {
  const std::vector<radio::GroundStation> st{station_at(40, 10)};
  const auto f = featurize({10, 10}, st, 50.0, 1);
  EXPECT_DOUBLE_EQ(f[0], 30.0);
  EXPECT_DOUBLE_EQ(f[1], 0.0);
  EXPECT_DOUBLE_EQ(f[2], 30.0);
  EXPECT_NEAR(f[3], std::atan(18.0 / 30.0), 1e-15);
  EXPECT_NEAR(f[4], 0.0, 1e-15);
}

TEST(SinrMap, FeaturizePaddingAndOrder) {
  const std::vector<radio::GroundStation> st{station_at(10, 0), station_at(0, 2), station_at(-5, 0),
                                             station_at(0, -30)};
  const auto f = featurize({0, 0}, st, 50.0, 6, 283.0);
  ASSERT_EQ(f.size(), 30u);
  EXPECT_DOUBLE_EQ(f[2], 2.0);
  EXPECT_DOUBLE_EQ(f[7], 5.0);
  EXPECT_DOUBLE_EQ(f[12], 10.0);
  EXPECT_DOUBLE_EQ(f[17], 30.0);
  for (std::size_t k = 4; k < 6; ++k) {
    EXPECT_EQ(f[5 * k + 0], 283.0);
    EXPECT_EQ(f[5 * k + 2], 283.0);
    EXPECT_EQ(f[5 * k + 1], 0.0);
  }
  EXPECT_THROW(featurize({0, 0}, std::vector<radio::GroundStation>{}, 50.0, 6), std::invalid_argument);
}

TEST(SinrMap, FeaturizeTranslationInvariant) {
  std::vector<radio::GroundStation> st{station_at(10, 3), station_at(-7, 2), station_at(4, -9)};
  const auto a = featurize({1, 1}, st, 50.0, 3);
  for (auto& s : st) s.position += Vec2{123, -45};
  const auto b = featurize({124, -44}, st, 50.0, 3);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(SinrMap, CloudEviction) {
  MeasurementCloud c(3);
  c.record(meas(0, 0, 1));
  EXPECT_EQ(c.size(), 1u);
  for (long long t = 2; t <= 5; ++t) c.record(meas(0, 0, t));
  EXPECT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0].timestamp, 3);
  EXPECT_EQ(c[2].timestamp, 5);
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_LE(c[i - 1].timestamp, c[i].timestamp);
  const auto r = c.recent(2);
  EXPECT_EQ(r.front().timestamp, 4);
  c.purge_before(5);
  EXPECT_EQ(c.size(), 1u);
}

TEST(SinrMap, LevelRounding) {
  EXPECT_EQ(level_from_raw(1.4), 1);
  EXPECT_EQ(level_from_raw(-0.7), 0);
  EXPECT_EQ(level_from_raw(2.5), 2);
  EXPECT_EQ(level_from_raw(1.5), 2);
  EXPECT_EQ(level_from_raw(0.5), 0);
  EXPECT_EQ(level_from_raw(17.0), 2);
  const auto m = linear_map(1.0, 0.0);
  EXPECT_EQ(predict_level(m, std::vector<double>{1.4, 0, 0, 0, 0}), 1);
  EXPECT_THROW(predict_level(m, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(SinrMap, Accuracy) {
  const auto m = linear_map(1.0, 0.0);  // predicts round(f0)
  std::vector<Measurement> all_right{meas(0, 0), meas(1, 1), meas(2, 2)};
  EXPECT_EQ(evaluate_accuracy(m, all_right), 1.0);
  std::vector<Measurement> half{meas(0, 0), meas(1, 2), meas(2, 2), meas(2, 0)};
  EXPECT_EQ(evaluate_accuracy(m, half), 0.5);
  std::reverse(half.begin(), half.end());
  EXPECT_EQ(evaluate_accuracy(m, half), 0.5);

  const auto zero = linear_map(0.0, 0.0);
  std::vector<Measurement> hist;
  for (int i = 0; i < 7; ++i) hist.push_back(meas(i, i % 3));
  EXPECT_NEAR(evaluate_accuracy(zero, hist), 3.0 / 7.0, 1e-15);
  EXPECT_THROW(evaluate_accuracy(m, std::vector<Measurement>{}), std::invalid_argument);
}

TEST(SinrMap, DetectChange) {
  EXPECT_FALSE(detect_change(0.94, 0.95, 0.10));
  EXPECT_TRUE(detect_change(0.60, 0.95, 0.10));
  EXPECT_FALSE(detect_change(0.0, 0.0, 0.10));
}

TEST(SinrMap, RetrainOnJammerFreeMap) {
  const auto cfg = config::load_config(UAVNAV_CONFIG_DIR "/default.yaml");
  const auto env = cfg.environment("off");
  Rng rng(3);
  const auto data = generate_measurements(env, cfg.arena(), 4000, 6, rng);
  for (const auto& m : data) {
    ASSERT_EQ(m.features.size(), 30u);
    ASSERT_GE(m.level, 0);
    ASSERT_LE(m.level, 2);
  }
  MeasurementCloud cloud(data.size());
  for (const auto& m : data) cloud.record(m);

  auto run = [&] {
    Rng r(9);
    auto model = make_map_model(6, r);
    model.train.epochs = 40;
    model.train.batch_size = 100;
    const auto res = retrain(model, cloud, r, 0.2);
    return std::make_pair(model, res);
  };
  const auto [model, res] = run();
  EXPECT_EQ(res.holdout_size, 800u);
  EXPECT_EQ(res.accuracy.size(), 40u);
  EXPECT_GE(res.accuracy.back(), 0.9);
  const auto [model2, res2] = run();
  EXPECT_EQ(res.accuracy, res2.accuracy);
  EXPECT_EQ(model.net.layers[0].weights, model2.net.layers[0].weights);
}

TEST(SinrMap, OnlineMapperDetectsAndRetrains) {
  // model predicting round(f0); the stream switches from agreeing labels to constant 2
  MapperConfig mc;
  mc.cloud_capacity = 100;
  mc.check_cadence = 10;
  mc.min_retrain_size = 30;
  OnlineSinrMapper mapper(linear_map(1.0, 0.0), mc, 1);
  // establish baseline through an explicit retrain on agreeing data
  long long ts = 0;
  for (int i = 0; i < 5; ++i) mapper.ingest(meas(i % 3, i % 3, ts++));
  mapper.retrain_now();
  const double base = mapper.baseline();
  EXPECT_GT(base, 0.1);
  int detected_at = -1;
  for (int i = 0; i < 200 && detected_at < 0; ++i) {
    const auto ev = mapper.ingest(meas(0.0, 2, ts++));
    if (ev.change_detected) detected_at = i;
  }
  ASSERT_GE(detected_at, 0);
  EXPECT_LT(detected_at, 10);
  EXPECT_TRUE(mapper.awaiting_retrain());
  bool retrained = false;
  for (int i = 0; i < 40 && !retrained; ++i) retrained = mapper.ingest(meas(0.0, 2, ts++)).retrained;
  EXPECT_TRUE(retrained);
  EXPECT_FALSE(mapper.awaiting_retrain());
}

TEST(SinrMap, MeasurementCsv) {
  std::vector<Measurement> ms{{std::vector<double>(30, 1.5), 2, 7}, {std::vector<double>(30, -0.25), 0, 8}};
  std::stringstream ss;
  write_measurements_csv(ss, ms);
  const auto back = read_measurements_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].features, ms[1].features);
  EXPECT_EQ(back[0].level, 2);
  EXPECT_EQ(back[1].timestamp, 8);

  std::stringstream good;
  write_measurements_csv(good, ms);
  std::string text = good.str();
  text += "9,1,2,oops\n";
  std::stringstream bad(text);
  try {
    read_measurements_csv(bad);
    FAIL() << "malformed row accepted";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
}
