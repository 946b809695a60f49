#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "uavnav/neuro.hpp"

using namespace uavnav;
using namespace uavnav::neuro;

namespace {

// Plain-loop forward pass for comparison.
std::vector<double> naive_forward(const NetworkParams& p, std::vector<double> x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = (x[i] - p.standardizer.mean[static_cast<Eigen::Index>(i)]) /
           p.standardizer.std_dev[static_cast<Eigen::Index>(i)];
  }
  for (const auto& l : p.layers) {
    std::vector<double> y(l.spec.output_size);
    for (std::size_t o = 0; o < y.size(); ++o) {
      double z = l.bias[static_cast<Eigen::Index>(o)];
      for (std::size_t i = 0; i < x.size(); ++i) {
        z += l.weights(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) * x[i];
      }
      switch (l.spec.activation) {
        case Activation::relu: y[o] = z > 0 ? z : 0; break;
        case Activation::tanh: y[o] = std::tanh(z); break;
        case Activation::identity: y[o] = z; break;
      }
    }
    x = y;
  }
  return x;
}

NetworkParams random_net(std::vector<LayerSpec> specs, std::uint64_t seed) {
  Rng rng(seed);
  auto p = make_network(specs, rng);
  for (auto& l : p.layers) {
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = uniform(rng, -0.3, 0.3);
  }
  const auto n = static_cast<Eigen::Index>(specs.front().input_size);
  p.standardizer.mean = Eigen::VectorXd::Zero(n);
  p.standardizer.std_dev = Eigen::VectorXd::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p.standardizer.mean[i] = uniform(rng, -1, 1);
    p.standardizer.std_dev[i] = uniform(rng, 0.5, 2);
  }
  return p;
}

double objective(const NetworkParams& p, const Eigen::MatrixXd& x, const Eigen::MatrixXd& t, double l2) {
  double reg = 0;
  for (const auto& l : p.layers) reg += l.weights.squaredNorm();
  return squared_loss(p, x, t, 0.0, nullptr) + 0.5 * l2 * reg;
}

}  // namespace

TEST(Neuro, ZeroWeightsGiveZero) {
  auto p = random_net({{3, 4, Activation::relu}, {4, 1, Activation::identity}}, 1);
  for (auto& l : p.layers) {
    l.weights.setZero();
    l.bias.setZero();
  }
  EXPECT_EQ(forward(p, std::vector<double>{5, -2, 9})[0], 0.0);
}

TEST(Neuro, SingleTanhAtZero) {
  NetworkParams p;
  p.layers.push_back({{1, 1, Activation::tanh}, Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)});
  p.standardizer = Standardizer::identity(1);
  EXPECT_EQ(forward(p, std::vector<double>{0.0})[0], 0.0);
}

TEST(Neuro, ForwardMatchesNaive) {
  const auto p = random_net(value_net_specs(7), 11);
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    std::vector<double> x(7);
    for (auto& v : x) v = uniform(rng, -3, 3);
    const auto a = forward(p, x);
    const auto b = naive_forward(p, x);
    EXPECT_NEAR(a[0], b[0], 1e-12);
    EXPECT_GT(a[0], -1.0);
    EXPECT_LT(a[0], 1.0);
  }
}

TEST(Neuro, ForwardRejectsBadInput) {
  const auto p = random_net(map_net_specs(5), 3);
  EXPECT_THROW(forward(p, std::vector<double>{1, 2}), std::invalid_argument);
  EXPECT_THROW(forward(p, std::vector<double>{1, 2, NAN, 4, 5}), std::invalid_argument);
}

TEST(Neuro, BackwardZeroGradient) {
  const auto p = random_net(value_net_specs(4), 5);
  ForwardCache cache;
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 3);
  forward_batch(p, x, &cache);
  const auto g = backward(p, cache, Eigen::MatrixXd::Zero(1, 3), 0.0);
  for (std::size_t k = 0; k < g.weights.size(); ++k) {
    EXPECT_EQ(g.weights[k].norm(), 0.0);
    EXPECT_EQ(g.bias[k].norm(), 0.0);
  }
}

TEST(Neuro, BackwardHandDerivative) {
  NetworkParams p;
  p.layers.push_back({{1, 1, Activation::identity}, Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)});
  p.standardizer = Standardizer::identity(1);
  Gradients g;
  const double loss = squared_loss(p, Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1), 0.0, &g);
  EXPECT_DOUBLE_EQ(loss, 0.5);
  EXPECT_DOUBLE_EQ(g.weights[0](0, 0), 1.0);
  EXPECT_DOUBLE_EQ(g.bias[0](0), 1.0);
}

TEST(Neuro, FiniteDifferenceGradients) {
  for (const auto& specs : {value_net_specs(6), map_net_specs(6),
                            std::vector<LayerSpec>{{6, 5, Activation::tanh}, {5, 2, Activation::identity}}}) {
    auto p = random_net(specs, 21);
    Rng rng(4);
    Eigen::MatrixXd x(6, 8), t(specs.back().output_size, 8);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = uniform(rng, -2, 2);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = uniform(rng, -0.5, 0.5);
    const double l2 = 1e-3;
    Gradients g;
    squared_loss(p, x, t, l2, &g);

    const double h = 1e-5;
    double worst = 0;
    auto check = [&](double& param, double analytic) {
      const double keep = param;
      param = keep + h;
      const double up = objective(p, x, t, l2);
      param = keep - h;
      const double down = objective(p, x, t, l2);
      param = keep;
      const double fd = (up - down) / (2 * h);
      const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
      worst = std::max(worst, std::abs(fd - analytic) / denom);
    };
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
      auto& l = p.layers[k];
      for (Eigen::Index i = 0; i < l.weights.size(); ++i) check(l.weights.data()[i], g.weights[k].data()[i]);
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) check(l.bias.data()[i], g.bias[k].data()[i]);
    }
    EXPECT_LE(worst, 1e-4);
  }
}

TEST(Neuro, AdamFirstStepMagnitude) {
  NetworkParams p;
  p.layers.push_back({{1, 1, Activation::identity}, Eigen::MatrixXd::Constant(1, 1, 0.3),
                      Eigen::VectorXd::Constant(1, -0.2)});
  p.standardizer = Standardizer::identity(1);
  auto st = AdamState::for_params(p);
  auto g = Gradients::zeros_like(p);
  g.weights[0](0, 0) = 4.0;
  g.bias[0](0) = -0.01;
  adam_step(p, g, st, 0.01);
  EXPECT_NEAR(p.layers[0].weights(0, 0), 0.3 - 0.01, 1e-8);
  EXPECT_NEAR(p.layers[0].bias(0), -0.2 + 0.01, 1e-6);
}

TEST(Neuro, AdamZeroGradientKeepsParams) {
  auto p = random_net(map_net_specs(3), 8);
  const auto before = p;
  auto st = AdamState::for_params(p);
  const auto g = Gradients::zeros_like(p);
  for (int k = 0; k < 50; ++k) adam_step(p, g, st, 0.1);
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    EXPECT_EQ(p.layers[k].weights, before.layers[k].weights);
    EXPECT_EQ(p.layers[k].bias, before.layers[k].bias);
  }
}

TEST(Neuro, AdamMatchesUnrolledRecurrence) {
  // f(w) = 0.5 * (w - 3)^2 on a bias-free scalar, three steps
  NetworkParams p;
  p.layers.push_back({{1, 1, Activation::identity}, Eigen::MatrixXd::Constant(1, 1, 0.5),
                      Eigen::VectorXd::Zero(1)});
  p.standardizer = Standardizer::identity(1);
  auto st = AdamState::for_params(p);
  double w = 0.5, m = 0, v = 0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int k = 1; k <= 3; ++k) {
    const double grad = w - 3.0;
    auto g = Gradients::zeros_like(p);
    g.weights[0](0, 0) = p.layers[0].weights(0, 0) - 3.0;
    adam_step(p, g, st, lr);
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad * grad;
    const double mh = m / (1 - std::pow(b1, k));
    const double vh = v / (1 - std::pow(b2, k));
    w -= lr * mh / (std::sqrt(vh) + eps);
    EXPECT_NEAR(p.layers[0].weights(0, 0), w, 1e-12);
  }
  EXPECT_EQ(st.step, 3);
}

TEST(Neuro, Standardizer) {
  const auto c = fit_standardizer(std::vector<std::vector<double>>{{4.0, -1.0}, {4.0, 1.0}});
  EXPECT_EQ(c.mean[0], 4.0);
  EXPECT_EQ(c.std_dev[0], kStdFloor);
  EXPECT_EQ(c.mean[1], 0.0);
  EXPECT_EQ(c.std_dev[1], 1.0);
  EXPECT_THROW(fit_standardizer(std::vector<std::vector<double>>{}), std::invalid_argument);

  Rng rng(9);
  std::vector<std::vector<double>> rows(50, std::vector<double>(3));
  for (auto& r : rows) for (auto& v : r) v = uniform(rng, -5, 10);
  const auto s = fit_standardizer(rows);
  for (int j = 0; j < 3; ++j) {
    double mean = 0, var = 0;
    for (const auto& r : rows) mean += r[j];
    mean /= 50;
    for (const auto& r : rows) var += (r[j] - mean) * (r[j] - mean);
    EXPECT_NEAR(s.mean[j], mean, 1e-12);
    EXPECT_NEAR(s.std_dev[j], std::sqrt(var / 50), 1e-12);
  }
}

TEST(Neuro, TrainLinearMap) {
  Rng rng(1);
  auto p = make_network(std::vector<LayerSpec>{{1, 1, Activation::identity}}, rng);
  p.standardizer = Standardizer::identity(1);
  Eigen::MatrixXd x(1, 40), y(1, 40);
  for (int i = 0; i < 40; ++i) {
    x(0, i) = -1 + i / 20.0;
    y(0, i) = 2 * x(0, i);
  }
  auto st = AdamState::for_params(p);
  TrainConfig cfg{0.05, 10, 0.0, 200};
  const auto hist = train_epochs(p, st, x, y, cfg, rng);
  ASSERT_EQ(hist.size(), 200u);
  EXPECT_LT(hist.back(), 1e-4);
}

TEST(Neuro, ZeroLearningRateIsFlat) {
  Rng rng(1);
  auto p = random_net(map_net_specs(2), 4);
  const auto before = p;
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 30), y = Eigen::MatrixXd::Random(1, 30);
  auto st = AdamState::for_params(p);
  const auto hist = train_epochs(p, st, x, y, TrainConfig{0.0, 7, 0.0, 5}, rng);
  for (double h : hist) EXPECT_NEAR(h, hist.front(), 1e-15);
  for (std::size_t k = 0; k < p.layers.size(); ++k) EXPECT_EQ(p.layers[k].weights, before.layers[k].weights);
}

TEST(Neuro, TrainingDeterministic) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 60), y = Eigen::MatrixXd::Random(1, 60);
  auto run = [&] {
    Rng rng(77);
    auto p = make_network(value_net_specs(3), rng);
    p.standardizer = fit_standardizer(x);
    auto st = AdamState::for_params(p);
    train_epochs(p, st, x, y, TrainConfig{0.01, 16, 1e-4, 10}, rng);
    return p;
  };
  const auto a = run(), b = run();
  for (std::size_t k = 0; k < a.layers.size(); ++k) EXPECT_EQ(a.layers[k].weights, b.layers[k].weights);
}

TEST(Neuro, SerializationRoundTrip) {
  const auto p = random_net(value_net_specs(34), 13);
  std::stringstream ss;
  write_network(ss, p);
  const auto q = read_network(ss);
  ASSERT_EQ(q.layers.size(), p.layers.size());
  for (std::size_t k = 0; k < p.layers.size(); ++k) {
    EXPECT_EQ(q.layers[k].weights, p.layers[k].weights);
    EXPECT_EQ(q.layers[k].bias, p.layers[k].bias);
    EXPECT_EQ(q.layers[k].spec.activation, p.layers[k].spec.activation);
  }
  EXPECT_EQ(q.standardizer.std_dev, p.standardizer.std_dev);
  std::stringstream bad("not a model\n");
  EXPECT_THROW(read_network(bad), std::runtime_error);
}
