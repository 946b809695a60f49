#pragma once

// Small dense feedforward networks with an input standardization layer, hand
// written backprop, L2 on weights and Adam. Batches are stored column-wise:
// an input batch is (input_size x N).

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uavnav/geometry.hpp"

namespace uavnav::neuro {

enum class Activation { relu, tanh, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct LayerSpec {
  std::size_t input_size = 1;
  std::size_t output_size = 1;
  Activation activation = Activation::identity;
};

struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std_dev;

  static Standardizer identity(std::size_t n);
  std::size_t size() const { return static_cast<std::size_t>(mean.size()); }
};

inline constexpr double kStdFloor = 1e-8;

struct DenseLayer {
  LayerSpec spec;
  Eigen::MatrixXd weights;  // output x input
  Eigen::VectorXd bias;
};

struct NetworkParams {
  std::vector<DenseLayer> layers;
  Standardizer standardizer;

  std::size_t input_size() const;
  std::size_t output_size() const;
  /// Throws std::invalid_argument on broken chaining or non-finite values.
  void validate() const;
};

/// Weights uniform in +-1/sqrt(fan_in), biases zero.
NetworkParams make_network(std::span<const LayerSpec> specs, Rng& rng);

/// input -> 64 -> 32 -> 16 (ReLU) -> 1 (tanh)
std::vector<LayerSpec> value_net_specs(std::size_t input_size);
/// input -> 32 -> 16 -> 8 (ReLU) -> 1 (linear)
std::vector<LayerSpec> map_net_specs(std::size_t input_size);

struct ForwardCache {
  Eigen::MatrixXd standardized;
  std::vector<Eigen::MatrixXd> pre;   // pre-activation per layer
  std::vector<Eigen::MatrixXd> post;  // activation output per layer
};

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> bias;

  static Gradients zeros_like(const NetworkParams& params);
};

Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                              ForwardCache* cache = nullptr);
std::vector<double> forward(const NetworkParams& params, std::span<const double> input,
                            ForwardCache* cache = nullptr);

/// Gradient of sum(output_gradient .* output) + l2/2 * sum of squared weights.
/// Callers fold the batch mean into output_gradient.
Gradients backward(const NetworkParams& params, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_gradient, double l2);

struct AdamState {
  Gradients m;
  Gradients v;
  long long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const NetworkParams& params);
};

void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state, double lr);

Standardizer fit_standardizer(const std::vector<std::vector<double>>& dataset);
Standardizer fit_standardizer(const Eigen::MatrixXd& inputs);

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t batch_size = 200;
  double l2 = 1e-4;
  std::size_t epochs = 1;
};

/// Mean of 0.5 * (y - t)^2 over the batch; optionally fills the weight gradient.
double squared_loss(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                    const Eigen::MatrixXd& targets, double l2, Gradients* grads);

/// One Adam step on the given batch. Returns the data loss before the step.
double minibatch_update(NetworkParams& params, AdamState& state, const Eigen::MatrixXd& inputs,
                        const Eigen::MatrixXd& targets, const TrainConfig& config);

/// Shuffled minibatch epochs. Returns mean per-sample data loss of each epoch.
std::vector<double> train_epochs(NetworkParams& params, AdamState& state,
                                 const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                                 const TrainConfig& config, Rng& rng);

void write_network(std::ostream& os, const NetworkParams& params);
NetworkParams read_network(std::istream& is);
void save_network(const std::string& path, const NetworkParams& params);
NetworkParams load_network(const std::string& path);

/// Rows of `rows` as columns of a matrix.
Eigen::MatrixXd to_columns(const std::vector<std::vector<double>>& rows);

}  // namespace uavnav::neuro
