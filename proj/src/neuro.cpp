#include "uavnav/neuro.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "uavnav/io.hpp"

namespace uavnav::neuro {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

Standardizer Standardizer::identity(std::size_t n) {
  return {Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)),
          Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n))};
}

std::size_t NetworkParams::input_size() const {
  return layers.empty() ? 0 : layers.front().spec.input_size;
}

std::size_t NetworkParams::output_size() const {
  return layers.empty() ? 0 : layers.back().spec.output_size;
}

void NetworkParams::validate() const {
  if (layers.empty()) throw std::invalid_argument("network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.spec.input_size < 1 || l.spec.output_size < 1) {
      throw std::invalid_argument("layer " + std::to_string(i) + " has zero size");
    }
    if (i > 0 && layers[i - 1].spec.output_size != l.spec.input_size) {
      throw std::invalid_argument("layer " + std::to_string(i) + " does not chain");
    }
    if (static_cast<std::size_t>(l.weights.rows()) != l.spec.output_size ||
        static_cast<std::size_t>(l.weights.cols()) != l.spec.input_size ||
        static_cast<std::size_t>(l.bias.size()) != l.spec.output_size) {
      throw std::invalid_argument("layer " + std::to_string(i) + " shape does not match spec");
    }
    if (!l.weights.allFinite() || !l.bias.allFinite()) {
      throw std::invalid_argument("layer " + std::to_string(i) + " has non-finite values");
    }
  }
  if (standardizer.size() != input_size() ||
      static_cast<std::size_t>(standardizer.std_dev.size()) != input_size()) {
    throw std::invalid_argument("standardizer size does not match input");
  }
  if (!standardizer.mean.allFinite() || !standardizer.std_dev.allFinite() ||
      (standardizer.std_dev.array() <= 0.0).any()) {
    throw std::invalid_argument("standardizer has invalid values");
  }
}

NetworkParams make_network(std::span<const LayerSpec> specs, Rng& rng) {
  NetworkParams p;
  for (const auto& s : specs) {
    DenseLayer l;
    l.spec = s;
    const auto rows = static_cast<Eigen::Index>(s.output_size);
    const auto cols = static_cast<Eigen::Index>(s.input_size);
    l.weights.resize(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(s.input_size));
    // Fill row by row so the draw order does not depend on Eigen's storage order.
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) l.weights(r, c) = uniform(rng, -scale, scale);
    }
    l.bias = Eigen::VectorXd::Zero(rows);
    p.layers.push_back(std::move(l));
  }
  if (!p.layers.empty()) p.standardizer = Standardizer::identity(p.input_size());
  p.validate();
  return p;
}

std::vector<LayerSpec> value_net_specs(std::size_t input_size) {
  return {{input_size, 64, Activation::relu},
          {64, 32, Activation::relu},
          {32, 16, Activation::relu},
          {16, 1, Activation::tanh}};
}

std::vector<LayerSpec> map_net_specs(std::size_t input_size) {
  return {{input_size, 32, Activation::relu},
          {32, 16, Activation::relu},
          {16, 8, Activation::relu},
          {8, 1, Activation::identity}};
}

Gradients Gradients::zeros_like(const NetworkParams& params) {
  Gradients g;
  for (const auto& l : params.layers) {
    g.weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

namespace {

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::tanh: return z.array().tanh().matrix();
    case Activation::identity: return z;
  }
  return z;
}

// d activation / d z, multiplied into `upstream`
Eigen::MatrixXd activation_backprop(Activation a, const Eigen::MatrixXd& z,
                                    const Eigen::MatrixXd& out, const Eigen::MatrixXd& upstream) {
  switch (a) {
    case Activation::relu:
      return (z.array() > 0.0).select(upstream, 0.0);
    case Activation::tanh:
      return (upstream.array() * (1.0 - out.array().square())).matrix();
    case Activation::identity:
      return upstream;
  }
  return upstream;
}

}  // namespace

Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                              ForwardCache* cache) {
  if (params.layers.empty()) throw std::invalid_argument("forward: empty network");
  if (static_cast<std::size_t>(inputs.rows()) != params.input_size()) {
    throw std::invalid_argument("forward: input length " + std::to_string(inputs.rows()) +
                                " does not match network input " +
                                std::to_string(params.input_size()));
  }
  if (!inputs.allFinite()) throw std::invalid_argument("forward: non-finite input");

  Eigen::MatrixXd x = (inputs.colwise() - params.standardizer.mean).array().colwise() /
                      params.standardizer.std_dev.array();
  if (cache) {
    cache->standardized = x;
    cache->pre.clear();
    cache->post.clear();
  }
  for (const auto& l : params.layers) {
    Eigen::MatrixXd z = l.weights * x;
    z.colwise() += l.bias;
    x = activate(l.spec.activation, z);
    if (cache) {
      cache->pre.push_back(std::move(z));
      cache->post.push_back(x);
    }
  }
  return x;
}

std::vector<double> forward(const NetworkParams& params, std::span<const double> input,
                            ForwardCache* cache) {
  const Eigen::MatrixXd in =
      Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  const Eigen::MatrixXd out = forward_batch(params, in, cache);
  return {out.data(), out.data() + out.size()};
}

Gradients backward(const NetworkParams& params, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_gradient, double l2) {
  const std::size_t n_layers = params.layers.size();
  if (cache.pre.size() != n_layers || cache.post.size() != n_layers) {
    throw std::invalid_argument("backward: cache does not match network depth");
  }
  const Eigen::Index batch = cache.standardized.cols();
  for (std::size_t i = 0; i < n_layers; ++i) {
    if (static_cast<std::size_t>(cache.pre[i].rows()) != params.layers[i].spec.output_size ||
        cache.pre[i].cols() != batch) {
      throw std::invalid_argument("backward: stale cache");
    }
  }
  if (static_cast<std::size_t>(cache.standardized.rows()) != params.input_size()) {
    throw std::invalid_argument("backward: stale cache");
  }
  if (output_gradient.rows() != cache.post.back().rows() || output_gradient.cols() != batch) {
    throw std::invalid_argument("backward: output gradient shape mismatch");
  }

  Gradients g = Gradients::zeros_like(params);
  Eigen::MatrixXd upstream = output_gradient;
  for (std::size_t k = n_layers; k-- > 0;) {
    const auto& l = params.layers[k];
    const Eigen::MatrixXd dz = activation_backprop(l.spec.activation, cache.pre[k], cache.post[k], upstream);
    const Eigen::MatrixXd& x_in = k == 0 ? cache.standardized : cache.post[k - 1];
    g.weights[k] = dz * x_in.transpose() + l2 * l.weights;
    g.bias[k] = dz.rowwise().sum();
    if (k > 0) upstream = l.weights.transpose() * dz;
  }
  return g;
}

AdamState AdamState::for_params(const NetworkParams& params) {
  AdamState s;
  s.m = Gradients::zeros_like(params);
  s.v = Gradients::zeros_like(params);
  return s;
}

void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state, double lr) {
  if (grads.weights.size() != params.layers.size() || state.m.weights.size() != params.layers.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * grad;
    v = state.beta2 * v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  };
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    update(params.layers[k].weights, grads.weights[k], state.m.weights[k], state.v.weights[k]);
    update(params.layers[k].bias, grads.bias[k], state.m.bias[k], state.v.bias[k]);
  }
}

Standardizer fit_standardizer(const Eigen::MatrixXd& inputs) {
  if (inputs.cols() == 0 || inputs.rows() == 0) {
    throw std::invalid_argument("fit_standardizer: empty dataset");
  }
  Standardizer s;
  s.mean = inputs.rowwise().mean();
  const Eigen::MatrixXd centered = inputs.colwise() - s.mean;
  s.std_dev = (centered.array().square().rowwise().sum() / static_cast<double>(inputs.cols()))
                  .sqrt()
                  .cwiseMax(kStdFloor)
                  .matrix();
  return s;
}

Standardizer fit_standardizer(const std::vector<std::vector<double>>& dataset) {
  if (dataset.empty()) throw std::invalid_argument("fit_standardizer: empty dataset");
  return fit_standardizer(to_columns(dataset));
}

double squared_loss(const NetworkParams& params, const Eigen::MatrixXd& inputs,
                    const Eigen::MatrixXd& targets, double l2, Gradients* grads) {
  ForwardCache cache;
  const Eigen::MatrixXd out = forward_batch(params, inputs, grads ? &cache : nullptr);
  if (out.rows() != targets.rows() || out.cols() != targets.cols()) {
    throw std::invalid_argument("squared_loss: target shape mismatch");
  }
  const double n = static_cast<double>(inputs.cols());
  const Eigen::MatrixXd diff = out - targets;
  if (grads) *grads = backward(params, cache, diff / n, l2);
  return 0.5 * diff.squaredNorm() / n;
}

double minibatch_update(NetworkParams& params, AdamState& state, const Eigen::MatrixXd& inputs,
                        const Eigen::MatrixXd& targets, const TrainConfig& config) {
  Gradients g;
  const double loss = squared_loss(params, inputs, targets, config.l2, &g);
  if (!std::isfinite(loss)) throw std::runtime_error("non-finite training loss");
  adam_step(params, g, state, config.learning_rate);
  return loss;
}

std::vector<double> train_epochs(NetworkParams& params, AdamState& state,
                                 const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                                 const TrainConfig& config, Rng& rng) {
  const auto n = static_cast<std::size_t>(inputs.cols());
  if (n == 0) throw std::invalid_argument("train_epochs: empty dataset");
  if (static_cast<std::size_t>(targets.cols()) != n) {
    throw std::invalid_argument("train_epochs: input/target count mismatch");
  }
  const std::size_t batch = std::max<std::size_t>(1, std::min(config.batch_size, n));
  std::vector<std::size_t> order(n);
  std::vector<double> history;
  history.reserve(config.epochs);
  Eigen::MatrixXd bx(inputs.rows(), static_cast<Eigen::Index>(batch));
  Eigen::MatrixXd by(targets.rows(), static_cast<Eigen::Index>(batch));

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[uniform_index(rng, i)]);
    }
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t len = std::min(batch, n - start);
      bx.resize(inputs.rows(), static_cast<Eigen::Index>(len));
      by.resize(targets.rows(), static_cast<Eigen::Index>(len));
      for (std::size_t j = 0; j < len; ++j) {
        bx.col(static_cast<Eigen::Index>(j)) = inputs.col(static_cast<Eigen::Index>(order[start + j]));
        by.col(static_cast<Eigen::Index>(j)) = targets.col(static_cast<Eigen::Index>(order[start + j]));
      }
      total += minibatch_update(params, state, bx, by, config) * static_cast<double>(len);
    }
    history.push_back(total / static_cast<double>(n));
  }
  return history;
}

Eigen::MatrixXd to_columns(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  const auto dim = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (static_cast<Eigen::Index>(rows[j].size()) != dim) {
      throw std::invalid_argument("to_columns: ragged rows");
    }
    m.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<const Eigen::VectorXd>(rows[j].data(), dim);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Text model format

namespace {

void write_vector(std::ostream& os, const Eigen::VectorXd& v) {
  os << io::join(std::span<const double>(v.data(), static_cast<std::size_t>(v.size()))) << '\n';
}

Eigen::VectorXd read_vector(std::istream& is, std::size_t n, const char* what) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(std::string("model file: missing ") + what);
  const auto fields = io::split(line, ',');
  if (fields.size() != n) {
    throw std::runtime_error(std::string("model file: ") + what + " has " +
                             std::to_string(fields.size()) + " values, expected " +
                             std::to_string(n));
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = io::parse_double(fields[i]);
  return v;
}

}  // namespace

void write_network(std::ostream& os, const NetworkParams& params) {
  os << "uavnav-net v1\n";
  os << "layers " << params.layers.size() << '\n';
  os << "standardizer " << params.standardizer.size() << '\n';
  write_vector(os, params.standardizer.mean);
  write_vector(os, params.standardizer.std_dev);
  for (const auto& l : params.layers) {
    os << "layer " << l.spec.input_size << ' ' << l.spec.output_size << ' '
       << to_string(l.spec.activation) << '\n';
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      write_vector(os, l.weights.row(r).transpose());
    }
    write_vector(os, l.bias);
  }
}

NetworkParams read_network(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "uavnav-net v1") {
    throw std::runtime_error("model file: unsupported or missing version header");
  }
  auto keyed = [&](const std::string& key) {
    if (!std::getline(is, line)) throw std::runtime_error("model file: missing " + key);
    std::istringstream ss(line);
    std::string k;
    ss >> k;
    if (k != key) throw std::runtime_error("model file: expected '" + key + "', got '" + k + "'");
    return ss;
  };
  std::size_t n_layers = 0;
  std::size_t n_std = 0;
  keyed("layers") >> n_layers;
  keyed("standardizer") >> n_std;
  NetworkParams p;
  p.standardizer.mean = read_vector(is, n_std, "standardizer mean");
  p.standardizer.std_dev = read_vector(is, n_std, "standardizer std");
  for (std::size_t k = 0; k < n_layers; ++k) {
    DenseLayer l;
    std::string act;
    auto ss = keyed("layer");
    ss >> l.spec.input_size >> l.spec.output_size >> act;
    if (!ss) throw std::runtime_error("model file: malformed layer line");
    l.spec.activation = activation_from_string(act);
    l.weights.resize(static_cast<Eigen::Index>(l.spec.output_size),
                     static_cast<Eigen::Index>(l.spec.input_size));
    for (std::size_t r = 0; r < l.spec.output_size; ++r) {
      l.weights.row(static_cast<Eigen::Index>(r)) =
          read_vector(is, l.spec.input_size, "weight row").transpose();
    }
    l.bias = read_vector(is, l.spec.output_size, "bias");
    p.layers.push_back(std::move(l));
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("model file: ") + e.what());
  }
  return p;
}

void save_network(const std::string& path, const NetworkParams& params) {
  std::ostringstream ss;
  write_network(ss, params);
  io::write_file_atomic(path, ss.str());
}

NetworkParams load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path);
  return read_network(in);
}

}  // namespace uavnav::neuro
