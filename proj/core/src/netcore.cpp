#include "trafficsynth/netcore.hpp"

#include <cmath>
#include <stdexcept>

#include "internal_json.hpp"
#include "trafficsynth/rng.hpp"

namespace trafficsynth {

namespace {

double apply_activation(Activation a, double z) {
  switch (a) {
    case Activation::Identity:
      return z;
    case Activation::Relu:
      return z > 0.0 ? z : 0.0;
    case Activation::Sigmoid:
      return 1.0 / (1.0 + std::exp(-z));
    case Activation::Tanh:
      return std::tanh(z);
  }
  return z;
}

// Derivative in terms of pre-activation z and post-activation a; using the
// stored post value keeps sigmoid/tanh exact and cheap.
double activation_grad(Activation act, double z, double a) {
  switch (act) {
    case Activation::Identity:
      return 1.0;
    case Activation::Relu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid:
      return a * (1.0 - a);
    case Activation::Tanh:
      return 1.0 - a * a;
  }
  return 1.0;
}

}  // namespace

Activation activation_from_name(std::string_view name) {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation '" + std::string(name) +
                              "'");
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Identity:
      return "identity";
    case Activation::Relu:
      return "relu";
    case Activation::Sigmoid:
      return "sigmoid";
    case Activation::Tanh:
      return "tanh";
  }
  return "identity";
}

std::size_t DenseNet::param_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) {
    n += static_cast<std::size_t>(layer.weights.size()) +
         static_cast<std::size_t>(layer.bias.size());
  }
  return n;
}

std::size_t ForwardTape::approx_bytes() const {
  std::size_t n = 0;
  for (const auto& m : inputs) n += static_cast<std::size_t>(m.size());
  for (const auto& m : pre_activations)
    n += static_cast<std::size_t>(m.size());
  return n * sizeof(double);
}

AdamState::AdamState(const DenseNet& net, double lr) : learning_rate(lr) {
  for (const auto& layer : net.layers) {
    weight_m.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    weight_v.push_back(Matrix::Zero(layer.weights.rows(), layer.weights.cols()));
    bias_m.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
    bias_v.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
}

std::size_t AdamState::approx_bytes() const {
  std::size_t n = 0;
  for (const auto& m : weight_m) n += static_cast<std::size_t>(m.size());
  for (const auto& m : weight_v) n += static_cast<std::size_t>(m.size());
  for (const auto& v : bias_m) n += static_cast<std::size_t>(v.size());
  for (const auto& v : bias_v) n += static_cast<std::size_t>(v.size());
  return n * sizeof(double);
}

DenseNet init_net(const std::vector<int>& layer_sizes,
                  const std::vector<Activation>& activations,
                  std::uint64_t seed) {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("init_net: need at least one layer");
  }
  if (activations.size() != layer_sizes.size() - 1) {
    throw std::invalid_argument(
        "init_net: activations count must equal layer count");
  }
  for (int s : layer_sizes) {
    if (s <= 0) throw std::invalid_argument("init_net: non-positive dimension");
  }

  DenseNet net;
  net.seed = seed;
  Rng rng(seed);
  for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    const int fan_in = layer_sizes[k];
    const int fan_out = layer_sizes[k + 1];
    const double scale = std::sqrt(6.0 / (fan_in + fan_out));
    DenseLayer layer;
    layer.weights.resize(fan_out, fan_in);
    // Row-major fill order so the draw sequence is part of the contract.
    for (Eigen::Index r = 0; r < fan_out; ++r) {
      for (Eigen::Index c = 0; c < fan_in; ++c) {
        layer.weights(r, c) = rng.uniform(-scale, scale);
      }
    }
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    layer.activation = activations[k];
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Matrix forward(const DenseNet& net, const Matrix& batch, ForwardTape* tape) {
  if (batch.cols() != net.input_size()) {
    throw std::invalid_argument(
        "forward: batch has " + std::to_string(batch.cols()) +
        " columns, net expects " + std::to_string(net.input_size()));
  }
  if (tape) {
    tape->inputs.clear();
    tape->pre_activations.clear();
  }
  Matrix x = batch;
  for (const auto& layer : net.layers) {
    Matrix z = x * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    if (tape) {
      tape->inputs.push_back(std::move(x));
      tape->pre_activations.push_back(z);
    }
    x = z.unaryExpr(
        [&](double v) { return apply_activation(layer.activation, v); });
  }
  return x;
}

Gradients backward(const DenseNet& net, const ForwardTape& tape,
                   const Matrix& output_gradient) {
  const std::size_t n_layers = net.layers.size();
  if (tape.inputs.size() != n_layers ||
      tape.pre_activations.size() != n_layers) {
    throw std::invalid_argument("backward: tape does not match net");
  }
  if (output_gradient.rows() != tape.pre_activations.back().rows() ||
      output_gradient.cols() != net.output_size()) {
    throw std::invalid_argument("backward: output_gradient shape mismatch");
  }

  Gradients grads;
  grads.weights.resize(n_layers);
  grads.bias.resize(n_layers);

  Matrix upstream = output_gradient;
  for (std::size_t k = n_layers; k-- > 0;) {
    const auto& layer = net.layers[k];
    const Matrix& z = tape.pre_activations[k];
    Matrix delta(z.rows(), z.cols());
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      for (Eigen::Index c = 0; c < z.cols(); ++c) {
        const double a = apply_activation(layer.activation, z(r, c));
        delta(r, c) = upstream(r, c) * activation_grad(layer.activation, z(r, c), a);
      }
    }
    grads.weights[k] = delta.transpose() * tape.inputs[k];
    grads.bias[k] = delta.colwise().sum().transpose();
    upstream = delta * layer.weights;
  }
  grads.input = std::move(upstream);
  return grads;
}

void adam_step(DenseNet& net, const Gradients& grads, AdamState& state) {
  if (grads.weights.size() != net.layers.size()) {
    throw std::invalid_argument("adam_step: gradient/layer count mismatch");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);

  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto& layer = net.layers[k];
    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
      m = state.beta1 * m + (1.0 - state.beta1) * grad;
      v = state.beta2 * v.array().matrix() +
          (1.0 - state.beta2) * grad.array().square().matrix();
      const auto m_hat = m.array() / bc1;
      const auto v_hat = v.array() / bc2;
      param.array() -=
          state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    };
    update(layer.weights, grads.weights[k], state.weight_m[k],
           state.weight_v[k]);
    update(layer.bias, grads.bias[k], state.bias_m[k], state.bias_v[k]);
  }
}

namespace detail {

nlohmann::ordered_json net_to_json(const DenseNet& net) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["seed"] = net.seed;
  auto layers = nlohmann::ordered_json::array();
  for (const auto& layer : net.layers) {
    nlohmann::ordered_json lj;
    lj["in"] = layer.weights.cols();
    lj["out"] = layer.weights.rows();
    lj["activation"] = activation_name(layer.activation);
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(layer.weights.size()));
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        w.push_back(layer.weights(r, c));
      }
    }
    lj["weights"] = w;
    lj["bias"] = std::vector<double>(layer.bias.data(),
                                     layer.bias.data() + layer.bias.size());
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  return j;
}

DenseNet net_from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1) {
    throw std::runtime_error("net_from_json: unsupported format version");
  }
  DenseNet net;
  net.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& lj : j.at("layers")) {
    DenseLayer layer;
    const auto in = lj.at("in").get<Eigen::Index>();
    const auto out = lj.at("out").get<Eigen::Index>();
    const auto w = lj.at("weights").get<std::vector<double>>();
    const auto b = lj.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != in * out ||
        static_cast<Eigen::Index>(b.size()) != out) {
      throw std::runtime_error("net_from_json: layer size mismatch");
    }
    layer.weights.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
      for (Eigen::Index c = 0; c < in; ++c) {
        layer.weights(r, c) = w[static_cast<std::size_t>(r * in + c)];
      }
    }
    layer.bias =
        Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    layer.activation = activation_from_name(lj.at("activation").get<std::string>());
    net.layers.push_back(std::move(layer));
  }
  if (net.layers.empty()) {
    throw std::runtime_error("net_from_json: no layers");
  }
  return net;
}

}  // namespace detail

std::string net_to_json_string(const DenseNet& net) {
  return detail::net_to_json(net).dump(2);
}

DenseNet net_from_json_string(const std::string& text) {
  return detail::net_from_json(nlohmann::json::parse(text));
}

}  // namespace trafficsynth
