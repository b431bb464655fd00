#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "trafficsynth/dataset.hpp"

namespace trafficsynth {

enum class Activation { Identity, Relu, Sigmoid, Tanh };

Activation activation_from_name(std::string_view name);
const char* activation_name(Activation a);

struct DenseLayer {
  Matrix weights;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::Identity;
};

// A plain fully-connected network. Small on purpose: four activations, exact
// analytic gradients, explicit seeds. Both VAE halves and both GAN players
// are instances of this.
struct DenseNet {
  std::vector<DenseLayer> layers;
  std::uint64_t seed = 0;

  Eigen::Index input_size() const { return layers.front().weights.cols(); }
  Eigen::Index output_size() const { return layers.back().weights.rows(); }
  std::size_t param_count() const;
  std::size_t param_bytes() const { return param_count() * sizeof(double); }
};

// Per-layer caches from a forward pass; everything backward() needs.
struct ForwardTape {
  std::vector<Matrix> inputs;           // inputs[k]: batch into layer k
  std::vector<Matrix> pre_activations;  // pre_activations[k]: W x + b
  std::size_t approx_bytes() const;
};

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Eigen::VectorXd> bias;
  Matrix input;  // dL/d(batch), for chaining through composed nets
};

struct AdamState {
  std::vector<Matrix> weight_m, weight_v;
  std::vector<Eigen::VectorXd> bias_m, bias_v;
  long step_count = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(const DenseNet& net, double lr = 1e-3);
  std::size_t approx_bytes() const;
};

// Glorot-uniform weights, zero biases. layer_sizes lists unit counts from
// input to output, so sizes [4,8,1] gives two layers; activations has one
// entry per layer. Deterministic under seed.
DenseNet init_net(const std::vector<int>& layer_sizes,
                  const std::vector<Activation>& activations,
                  std::uint64_t seed);

// batch is rows x input_size. When tape is non-null it is filled so
// backward() can run.
Matrix forward(const DenseNet& net, const Matrix& batch,
               ForwardTape* tape = nullptr);

// Exact gradients of the forward map composed with output_gradient
// (= dL/d(output), same shape as the forward result).
Gradients backward(const DenseNet& net, const ForwardTape& tape,
                   const Matrix& output_gradient);

// Bias-corrected Adam update, in place; increments state.step_count.
void adam_step(DenseNet& net, const Gradients& grads, AdamState& state);

// JSON round-trip: layer shapes, activation names, flat row-major weights,
// biases, seed, format version.
std::string net_to_json_string(const DenseNet& net);
DenseNet net_from_json_string(const std::string& text);

}  // namespace trafficsynth
