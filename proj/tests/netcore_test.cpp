#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "trafficsynth/netcore.hpp"
#include "trafficsynth/rng.hpp"

using namespace trafficsynth;

namespace {

Matrix random_batch(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  }
  return m;
}

}  // namespace

TEST_CASE("init_net shapes and determinism") {
  const auto net = init_net({2, 3}, {Activation::Relu}, 7);
  REQUIRE(net.layers.size() == 1);
  CHECK(net.layers[0].weights.rows() == 3);
  CHECK(net.layers[0].weights.cols() == 2);
  CHECK(net.layers[0].bias.isZero());

  const auto again = init_net({2, 3}, {Activation::Relu}, 7);
  CHECK(again.layers[0].weights == net.layers[0].weights);

  const auto two = init_net({4, 8, 1}, {Activation::Tanh, Activation::Sigmoid}, 1);
  REQUIRE(two.layers.size() == 2);
  CHECK(two.layers[0].weights.rows() == 8);
  CHECK(two.layers[1].weights.cols() == 8);

  // Glorot bound.
  const double s = std::sqrt(6.0 / (2 + 3));
  CHECK(net.layers[0].weights.cwiseAbs().maxCoeff() <= s);
}

TEST_CASE("init_net rejects bad shapes") {
  CHECK_THROWS_AS(init_net({3}, {}, 0), std::invalid_argument);
  CHECK_THROWS_AS(init_net({3, 0}, {Activation::Relu}, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(init_net({3, 2}, {}, 0), std::invalid_argument);
}

TEST_CASE("forward: identity layer reproduces the input") {
  DenseNet net;
  DenseLayer layer;
  layer.weights = Matrix::Identity(3, 3);
  layer.bias = Eigen::VectorXd::Zero(3);
  layer.activation = Activation::Identity;
  net.layers.push_back(layer);

  Rng rng(3);
  const Matrix x = random_batch(rng, 5, 3);
  CHECK((forward(net, x) - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward: sigmoid of zero is one half") {
  DenseNet net;
  DenseLayer layer;
  layer.weights = Matrix::Zero(1, 1);
  layer.bias = Eigen::VectorXd::Zero(1);
  layer.activation = Activation::Sigmoid;
  net.layers.push_back(layer);
  const Matrix x = Matrix::Constant(1, 1, 42.0);
  CHECK(forward(net, x)(0, 0) == 0.5);
}

TEST_CASE("forward: relu clips the hand-evaluated pre-activation") {
  // weight [[2]], bias [1], input [-3]: pre = -5, relu -> 0.
  DenseNet net;
  DenseLayer layer;
  layer.weights = Matrix::Constant(1, 1, 2.0);
  layer.bias = Eigen::VectorXd::Constant(1, 1.0);
  layer.activation = Activation::Relu;
  net.layers.push_back(layer);
  const Matrix x = Matrix::Constant(1, 1, -3.0);
  CHECK(forward(net, x)(0, 0) == 0.0);
}

TEST_CASE("forward rejects shape mismatch") {
  const auto net = init_net({4, 2}, {Activation::Identity}, 0);
  CHECK_THROWS_AS(forward(net, Matrix::Zero(3, 5)), std::invalid_argument);
}

TEST_CASE("forward is batch-order equivariant") {
  const auto net =
      init_net({4, 6, 2}, {Activation::Tanh, Activation::Sigmoid}, 11);
  Rng rng(5);
  const Matrix x = random_batch(rng, 7, 4);
  const Matrix y = forward(net, x);

  const Matrix x_rev = x.colwise().reverse();
  const Matrix y_rev = forward(net, x_rev);
  CHECK((y_rev - y.colwise().reverse()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("relu and sigmoid ranges hold for random inputs") {
  const auto relu_net = init_net({3, 5}, {Activation::Relu}, 2);
  const auto sig_net = init_net({3, 5}, {Activation::Sigmoid}, 2);
  // Scale keeps pre-activations below ~35; past that sigmoid rounds to 1.0
  // in double precision and the open-interval check is unrepresentable.
  Rng rng(9);
  const Matrix x = 5.0 * random_batch(rng, 50, 3);
  CHECK(forward(relu_net, x).minCoeff() >= 0.0);
  const Matrix p = forward(sig_net, x);
  CHECK(p.minCoeff() > 0.0);
  CHECK(p.maxCoeff() < 1.0);
}

TEST_CASE("backward: single linear layer weight gradient is outer product") {
  DenseNet net;
  DenseLayer layer;
  layer.weights = Matrix::Zero(2, 3);
  layer.weights << 1, 2, 3, 4, 5, 6;
  layer.bias = Eigen::VectorXd::Zero(2);
  layer.activation = Activation::Identity;
  net.layers.push_back(layer);

  Matrix x(1, 3);
  x << 0.5, -1.0, 2.0;
  ForwardTape tape;
  forward(net, x, &tape);

  Matrix g(1, 2);
  g << 3.0, -2.0;
  const auto grads = backward(net, tape, g);
  // dW = g^T x (outer product for a batch of one).
  const Matrix expected = g.transpose() * x;
  CHECK((grads.weights[0] - expected).cwiseAbs().maxCoeff() == 0.0);
  CHECK(grads.bias[0](0) == 3.0);
  CHECK(grads.bias[0](1) == -2.0);
  // Input gradient: g W.
  CHECK((grads.input - g * net.layers[0].weights).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("backward: zero output gradient gives zero parameter gradients") {
  const auto net =
      init_net({3, 4, 2}, {Activation::Tanh, Activation::Sigmoid}, 21);
  Rng rng(1);
  const Matrix x = random_batch(rng, 4, 3);
  ForwardTape tape;
  forward(net, x, &tape);
  const auto grads = backward(net, tape, Matrix::Zero(4, 2));
  for (const auto& gw : grads.weights) CHECK(gw.isZero(0.0));
  for (const auto& gb : grads.bias) CHECK(gb.isZero(0.0));
}

TEST_CASE("backward matches central finite differences on random nets") {
  // Loss = sum(output .* G) for a fixed random G, so dL/d(output) = G.
  Rng meta(2024);
  const Activation acts[] = {Activation::Identity, Activation::Relu,
                             Activation::Sigmoid, Activation::Tanh};
  for (int trial = 0; trial < 25; ++trial) {
    const int n_layers = 1 + static_cast<int>(meta.uniform_index(3));
    std::vector<int> sizes;
    std::vector<Activation> activations;
    sizes.push_back(1 + static_cast<int>(meta.uniform_index(16)));
    for (int k = 0; k < n_layers; ++k) {
      sizes.push_back(1 + static_cast<int>(meta.uniform_index(16)));
      activations.push_back(acts[meta.uniform_index(4)]);
    }
    const auto net = init_net(sizes, activations, meta.next_u64());

    Rng data(meta.next_u64());
    const Matrix x = random_batch(data, 3, sizes.front());
    const Matrix g = random_batch(data, 3, sizes.back());

    ForwardTape tape;
    forward(net, x, &tape);
    const auto analytic = backward(net, tape, g);
    const auto numeric = oracles::finite_difference_gradients(
        net,
        [&](const DenseNet& n) { return (forward(n, x).array() * g.array()).sum(); });

    CHECK(oracles::max_relative_error(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("adam_step: zero gradient is a fixed point") {
  auto net = init_net({2, 2}, {Activation::Identity}, 5);
  const Matrix before = net.layers[0].weights;
  AdamState state(net, 0.1);
  Gradients zero;
  zero.weights.push_back(Matrix::Zero(2, 2));
  zero.bias.push_back(Eigen::VectorXd::Zero(2));
  adam_step(net, zero, state);
  CHECK(net.layers[0].weights == before);
  CHECK(state.step_count == 1);
}

TEST_CASE("adam_step: first step on unit gradient moves by about -lr") {
  DenseNet net;
  DenseLayer layer;
  layer.weights = Matrix::Zero(1, 1);
  layer.bias = Eigen::VectorXd::Zero(1);
  layer.activation = Activation::Identity;
  net.layers.push_back(layer);

  AdamState state(net, 0.1);
  Gradients g;
  g.weights.push_back(Matrix::Constant(1, 1, 1.0));
  g.bias.push_back(Eigen::VectorXd::Zero(1));
  adam_step(net, g, state);
  // Bias-corrected first step: delta = -lr * 1 / (1 + eps) ~ -0.1.
  CHECK(net.layers[0].weights(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam_step: equal gradients produce equal updates") {
  DenseNet net;
  DenseLayer layer;
  layer.weights = Matrix::Zero(2, 1);
  layer.bias = Eigen::VectorXd::Zero(2);
  layer.activation = Activation::Identity;
  net.layers.push_back(layer);

  AdamState state(net);
  Gradients g;
  g.weights.push_back(Matrix::Constant(2, 1, 0.37));
  g.bias.push_back(Eigen::VectorXd::Zero(2));
  adam_step(net, g, state);
  CHECK(net.layers[0].weights(0, 0) == net.layers[0].weights(1, 0));
}

TEST_CASE("net json round-trip is bit-identical") {
  const auto net =
      init_net({5, 8, 3}, {Activation::Relu, Activation::Sigmoid}, 99);
  const auto text = net_to_json_string(net);
  const auto back = net_from_json_string(text);
  REQUIRE(back.layers.size() == net.layers.size());
  CHECK(back.seed == net.seed);
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    CHECK(back.layers[k].weights == net.layers[k].weights);
    CHECK(back.layers[k].bias == net.layers[k].bias);
    CHECK(back.layers[k].activation == net.layers[k].activation);
  }
}
