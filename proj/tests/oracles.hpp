#pragma once

// Independent reference implementations used only by tests. These stay
// deliberately naive (brute force, finite differences) so they cannot share
// a bug with the library code they check.

#include <cmath>
#include <vector>

#include "trafficsynth/dataset.hpp"
#include "trafficsynth/netcore.hpp"

namespace oracles {

// Mann-Whitney pair counting: fraction of (positive, negative) pairs ranked
// correctly, ties counted 1/2.
inline double mann_whitney_auc(const std::vector<int>& y,
                               const std::vector<double>& scores) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / static_cast<double>(pairs);
}

// Central finite differences of a scalar loss with respect to every net
// parameter. loss must be a pure function of the net.
template <typename LossFn>
trafficsynth::Gradients finite_difference_gradients(trafficsynth::DenseNet net,
                                                    LossFn&& loss,
                                                    double h = 1e-5) {
  trafficsynth::Gradients grads;
  for (auto& layer : net.layers) {
    trafficsynth::Matrix gw(layer.weights.rows(), layer.weights.cols());
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        const double saved = layer.weights(r, c);
        layer.weights(r, c) = saved + h;
        const double up = loss(net);
        layer.weights(r, c) = saved - h;
        const double down = loss(net);
        layer.weights(r, c) = saved;
        gw(r, c) = (up - down) / (2.0 * h);
      }
    }
    grads.weights.push_back(gw);

    Eigen::VectorXd gb(layer.bias.size());
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      const double saved = layer.bias(i);
      layer.bias(i) = saved + h;
      const double up = loss(net);
      layer.bias(i) = saved - h;
      const double down = loss(net);
      layer.bias(i) = saved;
      gb(i) = (up - down) / (2.0 * h);
    }
    grads.bias.push_back(gb);
  }
  return grads;
}

// Max over parameters of |a-b| / max(1, |a|+|b|).
inline double max_relative_error(const trafficsynth::Gradients& a,
                                 const trafficsynth::Gradients& b) {
  double worst = 0.0;
  auto upd = [&](double x, double y) {
    const double rel =
        std::abs(x - y) / std::max(1.0, std::abs(x) + std::abs(y));
    worst = std::max(worst, rel);
  };
  for (std::size_t k = 0; k < a.weights.size(); ++k) {
    for (Eigen::Index i = 0; i < a.weights[k].size(); ++i) {
      upd(a.weights[k](i), b.weights[k](i));
    }
    for (Eigen::Index i = 0; i < a.bias[k].size(); ++i) {
      upd(a.bias[k](i), b.bias[k](i));
    }
  }
  return worst;
}

// Smallest residual over all candidate parent pairs (i, j) of the target
// class: distance from s to the segment [x_i, x_j]. A SMOTE sample must sit
// on one such segment.
inline double nearest_segment_residual(const trafficsynth::FlowDataset& parents,
                                       const Eigen::RowVectorXd& s) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < parents.rows(); ++i) {
    for (Eigen::Index j = 0; j < parents.rows(); ++j) {
      if (i == j) continue;
      const Eigen::RowVectorXd a = parents.features.row(i);
      const Eigen::RowVectorXd b = parents.features.row(j);
      const Eigen::RowVectorXd ab = b - a;
      const double len2 = ab.squaredNorm();
      double lambda = len2 > 0.0 ? (s - a).dot(ab) / len2 : 0.0;
      lambda = std::clamp(lambda, 0.0, 1.0);
      best = std::min(best, (s - (a + lambda * ab)).norm());
    }
  }
  return best;
}

}  // namespace oracles
