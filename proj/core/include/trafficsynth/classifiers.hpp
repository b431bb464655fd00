#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "trafficsynth/dataset.hpp"

namespace trafficsynth {

// One node of a binary tree stored as an index array. Internal nodes route
// on feature < threshold; leaves carry either a class-1 probability
// (classification) or an additive value (regression, used by boosting).
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf_p1 = 0.0;
  double leaf_value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int max_depth_reached = 0;

  double predict_p1(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  double predict_value(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  std::size_t approx_bytes() const { return nodes.size() * sizeof(TreeNode); }
};

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 12;
  int features_per_split = 0;  // 0 = floor(sqrt(feature count))
  std::uint64_t seed = 0;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  ForestConfig config;
  std::size_t approx_bytes() const;
};

struct BoostConfig {
  int n_rounds = 100;
  int max_depth = 6;
  double learning_rate = 0.1;
  double lambda_reg = 1.0;
  std::uint64_t seed = 0;  // reserved; plain boosting draws nothing random
};

struct BoostedModel {
  std::vector<DecisionTree> trees;  // regression trees of log-odds deltas
  BoostConfig config;
  double base_score = 0.0;  // prior log-odds
  std::vector<double> train_logloss;  // per completed round
  std::size_t approx_bytes() const;
};

// Bagged Gini trees over bootstrap resamples with a per-node random feature
// subset. Per-tree seeds are pre-assigned from config.seed by tree index.
ForestModel rf_train(const FlowDataset& train, const ForestConfig& config);
std::vector<double> rf_predict_proba(const ForestModel& model,
                                     const Matrix& rows);
std::vector<int> rf_predict(const ForestModel& model, const Matrix& rows);

// Newton boosting with logistic loss: gradient p - y, hessian p(1-p),
// leaf value -G/(H + lambda), split gain
// [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] / 2; non-positive gains stop.
BoostedModel gbt_train(const FlowDataset& train, const BoostConfig& config);
std::vector<double> gbt_predict_proba(const BoostedModel& model,
                                      const Matrix& rows);
std::vector<int> gbt_predict(const BoostedModel& model, const Matrix& rows);

double gini_impurity(long n0, long n1);

// Either detector behind one interface for the experiment grid.
using EnsembleModel = std::variant<ForestModel, BoostedModel>;

std::vector<double> predict_proba(const EnsembleModel& model,
                                  const Matrix& rows);
std::vector<int> predict(const EnsembleModel& model, const Matrix& rows);
std::string classifier_method(const EnsembleModel& model);
std::size_t model_bytes(const EnsembleModel& model);

std::string ensemble_to_json_string(const EnsembleModel& model);
EnsembleModel ensemble_from_json_string(const std::string& text);

}  // namespace trafficsynth
