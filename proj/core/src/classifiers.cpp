#include "trafficsynth/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "trafficsynth/rng.hpp"

namespace trafficsynth {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Rows route on value < threshold. Candidate thresholds are midpoints between
// consecutive sorted unique values; a midpoint that rounds onto the lower
// value cannot separate anything and is skipped. Equal gains break toward the
// lowest feature index, then the lowest threshold, by scan order.
struct GiniTreeBuilder {
  const Matrix& x;
  const std::vector<int>& y;
  int max_depth;
  int features_per_split;
  Rng& rng;
  DecisionTree tree;

  int build(std::vector<Eigen::Index>& rows, int depth) {
    const long n = static_cast<long>(rows.size());
    long n1 = 0;
    for (auto r : rows) n1 += y[static_cast<std::size_t>(r)];
    const long n0 = n - n1;

    const int node_index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.max_depth_reached = std::max(tree.max_depth_reached, depth);

    auto leaf = [&]() {
      tree.nodes[static_cast<std::size_t>(node_index)].leaf_p1 =
          static_cast<double>(n1) / static_cast<double>(n);
      return node_index;
    };

    if (n0 == 0 || n1 == 0 || depth >= max_depth || n < 2) return leaf();

    // Per-node random feature subset via partial Fisher-Yates, then sorted
    // ascending for the deterministic tie-break.
    const auto d = static_cast<std::size_t>(x.cols());
    std::vector<int> pool(d);
    std::iota(pool.begin(), pool.end(), 0);
    const auto k =
        std::min<std::size_t>(static_cast<std::size_t>(features_per_split), d);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng.uniform_index(d - i);
      std::swap(pool[i], pool[j]);
    }
    std::vector<int> subset(pool.begin(), pool.begin() + static_cast<long>(k));
    std::sort(subset.begin(), subset.end());

    const double parent_impurity = gini_impurity(n0, n1);
    SplitCandidate best;

    std::vector<std::pair<double, int>> values;
    values.reserve(rows.size());
    for (int f : subset) {
      values.clear();
      for (auto r : rows) {
        values.emplace_back(x(r, f), y[static_cast<std::size_t>(r)]);
      }
      std::sort(values.begin(), values.end());

      long left1 = 0;
      for (long i = 0; i + 1 < n; ++i) {
        left1 += values[static_cast<std::size_t>(i)].second;
        const double lo = values[static_cast<std::size_t>(i)].first;
        const double hi = values[static_cast<std::size_t>(i + 1)].first;
        if (lo == hi) continue;
        const double threshold = 0.5 * (lo + hi);
        if (threshold <= lo) continue;

        const long n_left = i + 1;
        const long n_right = n - n_left;
        const long left0 = n_left - left1;
        const double weighted =
            (static_cast<double>(n_left) * gini_impurity(left0, left1) +
             static_cast<double>(n_right) *
                 gini_impurity(n0 - left0, n1 - left1)) /
            static_cast<double>(n);
        const double gain = parent_impurity - weighted;
        if (gain > best.gain + 1e-15) {
          best = {f, threshold, gain};
        }
      }
    }

    if (best.feature < 0 || best.gain <= 1e-15) return leaf();

    std::vector<Eigen::Index> left_rows, right_rows;
    for (auto r : rows) {
      (x(r, best.feature) < best.threshold ? left_rows : right_rows)
          .push_back(r);
    }

    const int left = build(left_rows, depth + 1);
    const int right = build(right_rows, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(node_index)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return node_index;
  }
};

// Regression tree on (gradient, hessian) pairs with the second-order gain.
struct NewtonTreeBuilder {
  const Matrix& x;
  const std::vector<double>& grad;
  const std::vector<double>& hess;
  double lambda;
  int max_depth;
  DecisionTree tree;

  int build(std::vector<Eigen::Index>& rows, int depth) {
    double g_sum = 0.0, h_sum = 0.0;
    for (auto r : rows) {
      g_sum += grad[static_cast<std::size_t>(r)];
      h_sum += hess[static_cast<std::size_t>(r)];
    }

    const int node_index = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.max_depth_reached = std::max(tree.max_depth_reached, depth);

    auto leaf = [&]() {
      tree.nodes[static_cast<std::size_t>(node_index)].leaf_value =
          -g_sum / (h_sum + lambda);
      return node_index;
    };

    const long n = static_cast<long>(rows.size());
    if (depth >= max_depth || n < 2) return leaf();

    const double parent_score = g_sum * g_sum / (h_sum + lambda);
    SplitCandidate best;

    std::vector<std::pair<double, Eigen::Index>> values;
    values.reserve(rows.size());
    for (int f = 0; f < static_cast<int>(x.cols()); ++f) {
      values.clear();
      for (auto r : rows) values.emplace_back(x(r, f), r);
      std::sort(values.begin(), values.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });

      double gl = 0.0, hl = 0.0;
      for (long i = 0; i + 1 < n; ++i) {
        const auto row = values[static_cast<std::size_t>(i)].second;
        gl += grad[static_cast<std::size_t>(row)];
        hl += hess[static_cast<std::size_t>(row)];
        const double lo = values[static_cast<std::size_t>(i)].first;
        const double hi = values[static_cast<std::size_t>(i + 1)].first;
        if (lo == hi) continue;
        const double threshold = 0.5 * (lo + hi);
        if (threshold <= lo) continue;

        const double gr = g_sum - gl;
        const double hr = h_sum - hl;
        const double gain =
            0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                   parent_score);
        if (gain > best.gain + 1e-15) {
          best = {f, threshold, gain};
        }
      }
    }

    // Splits with non-positive gain are not taken.
    if (best.feature < 0 || best.gain <= 0.0) return leaf();

    std::vector<Eigen::Index> left_rows, right_rows;
    for (auto r : rows) {
      (x(r, best.feature) < best.threshold ? left_rows : right_rows)
          .push_back(r);
    }
    const int left = build(left_rows, depth + 1);
    const int right = build(right_rows, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(node_index)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return node_index;
  }
};

void check_two_classes(const FlowDataset& ds, const char* caller) {
  long n1 = 0;
  for (int v : ds.labels) n1 += v;
  if (ds.rows() < 2 || n1 == 0 || n1 == ds.rows()) {
    throw std::runtime_error(std::string(caller) +
                             ": training data must contain both classes");
  }
}

Eigen::Index model_feature_arity(const std::vector<DecisionTree>& trees) {
  int max_feature = -1;
  for (const auto& t : trees) {
    for (const auto& n : t.nodes) max_feature = std::max(max_feature, n.feature);
  }
  return max_feature + 1;
}

void check_feature_count(const std::vector<DecisionTree>& trees,
                         const Matrix& rows, const char* caller) {
  if (rows.cols() < model_feature_arity(trees)) {
    throw std::invalid_argument(std::string(caller) +
                                ": rows have too few features for this model");
  }
}

nlohmann::ordered_json tree_to_json(const DecisionTree& tree) {
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const auto& n : tree.nodes) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"leaf_p1", n.leaf_p1},
                     {"leaf_value", n.leaf_value}});
  }
  return {{"max_depth_reached", tree.max_depth_reached}, {"nodes", nodes}};
}

DecisionTree tree_from_json(const nlohmann::json& j) {
  DecisionTree tree;
  tree.max_depth_reached = j.at("max_depth_reached").get<int>();
  for (const auto& nj : j.at("nodes")) {
    TreeNode n;
    n.feature = nj.at("feature").get<int>();
    n.threshold = nj.at("threshold").get<double>();
    n.left = nj.at("left").get<int>();
    n.right = nj.at("right").get<int>();
    n.leaf_p1 = nj.at("leaf_p1").get<double>();
    n.leaf_value = nj.at("leaf_value").get<double>();
    tree.nodes.push_back(n);
  }
  if (tree.nodes.empty()) {
    throw std::runtime_error("tree_from_json: empty tree");
  }
  return tree;
}

}  // namespace

double gini_impurity(long n0, long n1) {
  const double n = static_cast<double>(n0 + n1);
  if (n == 0.0) return 0.0;
  const double p0 = static_cast<double>(n0) / n;
  const double p1 = static_cast<double>(n1) / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

double DecisionTree::predict_p1(
    const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = row(n.feature) < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].leaf_p1;
}

double DecisionTree::predict_value(
    const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = row(n.feature) < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].leaf_value;
}

std::size_t ForestModel::approx_bytes() const {
  std::size_t n = 0;
  for (const auto& t : trees) n += t.approx_bytes();
  return n;
}

std::size_t BoostedModel::approx_bytes() const {
  std::size_t n = train_logloss.size() * sizeof(double);
  for (const auto& t : trees) n += t.approx_bytes();
  return n;
}

ForestModel rf_train(const FlowDataset& train, const ForestConfig& config) {
  ensure_trainable(train, "rf_train");
  check_two_classes(train, "rf_train");
  if (config.n_trees < 1) {
    throw std::invalid_argument("rf_train: n_trees must be >= 1");
  }

  const Eigen::Index n = train.rows();
  const int d = static_cast<int>(train.cols());
  int per_split = config.features_per_split;
  if (per_split <= 0) {
    per_split = std::max(1, static_cast<int>(std::floor(std::sqrt(d))));
  }
  if (per_split > d) {
    throw std::invalid_argument(
        "rf_train: features_per_split exceeds feature count");
  }

  ForestModel model;
  model.config = config;
  model.config.features_per_split = per_split;

  // Seeds are fixed per tree index, so trees could be grown concurrently
  // without changing the result; this sequential order is the canonical one.
  for (int t = 0; t < config.n_trees; ++t) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(t)));
    std::vector<Eigen::Index> sample(static_cast<std::size_t>(n));
    for (auto& r : sample) {
      r = static_cast<Eigen::Index>(
          rng.uniform_index(static_cast<std::size_t>(n)));
    }
    GiniTreeBuilder builder{train.features, train.labels, config.max_depth,
                            per_split, rng};
    builder.build(sample, 0);
    model.trees.push_back(std::move(builder.tree));
  }
  return model;
}

std::vector<double> rf_predict_proba(const ForestModel& model,
                                     const Matrix& rows) {
  check_feature_count(model.trees, rows, "rf_predict_proba");
  std::vector<double> probs(static_cast<std::size_t>(rows.rows()), 0.0);
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    double sum = 0.0;
    for (const auto& tree : model.trees) sum += tree.predict_p1(rows.row(r));
    probs[static_cast<std::size_t>(r)] =
        sum / static_cast<double>(model.trees.size());
  }
  return probs;
}

std::vector<int> rf_predict(const ForestModel& model, const Matrix& rows) {
  std::vector<int> labels;
  for (double p : rf_predict_proba(model, rows)) labels.push_back(p >= 0.5);
  return labels;
}

BoostedModel gbt_train(const FlowDataset& train, const BoostConfig& config) {
  ensure_trainable(train, "gbt_train");
  check_two_classes(train, "gbt_train");

  const Eigen::Index n = train.rows();
  double prior = 0.0;
  for (int v : train.labels) prior += v;
  prior /= static_cast<double>(n);

  BoostedModel model;
  model.config = config;
  model.base_score = std::log(prior / (1.0 - prior));

  std::vector<double> margin(static_cast<std::size_t>(n), model.base_score);
  std::vector<double> grad(static_cast<std::size_t>(n));
  std::vector<double> hess(static_cast<std::size_t>(n));

  for (int round = 0; round < config.n_rounds; ++round) {
    double logloss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(margin[static_cast<std::size_t>(i)]);
      const int y = train.labels[static_cast<std::size_t>(i)];
      grad[static_cast<std::size_t>(i)] = p - y;
      hess[static_cast<std::size_t>(i)] = p * (1.0 - p);
      const double pc = std::clamp(p, 1e-15, 1.0 - 1e-15);
      logloss -= y == 1 ? std::log(pc) : std::log(1.0 - pc);
    }
    logloss /= static_cast<double>(n);
    if (!std::isfinite(logloss)) {
      throw std::runtime_error("gbt_train: non-finite loss at round " +
                               std::to_string(round));
    }
    model.train_logloss.push_back(logloss);

    NewtonTreeBuilder builder{train.features, grad, hess, config.lambda_reg,
                              config.max_depth};
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    builder.build(rows, 0);

    for (Eigen::Index i = 0; i < n; ++i) {
      margin[static_cast<std::size_t>(i)] +=
          config.learning_rate *
          builder.tree.predict_value(train.features.row(i));
    }
    model.trees.push_back(std::move(builder.tree));
  }
  return model;
}

std::vector<double> gbt_predict_proba(const BoostedModel& model,
                                      const Matrix& rows) {
  check_feature_count(model.trees, rows, "gbt_predict_proba");
  std::vector<double> probs(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    double m = 0.0;
    for (const auto& tree : model.trees) m += tree.predict_value(rows.row(r));
    probs[static_cast<std::size_t>(r)] =
        sigmoid(model.base_score + model.config.learning_rate * m);
  }
  return probs;
}

std::vector<int> gbt_predict(const BoostedModel& model, const Matrix& rows) {
  std::vector<int> labels;
  for (double p : gbt_predict_proba(model, rows)) labels.push_back(p >= 0.5);
  return labels;
}

std::vector<double> predict_proba(const EnsembleModel& model,
                                  const Matrix& rows) {
  return std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ForestModel>) {
          return rf_predict_proba(m, rows);
        } else {
          return gbt_predict_proba(m, rows);
        }
      },
      model);
}

std::vector<int> predict(const EnsembleModel& model, const Matrix& rows) {
  std::vector<int> labels;
  for (double p : predict_proba(model, rows)) labels.push_back(p >= 0.5);
  return labels;
}

std::string classifier_method(const EnsembleModel& model) {
  return std::holds_alternative<ForestModel>(model) ? "random_forest"
                                                    : "boosted_trees";
}

std::size_t model_bytes(const EnsembleModel& model) {
  return std::visit([](const auto& m) { return m.approx_bytes(); }, model);
}

std::string ensemble_to_json_string(const EnsembleModel& model) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["method"] = classifier_method(model);
  if (const auto* rf = std::get_if<ForestModel>(&model)) {
    j["config"] = {{"n_trees", rf->config.n_trees},
                   {"max_depth", rf->config.max_depth},
                   {"features_per_split", rf->config.features_per_split},
                   {"seed", rf->config.seed}};
    auto trees = nlohmann::ordered_json::array();
    for (const auto& t : rf->trees) trees.push_back(tree_to_json(t));
    j["trees"] = std::move(trees);
  } else {
    const auto& gbt = std::get<BoostedModel>(model);
    j["config"] = {{"n_rounds", gbt.config.n_rounds},
                   {"max_depth", gbt.config.max_depth},
                   {"learning_rate", gbt.config.learning_rate},
                   {"lambda_reg", gbt.config.lambda_reg},
                   {"seed", gbt.config.seed}};
    j["base_score"] = gbt.base_score;
    j["train_logloss"] = gbt.train_logloss;
    auto trees = nlohmann::ordered_json::array();
    for (const auto& t : gbt.trees) trees.push_back(tree_to_json(t));
    j["trees"] = std::move(trees);
  }
  return j.dump(2);
}

EnsembleModel ensemble_from_json_string(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("format_version").get<int>() != 1) {
    throw std::runtime_error("ensemble_from_json: unsupported format version");
  }
  const auto method = j.at("method").get<std::string>();
  if (method == "random_forest") {
    ForestModel m;
    const auto& c = j.at("config");
    m.config.n_trees = c.at("n_trees").get<int>();
    m.config.max_depth = c.at("max_depth").get<int>();
    m.config.features_per_split = c.at("features_per_split").get<int>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    for (const auto& tj : j.at("trees")) m.trees.push_back(tree_from_json(tj));
    return m;
  }
  if (method == "boosted_trees") {
    BoostedModel m;
    const auto& c = j.at("config");
    m.config.n_rounds = c.at("n_rounds").get<int>();
    m.config.max_depth = c.at("max_depth").get<int>();
    m.config.learning_rate = c.at("learning_rate").get<double>();
    m.config.lambda_reg = c.at("lambda_reg").get<double>();
    m.config.seed = c.at("seed").get<std::uint64_t>();
    m.base_score = j.at("base_score").get<double>();
    m.train_logloss = j.at("train_logloss").get<std::vector<double>>();
    for (const auto& tj : j.at("trees")) m.trees.push_back(tree_from_json(tj));
    return m;
  }
  throw std::runtime_error("ensemble_from_json: unknown method '" + method +
                           "'");
}

}  // namespace trafficsynth
