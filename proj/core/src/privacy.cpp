#include "trafficsynth/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "trafficsynth/metrics.hpp"
#include "trafficsynth/rng.hpp"

namespace trafficsynth {

namespace {

std::vector<double> nearest_distances(const FlowDataset& queries,
                                      const FlowDataset& synth) {
  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index s = 0; s < synth.rows(); ++s) {
      const double d2 =
          (queries.features.row(q) - synth.features.row(s)).squaredNorm();
      best = std::min(best, d2);
    }
    scores.push_back(-std::sqrt(best));
  }
  return scores;
}

// Linear-interpolation quantile over a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Protected:
      return "PROTECTED";
    case Verdict::AtRisk:
      return "AT RISK";
    case Verdict::AtSevereRisk:
      return "AT SEVERE RISK";
  }
  return "PROTECTED";
}

Verdict privacy_verdict(double auc) {
  if (auc < 0.0 || auc > 1.0) {
    throw std::invalid_argument("privacy_verdict: auc outside [0,1]");
  }
  if (auc >= 0.80) return Verdict::AtSevereRisk;
  if (auc >= 0.65) return Verdict::AtRisk;
  return Verdict::Protected;
}

MiaScores mia_scores(const FlowDataset& members, const FlowDataset& nonmembers,
                     const FlowDataset& synth) {
  if (synth.rows() == 0) {
    throw std::invalid_argument("mia_scores: empty synthetic set");
  }
  if (members.cols() != synth.cols() || nonmembers.cols() != synth.cols()) {
    throw std::invalid_argument("mia_scores: feature space mismatch");
  }
  MiaScores scores;
  scores.member_scores = nearest_distances(members, synth);
  scores.nonmember_scores = nearest_distances(nonmembers, synth);
  return scores;
}

MiaResult mia_evaluate(const FlowDataset& members, const FlowDataset& nonmembers,
                       const FlowDataset& synth, int bootstrap_resamples,
                       std::uint64_t seed) {
  if (members.rows() == 0 || nonmembers.rows() == 0) {
    throw std::invalid_argument("mia_evaluate: empty query set");
  }
  if (bootstrap_resamples < 100) {
    throw std::invalid_argument(
        "mia_evaluate: fewer than 100 bootstrap resamples gives a meaningless "
        "confidence interval");
  }

  const auto scored = mia_scores(members, nonmembers, synth);

  std::vector<int> y;
  std::vector<double> s;
  y.reserve(scored.member_scores.size() + scored.nonmember_scores.size());
  for (double v : scored.member_scores) {
    y.push_back(1);
    s.push_back(v);
  }
  for (double v : scored.nonmember_scores) {
    y.push_back(0);
    s.push_back(v);
  }

  const auto curve = roc_auc(y, s);

  MiaResult result;
  result.auc = curve.auc;
  result.n_members = static_cast<long>(scored.member_scores.size());
  result.n_nonmembers = static_cast<long>(scored.nonmember_scores.size());
  result.bootstrap_resamples = bootstrap_resamples;
  result.seed = seed;

  // Percentile bootstrap over the pooled scored queries. A resample that
  // loses one class entirely carries no AUC and is skipped.
  Rng rng(seed);
  std::vector<double> boot_aucs;
  boot_aucs.reserve(static_cast<std::size_t>(bootstrap_resamples));
  const std::size_t n = y.size();
  std::vector<int> by(n);
  std::vector<double> bs(n);
  for (int r = 0; r < bootstrap_resamples; ++r) {
    long pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto pick = rng.uniform_index(n);
      by[i] = y[pick];
      bs[i] = s[pick];
      pos += by[i];
    }
    if (pos == 0 || pos == static_cast<long>(n)) continue;
    boot_aucs.push_back(roc_auc(by, bs).auc);
  }
  if (boot_aucs.empty()) {
    throw std::runtime_error("mia_evaluate: every bootstrap resample was "
                             "single-class");
  }
  std::sort(boot_aucs.begin(), boot_aucs.end());
  result.ci_low = quantile_sorted(boot_aucs, 0.025);
  result.ci_high = quantile_sorted(boot_aucs, 0.975);

  // Youden's J over the swept operating points; ties prefer the lower
  // threshold (the sweep is descending, so strict improvement plus
  // >=-on-tie gives exactly that).
  double best_j = -1.0;
  double best_threshold = 0.0;
  for (const auto& p : curve.points) {
    if (!std::isfinite(p.threshold)) continue;
    const double j = p.tpr - p.fpr;
    if (j > best_j || (j == best_j && p.threshold < best_threshold)) {
      best_j = j;
      best_threshold = p.threshold;
    }
  }
  result.threshold = best_threshold;

  std::vector<int> claims;
  claims.reserve(n);
  for (double v : s) claims.push_back(v >= best_threshold ? 1 : 0);
  const auto rep = report(y, claims);
  result.attack_accuracy = rep.accuracy;
  result.attack_precision = rep.class1.precision;
  result.attack_recall = rep.class1.recall;
  result.verdict = privacy_verdict(result.auc);
  return result;
}

std::string mia_result_to_json_string(const MiaResult& result) {
  nlohmann::ordered_json j;
  j["mia_auc"] = result.auc;
  j["ci_low"] = result.ci_low;
  j["ci_high"] = result.ci_high;
  j["attack_accuracy"] = result.attack_accuracy;
  j["attack_precision"] = result.attack_precision;
  j["attack_recall"] = result.attack_recall;
  j["verdict"] = verdict_name(result.verdict);
  j["threshold"] = result.threshold;
  j["n_members"] = result.n_members;
  j["n_nonmembers"] = result.n_nonmembers;
  j["bootstrap_resamples"] = result.bootstrap_resamples;
  j["seed"] = result.seed;
  return j.dump(2);
}

}  // namespace trafficsynth
