#include "trafficsynth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "internal_util.hpp"

namespace trafficsynth {

namespace {

void check_labels(const std::vector<int>& y) {
  for (int v : y) {
    if (v != 0 && v != 1) {
      throw std::invalid_argument("label " + std::to_string(v) +
                                  " outside {0,1}");
    }
  }
}

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double f1_of(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

}  // namespace

ConfusionMatrix confusion(const std::vector<int>& y_true,
                          const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw std::invalid_argument("confusion: length mismatch");
  }
  check_labels(y_true);
  check_labels(y_pred);
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] == 1) {
      (y_pred[i] == 1 ? cm.tp : cm.fn) += 1;
    } else {
      (y_pred[i] == 1 ? cm.fp : cm.tn) += 1;
    }
  }
  return cm;
}

ClassificationReport report_from_confusion(const ConfusionMatrix& cm) {
  const long n = cm.total();
  if (n == 0) throw std::invalid_argument("report: empty input");
  ClassificationReport r;
  r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(n);

  r.class1.precision = safe_ratio(cm.tp, cm.tp + cm.fp);
  r.class1.recall = safe_ratio(cm.tp, cm.tp + cm.fn);
  r.class1.f1 = f1_of(r.class1.precision, r.class1.recall);
  r.class1.support = cm.tp + cm.fn;

  r.class0.precision = safe_ratio(cm.tn, cm.tn + cm.fn);
  r.class0.recall = safe_ratio(cm.tn, cm.tn + cm.fp);
  r.class0.f1 = f1_of(r.class0.precision, r.class0.recall);
  r.class0.support = cm.tn + cm.fp;

  r.macro_precision = 0.5 * (r.class0.precision + r.class1.precision);
  r.macro_recall = 0.5 * (r.class0.recall + r.class1.recall);
  r.macro_f1 = 0.5 * (r.class0.f1 + r.class1.f1);
  return r;
}

ClassificationReport report(const std::vector<int>& y_true,
                            const std::vector<int>& y_pred) {
  return report_from_confusion(confusion(y_true, y_pred));
}

RocCurve roc_auc(const std::vector<int>& y_true,
                 const std::vector<double>& scores) {
  if (y_true.size() != scores.size()) {
    throw std::invalid_argument("roc_auc: length mismatch");
  }
  check_labels(y_true);
  for (double s : scores) {
    if (!std::isfinite(s)) {
      throw std::invalid_argument("roc_auc: non-finite score");
    }
  }
  const long total_pos = std::count(y_true.begin(), y_true.end(), 1);
  const long total_neg = static_cast<long>(y_true.size()) - total_pos;
  if (total_pos == 0 || total_neg == 0) {
    throw std::invalid_argument(
        "roc_auc: AUC undefined with a single class present");
  }

  std::vector<std::size_t> order(y_true.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  long tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    // Group tied scores into a single operating point.
    while (i < order.size() && scores[order[i]] == s) {
      (y_true[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / total_neg,
                            static_cast<double>(tp) / total_pos, s});
  }

  double auc = 0.0;
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const auto& a = curve.points[k - 1];
    const auto& b = curve.points[k];
    auc += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
  }
  curve.auc = auc;
  return curve;
}

std::array<double, 2> class_balance(const FlowDataset& ds) {
  if (ds.rows() == 0) throw std::invalid_argument("class_balance: empty dataset");
  double n1 = 0.0;
  for (int y : ds.labels) n1 += y;
  const double n = static_cast<double>(ds.rows());
  return {(n - n1) / n, n1 / n};
}

double jsd_base2(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) {
    throw std::invalid_argument("jsd_base2: histogram size mismatch");
  }
  auto kl_to_mix = [&](const std::vector<double>& a) {
    double kl = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] > 0.0) {
        const double m = 0.5 * (p[i] + q[i]);
        kl += a[i] * std::log2(a[i] / m);
      }
    }
    return kl;
  };
  return 0.5 * kl_to_mix(p) + 0.5 * kl_to_mix(q);
}

FidelityReport js_divergence(const FlowDataset& real, const FlowDataset& synth,
                             int bins) {
  if (real.rows() == 0 || synth.rows() == 0) {
    throw std::invalid_argument("js_divergence: empty dataset");
  }
  if (real.cols() != synth.cols()) {
    throw std::invalid_argument("js_divergence: feature count mismatch");
  }
  if (bins < 2) throw std::invalid_argument("js_divergence: bins must be >= 2");

  FidelityReport rep;
  rep.bins = bins;
  for (Eigen::Index c = 0; c < real.cols(); ++c) {
    const double lo =
        std::min(real.features.col(c).minCoeff(), synth.features.col(c).minCoeff());
    const double hi =
        std::max(real.features.col(c).maxCoeff(), synth.features.col(c).maxCoeff());
    const double width = hi - lo;

    auto histogram = [&](const Matrix& m) {
      std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::size_t bin = 0;
        if (width > 0.0) {
          const double t = (m(r, c) - lo) / width;
          bin = std::min<std::size_t>(
              static_cast<std::size_t>(bins) - 1,
              static_cast<std::size_t>(t * bins));
        }
        counts[bin] += 1.0;
      }
      // Add-one smoothing, then normalize.
      const double total = static_cast<double>(m.rows()) + bins;
      for (double& v : counts) v = (v + 1.0) / total;
      return counts;
    };

    rep.per_feature_js.push_back(
        jsd_base2(histogram(real.features), histogram(synth.features)));
  }
  rep.mean_js =
      std::accumulate(rep.per_feature_js.begin(), rep.per_feature_js.end(), 0.0) /
      static_cast<double>(rep.per_feature_js.size());
  return rep;
}

void write_roc_csv(const RocCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_roc_csv: cannot open '" + path + "'");
  }
  out << "fpr,tpr,threshold\n";
  for (const auto& p : curve.points) {
    out << detail::format_double(p.fpr) << ',' << detail::format_double(p.tpr)
        << ',' << detail::format_double(p.threshold) << '\n';
  }
}

}  // namespace trafficsynth
