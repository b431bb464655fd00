#pragma once

#include <array>
#include <string>
#include <vector>

#include "trafficsynth/dataset.hpp"

namespace trafficsynth {

// Binary confusion counts; class 1 (Tor/abnormal) is the positive class.
struct ConfusionMatrix {
  long tn = 0, fp = 0, fn = 0, tp = 0;
  long total() const { return tn + fp + fn + tp; }
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long support = 0;
};

struct ClassificationReport {
  double accuracy = 0.0;
  ClassMetrics class0, class1;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

// Threshold sweep over unique scores, descending; tied scores collapse into
// one point. Starts at (0,0), ends at (1,1); auc is the trapezoidal integral
// of exactly these points.
struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

struct FidelityReport {
  std::vector<double> per_feature_js;  // base-2 JSD, each in [0,1]
  double mean_js = 0.0;
  int bins = 0;
};

ConfusionMatrix confusion(const std::vector<int>& y_true,
                          const std::vector<int>& y_pred);

ClassificationReport report(const std::vector<int>& y_true,
                            const std::vector<int>& y_pred);
ClassificationReport report_from_confusion(const ConfusionMatrix& cm);

// Throws when y_true holds a single class (AUC undefined) or scores are not
// finite.
RocCurve roc_auc(const std::vector<int>& y_true,
                 const std::vector<double>& scores);

// {fraction of label 0, fraction of label 1}; throws on an empty dataset.
std::array<double, 2> class_balance(const FlowDataset& ds);

// Base-2 Jensen-Shannon divergence between two normalized histograms.
double jsd_base2(const std::vector<double>& p, const std::vector<double>& q);

// Per feature: both samples histogrammed over the union range into equal
// width bins, add-one smoothing, then base-2 JSD.
FidelityReport js_divergence(const FlowDataset& real, const FlowDataset& synth,
                             int bins = 50);

void write_roc_csv(const RocCurve& curve, const std::string& path);

}  // namespace trafficsynth
