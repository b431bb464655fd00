#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "trafficsynth/dataset.hpp"

namespace trafficsynth {

enum class Verdict { Protected, AtRisk, AtSevereRisk };

const char* verdict_name(Verdict v);  // "PROTECTED" / "AT RISK" / "AT SEVERE RISK"

// Distance-to-nearest-synthetic-record attack: a generator that memorized
// training rows leaves synthetic points sitting on top of them, so members
// score higher (closer) than non-members.
struct MiaScores {
  std::vector<double> member_scores;
  std::vector<double> nonmember_scores;
};

struct MiaResult {
  double auc = 0.0;
  double ci_low = 0.0;   // 95% percentile bootstrap
  double ci_high = 0.0;
  double attack_accuracy = 0.0;
  double attack_precision = 0.0;
  double attack_recall = 0.0;
  double threshold = 0.0;  // Youden-J operating point on the score scale
  Verdict verdict = Verdict::Protected;
  long n_members = 0;
  long n_nonmembers = 0;
  int bootstrap_resamples = 0;
  std::uint64_t seed = 0;
};

// score(q) = -min_s ||q - s||_2 over synthetic rows; higher means "member".
MiaScores mia_scores(const FlowDataset& members, const FlowDataset& nonmembers,
                     const FlowDataset& synth);

// AUC with members as positives; 95% CI by percentile bootstrap over the
// pooled scored queries; operating threshold maximizes Youden's J (ties to
// the lower threshold); verdict per privacy_verdict. bootstrap_resamples
// below 100 is rejected.
MiaResult mia_evaluate(const FlowDataset& members, const FlowDataset& nonmembers,
                       const FlowDataset& synth, int bootstrap_resamples,
                       std::uint64_t seed);

// PROTECTED below 0.65, AT SEVERE RISK at or above 0.80, AT RISK between.
Verdict privacy_verdict(double auc);

// Field names are the trade-off table contract (mia_auc, ci_low, ...).
std::string mia_result_to_json_string(const MiaResult& result);

}  // namespace trafficsynth
