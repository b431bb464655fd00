#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trafficsynth/classifiers.hpp"
#include "trafficsynth/dataset.hpp"
#include "trafficsynth/generators.hpp"
#include "trafficsynth/metrics.hpp"
#include "trafficsynth/privacy.hpp"

namespace trafficsynth {

// Configuration problems (bad JSON, unknown keys, impossible values) exit
// differently from stage failures, so they get their own type.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// CI-scale stand-in for a real flow corpus: two Gaussian classes whose means
// sit class_separation apart along a random unit direction, per-feature
// variances U[0.5, 1.5], min-max normalized.
struct DeskSpec {
  int n_per_class = 2000;
  int n_features = 26;
  double class_separation = 4.0;
  std::uint64_t seed = 0;
};

struct PreprocessConfig {
  double band_low = 0.05;
  double band_high = 0.75;
  std::optional<int> target_count = 26;
  double test_fraction = 0.2;
  bool stratified = true;
  std::uint64_t downsample_seed = 0;
  std::uint64_t split_seed = 0;
};

struct EvaluationConfig {
  int bins = 50;
  int bootstrap_resamples = 1000;
  std::uint64_t mia_seed = 0;
  std::uint64_t generation_seed = 0;
  std::uint64_t shuffle_seed = 0;  // combined/synthetic training-set order
};

enum class DataConfig { RealOnly, SyntheticOnly, Combined };

const char* data_config_name(DataConfig c);
DataConfig data_config_from_name(const std::string& name);

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  // Exactly one input: a CSV path or a synthetic desk dataset.
  std::string input_csv;
  std::string label_column = "label";
  std::optional<DeskSpec> desk;

  PreprocessConfig preprocess;
  std::vector<std::string> generators = {"smote", "vae", "gan"};
  std::vector<std::string> classifiers = {"random_forest", "boosted_trees"};
  std::vector<DataConfig> data_configs = {DataConfig::RealOnly,
                                          DataConfig::SyntheticOnly,
                                          DataConfig::Combined};
  SmoteConfig smote;
  VaeConfig vae;
  GanConfig gan;
  ForestConfig forest;
  BoostConfig boost;
  EvaluationConfig evaluation;
  double combined_ratio = 1.0;  // synthetic rows per real row in "combined"
};

// Strict parsing: unknown keys are hard errors, every absent seed is derived
// from the top-level seed, the result always round-trips via config_to_json.
ExperimentConfig config_from_json_string(const std::string& text);
ExperimentConfig config_from_json_file(const std::string& path);
std::string config_to_json_string(const ExperimentConfig& config);

// Re-derives sub-seeds after a top-level --seed override.
void reseed_config(ExperimentConfig& config, std::uint64_t seed);

struct StageCost {
  double seconds = 0.0;
  std::size_t peak_bytes = 0;
};

// Wall-clock around the thunk; the thunk reports its own live-array peak
// (model parameters + dataset buffers), which keeps the memory figure
// platform-independent instead of chasing OS RSS.
template <typename Fn>
StageCost timing_and_memory(Fn&& stage) {
  const auto start = std::chrono::steady_clock::now();
  StageCost cost;
  cost.peak_bytes = stage();
  cost.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return cost;
}

struct GeneratorOutcome {
  std::string method;
  TrainLog log;
  StageCost train_cost;
  double generation_seconds = 0.0;
  long synthetic_rows = 0;
  std::array<double, 2> synthetic_balance = {0.0, 0.0};
  FidelityReport fidelity;
  MiaResult mia;
  std::string balance_score;  // non-normative heuristic, see emit_report
};

struct CellOutcome {
  std::string classifier;
  DataConfig data_config = DataConfig::RealOnly;
  std::string generator;  // empty for real_only
  long train_rows = 0;
  std::array<double, 2> train_balance = {0.0, 0.0};
  StageCost train_cost;
  ClassificationReport report;
  ConfusionMatrix confusion;
  RocCurve roc;

  std::string tag() const;
};

struct TradeoffReport {
  bool failed = false;
  std::string failed_stage;
  std::string error;
  ExperimentConfig config;
  long train_rows = 0;
  long test_rows = 0;
  long feature_count = 0;
  std::array<double, 2> train_balance = {0.0, 0.0};
  std::vector<GeneratorOutcome> generators;
  std::vector<CellOutcome> cells;
};

// preprocess -> train generators -> assemble per data configuration ->
// train classifiers -> evaluate on the real held-out split -> fidelity and
// MIA per generator. Stage errors mark the report failed instead of
// propagating.
TradeoffReport run_experiment(const ExperimentConfig& config);

FlowDataset make_desk_dataset(int n_per_class, int n_features,
                              double class_separation, std::uint64_t seed);

// report.json, table1..4.csv, per-cell roc_/confusion_/balance_ CSVs and a
// rendered report.md. Timing fields are the only nondeterministic bytes.
void emit_report(const TradeoffReport& report, const std::string& out_dir);

std::string report_to_json_string(const TradeoffReport& report);

}  // namespace trafficsynth
