#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace trafficsynth {

using Matrix = Eigen::MatrixXd;  // rows = flows, cols = features

// Fitted min-max range of one feature.
struct NormParams {
  double min = 0.0;
  double max = 0.0;
};

// Row-major numeric flow records plus binary labels. This is the currency
// every other module trades in. Missing cells are stored as quiet NaN until
// impute_missing() runs.
struct FlowDataset {
  Matrix features;
  std::vector<int> labels;  // 0 = normal, 1 = Tor/abnormal
  std::vector<std::string> feature_names;
  // Present once normalize_minmax() has been fitted. Values of the fitting
  // dataset lie in [0,1]; data transformed later with apply_norm_params()
  // may fall outside (no clipping at inference).
  std::optional<std::vector<NormParams>> norm_params;
  // Chain of applied operations (name + parameters + seed), oldest first.
  std::vector<std::string> provenance;
  // Set on the test side of split(); training entry points refuse such data.
  bool holdout_test = false;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index cols() const { return features.cols(); }

  // Throws std::logic_error when a structural invariant is broken
  // (label/row count mismatch, labels outside {0,1}, name/column mismatch,
  // norm_params arity).
  void validate() const;

  // Live-array accounting used by the pipeline's memory estimates.
  std::size_t approx_bytes() const;
};

struct FeatureStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double corr_with_label = 0.0;  // Pearson; 0 when the feature has no variance
};

struct SplitSpec {
  double test_fraction = 0.2;  // must be strictly inside (0,1)
  std::uint64_t seed = 0;
  bool stratified = true;
};

// Parse failure with the offending position attached.
class CsvParseError : public std::runtime_error {
 public:
  CsvParseError(std::string message, std::size_t line, std::string column)
      : std::runtime_error(std::move(message)),
        line_(line),
        column_(std::move(column)) {}

  std::size_t line() const { return line_; }  // 1-based, header is line 1
  const std::string& column() const { return column_; }

 private:
  std::size_t line_;
  std::string column_;
};

// CSV ingestion: comma separated, header row, '.' decimal point. Empty cells,
// "NaN" and "nan" become missing values; any other non-numeric cell raises
// CsvParseError naming the line and column. The label column must hold only
// values equal to 0 or 1.
FlowDataset load_csv(const std::string& path, const std::string& label_column);

// Re-emission. Doubles are written with shortest round-trip formatting;
// missing cells as "NaN". write_sidecar stores feature names, norm_params and
// the provenance chain as JSON.
void write_csv(const FlowDataset& ds, const std::string& path,
               const std::string& label_column = "label");
void write_sidecar(const FlowDataset& ds, const std::string& path);

// Loads a CSV and re-attaches the metadata written by write_sidecar.
FlowDataset load_dataset(const std::string& csv_path,
                         const std::string& sidecar_path,
                         const std::string& label_column = "label");

// Removes rows whose (feature vector, label) pair already occurred, keeping
// the first occurrence; row order is otherwise preserved. Missing cells
// compare bitwise, so identical NaN patterns count as duplicates.
FlowDataset remove_duplicates(const FlowDataset& ds);

// Replaces each missing cell with its column median over the non-missing
// cells; a column with no observed value at all is dropped.
FlowDataset impute_missing(const FlowDataset& ds);

// Per-feature min/max/mean/variance and Pearson correlation against the
// label. Requires an imputed dataset; throws on zero rows.
std::vector<FeatureStats> compute_feature_stats(const FlowDataset& ds);

// Keeps features with band_low <= |corr| <= band_high. If target_count is
// given and the band yields more, the survivors are the target_count features
// whose |corr| is closest to the band midpoint (ties to the lower column
// index). Column order is preserved. Throws when the band selects nothing.
FlowDataset select_middle_correlation(const FlowDataset& ds,
                                      const std::vector<FeatureStats>& stats,
                                      double band_low, double band_high,
                                      std::optional<int> target_count = {});

// Fits x -> (x - min) / (max - min) per feature; zero-range features map to
// 0. The fitted ranges land in norm_params for reuse on held-out data.
FlowDataset normalize_minmax(const FlowDataset& ds);

// Applies previously fitted ranges without refitting or clipping.
FlowDataset apply_norm_params(const FlowDataset& ds,
                              const std::vector<NormParams>& params);

// Uniformly subsamples the majority class (without replacement) down to the
// minority count and reshuffles the result. Deterministic under seed.
FlowDataset balance_downsample(const FlowDataset& ds, std::uint64_t seed);

// Stratified (or plain) split. Per-class test counts are round(count *
// fraction); a fraction that empties either side of any class throws. The
// test half is tagged holdout_test.
std::pair<FlowDataset, FlowDataset> split(const FlowDataset& ds,
                                          const SplitSpec& spec);

// Row-wise concatenation; feature names must match. holdout_test is the OR
// of the inputs so test rows cannot be laundered into training sets.
FlowDataset concat(const FlowDataset& a, const FlowDataset& b);

// Deterministic row permutation (Fisher-Yates under seed).
FlowDataset shuffle_rows(const FlowDataset& ds, std::uint64_t seed);

// Hygiene guard: throws std::logic_error when ds carries the holdout tag.
// Called by every training entry point.
void ensure_trainable(const FlowDataset& ds, const std::string& caller);

}  // namespace trafficsynth
