#include "trafficsynth/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "internal_util.hpp"
#include "trafficsynth/rng.hpp"

namespace trafficsynth {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_missing_token(std::string_view cell) {
  return cell.empty() || cell == "NaN" || cell == "nan";
}

double parse_cell(std::string_view cell, std::size_t line,
                  const std::string& column) {
  if (is_missing_token(cell)) return kNaN;
  double value = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(),
                                   value, std::chars_format::general);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() ||
      !std::isfinite(value)) {
    throw CsvParseError("line " + std::to_string(line) + ", column '" +
                            column + "': cannot parse '" + std::string(cell) +
                            "' as a finite number",
                        line, column);
  }
  return value;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(detail::trim(line.substr(start)));
      break;
    }
    fields.push_back(detail::trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

// Copies the given rows (in order) into a fresh dataset, keeping metadata.
FlowDataset take_rows(const FlowDataset& ds, const std::vector<Eigen::Index>& rows) {
  FlowDataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), ds.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = ds.features.row(rows[i]);
    out.labels.push_back(ds.labels[static_cast<std::size_t>(rows[i])]);
  }
  out.feature_names = ds.feature_names;
  out.norm_params = ds.norm_params;
  out.provenance = ds.provenance;
  out.holdout_test = ds.holdout_test;
  return out;
}

std::vector<Eigen::Index> label_indices(const FlowDataset& ds, int label) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    if (ds.labels[static_cast<std::size_t>(r)] == label) idx.push_back(r);
  }
  return idx;
}

}  // namespace

void FlowDataset::validate() const {
  if (static_cast<Eigen::Index>(labels.size()) != rows()) {
    throw std::logic_error("FlowDataset: label count " +
                           std::to_string(labels.size()) +
                           " != row count " + std::to_string(rows()));
  }
  for (int label : labels) {
    if (label != 0 && label != 1) {
      throw std::logic_error("FlowDataset: label " + std::to_string(label) +
                             " outside {0,1}");
    }
  }
  if (static_cast<Eigen::Index>(feature_names.size()) != cols()) {
    throw std::logic_error("FlowDataset: feature_names count mismatch");
  }
  if (norm_params && static_cast<Eigen::Index>(norm_params->size()) != cols()) {
    throw std::logic_error("FlowDataset: norm_params count mismatch");
  }
}

std::size_t FlowDataset::approx_bytes() const {
  std::size_t bytes = static_cast<std::size_t>(features.size()) * sizeof(double);
  bytes += labels.size() * sizeof(int);
  for (const auto& name : feature_names) bytes += name.size();
  if (norm_params) bytes += norm_params->size() * sizeof(NormParams);
  for (const auto& entry : provenance) bytes += entry.size();
  return bytes;
}

FlowDataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_csv: cannot open '" + path + "'");
  }

  std::string line;
  if (!std::getline(in, line)) {
    throw CsvParseError("'" + path + "' is empty (no header row)", 1, "");
  }
  const auto header = split_fields(line);
  std::vector<std::string> names(header.begin(), header.end());

  Eigen::Index label_col = -1;
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (names[c] == label_column) {
      label_col = static_cast<Eigen::Index>(c);
      break;
    }
  }
  if (label_col < 0) {
    throw std::runtime_error("load_csv: label column '" + label_column +
                             "' not found in '" + path + "'");
  }

  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (static_cast<Eigen::Index>(c) != label_col)
      feature_names.push_back(names[c]);
  }

  std::vector<double> cells;
  std::vector<int> labels;
  std::size_t line_no = 1;
  const std::size_t n_cols = names.size();
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != n_cols) {
      throw CsvParseError("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(n_cols) + " fields, got " +
                              std::to_string(fields.size()),
                          line_no, "");
    }
    for (std::size_t c = 0; c < n_cols; ++c) {
      if (static_cast<Eigen::Index>(c) == label_col) {
        const double v = parse_cell(fields[c], line_no, names[c]);
        if (v != 0.0 && v != 1.0) {
          throw CsvParseError("line " + std::to_string(line_no) +
                                  ": label value '" + std::string(fields[c]) +
                                  "' is not 0 or 1",
                              line_no, names[c]);
        }
        labels.push_back(static_cast<int>(v));
      } else {
        cells.push_back(parse_cell(fields[c], line_no, names[c]));
      }
    }
  }

  FlowDataset ds;
  const Eigen::Index n_rows = static_cast<Eigen::Index>(labels.size());
  const Eigen::Index n_feat = static_cast<Eigen::Index>(feature_names.size());
  ds.features.resize(n_rows, n_feat);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    for (Eigen::Index c = 0; c < n_feat; ++c) {
      ds.features(r, c) = cells[static_cast<std::size_t>(r * n_feat + c)];
    }
  }
  ds.labels = std::move(labels);
  ds.feature_names = std::move(feature_names);
  ds.provenance.push_back("load_csv(path=" + path +
                          ",label_column=" + label_column + ")");
  ds.validate();
  return ds;
}

void write_csv(const FlowDataset& ds, const std::string& path,
               const std::string& label_column) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_csv: cannot open '" + path +
                             "' for writing");
  }
  for (const auto& name : ds.feature_names) out << name << ',';
  out << label_column << '\n';
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.cols(); ++c) {
      const double v = ds.features(r, c);
      out << (std::isnan(v) ? "NaN" : detail::format_double(v)) << ',';
    }
    out << ds.labels[static_cast<std::size_t>(r)] << '\n';
  }
}

void write_sidecar(const FlowDataset& ds, const std::string& path) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["feature_names"] = ds.feature_names;
  if (ds.norm_params) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : *ds.norm_params) arr.push_back({p.min, p.max});
    j["norm_params"] = arr;
  } else {
    j["norm_params"] = nullptr;
  }
  j["provenance"] = ds.provenance;
  j["holdout_test"] = ds.holdout_test;
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("write_sidecar: cannot open '" + path +
                             "' for writing");
  }
  out << j.dump(2) << '\n';
}

FlowDataset load_dataset(const std::string& csv_path,
                         const std::string& sidecar_path,
                         const std::string& label_column) {
  FlowDataset ds = load_csv(csv_path, label_column);
  std::ifstream in(sidecar_path);
  if (!in) {
    throw std::runtime_error("load_dataset: cannot open sidecar '" +
                             sidecar_path + "'");
  }
  const auto j = nlohmann::json::parse(in);
  if (!j.contains("format_version") || j["format_version"].get<int>() != 1) {
    throw std::runtime_error("load_dataset: unsupported sidecar version in '" +
                             sidecar_path + "'");
  }
  const auto names = j.at("feature_names").get<std::vector<std::string>>();
  if (names != ds.feature_names) {
    throw std::runtime_error(
        "load_dataset: sidecar feature names do not match CSV header");
  }
  if (!j.at("norm_params").is_null()) {
    std::vector<NormParams> params;
    for (const auto& p : j.at("norm_params")) {
      params.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    ds.norm_params = std::move(params);
  }
  ds.provenance = j.at("provenance").get<std::vector<std::string>>();
  ds.holdout_test = j.at("holdout_test").get<bool>();
  ds.validate();
  return ds;
}

FlowDataset remove_duplicates(const FlowDataset& ds) {
  // Bitwise row key: doubles compare by representation, so NaN == NaN here
  // and duplicate detection stays total.
  std::unordered_set<std::string> seen;
  std::vector<Eigen::Index> keep;
  const std::size_t row_bytes = static_cast<std::size_t>(ds.cols()) * sizeof(double);
  std::string key(row_bytes + sizeof(int), '\0');
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    if (ds.cols() > 0) {
      // Eigen matrices are column-major; gather the row explicitly.
      for (Eigen::Index c = 0; c < ds.cols(); ++c) {
        const double v = ds.features(r, c);
        std::memcpy(key.data() + static_cast<std::size_t>(c) * sizeof(double),
                    &v, sizeof(double));
      }
    }
    const int label = ds.labels[static_cast<std::size_t>(r)];
    std::memcpy(key.data() + row_bytes, &label, sizeof(int));
    if (seen.insert(key).second) keep.push_back(r);
  }
  FlowDataset out = take_rows(ds, keep);
  out.provenance.push_back("remove_duplicates()");
  return out;
}

FlowDataset impute_missing(const FlowDataset& ds) {
  std::vector<Eigen::Index> keep_cols;
  std::vector<double> medians;
  for (Eigen::Index c = 0; c < ds.cols(); ++c) {
    std::vector<double> present;
    present.reserve(static_cast<std::size_t>(ds.rows()));
    for (Eigen::Index r = 0; r < ds.rows(); ++r) {
      const double v = ds.features(r, c);
      if (!std::isnan(v)) present.push_back(v);
    }
    if (present.empty()) continue;  // all-missing column: drop
    std::sort(present.begin(), present.end());
    const std::size_t n = present.size();
    const double median = (n % 2 == 1)
                              ? present[n / 2]
                              : 0.5 * (present[n / 2 - 1] + present[n / 2]);
    keep_cols.push_back(c);
    medians.push_back(median);
  }

  FlowDataset out;
  out.features.resize(ds.rows(), static_cast<Eigen::Index>(keep_cols.size()));
  for (std::size_t k = 0; k < keep_cols.size(); ++k) {
    const Eigen::Index c = keep_cols[k];
    for (Eigen::Index r = 0; r < ds.rows(); ++r) {
      const double v = ds.features(r, c);
      out.features(r, static_cast<Eigen::Index>(k)) =
          std::isnan(v) ? medians[k] : v;
    }
    out.feature_names.push_back(ds.feature_names[static_cast<std::size_t>(c)]);
  }
  out.labels = ds.labels;
  if (ds.norm_params) {
    std::vector<NormParams> params;
    for (Eigen::Index c : keep_cols)
      params.push_back((*ds.norm_params)[static_cast<std::size_t>(c)]);
    out.norm_params = std::move(params);
  }
  out.provenance = ds.provenance;
  out.provenance.push_back("impute_missing()");
  out.holdout_test = ds.holdout_test;
  return out;
}

std::vector<FeatureStats> compute_feature_stats(const FlowDataset& ds) {
  if (ds.rows() == 0) {
    throw std::runtime_error("compute_feature_stats: empty dataset");
  }
  const double n = static_cast<double>(ds.rows());
  double label_mean = 0.0;
  for (int y : ds.labels) label_mean += y;
  label_mean /= n;
  double label_var = 0.0;
  for (int y : ds.labels) label_var += (y - label_mean) * (y - label_mean);
  label_var /= n;

  std::vector<FeatureStats> stats;
  stats.reserve(static_cast<std::size_t>(ds.cols()));
  for (Eigen::Index c = 0; c < ds.cols(); ++c) {
    FeatureStats s;
    const auto col = ds.features.col(c);
    s.min = col.minCoeff();
    s.max = col.maxCoeff();
    s.mean = col.mean();
    double var = 0.0;
    double cov = 0.0;
    for (Eigen::Index r = 0; r < ds.rows(); ++r) {
      const double dx = ds.features(r, c) - s.mean;
      var += dx * dx;
      cov += dx * (ds.labels[static_cast<std::size_t>(r)] - label_mean);
    }
    s.variance = var / n;
    cov /= n;
    s.corr_with_label = (s.variance > 0.0 && label_var > 0.0)
                            ? cov / std::sqrt(s.variance * label_var)
                            : 0.0;
    stats.push_back(s);
  }
  return stats;
}

FlowDataset select_middle_correlation(const FlowDataset& ds,
                                      const std::vector<FeatureStats>& stats,
                                      double band_low, double band_high,
                                      std::optional<int> target_count) {
  if (!(band_low >= 0.0 && band_low < band_high && band_high <= 1.0)) {
    throw std::invalid_argument(
        "select_middle_correlation: need 0 <= band_low < band_high <= 1");
  }
  if (static_cast<Eigen::Index>(stats.size()) != ds.cols()) {
    throw std::invalid_argument(
        "select_middle_correlation: stats/feature count mismatch");
  }

  std::vector<Eigen::Index> in_band;
  for (Eigen::Index c = 0; c < ds.cols(); ++c) {
    const double a = std::abs(stats[static_cast<std::size_t>(c)].corr_with_label);
    if (a >= band_low && a <= band_high) in_band.push_back(c);
  }
  if (in_band.empty()) {
    throw std::runtime_error(
        "select_middle_correlation: band selects zero features");
  }

  if (target_count && static_cast<int>(in_band.size()) > *target_count) {
    const double midpoint = 0.5 * (band_low + band_high);
    std::vector<Eigen::Index> ranked = in_band;
    std::sort(ranked.begin(), ranked.end(),
              [&](Eigen::Index a, Eigen::Index b) {
                const double da = std::abs(
                    std::abs(stats[static_cast<std::size_t>(a)].corr_with_label) -
                    midpoint);
                const double db = std::abs(
                    std::abs(stats[static_cast<std::size_t>(b)].corr_with_label) -
                    midpoint);
                if (da != db) return da < db;
                return a < b;
              });
    ranked.resize(static_cast<std::size_t>(*target_count));
    std::sort(ranked.begin(), ranked.end());
    in_band = std::move(ranked);
  }

  FlowDataset out;
  out.features.resize(ds.rows(), static_cast<Eigen::Index>(in_band.size()));
  for (std::size_t k = 0; k < in_band.size(); ++k) {
    out.features.col(static_cast<Eigen::Index>(k)) = ds.features.col(in_band[k]);
    out.feature_names.push_back(
        ds.feature_names[static_cast<std::size_t>(in_band[k])]);
  }
  out.labels = ds.labels;
  if (ds.norm_params) {
    std::vector<NormParams> params;
    for (Eigen::Index c : in_band)
      params.push_back((*ds.norm_params)[static_cast<std::size_t>(c)]);
    out.norm_params = std::move(params);
  }
  out.provenance = ds.provenance;
  out.provenance.push_back(
      "select_middle_correlation(band_low=" + detail::format_double(band_low) +
      ",band_high=" + detail::format_double(band_high) + ",target_count=" +
      (target_count ? std::to_string(*target_count) : "none") + ")");
  out.holdout_test = ds.holdout_test;
  return out;
}

FlowDataset normalize_minmax(const FlowDataset& ds) {
  if (ds.rows() > 0 && ds.features.hasNaN()) {
    throw std::invalid_argument("normalize_minmax: dataset has missing cells");
  }
  FlowDataset out = ds;
  std::vector<NormParams> params;
  params.reserve(static_cast<std::size_t>(ds.cols()));
  for (Eigen::Index c = 0; c < ds.cols(); ++c) {
    NormParams p;
    if (ds.rows() > 0) {
      p.min = ds.features.col(c).minCoeff();
      p.max = ds.features.col(c).maxCoeff();
    }
    const double range = p.max - p.min;
    if (range > 0.0) {
      out.features.col(c) = (ds.features.col(c).array() - p.min) / range;
    } else {
      out.features.col(c).setZero();
    }
    params.push_back(p);
  }
  out.norm_params = std::move(params);
  out.provenance.push_back("normalize_minmax()");
  return out;
}

FlowDataset apply_norm_params(const FlowDataset& ds,
                              const std::vector<NormParams>& params) {
  if (static_cast<Eigen::Index>(params.size()) != ds.cols()) {
    throw std::invalid_argument("apply_norm_params: params/feature mismatch");
  }
  FlowDataset out = ds;
  for (Eigen::Index c = 0; c < ds.cols(); ++c) {
    const auto& p = params[static_cast<std::size_t>(c)];
    const double range = p.max - p.min;
    if (range > 0.0) {
      out.features.col(c) = (ds.features.col(c).array() - p.min) / range;
    } else {
      out.features.col(c).setZero();
    }
  }
  out.norm_params = params;
  out.provenance.push_back("apply_norm_params()");
  return out;
}

FlowDataset balance_downsample(const FlowDataset& ds, std::uint64_t seed) {
  auto idx0 = label_indices(ds, 0);
  auto idx1 = label_indices(ds, 1);
  if (idx0.empty() || idx1.empty()) {
    throw std::runtime_error("balance_downsample: a class has zero rows");
  }
  auto& majority = idx0.size() >= idx1.size() ? idx0 : idx1;
  const auto& minority = idx0.size() >= idx1.size() ? idx1 : idx0;

  Rng rng(seed);
  rng.shuffle(majority);
  majority.resize(minority.size());

  std::vector<Eigen::Index> rows = minority;
  rows.insert(rows.end(), majority.begin(), majority.end());
  rng.shuffle(rows);

  FlowDataset out = take_rows(ds, rows);
  out.provenance.push_back("balance_downsample(seed=" + std::to_string(seed) +
                           ")");
  return out;
}

std::pair<FlowDataset, FlowDataset> split(const FlowDataset& ds,
                                          const SplitSpec& spec) {
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0)) {
    throw std::invalid_argument("split: test_fraction must be in (0,1)");
  }

  Rng rng(spec.seed);
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;

  auto carve = [&](std::vector<Eigen::Index> idx, const std::string& what) {
    const auto n = idx.size();
    const auto n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * spec.test_fraction));
    if (n_test == 0 || n_test >= n) {
      throw std::runtime_error("split: test_fraction " +
                               detail::format_double(spec.test_fraction) +
                               " empties a side for " + what);
    }
    rng.shuffle(idx);
    test_rows.insert(test_rows.end(), idx.begin(), idx.begin() + n_test);
    train_rows.insert(train_rows.end(), idx.begin() + n_test, idx.end());
  };

  if (spec.stratified) {
    const auto idx0 = label_indices(ds, 0);
    const auto idx1 = label_indices(ds, 1);
    if (idx0.size() < 2 || idx1.size() < 2) {
      throw std::runtime_error(
          "split: stratified split needs >= 2 rows per class");
    }
    carve(idx0, "class 0");
    carve(idx1, "class 1");
  } else {
    std::vector<Eigen::Index> all(static_cast<std::size_t>(ds.rows()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    carve(std::move(all), "the dataset");
  }

  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());

  const std::string stamp =
      "split(test_fraction=" + detail::format_double(spec.test_fraction) +
      ",seed=" + std::to_string(spec.seed) +
      ",stratified=" + (spec.stratified ? "true" : "false") + ")";

  FlowDataset train = take_rows(ds, train_rows);
  train.provenance.push_back(stamp + ":train");
  FlowDataset test = take_rows(ds, test_rows);
  test.provenance.push_back(stamp + ":test");
  test.holdout_test = true;
  return {std::move(train), std::move(test)};
}

FlowDataset concat(const FlowDataset& a, const FlowDataset& b) {
  if (a.feature_names != b.feature_names) {
    throw std::invalid_argument("concat: feature names differ");
  }
  FlowDataset out;
  out.features.resize(a.rows() + b.rows(), a.cols());
  out.features.topRows(a.rows()) = a.features;
  out.features.bottomRows(b.rows()) = b.features;
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.feature_names = a.feature_names;
  out.norm_params = a.norm_params ? a.norm_params : b.norm_params;
  out.provenance = a.provenance;
  out.provenance.insert(out.provenance.end(), b.provenance.begin(),
                        b.provenance.end());
  out.provenance.push_back("concat()");
  out.holdout_test = a.holdout_test || b.holdout_test;
  return out;
}

FlowDataset shuffle_rows(const FlowDataset& ds, std::uint64_t seed) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(ds.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  Rng rng(seed);
  rng.shuffle(rows);
  FlowDataset out = take_rows(ds, rows);
  out.provenance.push_back("shuffle_rows(seed=" + std::to_string(seed) + ")");
  return out;
}

void ensure_trainable(const FlowDataset& ds, const std::string& caller) {
  if (ds.holdout_test) {
    throw std::logic_error(caller +
                           ": refusing to train on held-out test data");
  }
}

}  // namespace trafficsynth
