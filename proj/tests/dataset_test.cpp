#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "trafficsynth/dataset.hpp"

using namespace trafficsynth;

namespace {

std::string write_temp_csv(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << body;
  return path.string();
}

FlowDataset make_ds(std::initializer_list<std::initializer_list<double>> rows,
                    std::initializer_list<int> labels) {
  FlowDataset ds;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.begin()->size());
  ds.features.resize(n, d);
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) ds.features(r, c++) = v;
    ++r;
  }
  ds.labels = labels;
  for (Eigen::Index c = 0; c < d; ++c)
    ds.feature_names.push_back("f" + std::to_string(c));
  return ds;
}

}  // namespace

TEST_CASE("load_csv maps columns and labels") {
  const auto path = write_temp_csv("load_basic.csv",
                                   "a,b,label\n"
                                   "1,2,0\n"
                                   "3,4,1\n"
                                   "5,6,0\n");
  const auto ds = load_csv(path, "label");
  CHECK(ds.rows() == 3);
  CHECK(ds.cols() == 2);
  CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(ds.features(1, 0) == 3.0);
  CHECK(ds.labels == std::vector<int>{0, 1, 0});
}

TEST_CASE("load_csv accepts label column in the middle") {
  const auto path = write_temp_csv("load_mid.csv",
                                   "a,label,b\n"
                                   "1,0,2\n");
  const auto ds = load_csv(path, "label");
  CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(ds.features(0, 1) == 2.0);
}

TEST_CASE("load_csv rejects a label value of 2, naming the row") {
  const auto path = write_temp_csv("load_badlabel.csv",
                                   "a,label\n"
                                   "1,0\n"
                                   "2,2\n");
  try {
    load_csv(path, "label");
    FAIL("expected CsvParseError");
  } catch (const CsvParseError& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("not 0 or 1") != std::string::npos);
  }
}

TEST_CASE("load_csv rejects junk cells, naming row and column") {
  const auto path = write_temp_csv("load_junk.csv",
                                   "a,b,label\n"
                                   "1,potato,0\n");
  try {
    load_csv(path, "label");
    FAIL("expected CsvParseError");
  } catch (const CsvParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == "b");
  }
}

TEST_CASE("load_csv errors: missing file, missing label column") {
  CHECK_THROWS_AS(load_csv("/nonexistent/x.csv", "label"), std::runtime_error);
  const auto path = write_temp_csv("load_nolabel.csv", "a,b\n1,2\n");
  CHECK_THROWS_WITH_AS(load_csv(path, "label"),
                       doctest::Contains("label column"), std::runtime_error);
}

TEST_CASE("load_csv sentinels become missing cells") {
  const auto path = write_temp_csv("load_missing.csv",
                                   "a,b,label\n"
                                   ",NaN,0\n"
                                   "1,nan,1\n");
  const auto ds = load_csv(path, "label");
  CHECK(std::isnan(ds.features(0, 0)));
  CHECK(std::isnan(ds.features(0, 1)));
  CHECK(std::isnan(ds.features(1, 1)));
  CHECK(ds.features(1, 0) == 1.0);
}

TEST_CASE("csv round-trips through write_csv/load_csv") {
  auto ds = make_ds({{0.1, 2.5e-7}, {3.25, -4.0}}, {0, 1});
  const auto path =
      (std::filesystem::temp_directory_path() / "roundtrip.csv").string();
  write_csv(ds, path);
  const auto back = load_csv(path, "label");
  CHECK(back.features == ds.features);
  CHECK(back.labels == ds.labels);
  CHECK(back.feature_names == ds.feature_names);
}

TEST_CASE("sidecar round-trips metadata") {
  auto ds = make_ds({{0.0, 1.0}, {1.0, 0.0}}, {0, 1});
  ds = normalize_minmax(ds);
  const auto dir = std::filesystem::temp_directory_path();
  write_csv(ds, (dir / "sc.csv").string());
  write_sidecar(ds, (dir / "sc.meta.json").string());
  const auto back =
      load_dataset((dir / "sc.csv").string(), (dir / "sc.meta.json").string());
  REQUIRE(back.norm_params.has_value());
  CHECK((*back.norm_params)[0].min == 0.0);
  CHECK((*back.norm_params)[0].max == 1.0);
  CHECK(back.provenance == ds.provenance);
  CHECK(back.holdout_test == ds.holdout_test);
}

TEST_CASE("remove_duplicates keeps first occurrence, preserves order") {
  const auto ds = make_ds({{1, 1}, {1, 1}, {2, 2}}, {0, 0, 1});
  const auto out = remove_duplicates(ds);
  CHECK(out.rows() == 2);
  CHECK(out.features(0, 0) == 1.0);
  CHECK(out.features(1, 0) == 2.0);
}

TEST_CASE("remove_duplicates is identity without duplicates and idempotent") {
  const auto ds = make_ds({{1, 2}, {3, 4}}, {0, 1});
  const auto once = remove_duplicates(ds);
  CHECK(once.features == ds.features);
  const auto twice = remove_duplicates(once);
  CHECK(twice.features == once.features);
  CHECK(twice.labels == once.labels);
}

TEST_CASE("remove_duplicates keys on (features, label) pairs") {
  // Same features, different labels: both stay. Oracle: enumerate pairs
  // under the (features, label) key.
  const auto ds = make_ds({{5, 5}, {5, 5}, {5, 5}}, {0, 1, 0});
  const auto out = remove_duplicates(ds);
  CHECK(out.rows() == 2);
  CHECK(out.labels == std::vector<int>{0, 1});
}

TEST_CASE("impute_missing fills the column median") {
  auto ds = make_ds({{1.0}, {0.0}, {3.0}}, {0, 1, 0});
  ds.features(1, 0) = std::nan("");
  const auto out = impute_missing(ds);
  CHECK(out.features(1, 0) == 2.0);  // median of {1,3}
  CHECK(out.features(0, 0) == 1.0);
}

TEST_CASE("impute_missing identity without missing cells") {
  const auto ds = make_ds({{1, 2}, {3, 4}}, {0, 1});
  const auto out = impute_missing(ds);
  CHECK(out.features == ds.features);
  CHECK(out.feature_names == ds.feature_names);
}

TEST_CASE("impute_missing drops an all-missing column") {
  auto ds = make_ds({{1, 0}, {2, 0}}, {0, 1});
  ds.features(0, 1) = std::nan("");
  ds.features(1, 1) = std::nan("");
  const auto out = impute_missing(ds);
  CHECK(out.cols() == 1);
  CHECK(out.feature_names == std::vector<std::string>{"f0"});
}

TEST_CASE("compute_feature_stats: correlation cases") {
  // Feature equal to label.
  auto ds = make_ds({{0}, {0}, {1}, {1}}, {0, 0, 1, 1});
  auto stats = compute_feature_stats(ds);
  CHECK(stats[0].corr_with_label == doctest::Approx(1.0).epsilon(1e-12));

  // Constant feature: correlation 0 by the zero-variance rule.
  ds = make_ds({{7}, {7}, {7}, {7}}, {0, 0, 1, 1});
  stats = compute_feature_stats(ds);
  CHECK(stats[0].corr_with_label == 0.0);
  CHECK(stats[0].variance == 0.0);

  // Hand-computed Pearson: [1,2,3,4] vs [0,0,1,1] -> 0.4/sqrt(1.25*0.25).
  ds = make_ds({{1}, {2}, {3}, {4}}, {0, 0, 1, 1});
  stats = compute_feature_stats(ds);
  CHECK(stats[0].corr_with_label ==
        doctest::Approx(0.8944271909999159).epsilon(1e-12));
  CHECK(stats[0].min == 1.0);
  CHECK(stats[0].max == 4.0);
  CHECK(stats[0].mean == 2.5);
  CHECK(stats[0].variance == doctest::Approx(1.25));
}

TEST_CASE("compute_feature_stats rejects empty dataset") {
  FlowDataset ds;
  ds.features.resize(0, 2);
  ds.feature_names = {"a", "b"};
  CHECK_THROWS(compute_feature_stats(ds));
}

TEST_CASE("pearson of x against 2x+3 as paired series is 1") {
  const auto ds = make_ds({{1}, {2}, {3}, {5}, {9}}, {0, 0, 1, 1, 1});
  const auto x = ds.features.col(0);
  Eigen::VectorXd y = 2.0 * x.array() + 3.0;
  const double mx = x.mean(), my = y.mean();
  double cov = 0, vx = 0, vy = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    cov += (x(i) - mx) * (y(i) - my);
    vx += (x(i) - mx) * (x(i) - mx);
    vy += (y(i) - my) * (y(i) - my);
  }
  CHECK(cov / std::sqrt(vx * vy) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("select_middle_correlation band filtering") {
  const auto ds = make_ds({{0, 0, 0, 0, 0}, {1, 1, 1, 1, 1}}, {0, 1});
  std::vector<FeatureStats> stats(5);
  stats[0].corr_with_label = 0.0;
  stats[1].corr_with_label = -0.1;
  stats[2].corr_with_label = 0.4;
  stats[3].corr_with_label = -0.6;
  stats[4].corr_with_label = 0.9;

  SUBCASE("|corr| = 1 outside [0.05, 0.75] band") {
    auto s2 = stats;
    s2[4].corr_with_label = 1.0;
    const auto out = select_middle_correlation(ds, s2, 0.05, 0.75);
    CHECK(out.feature_names == std::vector<std::string>{"f1", "f2", "f3"});
  }

  SUBCASE("band [0,1] with no target keeps everything") {
    const auto out = select_middle_correlation(ds, stats, 0.0, 1.0);
    CHECK(out.cols() == 5);
  }

  SUBCASE("target_count keeps features closest to the band midpoint") {
    // Band [0.05, 0.75], midpoint 0.40: distances 0.3 (f1), 0.0 (f2),
    // 0.2 (f3); keep f2 and f3.
    const auto out = select_middle_correlation(ds, stats, 0.05, 0.75, 2);
    CHECK(out.feature_names == std::vector<std::string>{"f2", "f3"});
  }

  SUBCASE("empty band is an error") {
    CHECK_THROWS(select_middle_correlation(ds, stats, 0.95, 1.0));
  }

  SUBCASE("invalid band is rejected") {
    CHECK_THROWS_AS(select_middle_correlation(ds, stats, 0.5, 0.2),
                    std::invalid_argument);
  }
}

TEST_CASE("select_middle_correlation output is a subset, row-order invariant") {
  const auto ds =
      make_ds({{1, 9, 2}, {2, 8, 1}, {3, 7, 5}, {4, 6, 0}}, {0, 0, 1, 1});
  const auto stats = compute_feature_stats(ds);
  const auto a = select_middle_correlation(ds, stats, 0.0, 1.0, 2);
  for (const auto& name : a.feature_names) {
    CHECK(std::find(ds.feature_names.begin(), ds.feature_names.end(), name) !=
          ds.feature_names.end());
  }

  // Reverse the row order; the selected feature set must not change.
  FlowDataset rev;
  rev.features = ds.features.colwise().reverse().eval();
  rev.labels = {1, 1, 0, 0};
  rev.feature_names = ds.feature_names;
  const auto stats_rev = compute_feature_stats(rev);
  const auto b = select_middle_correlation(rev, stats_rev, 0.0, 1.0, 2);
  CHECK(a.feature_names == b.feature_names);
}

TEST_CASE("normalize_minmax maps ranges to [0,1]") {
  const auto ds = make_ds({{0}, {5}, {10}}, {0, 1, 0});
  const auto out = normalize_minmax(ds);
  CHECK(out.features(0, 0) == 0.0);
  CHECK(out.features(1, 0) == 0.5);
  CHECK(out.features(2, 0) == 1.0);
  REQUIRE(out.norm_params.has_value());
  CHECK((*out.norm_params)[0].min == 0.0);
  CHECK((*out.norm_params)[0].max == 10.0);
}

TEST_CASE("normalize_minmax maps constant columns to 0") {
  const auto ds = make_ds({{7}, {7}}, {0, 1});
  const auto out = normalize_minmax(ds);
  CHECK(out.features(0, 0) == 0.0);
  CHECK(out.features(1, 0) == 0.0);
}

TEST_CASE("normalize twice (refit) is identity to 1e-12") {
  const auto ds = make_ds({{1, -3}, {4, 2}, {2, 7}}, {0, 1, 0});
  const auto once = normalize_minmax(ds);
  const auto twice = normalize_minmax(once);
  CHECK((twice.features - once.features).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("apply_norm_params extrapolates without clipping") {
  const auto held = make_ds({{12}}, {0});
  const auto out = apply_norm_params(held, {{0.0, 10.0}});
  CHECK(out.features(0, 0) == doctest::Approx(1.2));
}

TEST_CASE("balance_downsample equalizes counts deterministically") {
  FlowDataset ds;
  const int n0 = 900, n1 = 100;
  ds.features.resize(n0 + n1, 1);
  for (int i = 0; i < n0 + n1; ++i) {
    ds.features(i, 0) = i;
    ds.labels.push_back(i < n0 ? 0 : 1);
  }
  ds.feature_names = {"f0"};
  const auto out = balance_downsample(ds, 17);
  CHECK(out.rows() == 200);
  CHECK(std::count(out.labels.begin(), out.labels.end(), 0) == 100);
  CHECK(std::count(out.labels.begin(), out.labels.end(), 1) == 100);

  const auto again = balance_downsample(ds, 17);
  CHECK(again.features == out.features);
  CHECK(again.labels == out.labels);
}

TEST_CASE("balance_downsample on balanced input keeps counts") {
  const auto ds = make_ds({{1}, {2}, {3}, {4}}, {0, 1, 0, 1});
  const auto out = balance_downsample(ds, 3);
  CHECK(out.rows() == 4);
  CHECK(std::count(out.labels.begin(), out.labels.end(), 0) == 2);
}

TEST_CASE("balance_downsample rejects single-class data") {
  const auto ds = make_ds({{1}, {2}}, {0, 0});
  CHECK_THROWS(balance_downsample(ds, 1));
}

TEST_CASE("stratified split preserves proportions and partitions rows") {
  FlowDataset ds;
  ds.features.resize(100, 1);
  for (int i = 0; i < 100; ++i) {
    ds.features(i, 0) = i;
    ds.labels.push_back(i % 2);
  }
  ds.feature_names = {"f0"};
  const auto [train, test] = split(ds, {.test_fraction = 0.2, .seed = 5});
  CHECK(train.rows() == 80);
  CHECK(test.rows() == 20);
  CHECK(std::count(test.labels.begin(), test.labels.end(), 0) == 10);
  CHECK(std::count(test.labels.begin(), test.labels.end(), 1) == 10);
  CHECK(test.holdout_test);
  CHECK_FALSE(train.holdout_test);

  // Disjoint and exhaustive on the identifying feature.
  std::vector<double> seen;
  for (Eigen::Index r = 0; r < train.rows(); ++r)
    seen.push_back(train.features(r, 0));
  for (Eigen::Index r = 0; r < test.rows(); ++r)
    seen.push_back(test.features(r, 0));
  std::sort(seen.begin(), seen.end());
  for (int i = 0; i < 100; ++i) CHECK(seen[static_cast<std::size_t>(i)] == i);

  // Determinism.
  const auto [train2, test2] = split(ds, {.test_fraction = 0.2, .seed = 5});
  CHECK(train2.features == train.features);
  CHECK(test2.features == test.features);
}

TEST_CASE("split per-class test counts are round(count * fraction) +- 1") {
  FlowDataset ds;
  ds.features.resize(73, 1);
  for (int i = 0; i < 73; ++i) {
    ds.features(i, 0) = i;
    ds.labels.push_back(i < 31 ? 0 : 1);
  }
  ds.feature_names = {"f0"};
  for (double frac : {0.1, 0.25, 0.33, 0.5}) {
    const auto [train, test] = split(ds, {.test_fraction = frac, .seed = 1});
    const long t0 = std::count(test.labels.begin(), test.labels.end(), 0);
    const long t1 = std::count(test.labels.begin(), test.labels.end(), 1);
    CHECK(std::abs(t0 - std::lround(31 * frac)) <= 1);
    CHECK(std::abs(t1 - std::lround(42 * frac)) <= 1);
  }
}

TEST_CASE("split rejects fractions that empty a side") {
  FlowDataset ds;
  ds.features.resize(10, 1);
  for (int i = 0; i < 10; ++i) {
    ds.features(i, 0) = i;
    ds.labels.push_back(i % 2);
  }
  ds.feature_names = {"f0"};
  CHECK_THROWS(split(ds, {.test_fraction = 0.999, .seed = 1}));
  CHECK_THROWS_AS(split(ds, {.test_fraction = 0.0, .seed = 1}),
                  std::invalid_argument);
}

TEST_CASE("concat merges rows and propagates the holdout tag") {
  const auto a = make_ds({{1, 2}}, {0});
  auto b = make_ds({{3, 4}}, {1});
  const auto ab = concat(a, b);
  CHECK(ab.rows() == 2);
  CHECK_FALSE(ab.holdout_test);
  b.holdout_test = true;
  CHECK(concat(a, b).holdout_test);
}

TEST_CASE("ensure_trainable guards the holdout tag") {
  auto ds = make_ds({{1}}, {0});
  CHECK_NOTHROW(ensure_trainable(ds, "test"));
  ds.holdout_test = true;
  CHECK_THROWS_AS(ensure_trainable(ds, "test"), std::logic_error);
}

TEST_CASE("validate catches broken invariants") {
  auto ds = make_ds({{1}}, {0});
  CHECK_NOTHROW(ds.validate());
  ds.labels = {2};
  CHECK_THROWS_AS(ds.validate(), std::logic_error);
  ds.labels = {0, 1};
  CHECK_THROWS_AS(ds.validate(), std::logic_error);
}
