#include "trafficsynth/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "internal_util.hpp"
#include "trafficsynth/rng.hpp"

namespace trafficsynth {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Sub-seed streams derived from the top-level experiment seed.
enum SeedStream : std::uint64_t {
  kSplitStream = 1,
  kDownsampleStream = 2,
  kSmoteStream = 3,
  kVaeStream = 4,
  kGanStream = 5,
  kForestStream = 6,
  kBoostStream = 7,
  kMiaStream = 8,
  kGenerationStream = 9,
  kShuffleStream = 10,
  kDeskStream = 11,
};

void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                  const std::string& context) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const bool known =
        std::any_of(allowed.begin(), allowed.end(),
                    [&](const char* k) { return it.key() == k; });
    if (!known) {
      throw ConfigError("unknown key '" + it.key() + "' in " + context);
    }
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  return obj.at(key).get<T>();
}

std::uint64_t seed_or(const json& obj, const char* key, std::uint64_t seed,
                      std::uint64_t stream) {
  if (obj.contains(key) && !obj.at(key).is_null()) {
    return obj.at(key).get<std::uint64_t>();
  }
  return derive_seed(seed, stream);
}

double elapsed_bytes_per_row(const DenseNet& net) {
  double units = 0.0;
  for (const auto& layer : net.layers) {
    units += static_cast<double>(layer.weights.cols() + layer.weights.rows());
  }
  return units * sizeof(double);
}

std::size_t tape_bytes(const DenseNet& net, int batch) {
  return static_cast<std::size_t>(elapsed_bytes_per_row(net) * batch);
}

std::size_t net_train_bytes(const DenseNet& net) {
  // parameters + gradients + two Adam moment sets
  return 4 * net.param_bytes();
}

std::string data_type_label(DataConfig dc, const std::string& generator) {
  switch (dc) {
    case DataConfig::RealOnly:
      return "real";
    case DataConfig::SyntheticOnly:
      return "synthetic_" + generator;
    case DataConfig::Combined:
      return "combined_" + generator;
  }
  return "real";
}

std::string csv_escape(const std::string& s) { return s; }  // names are plain

const std::vector<std::string> kKnownGenerators = {"smote", "vae", "gan"};
const std::vector<std::string> kKnownClassifiers = {"random_forest",
                                                    "boosted_trees"};

void validate_config(const ExperimentConfig& c) {
  if (c.input_csv.empty() == !c.desk.has_value()) {
    throw ConfigError(
        "config must set exactly one of input.csv or input.desk");
  }
  if (!(c.preprocess.test_fraction > 0.0 && c.preprocess.test_fraction < 1.0)) {
    throw ConfigError("preprocess.test_fraction must lie strictly in (0,1)");
  }
  if (!(c.preprocess.band_low >= 0.0 &&
        c.preprocess.band_low < c.preprocess.band_high &&
        c.preprocess.band_high <= 1.0)) {
    throw ConfigError("preprocess band must satisfy 0 <= low < high <= 1");
  }
  for (const auto& g : c.generators) {
    if (std::find(kKnownGenerators.begin(), kKnownGenerators.end(), g) ==
        kKnownGenerators.end()) {
      throw ConfigError("unknown generator '" + g + "'");
    }
  }
  for (const auto& m : c.classifiers) {
    if (std::find(kKnownClassifiers.begin(), kKnownClassifiers.end(), m) ==
        kKnownClassifiers.end()) {
      throw ConfigError("unknown classifier '" + m + "'");
    }
  }
  if (c.classifiers.empty()) throw ConfigError("no classifiers configured");
  if (c.data_configs.empty()) throw ConfigError("no data configurations");
  if (c.evaluation.bins < 2) throw ConfigError("evaluation.bins must be >= 2");
  if (c.evaluation.bootstrap_resamples < 100) {
    throw ConfigError("evaluation.bootstrap_resamples must be >= 100");
  }
  if (c.combined_ratio <= 0.0) {
    throw ConfigError("combined_ratio must be positive");
  }
  const bool wants_synth =
      std::any_of(c.data_configs.begin(), c.data_configs.end(),
                  [](DataConfig dc) { return dc != DataConfig::RealOnly; });
  if (wants_synth && c.generators.empty()) {
    throw ConfigError(
        "synthetic_only/combined configurations need at least one generator");
  }
}

}  // namespace

const char* data_config_name(DataConfig c) {
  switch (c) {
    case DataConfig::RealOnly:
      return "real_only";
    case DataConfig::SyntheticOnly:
      return "synthetic_only";
    case DataConfig::Combined:
      return "combined";
  }
  return "real_only";
}

DataConfig data_config_from_name(const std::string& name) {
  if (name == "real_only") return DataConfig::RealOnly;
  if (name == "synthetic_only") return DataConfig::SyntheticOnly;
  if (name == "combined") return DataConfig::Combined;
  throw ConfigError("unknown data configuration '" + name + "'");
}

std::string CellOutcome::tag() const {
  std::string t = classifier + "_" + data_config_name(data_config);
  if (!generator.empty()) t += "_" + generator;
  return t;
}

void reseed_config(ExperimentConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.preprocess.split_seed = derive_seed(seed, kSplitStream);
  c.preprocess.downsample_seed = derive_seed(seed, kDownsampleStream);
  c.smote.seed = derive_seed(seed, kSmoteStream);
  c.vae.seed = derive_seed(seed, kVaeStream);
  c.gan.seed = derive_seed(seed, kGanStream);
  c.forest.seed = derive_seed(seed, kForestStream);
  c.boost.seed = derive_seed(seed, kBoostStream);
  c.evaluation.mia_seed = derive_seed(seed, kMiaStream);
  c.evaluation.generation_seed = derive_seed(seed, kGenerationStream);
  c.evaluation.shuffle_seed = derive_seed(seed, kShuffleStream);
  if (c.desk) c.desk->seed = derive_seed(seed, kDeskStream);
}

ExperimentConfig config_from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be an object");

  require_keys(j,
               {"schema_version", "seed", "output_dir", "input", "preprocess",
                "generators", "classifiers", "data_configs", "smote", "vae",
                "gan", "forest", "boost", "evaluation", "combined_ratio"},
               "config root");
  if (get_or<int>(j, "schema_version", -1) != 1) {
    throw ConfigError("config schema_version must be 1");
  }

  ExperimentConfig c;
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.output_dir = get_or<std::string>(j, "output_dir", "out");

  if (j.contains("input")) {
    const auto& in = j.at("input");
    require_keys(in, {"csv", "label_column", "desk"}, "input");
    c.input_csv = get_or<std::string>(in, "csv", "");
    c.label_column = get_or<std::string>(in, "label_column", "label");
    if (in.contains("desk") && !in.at("desk").is_null()) {
      const auto& dj = in.at("desk");
      require_keys(dj, {"n_per_class", "n_features", "class_separation", "seed"},
                   "input.desk");
      DeskSpec desk;
      desk.n_per_class = get_or<int>(dj, "n_per_class", 2000);
      desk.n_features = get_or<int>(dj, "n_features", 26);
      desk.class_separation = get_or<double>(dj, "class_separation", 4.0);
      desk.seed = seed_or(dj, "seed", c.seed, kDeskStream);
      c.desk = desk;
    }
  }

  const json pj = j.contains("preprocess") ? j.at("preprocess") : json::object();
  require_keys(pj,
               {"band_low", "band_high", "target_count", "test_fraction",
                "stratified", "downsample_seed", "split_seed"},
               "preprocess");
  c.preprocess.band_low = get_or<double>(pj, "band_low", 0.05);
  c.preprocess.band_high = get_or<double>(pj, "band_high", 0.75);
  if (pj.contains("target_count") && pj.at("target_count").is_null()) {
    c.preprocess.target_count = std::nullopt;
  } else {
    c.preprocess.target_count = get_or<int>(pj, "target_count", 26);
  }
  c.preprocess.test_fraction = get_or<double>(pj, "test_fraction", 0.2);
  c.preprocess.stratified = get_or<bool>(pj, "stratified", true);
  c.preprocess.downsample_seed =
      seed_or(pj, "downsample_seed", c.seed, kDownsampleStream);
  c.preprocess.split_seed = seed_or(pj, "split_seed", c.seed, kSplitStream);

  c.generators = get_or<std::vector<std::string>>(j, "generators",
                                                  {"smote", "vae", "gan"});
  c.classifiers = get_or<std::vector<std::string>>(
      j, "classifiers", {"random_forest", "boosted_trees"});
  c.data_configs.clear();
  for (const auto& name : get_or<std::vector<std::string>>(
           j, "data_configs", {"real_only", "synthetic_only", "combined"})) {
    c.data_configs.push_back(data_config_from_name(name));
  }

  const json sj = j.contains("smote") ? j.at("smote") : json::object();
  require_keys(sj, {"k_neighbors", "seed"}, "smote");
  c.smote.k_neighbors = get_or<int>(sj, "k_neighbors", 5);
  c.smote.seed = seed_or(sj, "seed", c.seed, kSmoteStream);

  const json vj = j.contains("vae") ? j.at("vae") : json::object();
  require_keys(vj,
               {"epochs", "batch_size", "latent_dim", "hidden_sizes", "beta",
                "learning_rate", "seed"},
               "vae");
  c.vae.epochs = get_or<int>(vj, "epochs", 50);
  c.vae.batch_size = get_or<int>(vj, "batch_size", 128);
  c.vae.latent_dim = get_or<int>(vj, "latent_dim", 16);
  c.vae.hidden_sizes = get_or<std::vector<int>>(vj, "hidden_sizes", {64, 32});
  c.vae.beta = get_or<double>(vj, "beta", 1.0);
  c.vae.learning_rate = get_or<double>(vj, "learning_rate", 1e-3);
  c.vae.seed = seed_or(vj, "seed", c.seed, kVaeStream);

  const json gj = j.contains("gan") ? j.at("gan") : json::object();
  require_keys(gj,
               {"epochs", "batch_size", "noise_dim", "hidden_sizes",
                "learning_rate", "seed"},
               "gan");
  c.gan.epochs = get_or<int>(gj, "epochs", 100);
  c.gan.batch_size = get_or<int>(gj, "batch_size", 128);
  c.gan.noise_dim = get_or<int>(gj, "noise_dim", 32);
  c.gan.hidden_sizes = get_or<std::vector<int>>(gj, "hidden_sizes", {64, 64});
  c.gan.learning_rate = get_or<double>(gj, "learning_rate", 1e-3);
  c.gan.seed = seed_or(gj, "seed", c.seed, kGanStream);

  const json fj = j.contains("forest") ? j.at("forest") : json::object();
  require_keys(fj, {"n_trees", "max_depth", "features_per_split", "seed"},
               "forest");
  c.forest.n_trees = get_or<int>(fj, "n_trees", 100);
  c.forest.max_depth = get_or<int>(fj, "max_depth", 12);
  c.forest.features_per_split = get_or<int>(fj, "features_per_split", 0);
  c.forest.seed = seed_or(fj, "seed", c.seed, kForestStream);

  const json bj = j.contains("boost") ? j.at("boost") : json::object();
  require_keys(bj,
               {"n_rounds", "max_depth", "learning_rate", "lambda_reg", "seed"},
               "boost");
  c.boost.n_rounds = get_or<int>(bj, "n_rounds", 100);
  c.boost.max_depth = get_or<int>(bj, "max_depth", 6);
  c.boost.learning_rate = get_or<double>(bj, "learning_rate", 0.1);
  c.boost.lambda_reg = get_or<double>(bj, "lambda_reg", 1.0);
  c.boost.seed = seed_or(bj, "seed", c.seed, kBoostStream);

  const json ej = j.contains("evaluation") ? j.at("evaluation") : json::object();
  require_keys(ej,
               {"bins", "bootstrap_resamples", "mia_seed", "generation_seed",
                "shuffle_seed"},
               "evaluation");
  c.evaluation.bins = get_or<int>(ej, "bins", 50);
  c.evaluation.bootstrap_resamples = get_or<int>(ej, "bootstrap_resamples", 1000);
  c.evaluation.mia_seed = seed_or(ej, "mia_seed", c.seed, kMiaStream);
  c.evaluation.generation_seed =
      seed_or(ej, "generation_seed", c.seed, kGenerationStream);
  c.evaluation.shuffle_seed =
      seed_or(ej, "shuffle_seed", c.seed, kShuffleStream);

  c.combined_ratio = get_or<double>(j, "combined_ratio", 1.0);

  validate_config(c);
  return c;
}

ExperimentConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return config_from_json_string(text);
}

std::string config_to_json_string(const ExperimentConfig& c) {
  ordered_json j;
  j["schema_version"] = 1;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  ordered_json input;
  input["csv"] = c.input_csv;
  input["label_column"] = c.label_column;
  if (c.desk) {
    input["desk"] = {{"n_per_class", c.desk->n_per_class},
                     {"n_features", c.desk->n_features},
                     {"class_separation", c.desk->class_separation},
                     {"seed", c.desk->seed}};
  } else {
    input["desk"] = nullptr;
  }
  j["input"] = std::move(input);
  j["preprocess"] = {
      {"band_low", c.preprocess.band_low},
      {"band_high", c.preprocess.band_high},
      {"target_count", c.preprocess.target_count
                           ? ordered_json(*c.preprocess.target_count)
                           : ordered_json(nullptr)},
      {"test_fraction", c.preprocess.test_fraction},
      {"stratified", c.preprocess.stratified},
      {"downsample_seed", c.preprocess.downsample_seed},
      {"split_seed", c.preprocess.split_seed}};
  j["generators"] = c.generators;
  j["classifiers"] = c.classifiers;
  std::vector<std::string> dcs;
  for (DataConfig dc : c.data_configs) dcs.emplace_back(data_config_name(dc));
  j["data_configs"] = dcs;
  j["smote"] = {{"k_neighbors", c.smote.k_neighbors}, {"seed", c.smote.seed}};
  j["vae"] = {{"epochs", c.vae.epochs},
              {"batch_size", c.vae.batch_size},
              {"latent_dim", c.vae.latent_dim},
              {"hidden_sizes", c.vae.hidden_sizes},
              {"beta", c.vae.beta},
              {"learning_rate", c.vae.learning_rate},
              {"seed", c.vae.seed}};
  j["gan"] = {{"epochs", c.gan.epochs},
              {"batch_size", c.gan.batch_size},
              {"noise_dim", c.gan.noise_dim},
              {"hidden_sizes", c.gan.hidden_sizes},
              {"learning_rate", c.gan.learning_rate},
              {"seed", c.gan.seed}};
  j["forest"] = {{"n_trees", c.forest.n_trees},
                 {"max_depth", c.forest.max_depth},
                 {"features_per_split", c.forest.features_per_split},
                 {"seed", c.forest.seed}};
  j["boost"] = {{"n_rounds", c.boost.n_rounds},
                {"max_depth", c.boost.max_depth},
                {"learning_rate", c.boost.learning_rate},
                {"lambda_reg", c.boost.lambda_reg},
                {"seed", c.boost.seed}};
  j["evaluation"] = {{"bins", c.evaluation.bins},
                     {"bootstrap_resamples", c.evaluation.bootstrap_resamples},
                     {"mia_seed", c.evaluation.mia_seed},
                     {"generation_seed", c.evaluation.generation_seed},
                     {"shuffle_seed", c.evaluation.shuffle_seed}};
  j["combined_ratio"] = c.combined_ratio;
  return j.dump(2);
}

FlowDataset make_desk_dataset(int n_per_class, int n_features,
                              double class_separation, std::uint64_t seed) {
  if (n_features < 2) {
    throw std::invalid_argument("make_desk_dataset: need >= 2 features");
  }
  if (n_per_class < 1) {
    throw std::invalid_argument("make_desk_dataset: need >= 1 row per class");
  }
  if (class_separation < 0.0) {
    throw std::invalid_argument("make_desk_dataset: negative separation");
  }

  Rng rng(seed);
  Eigen::VectorXd direction(n_features);
  for (int f = 0; f < n_features; ++f) direction(f) = rng.normal();
  direction.normalize();

  Eigen::VectorXd sd(n_features);
  for (int f = 0; f < n_features; ++f) sd(f) = std::sqrt(rng.uniform(0.5, 1.5));

  FlowDataset ds;
  ds.features.resize(2 * n_per_class, n_features);
  for (int c = 0; c < 2; ++c) {
    const double sign = c == 0 ? -0.5 : 0.5;
    for (int i = 0; i < n_per_class; ++i) {
      const Eigen::Index r = static_cast<Eigen::Index>(c) * n_per_class + i;
      for (int f = 0; f < n_features; ++f) {
        ds.features(r, f) =
            sign * class_separation * direction(f) + sd(f) * rng.normal();
      }
      ds.labels.push_back(c);
    }
  }
  for (int f = 0; f < n_features; ++f) {
    ds.feature_names.push_back("f" + std::to_string(f));
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(ds.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  rng.shuffle(order);
  FlowDataset shuffled;
  shuffled.features.resize(ds.rows(), ds.cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    shuffled.features.row(static_cast<Eigen::Index>(i)) =
        ds.features.row(order[i]);
    shuffled.labels.push_back(ds.labels[static_cast<std::size_t>(order[i])]);
  }
  shuffled.feature_names = ds.feature_names;
  shuffled.provenance.push_back(
      "make_desk_dataset(n_per_class=" + std::to_string(n_per_class) +
      ",n_features=" + std::to_string(n_features) + ",class_separation=" +
      detail::format_double(class_separation) + ",seed=" +
      std::to_string(seed) + ")");
  return normalize_minmax(shuffled);
}

namespace {

struct GeneratedSet {
  GeneratorModel model;
  FlowDataset synth;  // the synthetic_only / audit set
};

GeneratedSet train_and_generate(const ExperimentConfig& config,
                                const std::shared_ptr<const FlowDataset>& train,
                                const std::string& method, std::size_t index,
                                GeneratorOutcome& outcome) {
  GeneratedSet out;
  outcome.method = method;

  const int batch =
      method == "vae" ? config.vae.batch_size : config.gan.batch_size;

  if (method == "smote") {
    outcome.train_cost = timing_and_memory([&] {
      out.model = SmoteModel{config.smote, train};
      // Shared source rows plus per-class neighbor bookkeeping built lazily
      // at generation time.
      return train->approx_bytes() + sizeof(SmoteModel);
    });
    outcome.log.loss_a_name = "";
    outcome.log.loss_b_name = "";
  } else if (method == "vae") {
    outcome.train_cost = timing_and_memory([&] {
      auto [model, log] = vae_train(*train, config.vae);
      const std::size_t bytes =
          train->approx_bytes() + net_train_bytes(model.encoder) +
          net_train_bytes(model.decoder) + tape_bytes(model.encoder, batch) +
          tape_bytes(model.decoder, batch) +
          static_cast<std::size_t>(batch) *
              static_cast<std::size_t>(2 * train->cols() +
                                       5 * config.vae.latent_dim) *
              sizeof(double);
      outcome.log = std::move(log);
      out.model = std::move(model);
      return bytes;
    });
  } else {
    outcome.train_cost = timing_and_memory([&] {
      auto [model, log] = gan_train(*train, config.gan);
      const std::size_t bytes =
          train->approx_bytes() + net_train_bytes(model.generator) +
          net_train_bytes(model.discriminator) +
          tape_bytes(model.generator, batch) +
          3 * tape_bytes(model.discriminator, batch) +
          static_cast<std::size_t>(batch) *
              static_cast<std::size_t>(2 * (config.gan.noise_dim + 1) +
                                       2 * train->cols()) *
              sizeof(double);
      outcome.log = std::move(log);
      out.model = std::move(model);
      return bytes;
    });
  }

  // Balanced synthetic set sized like the real training split.
  const long half = static_cast<long>(train->rows()) / 2;
  const auto seed0 =
      derive_seed(config.evaluation.generation_seed, 2 * index);
  const auto seed1 =
      derive_seed(config.evaluation.generation_seed, 2 * index + 1);
  const auto timed0 = generation_timing(out.model, 0, static_cast<int>(half), seed0);
  const auto timed1 = generation_timing(out.model, 1, static_cast<int>(half), seed1);
  outcome.generation_seconds = timed0.seconds + timed1.seconds;
  out.synth = concat(timed0.data, timed1.data);
  outcome.synthetic_rows = out.synth.rows();
  outcome.synthetic_balance = class_balance(out.synth);
  return out;
}

EnsembleModel train_classifier(const ExperimentConfig& config,
                               const std::string& name,
                               const FlowDataset& data) {
  if (name == "random_forest") return rf_train(data, config.forest);
  return gbt_train(data, config.boost);
}

void assign_balance_scores(std::vector<GeneratorOutcome>& generators) {
  // Non-normative summary: severe leakage is "Unbalanced"; among the
  // remaining methods the one with the worst (highest) mean JS drops to
  // "Moderate" and the rest are "EXCELLENT".
  double worst_js = -1.0;
  for (const auto& g : generators) {
    if (g.mia.verdict == Verdict::AtSevereRisk) continue;
    worst_js = std::max(worst_js, g.fidelity.mean_js);
  }
  long safe_count = 0;
  for (const auto& g : generators) {
    if (g.mia.verdict != Verdict::AtSevereRisk) ++safe_count;
  }
  for (auto& g : generators) {
    if (g.mia.verdict == Verdict::AtSevereRisk) {
      g.balance_score = "Unbalanced";
    } else if (g.mia.verdict == Verdict::AtRisk) {
      g.balance_score = "Moderate";
    } else if (safe_count > 1 && g.fidelity.mean_js == worst_js) {
      g.balance_score = "Moderate";
    } else {
      g.balance_score = "EXCELLENT";
    }
  }
}

}  // namespace

TradeoffReport run_experiment(const ExperimentConfig& config) {
  TradeoffReport report;
  report.config = config;
  std::string stage = "load";
  try {
    validate_config(config);

    FlowDataset raw =
        config.desk
            ? make_desk_dataset(config.desk->n_per_class,
                                config.desk->n_features,
                                config.desk->class_separation, config.desk->seed)
            : load_csv(config.input_csv, config.label_column);

    stage = "preprocess";
    FlowDataset clean = impute_missing(remove_duplicates(raw));
    const auto stats = compute_feature_stats(clean);
    FlowDataset selected = select_middle_correlation(
        clean, stats, config.preprocess.band_low, config.preprocess.band_high,
        config.preprocess.target_count);
    FlowDataset normalized = normalize_minmax(selected);
    FlowDataset balanced =
        balance_downsample(normalized, config.preprocess.downsample_seed);
    auto [train_ds, test_ds] =
        split(balanced, {config.preprocess.test_fraction,
                         config.preprocess.split_seed,
                         config.preprocess.stratified});
    const auto train = std::make_shared<const FlowDataset>(std::move(train_ds));
    const FlowDataset test = std::move(test_ds);

    report.train_rows = train->rows();
    report.test_rows = test.rows();
    report.feature_count = train->cols();
    report.train_balance = class_balance(*train);

    const bool wants_synth =
        std::any_of(config.data_configs.begin(), config.data_configs.end(),
                    [](DataConfig dc) { return dc != DataConfig::RealOnly; });

    std::vector<GeneratedSet> generated;
    if (wants_synth && !config.generators.empty()) {
      stage = "generate";
      for (std::size_t m = 0; m < config.generators.size(); ++m) {
        GeneratorOutcome outcome;
        generated.push_back(train_and_generate(config, train,
                                               config.generators[m], m,
                                               outcome));
        stage = "evaluate";
        outcome.fidelity =
            js_divergence(*train, generated.back().synth, config.evaluation.bins);
        outcome.mia = mia_evaluate(*train, test, generated.back().synth,
                                   config.evaluation.bootstrap_resamples,
                                   derive_seed(config.evaluation.mia_seed, m));
        report.generators.push_back(std::move(outcome));
        stage = "generate";
      }
      assign_balance_scores(report.generators);
    }

    stage = "train";
    for (DataConfig dc : config.data_configs) {
      std::vector<std::string> cell_generators;
      if (dc == DataConfig::RealOnly) {
        cell_generators.push_back("");
      } else {
        cell_generators = config.generators;
      }
      for (std::size_t m = 0; m < cell_generators.size(); ++m) {
        // Training sets are assembled once per (data config, generator).
        FlowDataset assembled;
        if (dc == DataConfig::RealOnly) {
          assembled = *train;
        } else {
          const auto& synth = generated[m].synth;
          const auto shuffle_seed = derive_seed(
              config.evaluation.shuffle_seed,
              2 * m + (dc == DataConfig::Combined ? 1 : 0));
          if (dc == DataConfig::SyntheticOnly) {
            assembled = shuffle_rows(synth, shuffle_seed);
          } else {
            FlowDataset portion = synth;
            const long want = std::lround(config.combined_ratio *
                                          static_cast<double>(train->rows()));
            if (want < synth.rows()) {
              FlowDataset cut;
              cut.features = portion.features.topRows(want);
              cut.labels.assign(portion.labels.begin(),
                                portion.labels.begin() + want);
              cut.feature_names = portion.feature_names;
              cut.norm_params = portion.norm_params;
              cut.provenance = portion.provenance;
              portion = std::move(cut);
            }
            assembled = shuffle_rows(concat(*train, portion), shuffle_seed);
          }
        }

        for (const auto& classifier : config.classifiers) {
          stage = "train";
          ensure_trainable(assembled, "run_experiment");
          CellOutcome cell;
          cell.classifier = classifier;
          cell.data_config = dc;
          cell.generator = cell_generators[m];
          cell.train_rows = assembled.rows();
          cell.train_balance = class_balance(assembled);

          EnsembleModel model;
          cell.train_cost = timing_and_memory([&] {
            model = train_classifier(config, classifier, assembled);
            return assembled.approx_bytes() + model_bytes(model) +
                   static_cast<std::size_t>(assembled.rows()) * 24;
          });

          stage = "evaluate";
          const auto probs = predict_proba(model, test.features);
          std::vector<int> preds;
          preds.reserve(probs.size());
          for (double p : probs) preds.push_back(p >= 0.5 ? 1 : 0);
          cell.confusion = confusion(test.labels, preds);
          cell.report = report_from_confusion(cell.confusion);
          cell.roc = roc_auc(test.labels, probs);
          report.cells.push_back(std::move(cell));
        }
      }
    }
  } catch (const std::exception& e) {
    report.failed = true;
    report.failed_stage = stage;
    report.error = e.what();
  }
  return report;
}

namespace {

ordered_json report_json(const ClassificationReport& r) {
  return {{"accuracy", r.accuracy},
          {"class0",
           {{"precision", r.class0.precision},
            {"recall", r.class0.recall},
            {"f1", r.class0.f1},
            {"support", r.class0.support}}},
          {"class1",
           {{"precision", r.class1.precision},
            {"recall", r.class1.recall},
            {"f1", r.class1.f1},
            {"support", r.class1.support}}},
          {"macro_precision", r.macro_precision},
          {"macro_recall", r.macro_recall},
          {"macro_f1", r.macro_f1}};
}

ordered_json mia_json(const MiaResult& m, const std::string& method) {
  ordered_json j;
  j["method"] = method;
  j["mia_auc"] = m.auc;
  j["ci_low"] = m.ci_low;
  j["ci_high"] = m.ci_high;
  j["attack_accuracy"] = m.attack_accuracy;
  j["attack_precision"] = m.attack_precision;
  j["attack_recall"] = m.attack_recall;
  j["verdict"] = verdict_name(m.verdict);
  j["threshold"] = m.threshold;
  j["n_members"] = m.n_members;
  j["n_nonmembers"] = m.n_nonmembers;
  j["bootstrap_resamples"] = m.bootstrap_resamples;
  j["seed"] = m.seed;
  return j;
}

ordered_json log_json(const TrainLog& log) {
  ordered_json epochs = ordered_json::array();
  for (const auto& e : log.epochs) {
    epochs.push_back({e.loss_a, e.loss_b, e.seconds});
  }
  return {{"loss_a_name", log.loss_a_name},
          {"loss_b_name", log.loss_b_name},
          {"epochs", std::move(epochs)}};
}

}  // namespace

std::string report_to_json_string(const TradeoffReport& report) {
  ordered_json j;
  j["schema_version"] = 1;
  j["status"] = report.failed ? "failed" : "ok";
  if (report.failed) {
    j["failed_stage"] = report.failed_stage;
    j["error"] = report.error;
  }
  j["config"] = json::parse(config_to_json_string(report.config));
  j["dataset"] = {{"train_rows", report.train_rows},
                  {"test_rows", report.test_rows},
                  {"features", report.feature_count},
                  {"train_balance", report.train_balance}};

  ordered_json gens = ordered_json::array();
  for (const auto& g : report.generators) {
    ordered_json gj;
    gj["method"] = g.method;
    gj["train_seconds"] = g.train_cost.seconds;
    gj["train_peak_bytes"] = g.train_cost.peak_bytes;
    gj["generation_seconds"] = g.generation_seconds;
    gj["synthetic_rows"] = g.synthetic_rows;
    gj["synthetic_balance"] = g.synthetic_balance;
    gj["balance_score"] = g.balance_score;
    gj["fidelity"] = {{"per_feature_js", g.fidelity.per_feature_js},
                      {"mean_js", g.fidelity.mean_js},
                      {"bins", g.fidelity.bins}};
    gj["mia"] = mia_json(g.mia, g.method);
    gj["train_log"] = log_json(g.log);
    gens.push_back(std::move(gj));
  }
  j["generators"] = std::move(gens);

  ordered_json cells = ordered_json::array();
  for (const auto& c : report.cells) {
    ordered_json cj;
    cj["tag"] = c.tag();
    cj["classifier"] = c.classifier;
    cj["data_config"] = data_config_name(c.data_config);
    cj["generator"] = c.generator.empty() ? ordered_json(nullptr)
                                          : ordered_json(c.generator);
    cj["train_rows"] = c.train_rows;
    cj["train_balance"] = c.train_balance;
    cj["train_seconds"] = c.train_cost.seconds;
    cj["train_peak_bytes"] = c.train_cost.peak_bytes;
    cj["auc"] = c.roc.auc;
    cj["report"] = report_json(c.report);
    cj["confusion"] = {{"tn", c.confusion.tn},
                       {"fp", c.confusion.fp},
                       {"fn", c.confusion.fn},
                       {"tp", c.confusion.tp}};
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  return j.dump(2);
}

void emit_report(const TradeoffReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw std::runtime_error("emit_report: cannot create '" + out_dir +
                             "': " + ec.message());
  }
  auto open = [&](const std::string& name) {
    std::ofstream out(fs::path(out_dir) / name);
    if (!out) {
      throw std::runtime_error("emit_report: cannot write '" + name + "' in '" +
                               out_dir + "'");
    }
    return out;
  };

  {
    auto out = open("report.json");
    out << report_to_json_string(report) << '\n';
  }

  const auto fd = [](double v) { return detail::format_double(v); };

  {
    auto out = open("table1.csv");
    out << "classifier,data_type,accuracy,precision,recall,f1_score\n";
    for (const auto& c : report.cells) {
      out << csv_escape(c.classifier) << ','
          << data_type_label(c.data_config, c.generator) << ','
          << fd(c.report.accuracy) << ',' << fd(c.report.macro_precision) << ','
          << fd(c.report.macro_recall) << ',' << fd(c.report.macro_f1) << '\n';
    }
  }

  {
    auto out = open("table2.csv");
    out << "method,mia_auc,ci_low,ci_high,verdict\n";
    for (const auto& g : report.generators) {
      out << g.method << ',' << fd(g.mia.auc) << ',' << fd(g.mia.ci_low) << ','
          << fd(g.mia.ci_high) << ',' << verdict_name(g.mia.verdict) << '\n';
    }
  }

  {
    auto out = open("table3.csv");
    out << "method,attack_accuracy,attack_precision,attack_recall\n";
    for (const auto& g : report.generators) {
      out << g.method << ',' << fd(g.mia.attack_accuracy) << ','
          << fd(g.mia.attack_precision) << ',' << fd(g.mia.attack_recall)
          << '\n';
    }
  }

  {
    auto out = open("table4.csv");
    out << "method,privacy_auc,accuracy,js_div,train_seconds,peak_bytes,"
           "generation_seconds,balance_score\n";
    for (const auto& g : report.generators) {
      // Utility column: first configured classifier, synthetic-only cell.
      std::string accuracy;
      for (const auto& c : report.cells) {
        if (c.data_config == DataConfig::SyntheticOnly &&
            c.generator == g.method &&
            c.classifier == report.config.classifiers.front()) {
          accuracy = fd(c.report.accuracy);
          break;
        }
      }
      out << g.method << ',' << fd(g.mia.auc) << ',' << accuracy << ','
          << fd(g.fidelity.mean_js) << ',' << fd(g.train_cost.seconds) << ','
          << g.train_cost.peak_bytes << ',' << fd(g.generation_seconds) << ','
          << g.balance_score << '\n';
    }
  }

  for (const auto& c : report.cells) {
    write_roc_csv(c.roc, (fs::path(out_dir) / ("roc_" + c.tag() + ".csv")).string());
    {
      auto out = open("confusion_" + c.tag() + ".csv");
      out << "true_label,pred_0,pred_1\n";
      out << "0," << c.confusion.tn << ',' << c.confusion.fp << '\n';
      out << "1," << c.confusion.fn << ',' << c.confusion.tp << '\n';
    }
    {
      auto out = open("balance_" + c.tag() + ".csv");
      out << "label,fraction\n";
      out << "0," << fd(c.train_balance[0]) << '\n';
      out << "1," << fd(c.train_balance[1]) << '\n';
    }
  }

  {
    auto out = open("report.md");
    out << "# Privacy-utility trade-off report\n\n";
    if (report.failed) {
      out << "**Status: FAILED** at stage `" << report.failed_stage
          << "`: " << report.error << "\n\n";
    }
    out << "Dataset: " << report.train_rows << " train / " << report.test_rows
        << " test rows, " << report.feature_count << " features. "
        << "Train balance: " << fd(report.train_balance[0]) << " / "
        << fd(report.train_balance[1]) << ".\n\n";

    out << "## Classifier performance\n\n";
    out << "| Classifier | Data type | Accuracy | Precision | Recall | F1 "
           "|\n|---|---|---|---|---|---|\n";
    for (const auto& c : report.cells) {
      out << "| " << c.classifier << " | "
          << data_type_label(c.data_config, c.generator) << " | "
          << fd(c.report.accuracy) << " | " << fd(c.report.macro_precision)
          << " | " << fd(c.report.macro_recall) << " | "
          << fd(c.report.macro_f1) << " |\n";
    }

    if (!report.generators.empty()) {
      out << "\n## Privacy evaluation\n\n";
      out << "| Method | MIA AUC | 95% CI | Verdict |\n|---|---|---|---|\n";
      for (const auto& g : report.generators) {
        out << "| " << g.method << " | " << fd(g.mia.auc) << " | ["
            << fd(g.mia.ci_low) << ", " << fd(g.mia.ci_high) << "] | "
            << verdict_name(g.mia.verdict) << " |\n";
      }

      out << "\n## Attack performance\n\n";
      out << "| Method | Accuracy | Precision | Recall |\n|---|---|---|---|\n";
      for (const auto& g : report.generators) {
        out << "| " << g.method << " | " << fd(g.mia.attack_accuracy) << " | "
            << fd(g.mia.attack_precision) << " | " << fd(g.mia.attack_recall)
            << " |\n";
      }

      out << "\n## Trade-off summary\n\n";
      out << "| Method | Privacy (MIA AUC) | JS divergence | Train s | Peak "
             "bytes | Generation s | Balance score |\n"
             "|---|---|---|---|---|---|---|\n";
      for (const auto& g : report.generators) {
        out << "| " << g.method << " | " << fd(g.mia.auc) << " | "
            << fd(g.fidelity.mean_js) << " | " << fd(g.train_cost.seconds)
            << " | " << g.train_cost.peak_bytes << " | "
            << fd(g.generation_seconds) << " | " << g.balance_score << " |\n";
      }
      out << "\nBalance score is a non-normative heuristic: severe leakage "
             "is Unbalanced, the worst-fidelity protected method is "
             "Moderate, remaining protected methods are EXCELLENT.\n";
    }
  }
}

}  // namespace trafficsynth
