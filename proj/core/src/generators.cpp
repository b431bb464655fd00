#include "trafficsynth/generators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "internal_json.hpp"
#include "trafficsynth/rng.hpp"

namespace trafficsynth {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr double kProbFloor = 1e-7;

double clamp_prob(double p) {
  return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

Matrix normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.normal();
  }
  return m;
}

void check_target_class(int target_class, const char* caller) {
  if (target_class != 0 && target_class != 1) {
    throw std::invalid_argument(std::string(caller) +
                                ": target_class must be 0 or 1");
  }
}

FlowDataset empty_like(const std::vector<std::string>& names,
                       const std::optional<std::vector<NormParams>>& params) {
  FlowDataset out;
  out.features.resize(0, static_cast<Eigen::Index>(names.size()));
  out.feature_names = names;
  out.norm_params = params;
  return out;
}

std::vector<Eigen::Index> class_rows(const FlowDataset& ds, int target) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    if (ds.labels[static_cast<std::size_t>(r)] == target) idx.push_back(r);
  }
  return idx;
}

// Mini-batch schedule: one seeded shuffle per epoch, contiguous slices,
// remainder kept as a short final batch.
struct BatchPlan {
  std::vector<Eigen::Index> order;
  int batch_size;

  template <typename Fn>
  void for_each_batch(Fn&& fn) const {
    const auto n = static_cast<Eigen::Index>(order.size());
    for (Eigen::Index start = 0; start < n; start += batch_size) {
      const auto len = std::min<Eigen::Index>(batch_size, n - start);
      fn(order.data() + start, len);
    }
  }
};

Matrix gather_rows(const Matrix& src, const Eigen::Index* rows,
                   Eigen::Index count) {
  Matrix out(count, src.cols());
  for (Eigen::Index i = 0; i < count; ++i) out.row(i) = src.row(rows[i]);
  return out;
}

Matrix gather_labels(const std::vector<int>& labels, const Eigen::Index* rows,
                     Eigen::Index count) {
  Matrix out(count, 1);
  for (Eigen::Index i = 0; i < count; ++i) {
    out(i, 0) = labels[static_cast<std::size_t>(rows[i])];
  }
  return out;
}

Matrix with_label_column(const Matrix& x, const Matrix& y) {
  Matrix out(x.rows(), x.cols() + 1);
  out.leftCols(x.cols()) = x;
  out.col(x.cols()) = y;
  return out;
}

nlohmann::ordered_json log_to_json(const TrainLog& log) {
  nlohmann::ordered_json j;
  j["loss_a_name"] = log.loss_a_name;
  j["loss_b_name"] = log.loss_b_name;
  auto epochs = nlohmann::ordered_json::array();
  for (const auto& e : log.epochs) epochs.push_back({e.loss_a, e.loss_b, e.seconds});
  j["epochs"] = std::move(epochs);
  return j;
}

TrainLog log_from_json(const nlohmann::json& j) {
  TrainLog log;
  log.loss_a_name = j.at("loss_a_name").get<std::string>();
  log.loss_b_name = j.at("loss_b_name").get<std::string>();
  for (const auto& e : j.at("epochs")) {
    log.epochs.push_back(
        {e.at(0).get<double>(), e.at(1).get<double>(), e.at(2).get<double>()});
  }
  return log;
}

nlohmann::ordered_json dataset_to_json(const FlowDataset& ds) {
  nlohmann::ordered_json j;
  j["feature_names"] = ds.feature_names;
  j["labels"] = ds.labels;
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(ds.features.size()));
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.cols(); ++c) flat.push_back(ds.features(r, c));
  }
  j["features"] = std::move(flat);
  if (ds.norm_params) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : *ds.norm_params) arr.push_back({p.min, p.max});
    j["norm_params"] = std::move(arr);
  } else {
    j["norm_params"] = nullptr;
  }
  return j;
}

FlowDataset dataset_from_json(const nlohmann::json& j) {
  FlowDataset ds;
  ds.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  ds.labels = j.at("labels").get<std::vector<int>>();
  const auto flat = j.at("features").get<std::vector<double>>();
  const auto n = static_cast<Eigen::Index>(ds.labels.size());
  const auto d = static_cast<Eigen::Index>(ds.feature_names.size());
  if (static_cast<Eigen::Index>(flat.size()) != n * d) {
    throw std::runtime_error("generator_from_json: source size mismatch");
  }
  ds.features.resize(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) {
      ds.features(r, c) = flat[static_cast<std::size_t>(r * d + c)];
    }
  }
  if (!j.at("norm_params").is_null()) {
    std::vector<NormParams> params;
    for (const auto& p : j.at("norm_params")) {
      params.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    ds.norm_params = std::move(params);
  }
  return ds;
}

std::optional<std::vector<NormParams>> norm_params_from_json(
    const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  std::vector<NormParams> params;
  for (const auto& p : j) {
    params.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  return params;
}

nlohmann::ordered_json norm_params_to_json(
    const std::optional<std::vector<NormParams>>& params) {
  if (!params) return nullptr;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : *params) arr.push_back({p.min, p.max});
  return arr;
}

}  // namespace

double TrainLog::total_seconds() const {
  double s = 0.0;
  for (const auto& e : epochs) s += e.seconds;
  return s;
}

Eigen::RowVectorXd smote_interpolate(
    const Eigen::Ref<const Eigen::RowVectorXd>& base,
    const Eigen::Ref<const Eigen::RowVectorXd>& neighbor, double lambda) {
  return base + lambda * (neighbor - base);
}

FlowDataset smote_generate(const FlowDataset& ds, int target_class,
                           int n_samples, const SmoteConfig& config) {
  ensure_trainable(ds, "smote_generate");
  check_target_class(target_class, "smote_generate");
  if (n_samples < 0) {
    throw std::invalid_argument("smote_generate: negative sample count");
  }

  const auto rows = class_rows(ds, target_class);
  const auto m = static_cast<Eigen::Index>(rows.size());
  if (config.k_neighbors < 1 ||
      static_cast<Eigen::Index>(config.k_neighbors) >= m) {
    throw std::runtime_error(
        "smote_generate: class " + std::to_string(target_class) + " has " +
        std::to_string(m) + " rows, need more than k_neighbors = " +
        std::to_string(config.k_neighbors));
  }

  // k nearest same-class neighbors per row, ties to the lower row position.
  const auto k = static_cast<std::size_t>(config.k_neighbors);
  std::vector<std::vector<Eigen::Index>> neighbors(
      static_cast<std::size_t>(m));
  std::vector<std::pair<double, Eigen::Index>> dist;
  for (Eigen::Index i = 0; i < m; ++i) {
    dist.clear();
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      const double d2 =
          (ds.features.row(rows[static_cast<std::size_t>(i)]) -
           ds.features.row(rows[static_cast<std::size_t>(j)]))
              .squaredNorm();
      dist.emplace_back(d2, j);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k),
                      dist.end());
    auto& nn = neighbors[static_cast<std::size_t>(i)];
    for (std::size_t t = 0; t < k; ++t) nn.push_back(dist[t].second);
  }

  Rng rng(config.seed);
  FlowDataset out = empty_like(ds.feature_names, ds.norm_params);
  out.features.resize(n_samples, ds.cols());
  for (int s = 0; s < n_samples; ++s) {
    const auto base = rng.uniform_index(static_cast<std::size_t>(m));
    const auto pick = rng.uniform_index(k);
    const double lambda = rng.uniform();
    const auto base_row = rows[base];
    const auto nn_row =
        rows[static_cast<std::size_t>(neighbors[base][pick])];
    out.features.row(s) = smote_interpolate(ds.features.row(base_row),
                                            ds.features.row(nn_row), lambda);
    out.labels.push_back(target_class);
  }
  out.provenance = ds.provenance;
  out.provenance.push_back(
      "smote_generate(target_class=" + std::to_string(target_class) +
      ",n_samples=" + std::to_string(n_samples) +
      ",k=" + std::to_string(config.k_neighbors) +
      ",seed=" + std::to_string(config.seed) + ")");
  return out;
}

double kl_per_dim(double mean, double logvar) {
  return 0.5 * (mean * mean + std::exp(logvar) - 1.0 - logvar);
}

double gaussian_kl(const Matrix& mean, const Matrix& logvar) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < mean.rows(); ++r) {
    for (Eigen::Index c = 0; c < mean.cols(); ++c) {
      total += kl_per_dim(mean(r, c), logvar(r, c));
    }
  }
  return total / static_cast<double>(mean.rows());
}

double bce(double p, int target) {
  const double pc = clamp_prob(p);
  return target == 1 ? -std::log(pc) : -std::log(1.0 - pc);
}

double bce_mean(const std::vector<double>& probs, int target) {
  double s = 0.0;
  for (double p : probs) s += bce(p, target);
  return s / static_cast<double>(probs.size());
}

std::pair<VaeModel, TrainLog> vae_train(const FlowDataset& ds,
                                        const VaeConfig& config) {
  ensure_trainable(ds, "vae_train");
  if (ds.rows() == 0) throw std::invalid_argument("vae_train: empty dataset");
  if (config.latent_dim < 1) {
    throw std::invalid_argument("vae_train: latent_dim must be >= 1");
  }

  const int d = static_cast<int>(ds.cols());
  const int latent = config.latent_dim;

  std::vector<int> enc_sizes = {d};
  std::vector<Activation> enc_acts;
  for (int h : config.hidden_sizes) {
    enc_sizes.push_back(h);
    enc_acts.push_back(Activation::Relu);
  }
  enc_sizes.push_back(2 * latent);
  enc_acts.push_back(Activation::Identity);

  std::vector<int> dec_sizes = {latent + 1};
  std::vector<Activation> dec_acts;
  for (auto it = config.hidden_sizes.rbegin(); it != config.hidden_sizes.rend();
       ++it) {
    dec_sizes.push_back(*it);
    dec_acts.push_back(Activation::Relu);
  }
  dec_sizes.push_back(d);
  dec_acts.push_back(Activation::Sigmoid);

  VaeModel model;
  model.encoder = init_net(enc_sizes, enc_acts, derive_seed(config.seed, 0));
  model.decoder = init_net(dec_sizes, dec_acts, derive_seed(config.seed, 1));
  model.latent_dim = latent;
  model.beta = config.beta;
  model.feature_names = ds.feature_names;
  model.norm_params = ds.norm_params;

  AdamState enc_state(model.encoder, config.learning_rate);
  AdamState dec_state(model.decoder, config.learning_rate);

  TrainLog log;
  log.loss_a_name = "reconstruction";
  log.loss_b_name = "kl";

  Rng rng(derive_seed(config.seed, 2));
  BatchPlan plan;
  plan.batch_size = config.batch_size;
  plan.order.resize(static_cast<std::size_t>(ds.rows()));
  std::iota(plan.order.begin(), plan.order.end(), Eigen::Index{0});

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    rng.shuffle(plan.order);

    double recon_sum = 0.0, kl_sum = 0.0;
    long seen = 0;
    int batch_index = 0;

    plan.for_each_batch([&](const Eigen::Index* rows, Eigen::Index b) {
      const Matrix x = gather_rows(ds.features, rows, b);
      const Matrix y = gather_labels(ds.labels, rows, b);

      ForwardTape enc_tape;
      const Matrix enc_out = forward(model.encoder, x, &enc_tape);
      const Matrix mu = enc_out.leftCols(latent);
      const Matrix logvar = enc_out.rightCols(latent);

      const Matrix eps = normal_matrix(rng, b, latent);
      const Matrix sigma = (0.5 * logvar).array().exp();
      const Matrix z = mu + sigma.cwiseProduct(eps);

      ForwardTape dec_tape;
      const Matrix xhat = forward(model.decoder, with_label_column(z, y), &dec_tape);

      const double bd = static_cast<double>(b) * static_cast<double>(d);
      const double recon = (xhat - x).squaredNorm() / bd;
      const double kl = gaussian_kl(mu, logvar);
      const double loss = recon + config.beta * kl;
      if (!std::isfinite(loss)) {
        throw std::runtime_error("vae_train: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_index));
      }

      // Reconstruction path.
      const Matrix dxhat = 2.0 * (xhat - x) / bd;
      const auto dec_grads = backward(model.decoder, dec_tape, dxhat);
      const Matrix dz = dec_grads.input.leftCols(latent);

      // Chain rule through z = mu + exp(logvar/2) * eps, plus the KL terms
      // d/dmu = mu, d/dlogvar = (e^logvar - 1)/2, averaged over the batch.
      const double bn = static_cast<double>(b);
      Matrix dmu = dz + (config.beta / bn) * mu;
      Matrix dlogvar = 0.5 * dz.cwiseProduct(sigma).cwiseProduct(eps) +
                       (config.beta / bn) * 0.5 *
                           (logvar.array().exp() - 1.0).matrix();

      Matrix denc(b, 2 * latent);
      denc.leftCols(latent) = dmu;
      denc.rightCols(latent) = dlogvar;
      const auto enc_grads = backward(model.encoder, enc_tape, denc);

      adam_step(model.decoder, dec_grads, dec_state);
      adam_step(model.encoder, enc_grads, enc_state);

      recon_sum += recon * bn;
      kl_sum += kl * bn;
      seen += b;
      ++batch_index;
    });

    log.epochs.push_back({recon_sum / static_cast<double>(seen),
                          kl_sum / static_cast<double>(seen),
                          elapsed_seconds(epoch_start)});
  }
  return {std::move(model), std::move(log)};
}

FlowDataset vae_generate(const VaeModel& model, int target_class,
                         int n_samples, std::uint64_t seed) {
  check_target_class(target_class, "vae_generate");
  FlowDataset out = empty_like(model.feature_names, model.norm_params);
  if (n_samples == 0) return out;

  Rng rng(seed);
  const Matrix z = normal_matrix(rng, n_samples, model.latent_dim);
  const Matrix y = Matrix::Constant(n_samples, 1, target_class);
  out.features = forward(model.decoder, with_label_column(z, y));
  out.labels.assign(static_cast<std::size_t>(n_samples), target_class);
  out.provenance.push_back(
      "vae_generate(target_class=" + std::to_string(target_class) +
      ",n_samples=" + std::to_string(n_samples) +
      ",seed=" + std::to_string(seed) + ")");
  return out;
}

std::pair<GanModel, TrainLog> gan_train(const FlowDataset& ds,
                                        const GanConfig& config) {
  ensure_trainable(ds, "gan_train");
  if (ds.rows() == 0) throw std::invalid_argument("gan_train: empty dataset");

  const int d = static_cast<int>(ds.cols());

  std::vector<int> g_sizes = {config.noise_dim + 1};
  std::vector<Activation> g_acts;
  for (int h : config.hidden_sizes) {
    g_sizes.push_back(h);
    g_acts.push_back(Activation::Relu);
  }
  g_sizes.push_back(d);
  g_acts.push_back(Activation::Sigmoid);

  std::vector<int> d_sizes = {d + 1};
  std::vector<Activation> d_acts;
  for (int h : config.hidden_sizes) {
    d_sizes.push_back(h);
    d_acts.push_back(Activation::Relu);
  }
  d_sizes.push_back(1);
  d_acts.push_back(Activation::Sigmoid);

  GanModel model;
  model.generator = init_net(g_sizes, g_acts, derive_seed(config.seed, 0));
  model.discriminator = init_net(d_sizes, d_acts, derive_seed(config.seed, 1));
  model.noise_dim = config.noise_dim;
  model.feature_names = ds.feature_names;
  model.norm_params = ds.norm_params;

  AdamState g_state(model.generator, config.learning_rate);
  AdamState d_state(model.discriminator, config.learning_rate);

  TrainLog log;
  log.loss_a_name = "generator";
  log.loss_b_name = "discriminator";

  Rng rng(derive_seed(config.seed, 2));
  BatchPlan plan;
  plan.batch_size = config.batch_size;
  plan.order.resize(static_cast<std::size_t>(ds.rows()));
  std::iota(plan.order.begin(), plan.order.end(), Eigen::Index{0});

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    rng.shuffle(plan.order);

    double g_sum = 0.0, d_sum = 0.0;
    long seen = 0;
    int batch_index = 0;

    plan.for_each_batch([&](const Eigen::Index* rows, Eigen::Index b) {
      const Matrix x = gather_rows(ds.features, rows, b);
      const Matrix y = gather_labels(ds.labels, rows, b);
      const double bn = static_cast<double>(b);

      // --- Discriminator step: maximize log D(x,y) + log(1 - D(G(z,y),y)).
      const Matrix z = normal_matrix(rng, b, config.noise_dim);
      const Matrix fake = forward(model.generator, with_label_column(z, y));

      ForwardTape real_tape;
      const Matrix p_real =
          forward(model.discriminator, with_label_column(x, y), &real_tape);
      ForwardTape fake_tape;
      const Matrix p_fake =
          forward(model.discriminator, with_label_column(fake, y), &fake_tape);

      double d_loss = 0.0;
      Matrix d_real_grad(b, 1), d_fake_grad(b, 1);
      for (Eigen::Index i = 0; i < b; ++i) {
        const double pr = clamp_prob(p_real(i, 0));
        const double pf = clamp_prob(p_fake(i, 0));
        d_loss += -std::log(pr) - std::log(1.0 - pf);
        d_real_grad(i, 0) = -1.0 / (pr * bn);
        d_fake_grad(i, 0) = 1.0 / ((1.0 - pf) * bn);
      }
      d_loss /= bn;

      auto d_grads = backward(model.discriminator, real_tape, d_real_grad);
      const auto d_grads_fake =
          backward(model.discriminator, fake_tape, d_fake_grad);
      for (std::size_t k = 0; k < d_grads.weights.size(); ++k) {
        d_grads.weights[k] += d_grads_fake.weights[k];
        d_grads.bias[k] += d_grads_fake.bias[k];
      }
      adam_step(model.discriminator, d_grads, d_state);

      // --- Generator step: non-saturating -log D(G(z,y), y), fresh noise,
      // discriminator weights frozen (already updated this batch).
      const Matrix z2 = normal_matrix(rng, b, config.noise_dim);
      ForwardTape g_tape;
      const Matrix fake2 =
          forward(model.generator, with_label_column(z2, y), &g_tape);
      ForwardTape d_tape;
      const Matrix p_gen =
          forward(model.discriminator, with_label_column(fake2, y), &d_tape);

      double g_loss = 0.0;
      Matrix g_out_grad(b, 1);
      for (Eigen::Index i = 0; i < b; ++i) {
        const double pg = clamp_prob(p_gen(i, 0));
        g_loss += -std::log(pg);
        g_out_grad(i, 0) = -1.0 / (pg * bn);
      }
      g_loss /= bn;

      const auto through_d = backward(model.discriminator, d_tape, g_out_grad);
      const Matrix dfake = through_d.input.leftCols(d);
      const auto g_grads = backward(model.generator, g_tape, dfake);
      adam_step(model.generator, g_grads, g_state);

      if (!std::isfinite(d_loss) || !std::isfinite(g_loss)) {
        throw std::runtime_error("gan_train: non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_index));
      }

      g_sum += g_loss * bn;
      d_sum += d_loss * bn;
      seen += b;
      ++batch_index;
    });

    log.epochs.push_back({g_sum / static_cast<double>(seen),
                          d_sum / static_cast<double>(seen),
                          elapsed_seconds(epoch_start)});
  }
  return {std::move(model), std::move(log)};
}

FlowDataset gan_generate(const GanModel& model, int target_class,
                         int n_samples, std::uint64_t seed) {
  check_target_class(target_class, "gan_generate");
  FlowDataset out = empty_like(model.feature_names, model.norm_params);
  if (n_samples == 0) return out;

  Rng rng(seed);
  const Matrix z = normal_matrix(rng, n_samples, model.noise_dim);
  const Matrix y = Matrix::Constant(n_samples, 1, target_class);
  out.features = forward(model.generator, with_label_column(z, y));
  out.labels.assign(static_cast<std::size_t>(n_samples), target_class);
  out.provenance.push_back(
      "gan_generate(target_class=" + std::to_string(target_class) +
      ",n_samples=" + std::to_string(n_samples) +
      ",seed=" + std::to_string(seed) + ")");
  return out;
}

FlowDataset generate(const GeneratorModel& model, int target_class,
                     int n_samples, std::uint64_t seed) {
  return std::visit(
      [&](const auto& m) -> FlowDataset {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SmoteModel>) {
          SmoteConfig cfg = m.config;
          cfg.seed = seed;
          return smote_generate(*m.source, target_class, n_samples, cfg);
        } else if constexpr (std::is_same_v<T, VaeModel>) {
          return vae_generate(m, target_class, n_samples, seed);
        } else {
          return gan_generate(m, target_class, n_samples, seed);
        }
      },
      model);
}

std::string generator_method(const GeneratorModel& model) {
  if (std::holds_alternative<SmoteModel>(model)) return "smote";
  if (std::holds_alternative<VaeModel>(model)) return "vae";
  return "gan";
}

std::size_t generator_bytes(const GeneratorModel& model) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SmoteModel>) {
          // Shared source rows, counted once by the owner; the model itself
          // holds only the handle and config.
          return sizeof(SmoteModel);
        } else if constexpr (std::is_same_v<T, VaeModel>) {
          return m.encoder.param_bytes() + m.decoder.param_bytes();
        } else {
          return m.generator.param_bytes() + m.discriminator.param_bytes();
        }
      },
      model);
}

TimedGeneration generation_timing(const GeneratorModel& model,
                                  int target_class, int n_samples,
                                  std::uint64_t seed) {
  const auto start = Clock::now();
  TimedGeneration out;
  out.data = generate(model, target_class, n_samples, seed);
  out.seconds = elapsed_seconds(start);
  return out;
}

std::string generator_to_json_string(const GeneratorModel& model,
                                     const TrainLog& log) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["method"] = generator_method(model);
  if (const auto* smote = std::get_if<SmoteModel>(&model)) {
    j["config"] = {{"k_neighbors", smote->config.k_neighbors},
                   {"seed", smote->config.seed}};
    j["source"] = dataset_to_json(*smote->source);
  } else if (const auto* vae = std::get_if<VaeModel>(&model)) {
    j["latent_dim"] = vae->latent_dim;
    j["beta"] = vae->beta;
    j["feature_names"] = vae->feature_names;
    j["norm_params"] = norm_params_to_json(vae->norm_params);
    j["encoder"] = detail::net_to_json(vae->encoder);
    j["decoder"] = detail::net_to_json(vae->decoder);
  } else {
    const auto& gan = std::get<GanModel>(model);
    j["noise_dim"] = gan.noise_dim;
    j["feature_names"] = gan.feature_names;
    j["norm_params"] = norm_params_to_json(gan.norm_params);
    j["generator"] = detail::net_to_json(gan.generator);
    j["discriminator"] = detail::net_to_json(gan.discriminator);
  }
  j["train_log"] = log_to_json(log);
  return j.dump(2);
}

std::pair<GeneratorModel, TrainLog> generator_from_json_string(
    const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("format_version").get<int>() != 1) {
    throw std::runtime_error("generator_from_json: unsupported format version");
  }
  const auto method = j.at("method").get<std::string>();
  const TrainLog log = log_from_json(j.at("train_log"));
  if (method == "smote") {
    SmoteModel m;
    m.config.k_neighbors = j.at("config").at("k_neighbors").get<int>();
    m.config.seed = j.at("config").at("seed").get<std::uint64_t>();
    m.source = std::make_shared<FlowDataset>(dataset_from_json(j.at("source")));
    return {m, log};
  }
  if (method == "vae") {
    VaeModel m;
    m.latent_dim = j.at("latent_dim").get<int>();
    m.beta = j.at("beta").get<double>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.norm_params = norm_params_from_json(j.at("norm_params"));
    m.encoder = detail::net_from_json(j.at("encoder"));
    m.decoder = detail::net_from_json(j.at("decoder"));
    return {m, log};
  }
  if (method == "gan") {
    GanModel m;
    m.noise_dim = j.at("noise_dim").get<int>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.norm_params = norm_params_from_json(j.at("norm_params"));
    m.generator = detail::net_from_json(j.at("generator"));
    m.discriminator = detail::net_from_json(j.at("discriminator"));
    return {m, log};
  }
  throw std::runtime_error("generator_from_json: unknown method '" + method +
                           "'");
}

}  // namespace trafficsynth
