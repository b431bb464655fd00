#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "trafficsynth/dataset.hpp"
#include "trafficsynth/netcore.hpp"

namespace trafficsynth {

struct SmoteConfig {
  int k_neighbors = 5;
  std::uint64_t seed = 0;
};

// SMOTE keeps (shared) hold of its source rows; generation interpolates
// between stored neighbors, so there is nothing else to "train".
struct SmoteModel {
  SmoteConfig config;
  std::shared_ptr<const FlowDataset> source;
};

struct VaeConfig {
  int epochs = 50;
  int batch_size = 128;
  int latent_dim = 16;
  std::vector<int> hidden_sizes = {64, 32};  // encoder; decoder mirrors
  double beta = 1.0;  // KL weight
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

// Encoder: input -> hidden -> [mean | log-variance] (2 x latent_dim).
// Decoder: [latent, label] -> mirrored hidden -> input dim, sigmoid output.
// Only the decoder is label-conditioned.
struct VaeModel {
  DenseNet encoder;
  DenseNet decoder;
  int latent_dim = 16;
  double beta = 1.0;
  std::vector<std::string> feature_names;
  std::optional<std::vector<NormParams>> norm_params;
};

struct GanConfig {
  int epochs = 100;
  int batch_size = 128;
  int noise_dim = 32;
  std::vector<int> hidden_sizes = {64, 64};  // both players
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

// Generator: [noise, label] -> hidden -> feature dim, sigmoid output.
// Discriminator: [features, label] -> hidden -> 1, sigmoid output.
struct GanModel {
  DenseNet generator;
  DenseNet discriminator;
  int noise_dim = 32;
  std::vector<std::string> feature_names;
  std::optional<std::vector<NormParams>> norm_params;
};

// Losses per completed epoch plus wall-clock seconds. loss_a/loss_b are
// (reconstruction, kl) for the VAE and (generator, discriminator) for the
// GAN; SMOTE logs nothing.
struct EpochRecord {
  double loss_a = 0.0;
  double loss_b = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::string loss_a_name;
  std::string loss_b_name;
  std::vector<EpochRecord> epochs;
  double total_seconds() const;
};

// Segment interpolation x + lambda * (neighbor - x); the SMOTE primitive.
Eigen::RowVectorXd smote_interpolate(
    const Eigen::Ref<const Eigen::RowVectorXd>& base,
    const Eigen::Ref<const Eigen::RowVectorXd>& neighbor, double lambda);

// Draw order per sample: base row, then neighbor among the k nearest
// same-class rows (Euclidean), then lambda ~ U[0,1].
FlowDataset smote_generate(const FlowDataset& ds, int target_class,
                           int n_samples, const SmoteConfig& config);

std::pair<VaeModel, TrainLog> vae_train(const FlowDataset& ds,
                                        const VaeConfig& config);
FlowDataset vae_generate(const VaeModel& model, int target_class,
                         int n_samples, std::uint64_t seed);

std::pair<GanModel, TrainLog> gan_train(const FlowDataset& ds,
                                        const GanConfig& config);
FlowDataset gan_generate(const GanModel& model, int target_class,
                         int n_samples, std::uint64_t seed);

// Analytic pieces, exposed so tests can pin them to closed forms.
double kl_per_dim(double mean, double logvar);       // 0.5(mu^2+e^l-1-l)
double gaussian_kl(const Matrix& mean, const Matrix& logvar);  // batch mean
double bce(double p, int target);                    // clamped to [1e-7,1-1e-7]
double bce_mean(const std::vector<double>& probs, int target);

using GeneratorModel = std::variant<SmoteModel, VaeModel, GanModel>;

FlowDataset generate(const GeneratorModel& model, int target_class,
                     int n_samples, std::uint64_t seed);
std::string generator_method(const GeneratorModel& model);
std::size_t generator_bytes(const GeneratorModel& model);

struct TimedGeneration {
  FlowDataset data;
  double seconds = 0.0;
};
// Wall-clock time to emit n_samples from a trained model.
TimedGeneration generation_timing(const GeneratorModel& model,
                                  int target_class, int n_samples,
                                  std::uint64_t seed);

std::string generator_to_json_string(const GeneratorModel& model,
                                     const TrainLog& log);
std::pair<GeneratorModel, TrainLog> generator_from_json_string(
    const std::string& text);

}  // namespace trafficsynth
