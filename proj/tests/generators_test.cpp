#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "trafficsynth/generators.hpp"
#include "trafficsynth/metrics.hpp"
#include "trafficsynth/rng.hpp"

using namespace trafficsynth;

namespace {

// Two-class blobs squeezed into [0,1]: class 0 near 0.25, class 1 near 0.75.
FlowDataset unit_blobs(int n_per_class, int n_features, std::uint64_t seed) {
  Rng rng(seed);
  FlowDataset ds;
  ds.features.resize(2 * n_per_class, n_features);
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < n_per_class; ++i) {
      const Eigen::Index r = c * n_per_class + i;
      for (int f = 0; f < n_features; ++f) {
        const double center = c == 0 ? 0.25 : 0.75;
        ds.features(r, f) = std::clamp(center + 0.08 * rng.normal(), 0.0, 1.0);
      }
      ds.labels.push_back(c);
    }
  }
  for (int f = 0; f < n_features; ++f)
    ds.feature_names.push_back("f" + std::to_string(f));
  return normalize_minmax(ds);
}

}  // namespace

TEST_CASE("smote_interpolate: midpoint and endpoint") {
  Eigen::RowVectorXd a(2), b(2);
  a << 0.0, 0.0;
  b << 2.0, 2.0;
  const auto mid = smote_interpolate(a, b, 0.5);
  CHECK(mid(0) == 1.0);
  CHECK(mid(1) == 1.0);
  CHECK(smote_interpolate(a, b, 0.0) == a);
  CHECK(smote_interpolate(a, b, 1.0) == b);
}

TEST_CASE("smote_generate: labels, determinism, class-size guard") {
  const auto ds = unit_blobs(40, 3, 1);
  const auto synth = smote_generate(ds, 1, 25, {.k_neighbors = 5, .seed = 9});
  CHECK(synth.rows() == 25);
  for (int y : synth.labels) CHECK(y == 1);
  CHECK(synth.feature_names == ds.feature_names);

  const auto again = smote_generate(ds, 1, 25, {.k_neighbors = 5, .seed = 9});
  CHECK(again.features == synth.features);

  // k must stay below the class size.
  CHECK_THROWS(smote_generate(ds, 1, 5, {.k_neighbors = 40, .seed = 1}));
  CHECK_THROWS_AS(smote_generate(ds, 2, 5, {.k_neighbors = 3, .seed = 1}),
                  std::invalid_argument);
}

TEST_CASE("smote samples decompose as segments of two real same-class rows") {
  const auto ds = unit_blobs(100, 4, 7);
  const auto synth = smote_generate(ds, 0, 60, {.k_neighbors = 5, .seed = 3});

  FlowDataset parents;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    if (ds.labels[static_cast<std::size_t>(r)] == 0) rows.push_back(r);
  }
  parents.features.resize(static_cast<Eigen::Index>(rows.size()), ds.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    parents.features.row(static_cast<Eigen::Index>(i)) = ds.features.row(rows[i]);
  }

  for (Eigen::Index s = 0; s < synth.rows(); ++s) {
    CHECK(oracles::nearest_segment_residual(parents, synth.features.row(s)) <
          1e-9);
  }
}

TEST_CASE("smote samples stay inside the per-dimension parent bounding box") {
  const auto ds = unit_blobs(50, 3, 21);
  const auto synth = smote_generate(ds, 1, 40, {.k_neighbors = 4, .seed = 2});
  // The class bounding box contains every parent segment.
  Eigen::RowVectorXd lo = Eigen::RowVectorXd::Constant(ds.cols(), 1e30);
  Eigen::RowVectorXd hi = Eigen::RowVectorXd::Constant(ds.cols(), -1e30);
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    if (ds.labels[static_cast<std::size_t>(r)] != 1) continue;
    lo = lo.cwiseMin(ds.features.row(r));
    hi = hi.cwiseMax(ds.features.row(r));
  }
  for (Eigen::Index s = 0; s < synth.rows(); ++s) {
    for (Eigen::Index c = 0; c < ds.cols(); ++c) {
      CHECK(synth.features(s, c) >= lo(c) - 1e-12);
      CHECK(synth.features(s, c) <= hi(c) + 1e-12);
    }
  }
}

TEST_CASE("kl closed forms") {
  CHECK(kl_per_dim(0.0, 0.0) == 0.0);
  CHECK(kl_per_dim(1.0, 0.0) == doctest::Approx(0.5).epsilon(1e-12));

  // KL >= 0 with equality only at (0, 0).
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double mu = rng.uniform(-3, 3);
    const double lv = rng.uniform(-3, 3);
    const double kl = kl_per_dim(mu, lv);
    CHECK(kl >= 0.0);
    if (std::abs(mu) > 1e-3 || std::abs(lv) > 1e-3) CHECK(kl > 0.0);
  }

  Matrix mu(2, 2), lv(2, 2);
  mu << 0, 1, 0, 1;
  lv << 0, 0, 0, 0;
  CHECK(gaussian_kl(mu, lv) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("bce: D outputting 0.5 costs ln 2 on both sides") {
  CHECK(bce(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce(0.5, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_mean({0.5, 0.5, 0.5}, 1) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // The clamp keeps saturated probabilities finite.
  CHECK(std::isfinite(bce(0.0, 1)));
  CHECK(std::isfinite(bce(1.0, 0)));
}

TEST_CASE("vae_train learns: total loss drops from first to final epoch") {
  const auto ds = unit_blobs(150, 4, 11);
  const auto [model, log] = vae_train(
      ds, {.epochs = 30, .batch_size = 64, .latent_dim = 8,
           .hidden_sizes = {32, 16}, .beta = 1.0, .seed = 4});
  REQUIRE(log.epochs.size() == 30);
  const auto total = [&](const EpochRecord& e) {
    return e.loss_a + model.beta * e.loss_b;
  };
  CHECK(total(log.epochs.back()) <= total(log.epochs.front()));
  for (const auto& e : log.epochs) {
    CHECK(std::isfinite(e.loss_a));
    CHECK(std::isfinite(e.loss_b));
    CHECK(e.seconds >= 0.0);
  }
  CHECK(log.loss_a_name == "reconstruction");
  CHECK(log.loss_b_name == "kl");
}

TEST_CASE("vae_train is seed-deterministic") {
  const auto ds = unit_blobs(60, 3, 13);
  const VaeConfig cfg{.epochs = 5, .batch_size = 32, .latent_dim = 4,
                      .hidden_sizes = {16}, .seed = 21};
  const auto [m1, l1] = vae_train(ds, cfg);
  const auto [m2, l2] = vae_train(ds, cfg);
  for (std::size_t e = 0; e < l1.epochs.size(); ++e) {
    CHECK(l1.epochs[e].loss_a == l2.epochs[e].loss_a);
    CHECK(l1.epochs[e].loss_b == l2.epochs[e].loss_b);
  }
  CHECK(m1.decoder.layers[0].weights == m2.decoder.layers[0].weights);
}

TEST_CASE("vae_generate: empty, deterministic, balanced, in range") {
  const auto ds = unit_blobs(80, 3, 17);
  const auto [model, log] =
      vae_train(ds, {.epochs = 10, .batch_size = 32, .latent_dim = 4,
                     .hidden_sizes = {16}, .seed = 2});

  const auto none = vae_generate(model, 1, 0, 5);
  CHECK(none.rows() == 0);
  CHECK(none.feature_names == ds.feature_names);

  const auto a = vae_generate(model, 1, 50, 5);
  const auto b = vae_generate(model, 1, 50, 5);
  CHECK(a.features == b.features);
  CHECK(a.features.minCoeff() >= 0.0);
  CHECK(a.features.maxCoeff() <= 1.0);
  for (int y : a.labels) CHECK(y == 1);

  const auto balanced = concat(vae_generate(model, 0, 500, 6),
                               vae_generate(model, 1, 500, 7));
  const auto frac = class_balance(balanced);
  CHECK(frac[0] == 0.5);
  CHECK(frac[1] == 0.5);
}

TEST_CASE("vae rejects holdout data and bad arguments") {
  auto ds = unit_blobs(30, 2, 3);
  ds.holdout_test = true;
  CHECK_THROWS_AS(vae_train(ds, {.epochs = 1}), std::logic_error);
  ds.holdout_test = false;
  CHECK_THROWS_AS(vae_train(ds, {.epochs = 1, .latent_dim = 0}),
                  std::invalid_argument);
}

TEST_CASE("gan_train: losses logged, deterministic, discriminator improves") {
  const auto ds = unit_blobs(100, 3, 19);
  const GanConfig cfg{.epochs = 6, .batch_size = 50, .noise_dim = 8,
                      .hidden_sizes = {16, 16}, .seed = 3};
  const auto [model, log] = gan_train(ds, cfg);
  REQUIRE(log.epochs.size() == 6);
  CHECK(log.loss_a_name == "generator");
  CHECK(log.loss_b_name == "discriminator");
  for (const auto& e : log.epochs) {
    CHECK(std::isfinite(e.loss_a));
    CHECK(std::isfinite(e.loss_b));
  }
  // Early on, the discriminator beats an untrained generator: its loss
  // after the first epoch of updates sits below the first-epoch average.
  CHECK(log.epochs[1].loss_b < log.epochs[0].loss_b);

  const auto [model2, log2] = gan_train(ds, cfg);
  for (std::size_t e = 0; e < log.epochs.size(); ++e) {
    CHECK(log.epochs[e].loss_a == log2.epochs[e].loss_a);
    CHECK(log.epochs[e].loss_b == log2.epochs[e].loss_b);
  }
}

TEST_CASE("gan_generate: empty, bounds, balance, determinism") {
  const auto ds = unit_blobs(80, 3, 23);
  const auto [model, log] =
      gan_train(ds, {.epochs = 5, .batch_size = 40, .noise_dim = 8,
                     .hidden_sizes = {16, 16}, .seed = 5});

  CHECK(gan_generate(model, 0, 0, 1).rows() == 0);

  const auto a = gan_generate(model, 0, 64, 9);
  const auto b = gan_generate(model, 0, 64, 9);
  CHECK(a.features == b.features);
  CHECK(a.features.minCoeff() >= 0.0);
  CHECK(a.features.maxCoeff() <= 1.0);
  for (int y : a.labels) CHECK(y == 0);

  const auto balanced =
      concat(gan_generate(model, 0, 500, 2), gan_generate(model, 1, 500, 3));
  const auto frac = class_balance(balanced);
  CHECK(frac[0] == 0.5);
  CHECK(frac[1] == 0.5);
}

TEST_CASE("generator variant dispatch and timing") {
  const auto ds = unit_blobs(60, 3, 29);
  auto source = std::make_shared<FlowDataset>(ds);
  const GeneratorModel smote = SmoteModel{{.k_neighbors = 3, .seed = 1}, source};
  CHECK(generator_method(smote) == "smote");

  const auto timed = generation_timing(smote, 1, 30, 4);
  CHECK(timed.data.rows() == 30);
  CHECK(timed.seconds >= 0.0);
  CHECK(std::isfinite(timed.seconds));

  const auto timed2 = generation_timing(smote, 1, 30, 4);
  CHECK(std::isfinite(timed2.seconds));
  CHECK(timed2.data.features == timed.data.features);
}

TEST_CASE("generator json round-trip preserves behaviour bit-for-bit") {
  const auto ds = unit_blobs(50, 3, 31);

  SUBCASE("smote") {
    const GeneratorModel m =
        SmoteModel{{.k_neighbors = 3, .seed = 8}, std::make_shared<FlowDataset>(ds)};
    const auto text = generator_to_json_string(m, {});
    const auto [back, log] = generator_from_json_string(text);
    CHECK(generate(back, 1, 20, 3).features == generate(m, 1, 20, 3).features);
  }

  SUBCASE("vae") {
    const auto [model, log] =
        vae_train(ds, {.epochs = 3, .batch_size = 25, .latent_dim = 4,
                       .hidden_sizes = {8}, .seed = 6});
    const GeneratorModel m = model;
    const auto text = generator_to_json_string(m, log);
    const auto [back, back_log] = generator_from_json_string(text);
    CHECK(generate(back, 0, 20, 3).features == generate(m, 0, 20, 3).features);
    CHECK(back_log.epochs.size() == log.epochs.size());
    CHECK(back_log.epochs[0].loss_a == log.epochs[0].loss_a);
    CHECK(generator_to_json_string(back, back_log) == text);
  }

  SUBCASE("gan") {
    const auto [model, log] =
        gan_train(ds, {.epochs = 2, .batch_size = 25, .noise_dim = 4,
                       .hidden_sizes = {8, 8}, .seed = 7});
    const GeneratorModel m = model;
    const auto text = generator_to_json_string(m, log);
    const auto [back, back_log] = generator_from_json_string(text);
    CHECK(generate(back, 1, 20, 3).features == generate(m, 1, 20, 3).features);
    CHECK(generator_to_json_string(back, back_log) == text);
  }
}
