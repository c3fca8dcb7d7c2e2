#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "adm/training.hpp"
#include "oracles.hpp"

using namespace adm;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Matrix m(rows, cols);
  for (auto& x : m.data()) x = z(rng);
  return m;
}

Matrix correlated_2d(std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Matrix m(rows, 2);
  for (std::size_t r = 0; r < rows; ++r) {
    const double a = z(rng);
    m(r, 0) = 3.0 + 2.0 * a;
    m(r, 1) = -1.0 + 1.5 * a + 0.2 * z(rng);
  }
  return m;
}

}  // namespace

TEST(FitNormalizer, TwoRows) {
  const auto n = fit_normalizer(Matrix::from_rows({{0}, {2}}));
  EXPECT_EQ(n.means, std::vector<double>{1.0});
  EXPECT_EQ(n.stds, std::vector<double>{1.0});
}

TEST(FitNormalizer, ConstantColumnIsFloored) {
  const auto n = fit_normalizer(Matrix::from_rows({{5}, {5}, {5}}));
  EXPECT_EQ(n.means, std::vector<double>{5.0});
  EXPECT_EQ(n.stds, std::vector<double>{1.0});
}

TEST(FitNormalizer, NormalizedMomentsOnRandomData) {
  Matrix data = gaussian(1000, 4, 1);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    data(r, 0) = 10 + 3 * data(r, 0);
    data(r, 2) = -4 + 0.01 * data(r, 2);
  }
  const auto norm = fit_normalizer(data);
  const auto z = normalize_rows(norm, data);
  for (std::size_t c = 0; c < 4; ++c) {
    double mean = 0, var = 0;
    for (std::size_t r = 0; r < z.rows(); ++r) mean += z(r, c) / 1000.0;
    for (std::size_t r = 0; r < z.rows(); ++r) var += (z(r, c) - mean) * (z(r, c) - mean) / 1000.0;
    EXPECT_LT(std::abs(mean), 1e-9);
    EXPECT_NEAR(std::sqrt(var), 1.0, 1e-9);
  }
  EXPECT_THROW(fit_normalizer(Matrix(0, 3)), EmptyDataset);
}

TEST(GlorotInit, BoundAndDeterminism) {
  EXPECT_DOUBLE_EQ(glorot_bound(4, 2), 1.0);
  ArchitectureSpec spec{4, {2}};
  const auto a = glorot_init(spec, 9), b = glorot_init(spec, 9);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, glorot_init(spec, 10));
  AutoencoderModel m(spec, Normalizer::identity(4), a);
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    for (double w : m.layer(l).weights) EXPECT_LE(std::abs(w), 1.0);
    for (double bias : m.layer(l).biases) EXPECT_EQ(bias, 0.0);
  }
}

TEST(GlorotInit, UniformStatistics) {
  // One layer 200 -> 250 (plus its mirror), 10^5 weights in the first layer.
  ArchitectureSpec spec{250, {200}};
  const auto p = glorot_init(spec, 4);
  AutoencoderModel m(spec, Normalizer::identity(250), p);
  const auto w = m.layer(0).weights;
  const double bound = glorot_bound(250, 200);
  double mean = 0, mx = 0;
  for (double x : w) {
    mean += x;
    mx = std::max(mx, std::abs(x));
  }
  mean /= static_cast<double>(w.size());
  const double sigma_mean = bound / std::sqrt(3.0) / std::sqrt(static_cast<double>(w.size()));
  EXPECT_LE(std::abs(mean), 3 * sigma_mean);
  EXPECT_LE(mx, bound);
  EXPECT_GT(mx, 0.99 * bound);
}

TEST(Loss, IdentityModelIsZero) {
  ArchitectureSpec spec{2, {2}};
  AutoencoderModel m(spec, Normalizer::identity(2), {1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0});
  EXPECT_EQ(loss(m, Matrix::from_rows({{1, 2}, {3, 4}})), 0.0);
}

TEST(Loss, ArithmeticMean) {
  AutoencoderModel zero(ArchitectureSpec{2, {1}});
  // Err([1,0]) = 1, Err([1,1.4142...]) = 3 under a zero model.
  EXPECT_DOUBLE_EQ(loss(zero, Matrix::from_rows({{1, 0}, {1, std::sqrt(2.0)}})), 2.0);
  EXPECT_THROW(loss(zero, Matrix(0, 2)), EmptyDataset);
}

TEST(Loss, MatchesOracle) {
  auto spec = build_architecture(6, Profile::HL3);
  AutoencoderModel m(spec, Normalizer::identity(6), glorot_init(spec, 3));
  const auto batch = gaussian(40, 6, 8);
  EXPECT_LE(oracle::rel_err(loss(m, batch), oracle::mean_err(m, batch)), 1e-12);
}

TEST(Gradient, ZeroModelZeroBatch) {
  AutoencoderModel m(build_architecture(4, Profile::HL1));
  for (double g : gradient(m, Matrix(3, 4, 0.0))) EXPECT_EQ(g, 0.0);
}

TEST(Gradient, MatchesFiniteDifferences) {
  ArchitectureSpec spec{6, {3}};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    AutoencoderModel m(spec, Normalizer::identity(6), glorot_init(spec, seed));
    const auto batch = gaussian(8, 6, seed + 100);
    const auto g = gradient(m, batch);
    const auto fd = oracle::fd_gradient(m, batch, 1e-6);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double denom = std::max({std::abs(g[i]), std::abs(fd[i]), 1e-6});
      EXPECT_LE(std::abs(g[i] - fd[i]) / denom, 1e-4) << "param " << i;
    }
  }
}

TEST(Gradient, MatchesFiniteDifferencesDeepProfiles) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto spec = build_architecture(4 + seed % 3, seed % 2 ? Profile::HL3 : Profile::HL5);
    const auto m = oracle::with_random_biases(spec, seed);
    const auto batch = gaussian(8, spec.input_dim, seed + 200);
    ASSERT_GT(oracle::kink_margin(m, batch), 1e-5) << seed;
    const auto g = gradient(m, batch);
    const auto fd = oracle::fd_gradient(m, batch, 1e-6);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double denom = std::max({std::abs(g[i]), std::abs(fd[i]), 1e-6});
      EXPECT_LE(std::abs(g[i] - fd[i]) / denom, 1e-4) << "seed " << seed << " param " << i;
    }
  }
}

TEST(Gradient, ZeroSubgradientAtKink) {
  // Hidden unit pre-activation exactly 0: its incoming bias gets no gradient.
  ArchitectureSpec spec{2, {1}};
  AutoencoderModel m(spec, Normalizer::identity(2), {1, -1, 0, 1, 1, 0, 0});
  const auto g = gradient(m, Matrix::from_rows({{1, 1}}));
  EXPECT_EQ(g[2], 0.0);
}

TEST(Gradient, OutputBiasClosedForm) {
  auto spec = build_architecture(5, Profile::HL3);
  AutoencoderModel m(spec, Normalizer::identity(5), glorot_init(spec, 21));
  const auto batch = gaussian(7, 5, 22);
  const auto g = gradient(m, batch);
  const auto last = m.layer(m.layer_count() - 1);
  const std::size_t bias_offset = m.layer_offset(m.layer_count() - 1) + last.in * last.out;
  for (std::size_t j = 0; j < 5; ++j) {
    double want = 0.0;
    for (std::size_t r = 0; r < batch.rows(); ++r) {
      const auto v = oracle::row(batch, r);
      want += oracle::forward(m, v)[j] - v[j];
    }
    want *= 2.0 / static_cast<double>(batch.rows());
    EXPECT_NEAR(g[bias_offset + j], want, 1e-12);
  }
}

TEST(AdamStep, ZeroGradientIsIdentity) {
  std::vector<double> theta = {1.0, -2.0, 3.0};
  AdamState s(3);
  adam_step(theta, s, std::vector<double>(3, 0.0), TrainConfig{});
  EXPECT_EQ(theta, (std::vector<double>{1.0, -2.0, 3.0}));
  EXPECT_EQ(s.t, 1u);
}

TEST(AdamStep, FirstStepClosedForm) {
  std::vector<double> theta = {0.0};
  AdamState s(1);
  adam_step(theta, s, std::vector<double>{5.0}, TrainConfig{});
  EXPECT_NEAR(theta[0], -0.0009999999980, 1e-15);
  EXPECT_NEAR(theta[0], -0.001 * 5.0 / (5.0 + 1e-8), 1e-18);
}

TEST(AdamStep, MatchesTranscriptionOverSteps) {
  std::vector<double> theta = {0.5, -1.0, 2.0};
  std::vector<std::vector<double>> grads = {{0.3, -4.0, 1e-3}, {0.3, -4.0, 1e-3}, {-1.0, 2.0, 0.0}};
  const auto want = oracle::adam(theta, grads);
  AdamState s(3);
  for (const auto& g : grads) adam_step(theta, s, g, TrainConfig{});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(theta[i], want[i], 1e-15);
}

TEST(AdamStep, BiasCorrectedMomentOfConstantGradient) {
  TrainConfig cfg;
  AdamState s(1);
  std::vector<double> theta = {0.0};
  for (int t = 1; t <= 50; ++t) {
    adam_step(theta, s, std::vector<double>{0.7}, cfg);
    const double m_hat = s.m[0] / (1.0 - std::pow(cfg.beta1, t));
    EXPECT_NEAR(m_hat, 0.7, 1e-14);
  }
}

TEST(AdamStep, ShapeMismatchThrows) {
  std::vector<double> theta(2);
  AdamState s(2);
  EXPECT_THROW(adam_step(theta, s, std::vector<double>(3), TrainConfig{}), ShapeError);
}

TEST(Fit, RepeatedRowConvergesToZero) {
  Matrix data(32, 3);
  for (std::size_t r = 0; r < 32; ++r) {
    data(r, 0) = 1.5;
    data(r, 1) = -2.0;
    data(r, 2) = 7.0;
  }
  TrainConfig cfg;
  cfg.rng_seed = 1;
  const auto res = fit(data, build_architecture(3, Profile::HL1), cfg);
  EXPECT_LE(res.history.final_loss(), 1e-6);
}

TEST(Fit, DeterministicPerSeed) {
  const auto data = correlated_2d(200, 5);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.rng_seed = 42;
  const auto a = fit(data, build_architecture(2, Profile::HL1), cfg);
  const auto b = fit(data, build_architecture(2, Profile::HL1), cfg);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.history.seed, 42u);
  cfg.rng_seed = 43;
  EXPECT_NE(fit(data, build_architecture(2, Profile::HL1), cfg).model, a.model);
}

TEST(Fit, CorrelatedGaussianLossHalves) {
  const auto data = correlated_2d(1000, 9);
  TrainConfig cfg;
  cfg.rng_seed = 3;
  const auto res = fit(data, build_architecture(2, Profile::HL1), cfg);
  ASSERT_FALSE(res.history.epochs.empty());
  EXPECT_LT(res.history.final_loss(), 0.5 * res.history.epochs.front().loss);
}

TEST(Fit, EarlyStopRule) {
  const auto data = correlated_2d(200, 11);
  TrainConfig cfg;
  cfg.rng_seed = 7;
  cfg.early_stop_patience = 3;
  cfg.epochs = 400;
  const auto res = fit(data, build_architecture(2, Profile::HL1), cfg);
  const auto& e = res.history.epochs;
  // Replay the rule over the recorded losses.
  double best = std::numeric_limits<double>::infinity();
  int since = 0;
  std::size_t stop = e.size();
  bool fired = false;
  for (std::size_t i = 0; i < e.size(); ++i) {
    EXPECT_TRUE(std::isfinite(e[i].loss));
    EXPECT_GE(e[i].loss, 0.0);
    if (e[i].loss < best) {
      best = e[i].loss;
      since = 0;
    } else if (++since >= 3) {
      stop = i + 1;
      fired = true;
      break;
    }
  }
  EXPECT_EQ(stop, e.size());
  EXPECT_EQ(res.history.stopped_early, fired);
}

TEST(Fit, ConstantDatasetStopsEarly) {
  Matrix data(64, 2, 3.0);
  TrainConfig cfg;
  cfg.rng_seed = 1;
  const auto res = fit(data, build_architecture(2, Profile::HL1), cfg);
  EXPECT_TRUE(res.history.stopped_early);
  EXPECT_LE(res.history.epochs.size(), 30u);
}

TEST(Fit, RejectsBadInputs) {
  TrainConfig cfg;
  EXPECT_THROW(fit(Matrix(1, 2, 0.0), build_architecture(2, Profile::HL1), cfg), EmptyDataset);
  EXPECT_THROW(fit(Matrix(20, 3, 0.0), build_architecture(2, Profile::HL1), cfg), ShapeError);
  EXPECT_THROW(fit(Matrix(8, 2, 0.0), build_architecture(2, Profile::HL1), cfg), ConfigError);
  Matrix nan(20, 2, 0.0);
  nan(3, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(fit(nan, build_architecture(2, Profile::HL1), cfg), ConfigError);
  cfg.epochs = 0;
  EXPECT_THROW(fit(Matrix(20, 2, 0.0), build_architecture(2, Profile::HL1), cfg), ConfigError);
}

TEST(Fit, DivergenceNamesEpoch) {
  const auto data = correlated_2d(64, 2);
  TrainConfig cfg;
  cfg.learning_rate = 1e308;
  cfg.rng_seed = 1;
  try {
    fit(data, build_architecture(2, Profile::HL1), cfg);
    FAIL() << "expected divergence";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.epoch(), 1);
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
  }
}

TEST(TrainingHistory, CsvLayout) {
  TrainingHistory h;
  h.epochs = {{1, 0.5, 1.25}, {2, 0.25, 2.5}};
  std::ostringstream os;
  write_history_csv(os, h);
  EXPECT_EQ(os.str(), "epoch,loss,elapsed_ms\n1,0.5,1.25\n2,0.25,2.5\n");
}
