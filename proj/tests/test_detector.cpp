#include <gtest/gtest.h>

#include <random>

#include "adm/detector.hpp"
#include "adm/training.hpp"
#include "oracles.hpp"

using namespace adm;

namespace {

// Zero-weight model whose output is the bias vector (in normalized space).
AutoencoderModel constant_output(std::vector<double> out) {
  const std::size_t n = out.size();
  ArchitectureSpec spec{n, {1}};
  std::vector<double> p(spec.parameter_count(), 0.0);
  std::copy(out.begin(), out.end(), p.end() - static_cast<std::ptrdiff_t>(n));
  return AutoencoderModel(spec, Normalizer::identity(n), p);
}

}  // namespace

TEST(Sigmoid, KnownValuesAndStability) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(2.0), 0.8807971, 1e-7);
  EXPECT_NEAR(1.0 - sigmoid(-0.5), 0.6224593, 1e-7);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_TRUE(std::isfinite(sigmoid(-800.0)));
}

TEST(Calibrate, ThresholdIsMaxError) {
  // Zero model: Err(v) = |v|^2 in normalized space (identity normalizer).
  AutoencoderModel zero(ArchitectureSpec{2, {1}});
  const auto det = calibrate(zero, Matrix::from_rows({{std::sqrt(0.1), 0}, {std::sqrt(0.5), 0}, {0, std::sqrt(0.3)}}));
  EXPECT_NEAR(det.threshold, 0.5, 1e-15);
  EXPECT_THROW(calibrate(zero, Matrix(0, 2)), EmptyDataset);
}

TEST(Calibrate, IdentityModelHasZeroThreshold) {
  ArchitectureSpec spec{2, {2}};
  AutoencoderModel id(spec, Normalizer::identity(2), {1, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0});
  EXPECT_EQ(calibrate(id, Matrix::from_rows({{1, 2}, {3, 4}})).threshold, 0.0);
}

TEST(Calibrate, MatchesBruteForceMax) {
  auto spec = build_architecture(6, Profile::HL3);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  Matrix data(100, 6);
  for (auto& x : data.data()) x = 5.0 + 2.0 * z(rng);
  const auto norm = fit_normalizer(data);
  AutoencoderModel m(spec, norm, glorot_init(spec, 6));
  const auto det = calibrate(m, data);
  double want = 0.0;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    auto v = oracle::row(data, r);
    for (std::size_t j = 0; j < 6; ++j) v[j] = (v[j] - norm.means[j]) / norm.stds[j];
    want = std::max(want, oracle::sq_residual(v, oracle::forward(m, v)));
  }
  EXPECT_LE(oracle::rel_err(det.threshold, want), 1e-12);
  // No calibration point is an anomaly.
  for (std::size_t r = 0; r < data.rows(); ++r) EXPECT_FALSE(detect(det, data.row(r)).is_anomaly);
}

TEST(Detect, TieIsNormalWithHalfConfidence) {
  const auto d = decide(0.5, 0.5);
  EXPECT_FALSE(d.is_anomaly);
  EXPECT_EQ(d.confidence, 0.5);
}

TEST(Detect, AnomalyConfidence) {
  // Output 0, input [sqrt(2.5)] -> Err 2.5.
  DetectorModel det{constant_output({0.0, 0.0}), 0.5};
  std::vector<double> v = {std::sqrt(2.5), 0.0};
  const auto d = detect(det, v);
  EXPECT_TRUE(d.is_anomaly);
  EXPECT_NEAR(d.raw_error, 2.5, 1e-12);
  EXPECT_NEAR(d.confidence, 0.8807971, 1e-7);
}

TEST(Detect, NormalConfidence) {
  DetectorModel det{constant_output({0.0, 0.0}), 0.5};
  std::vector<double> v = {0.0, 0.0};
  const auto d = detect(det, v);
  EXPECT_FALSE(d.is_anomaly);
  EXPECT_NEAR(d.confidence, 0.6224593, 1e-7);
}

TEST(Detect, ShapeMismatch) {
  DetectorModel det{constant_output({0.0, 0.0}), 0.5};
  std::vector<double> v = {1.0};
  EXPECT_THROW(detect(det, v), ShapeError);
}

TEST(Detect, ConfidenceRangeAndMonotonicity) {
  const double e = 1.7;
  Decision prev = decide(0.0, e);
  for (double err = 0.0; err < 1000.0; err += 0.37) {
    const auto d = decide(err, e);
    EXPECT_GE(d.confidence, 0.5);
    EXPECT_LT(d.confidence, 1.0);
    EXPECT_EQ(d.is_anomaly, err > e);
    if (prev.is_anomaly) {
      EXPECT_TRUE(d.is_anomaly);
      EXPECT_GE(d.confidence, prev.confidence);
    }
    prev = d;
  }
  EXPECT_LT(decide(1e300, 0.0).confidence, 1.0);
  EXPECT_LT(decide(0.0, 1e300).confidence, 1.0);
}

TEST(ShouldOffload, StrictThreshold) {
  Decision d;
  d.confidence = 0.5;
  EXPECT_TRUE(should_offload(d, 0.75));
  d.confidence = 0.9;
  EXPECT_FALSE(should_offload(d, 0.75));
  d.confidence = 0.75;
  EXPECT_FALSE(should_offload(d, 0.75));
}

TEST(ShouldOffload, FractionMonotoneInThreshold) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  std::vector<Decision> ds;
  for (int i = 0; i < 2000; ++i) ds.push_back(decide(u(rng), 3.0));
  std::size_t prev = ds.size() + 1;
  for (double c : {1.0, 0.95, 0.9, 0.8, 0.75, 0.6, 0.55, 0.5}) {
    std::size_t count = 0;
    for (const auto& d : ds) count += should_offload(d, c);
    EXPECT_LE(count, prev);
    prev = count;
  }
  EXPECT_EQ(prev, 0u);
}
