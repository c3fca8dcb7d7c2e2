#pragma once

// Classical outlier detectors used as comparison points: k-nearest-neighbour distance,
// PCA residual, histogram-based (HBOD) and exact angle-based (ABOD) scores.
// Every score is oriented so that larger means more anomalous.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "adm/core_nn.hpp"
#include "adm/matrix.hpp"

namespace adm {

enum class BaselineKind { knn, pca, hbod, abod };

inline constexpr BaselineKind kAllBaselines[] = {BaselineKind::knn, BaselineKind::pca, BaselineKind::hbod,
                                                 BaselineKind::abod};

inline const char* to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::knn: return "knn";
    case BaselineKind::pca: return "pca";
    case BaselineKind::hbod: return "hbod";
    case BaselineKind::abod: return "abod";
  }
  return "?";
}

inline BaselineKind parse_baseline(std::string_view s) {
  if (s == "knn") return BaselineKind::knn;
  if (s == "pca") return BaselineKind::pca;
  if (s == "hbod") return BaselineKind::hbod;
  if (s == "abod") return BaselineKind::abod;
  throw ConfigError("unknown baseline '" + std::string(s) + "'");
}

// Distance from q to its K-th nearest training point. `exclude` skips one training row
// (leave-one-out scoring of the training set itself).
inline double knn_score(const Matrix& train, std::span<const double> q, std::size_t K,
                        std::optional<std::size_t> exclude = std::nullopt) {
  const std::size_t available = train.rows() - (exclude ? 1 : 0);
  if (K == 0 || available < K) throw ConfigError("knn needs at least K training points");
  // Max-heap of the K smallest squared distances.
  std::vector<double> best;
  best.reserve(K + 1);
  for (std::size_t r = 0; r < train.rows(); ++r) {
    if (exclude && *exclude == r) continue;
    const double d = squared_distance(train.row(r), q);
    if (best.size() < K) {
      best.push_back(d);
      std::push_heap(best.begin(), best.end());
    } else if (d < best.front()) {
      std::pop_heap(best.begin(), best.end());
      best.back() = d;
      std::push_heap(best.begin(), best.end());
    }
  }
  return std::sqrt(best.front());
}

struct PcaFit {
  std::vector<double> mean;
  Eigen::MatrixXd components;  // d x retained, orthonormal columns
  std::vector<double> eigenvalues;  // descending, all of them
  std::size_t retained = 0;
};

// Keeps the smallest number of leading components explaining >= `variance_cutoff` of the variance.
inline PcaFit fit_pca(const Matrix& train, double variance_cutoff = 0.9) {
  if (train.rows() < 2) throw EmptyDataset("PCA needs at least 2 points");
  const std::size_t n = train.rows(), d = train.cols();
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
      train.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const Eigen::RowVectorXd mu = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - mu;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);

  PcaFit fit;
  fit.mean.assign(mu.data(), mu.data() + d);
  const auto& values = solver.eigenvalues();  // ascending
  double total = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) total += std::max(0.0, values[i]);
  for (Eigen::Index i = values.size(); i-- > 0;) fit.eigenvalues.push_back(std::max(0.0, values[i]));
  double acc = 0.0;
  if (total > 0.0) {
    for (double v : fit.eigenvalues) {
      acc += v;
      ++fit.retained;
      if (acc >= variance_cutoff * total) break;
    }
  }
  fit.components.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(fit.retained));
  for (std::size_t c = 0; c < fit.retained; ++c)
    fit.components.col(static_cast<Eigen::Index>(c)) =
        solver.eigenvectors().col(values.size() - 1 - static_cast<Eigen::Index>(c));
  return fit;
}

// Squared norm of (q - mean) after removing its projection on the retained components.
inline double pca_score(const PcaFit& fit, std::span<const double> q) {
  if (q.size() != fit.mean.size()) throw ShapeError("pca query dimension mismatch");
  Eigen::VectorXd r(static_cast<Eigen::Index>(q.size()));
  for (std::size_t i = 0; i < q.size(); ++i) r[static_cast<Eigen::Index>(i)] = q[i] - fit.mean[i];
  if (fit.retained > 0) r -= fit.components * (fit.components.transpose() * r);
  return r.squaredNorm();
}

struct HbodFit {
  std::size_t bins = 10;
  std::vector<double> lo, hi;
  std::vector<std::vector<double>> density;  // fraction of training points per bin
  std::vector<double> min_positive;
};

namespace detail {

inline std::optional<std::size_t> hbod_bin(double lo, double hi, std::size_t bins, double x) {
  if (x < lo || x > hi) return std::nullopt;
  if (!(hi > lo)) return 0;
  auto b = static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins));
  return std::min(b, bins - 1);
}

}  // namespace detail

// Equal-width histograms over each feature's training range.
inline HbodFit fit_hbod(const Matrix& train, std::size_t bins = 10) {
  if (train.empty()) throw EmptyDataset("HBOD needs training data");
  if (bins == 0) throw ConfigError("HBOD needs at least one bin");
  const std::size_t n = train.rows(), d = train.cols();
  HbodFit fit;
  fit.bins = bins;
  fit.lo.assign(d, 0.0);
  fit.hi.assign(d, 0.0);
  fit.density.assign(d, std::vector<double>(bins, 0.0));
  fit.min_positive.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double lo = train(0, j), hi = train(0, j);
    for (std::size_t r = 1; r < n; ++r) {
      lo = std::min(lo, train(r, j));
      hi = std::max(hi, train(r, j));
    }
    fit.lo[j] = lo;
    fit.hi[j] = hi;
    for (std::size_t r = 0; r < n; ++r) fit.density[j][*detail::hbod_bin(lo, hi, bins, train(r, j))] += 1.0;
    for (auto& c : fit.density[j]) {
      c /= static_cast<double>(n);
      if (c > 0.0) fit.min_positive[j] = std::min(fit.min_positive[j], c);
    }
  }
  return fit;
}

inline double hbod_score(const HbodFit& fit, std::span<const double> q) {
  if (q.size() != fit.lo.size()) throw ShapeError("hbod query dimension mismatch");
  double score = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    const auto bin = detail::hbod_bin(fit.lo[j], fit.hi[j], fit.bins, q[j]);
    const double density = bin ? fit.density[j][*bin] : fit.min_positive[j];
    score += -std::log(density + 1e-12);
  }
  return score;
}

// Negated variance, over all unordered training pairs (b, c), of
// <b - q, c - q> / (|b - q|^2 |c - q|^2). Points coinciding with q are skipped.
inline double abod_score(const Matrix& train, std::span<const double> q) {
  if (train.rows() < 3) throw EmptyDataset("ABOD needs at least 3 training points");
  const std::size_t n = train.rows(), d = train.cols();
  std::vector<double> diff;
  std::vector<double> norm2;
  diff.reserve(n * d);
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double v = train(r, j) - q[j];
      s += v * v;
    }
    if (s == 0.0) continue;
    for (std::size_t j = 0; j < d; ++j) diff.push_back(train(r, j) - q[j]);
    norm2.push_back(s);
  }
  const std::size_t m = norm2.size();
  // Welford running variance.
  double mean = 0.0, m2 = 0.0;
  std::size_t pairs = 0;
  for (std::size_t b = 0; b < m; ++b) {
    const double* vb = diff.data() + b * d;
    for (std::size_t c = b + 1; c < m; ++c) {
      const double* vc = diff.data() + c * d;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += vb[j] * vc[j];
      const double w = dot / (norm2[b] * norm2[c]);
      ++pairs;
      const double delta = w - mean;
      mean += delta / static_cast<double>(pairs);
      m2 += delta * (w - mean);
    }
  }
  if (pairs == 0) return 0.0;
  return -(m2 / static_cast<double>(pairs));
}

// Nearest-rank q-quantile of a score vector (q in (0, 1]).
inline double nearest_rank_quantile(std::vector<double> scores, double q) {
  if (scores.empty()) throw EmptyDataset("quantile of an empty score vector");
  std::sort(scores.begin(), scores.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(scores.size())));
  rank = std::clamp<std::size_t>(rank, 1, scores.size());
  return scores[rank - 1];
}

struct BaselineConfig {
  double contamination = 0.1;
  std::size_t knn_k = 10;
  double pca_variance = 0.9;
  std::size_t hbod_bins = 10;
  // ABOD reference set is a seeded subsample of at most this many training points (0 = all).
  std::size_t abod_max_reference = 256;
  std::uint64_t seed = 0;
};

class BaselineModel {
 public:
  static BaselineModel fit(BaselineKind kind, const Matrix& train, const BaselineConfig& cfg = {}) {
    if (!(cfg.contamination > 0.0 && cfg.contamination < 0.5))
      throw ConfigError("contamination must lie in (0, 0.5)");
    BaselineModel m;
    m.kind_ = kind;
    m.cfg_ = cfg;
    switch (kind) {
      case BaselineKind::knn: m.reference_ = train; break;
      case BaselineKind::pca: m.pca_ = fit_pca(train, cfg.pca_variance); break;
      case BaselineKind::hbod: m.hbod_ = fit_hbod(train, cfg.hbod_bins); break;
      case BaselineKind::abod: m.reference_ = subsample(train, cfg.abod_max_reference, cfg.seed); break;
    }
    std::vector<double> scores;
    if (kind == BaselineKind::abod) {
      for (std::size_t r = 0; r < m.reference_.rows(); ++r) scores.push_back(m.score(m.reference_.row(r)));
    } else {
      for (std::size_t r = 0; r < train.rows(); ++r) {
        scores.push_back(kind == BaselineKind::knn ? knn_score(m.reference_, train.row(r), cfg.knn_k, r)
                                                   : m.score(train.row(r)));
      }
    }
    for (double s : scores)
      if (!std::isfinite(s)) throw Error(std::string("non-finite training score for ") + to_string(kind));
    m.training_scores_ = scores;
    m.threshold_ = nearest_rank_quantile(std::move(scores), 1.0 - cfg.contamination);
    return m;
  }

  double score(std::span<const double> q) const {
    switch (kind_) {
      case BaselineKind::knn: return knn_score(reference_, q, cfg_.knn_k);
      case BaselineKind::pca: return pca_score(pca_, q);
      case BaselineKind::hbod: return hbod_score(hbod_, q);
      case BaselineKind::abod: return abod_score(reference_, q);
    }
    return 0.0;
  }

  bool decide(std::span<const double> q) const { return score(q) > threshold_; }

  BaselineKind kind() const { return kind_; }
  double threshold() const { return threshold_; }
  const std::vector<double>& training_scores() const { return training_scores_; }

 private:
  static Matrix subsample(const Matrix& train, std::size_t cap, std::uint64_t seed) {
    if (cap == 0 || train.rows() <= cap) return train;
    std::vector<std::size_t> idx(train.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    Matrix out(0, train.cols());
    for (auto i : idx) out.append_row(train.row(i));
    return out;
  }

  BaselineKind kind_ = BaselineKind::knn;
  BaselineConfig cfg_;
  Matrix reference_;
  PcaFit pca_;
  HbodFit hbod_;
  std::vector<double> training_scores_;
  double threshold_ = 0.0;
};

}  // namespace adm
