#pragma once

// Mini-batch Adam training of autoencoders on normal-behaviour data.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "adm/core_nn.hpp"
#include "adm/detail/format.hpp"
#include "adm/matrix.hpp"

namespace adm {

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 16;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int early_stop_patience = 10;  // 0 disables
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (epochs <= 0) throw ConfigError("epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1))
      throw ConfigError("beta1/beta2 must lie in (0,1)");
    if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
    if (early_stop_patience < 0) throw ConfigError("early_stop_patience must be >= 0");
  }
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Per-feature mean and population standard deviation; stds below 1e-8 become 1.
inline Normalizer fit_normalizer(const Matrix& data) {
  if (data.empty()) throw EmptyDataset("cannot fit a normalizer on an empty dataset");
  const std::size_t n = data.rows(), f = data.cols();
  Normalizer norm{std::vector<double>(f, 0.0), std::vector<double>(f, 0.0)};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < f; ++c) norm.means[c] += data(r, c);
  for (auto& m : norm.means) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < f; ++c) {
      const double d = data(r, c) - norm.means[c];
      norm.stds[c] += d * d;
    }
  for (auto& s : norm.stds) {
    s = std::sqrt(s / static_cast<double>(n));
    if (s < 1e-8) s = 1.0;
  }
  return norm;
}

inline Matrix normalize_rows(const Normalizer& norm, const Matrix& data) {
  Matrix out = data;
  for (std::size_t r = 0; r < out.rows(); ++r) norm.apply_inplace(out.row(r));
  return out;
}

inline double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// Glorot-uniform weights, zero biases, in the autoencoder's flat parameter layout.
inline std::vector<double> glorot_init(const ArchitectureSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  const auto sizes = spec.layer_sizes();
  std::vector<double> params;
  params.reserve(spec.parameter_count());
  for (std::size_t l = 1; l < sizes.size(); ++l) {
    const double bound = glorot_bound(sizes[l - 1], sizes[l]);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t k = 0; k < sizes[l] * sizes[l - 1]; ++k) params.push_back(dist(rng));
    params.insert(params.end(), sizes[l], 0.0);
  }
  return params;
}

// Mean reconstruction error over a batch of normalized rows.
inline double loss(const AutoencoderModel& model, const Matrix& batch) {
  if (batch.empty()) throw EmptyDataset("loss of an empty batch");
  double sum = 0.0;
  for (std::size_t r = 0; r < batch.rows(); ++r) sum += reconstruction_error(model, batch.row(r));
  return sum / static_cast<double>(batch.rows());
}

namespace detail {

// Reusable buffers for single-row backpropagation.
class Backprop {
 public:
  explicit Backprop(const AutoencoderModel& model) {
    const auto sizes = model.spec().layer_sizes();
    acts_.resize(sizes.size());
    deltas_.resize(sizes.size());
    for (std::size_t l = 0; l < sizes.size(); ++l) {
      acts_[l].assign(sizes[l], 0.0);
      deltas_[l].assign(sizes[l], 0.0);
    }
  }

  // Adds scale * d Err(v) / d theta into grad; returns Err(v).
  double accumulate(const AutoencoderModel& model, std::span<const double> v, double scale,
                    std::span<double> grad) {
    const std::size_t layers = model.layer_count();
    std::copy(v.begin(), v.end(), acts_[0].begin());
    for (std::size_t l = 0; l < layers; ++l) {
      const auto layer = model.layer(l);
      const double* prev = acts_[l].data();
      double* out = acts_[l + 1].data();
      for (std::size_t i = 0; i < layer.out; ++i) {
        const double* w = layer.weights.data() + i * layer.in;
        double acc = 0.0;
        for (std::size_t j = 0; j < layer.in; ++j) acc += w[j] * prev[j];
        acc += layer.biases[i];
        out[i] = (l + 1 < layers) ? relu(acc) : acc;
      }
    }

    double err = 0.0;
    auto& top = deltas_[layers];
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double r = acts_[layers][i] - v[i];
      err += r * r;
      top[i] = 2.0 * r * scale;
    }

    for (std::size_t l = layers; l-- > 0;) {
      const auto layer = model.layer(l);
      const double* delta = deltas_[l + 1].data();
      const double* prev = acts_[l].data();
      double* gw = grad.data() + model.layer_offset(l);
      double* gb = gw + layer.in * layer.out;
      for (std::size_t i = 0; i < layer.out; ++i) {
        const double d = delta[i];
        if (d == 0.0) continue;
        double* row = gw + i * layer.in;
        for (std::size_t j = 0; j < layer.in; ++j) row[j] += d * prev[j];
        gb[i] += d;
      }
      if (l == 0) break;
      auto& back = deltas_[l];
      std::fill(back.begin(), back.end(), 0.0);
      for (std::size_t i = 0; i < layer.out; ++i) {
        const double d = delta[i];
        if (d == 0.0) continue;
        const double* w = layer.weights.data() + i * layer.in;
        for (std::size_t j = 0; j < layer.in; ++j) back[j] += d * w[j];
      }
      // ReLU subgradient at 0 is taken as 0.
      for (std::size_t j = 0; j < layer.in; ++j)
        if (!(prev[j] > 0.0)) back[j] = 0.0;
    }
    return err;
  }

 private:
  std::vector<std::vector<double>> acts_;
  std::vector<std::vector<double>> deltas_;
};

inline void gradient_rows(const AutoencoderModel& model, const Matrix& data,
                          std::span<const std::size_t> rows, std::span<double> grad,
                          Backprop& bp) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const double scale = 1.0 / static_cast<double>(rows.size());
  for (auto r : rows) bp.accumulate(model, data.row(r), scale, grad);
}

}  // namespace detail

// Gradient of the batch-mean reconstruction error w.r.t. every weight and bias.
inline std::vector<double> gradient(const AutoencoderModel& model, const Matrix& batch) {
  if (batch.empty()) throw EmptyDataset("gradient of an empty batch");
  std::vector<double> grad(model.parameters().size(), 0.0);
  std::vector<std::size_t> rows(batch.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  detail::Backprop bp(model);
  detail::gradient_rows(model, batch, rows, grad, bp);
  return grad;
}

inline void adam_step(std::span<double> theta, AdamState& state, std::span<const double> g,
                      const TrainConfig& cfg) {
  if (theta.size() != g.size() || state.m.size() != g.size() || state.v.size() != g.size())
    throw ShapeError("adam_step: parameter/gradient/state sizes differ");
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    theta[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double elapsed_ms = 0.0;
};

struct TrainingHistory {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  bool stopped_early = false;

  double final_loss() const { return epochs.empty() ? 0.0 : epochs.back().loss; }
};

inline void write_history_csv(std::ostream& os, const TrainingHistory& h) {
  os << "epoch,loss,elapsed_ms\n";
  for (const auto& e : h.epochs)
    os << e.epoch << ',' << detail::format_double(e.loss) << ',' << detail::format_double(e.elapsed_ms) << '\n';
}

struct FitResult {
  AutoencoderModel model;
  TrainingHistory history;
};

// Trains on raw rows: fits the normalizer, initializes with Glorot, runs Adam over
// per-epoch shuffled mini-batches (last short batch kept), monitors full-set loss.
inline FitResult fit(const Matrix& data, const ArchitectureSpec& spec, const TrainConfig& cfg) {
  cfg.validate();
  spec.require_bottleneck();
  if (data.rows() < 2) throw EmptyDataset("training requires at least 2 rows");
  if (data.cols() != spec.input_dim) throw ShapeError("training data width differs from input_dim");
  if (data.rows() < cfg.batch_size) throw ConfigError("batch_size exceeds dataset size");
  for (double x : data.data())
    if (!std::isfinite(x)) throw ConfigError("training data contains non-finite values");

  const auto start = std::chrono::steady_clock::now();
  Normalizer norm = fit_normalizer(data);
  const Matrix normalized = normalize_rows(norm, data);
  AutoencoderModel model(spec, norm, glorot_init(spec, cfg.rng_seed));

  std::seed_seq shuffle_seed{static_cast<std::uint32_t>(cfg.rng_seed),
                             static_cast<std::uint32_t>(cfg.rng_seed >> 32), 0x5eedu};
  std::mt19937_64 shuffle_rng(shuffle_seed);

  std::vector<std::size_t> order(normalized.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(model.parameters().size(), 0.0);
  AdamState state(grad.size());
  detail::Backprop bp(model);

  TrainingHistory history;
  history.seed = cfg.rng_seed;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::span<const std::size_t> rows(order.data() + begin, end - begin);
      detail::gradient_rows(model, normalized, rows, grad, bp);
      adam_step(model.mutable_parameters(), state, grad, cfg);
    }
    const double epoch_loss = loss(model, normalized);
    if (!std::isfinite(epoch_loss)) throw TrainingDiverged(epoch);
    const double elapsed =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    history.epochs.push_back({epoch, epoch_loss, elapsed});

    if (epoch_loss < best) {
      best = epoch_loss;
      since_best = 0;
    } else if (cfg.early_stop_patience > 0 && ++since_best >= cfg.early_stop_patience) {
      history.stopped_early = true;
      break;
    }
  }
  return {std::move(model), std::move(history)};
}

}  // namespace adm
