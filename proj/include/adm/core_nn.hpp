#pragma once

// Dense feed-forward autoencoder: architecture profiles, feature normalizer,
// parameter storage and inference.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adm/error.hpp"

namespace adm {

enum class Profile { HL1, HL3, HL5 };

inline std::string_view to_string(Profile p) {
  switch (p) {
    case Profile::HL1: return "hl1";
    case Profile::HL3: return "hl3";
    case Profile::HL5: return "hl5";
  }
  return "?";
}

inline Profile parse_profile(std::string_view s) {
  if (s == "hl1" || s == "HL1") return Profile::HL1;
  if (s == "hl3" || s == "HL3") return Profile::HL3;
  if (s == "hl5" || s == "HL5") return Profile::HL5;
  throw ConfigError("unknown profile '" + std::string(s) + "' (expected hl1|hl3|hl5)");
}

struct ArchitectureSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_sizes;

  // input, hidden..., output
  std::vector<std::size_t> layer_sizes() const {
    std::vector<std::size_t> sizes;
    sizes.reserve(hidden_sizes.size() + 2);
    sizes.push_back(input_dim);
    sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
    sizes.push_back(input_dim);
    return sizes;
  }

  std::size_t parameter_count() const {
    auto sizes = layer_sizes();
    std::size_t count = 0;
    for (std::size_t l = 1; l < sizes.size(); ++l) count += sizes[l] * sizes[l - 1] + sizes[l];
    return count;
  }

  // Structural checks only; hand-built test networks may be as wide as the input.
  void validate() const {
    if (input_dim < 1) throw InvalidDimension("input_dim must be positive");
    if (hidden_sizes.empty()) throw InvalidDimension("at least one hidden layer required");
    const auto k = hidden_sizes.size();
    for (std::size_t i = 0; i < k; ++i) {
      if (hidden_sizes[i] == 0) throw InvalidDimension("hidden layer of size 0");
      if (hidden_sizes[i] != hidden_sizes[k - 1 - i])
        throw InvalidDimension("hidden layer profile must be palindromic");
    }
  }

  // Every hidden layer strictly narrower than the input (required for training).
  void require_bottleneck() const {
    validate();
    if (input_dim < 2) throw InvalidDimension("input_dim must be >= 2");
    for (auto h : hidden_sizes)
      if (h >= input_dim) throw InvalidDimension("hidden layer sizes must lie in [1, input_dim-1]");
  }

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

// Hidden sizes are fractions of n rounded up and clamped to [1, n-1].
inline ArchitectureSpec build_architecture(std::size_t n, Profile profile) {
  if (n < 2) throw InvalidDimension("input dimension must be >= 2, got " + std::to_string(n));
  auto frac = [n](std::size_t num, std::size_t den) {
    std::size_t v = (n * num + den - 1) / den;
    return std::clamp<std::size_t>(v, 1, n - 1);
  };
  ArchitectureSpec spec{n, {}};
  switch (profile) {
    case Profile::HL1: spec.hidden_sizes = {frac(1, 2)}; break;
    case Profile::HL3: spec.hidden_sizes = {frac(1, 2), frac(1, 4), frac(1, 2)}; break;
    case Profile::HL5:
      spec.hidden_sizes = {frac(3, 4), frac(1, 2), frac(1, 4), frac(1, 2), frac(3, 4)};
      break;
  }
  return spec;
}

// Per-feature z-scoring. Constant features are stored with std = 1.
struct Normalizer {
  std::vector<double> means;
  std::vector<double> stds;

  std::size_t dim() const { return means.size(); }

  void apply_inplace(std::span<double> v) const {
    if (v.size() != means.size()) throw ShapeError("normalizer dimension mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - means[i]) / stds[i];
  }

  std::vector<double> apply(std::span<const double> v) const {
    std::vector<double> out(v.begin(), v.end());
    apply_inplace(out);
    return out;
  }

  static Normalizer identity(std::size_t n) {
    return Normalizer{std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
  }

  friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

// Read-only view on one dense layer: out x in weights (row = destination node), out biases.
template <typename Scalar>
struct LayerView {
  std::size_t in = 0;
  std::size_t out = 0;
  std::span<const Scalar> weights;
  std::span<const Scalar> biases;

  Scalar weight(std::size_t row, std::size_t col) const { return weights[row * in + col]; }
};

// Autoencoder parameters stored contiguously, layer by layer: weights row-major, then biases.
// Hidden layers use ReLU, the output layer is linear.
template <typename Scalar>
class BasicAutoencoder {
 public:
  using scalar_type = Scalar;

  BasicAutoencoder() = default;

  // Zero-initialized parameters.
  explicit BasicAutoencoder(ArchitectureSpec spec, Normalizer normalizer = {})
      : spec_(std::move(spec)), normalizer_(std::move(normalizer)) {
    spec_.validate();
    if (normalizer_.dim() == 0) normalizer_ = Normalizer::identity(spec_.input_dim);
    if (normalizer_.dim() != spec_.input_dim || normalizer_.stds.size() != spec_.input_dim)
      throw ShapeError("normalizer length differs from input_dim");
    sizes_ = spec_.layer_sizes();
    std::size_t offset = 0;
    for (std::size_t l = 1; l < sizes_.size(); ++l) {
      offsets_.push_back(offset);
      offset += sizes_[l] * sizes_[l - 1] + sizes_[l];
    }
    params_.assign(offset, Scalar{0});
  }

  BasicAutoencoder(ArchitectureSpec spec, Normalizer normalizer, std::vector<Scalar> params)
      : BasicAutoencoder(std::move(spec), std::move(normalizer)) {
    if (params.size() != params_.size())
      throw ShapeError("parameter vector has " + std::to_string(params.size()) + " entries, expected " +
                       std::to_string(params_.size()));
    params_ = std::move(params);
  }

  // Converts parameter storage precision (e.g. f64 -> f32 for firmware export).
  template <typename Other>
  BasicAutoencoder<Other> cast() const {
    std::vector<Other> p(params_.begin(), params_.end());
    return BasicAutoencoder<Other>(spec_, normalizer_, std::move(p));
  }

  const ArchitectureSpec& spec() const { return spec_; }
  const Normalizer& normalizer() const { return normalizer_; }
  std::size_t input_dim() const { return spec_.input_dim; }
  std::size_t layer_count() const { return offsets_.size(); }
  std::size_t layer_offset(std::size_t l) const { return offsets_[l]; }

  LayerView<Scalar> layer(std::size_t l) const {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    std::span<const Scalar> all(params_);
    return {in, out, all.subspan(offsets_[l], in * out), all.subspan(offsets_[l] + in * out, out)};
  }

  std::span<const Scalar> parameters() const { return params_; }
  // Only for owners that are not sharing the model (the trainer).
  std::span<Scalar> mutable_parameters() { return params_; }

  friend bool operator==(const BasicAutoencoder&, const BasicAutoencoder&) = default;

 private:
  ArchitectureSpec spec_;
  Normalizer normalizer_;
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<Scalar> params_;
};

using AutoencoderModel = BasicAutoencoder<double>;
using AutoencoderModelF32 = BasicAutoencoder<float>;

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

// Inference on an already-normalized vector; accumulation is always in double.
template <typename Scalar>
std::vector<double> forward(const BasicAutoencoder<Scalar>& model, std::span<const double> v) {
  if (v.size() != model.input_dim())
    throw ShapeError("input has " + std::to_string(v.size()) + " features, model expects " +
                     std::to_string(model.input_dim()));
  std::vector<double> prev(v.begin(), v.end());
  std::vector<double> next;
  const std::size_t layers = model.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    const auto layer = model.layer(l);
    next.assign(layer.out, 0.0);
    for (std::size_t i = 0; i < layer.out; ++i) {
      const Scalar* w = layer.weights.data() + i * layer.in;
      double acc = 0.0;
      for (std::size_t j = 0; j < layer.in; ++j) acc += static_cast<double>(w[j]) * prev[j];
      acc += static_cast<double>(layer.biases[i]);
      next[i] = (l + 1 < layers) ? relu(acc) : acc;
    }
    prev.swap(next);
  }
  return prev;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Sum of squared residuals between v and its reconstruction.
template <typename Scalar>
double reconstruction_error(const BasicAutoencoder<Scalar>& model, std::span<const double> v) {
  const auto out = forward(model, v);
  return squared_distance(v, out);
}

}  // namespace adm
