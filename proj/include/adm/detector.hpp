#pragma once

// Reconstruction-error anomaly detector with sigmoid confidence and the offload predicate.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "adm/core_nn.hpp"
#include "adm/matrix.hpp"

namespace adm {

struct DetectorModel {
  AutoencoderModel model;
  double threshold = 0.0;  // max reconstruction error over the calibration set

  std::size_t input_dim() const { return model.input_dim(); }
};

struct Decision {
  bool is_anomaly = false;
  double confidence = 0.5;  // in [0.5, 1)
  double raw_error = 0.0;
};

// 1 / (1 + exp(-x)) without overflow for large |x|.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Largest double strictly below 1; confidences saturate here instead of reaching 1.
inline constexpr double kMaxConfidence = 1.0 - 0x1p-53;

// Error of one raw (unnormalized) point under the detector's normalizer.
inline double raw_reconstruction_error(const AutoencoderModel& model, std::span<const double> raw) {
  if (raw.size() != model.input_dim())
    throw ShapeError("point has " + std::to_string(raw.size()) + " features, detector expects " +
                     std::to_string(model.input_dim()));
  auto v = model.normalizer().apply(raw);
  return reconstruction_error(model, v);
}

// Threshold e = max over raw calibration rows of the reconstruction error.
inline DetectorModel calibrate(AutoencoderModel model, const Matrix& train_data) {
  if (train_data.empty()) throw EmptyDataset("calibration set is empty");
  double e = 0.0;
  for (std::size_t r = 0; r < train_data.rows(); ++r)
    e = std::max(e, raw_reconstruction_error(model, train_data.row(r)));
  if (!std::isfinite(e)) throw Error("calibrated threshold is not finite");
  return {std::move(model), e};
}

// Decision rule given a reconstruction error and a threshold: anomaly iff err > e,
// confidence S(err - e) for anomalies and 1 - S(err - e) otherwise.
inline Decision decide(double err, double threshold) {
  const double c = sigmoid(err - threshold);
  Decision d;
  d.raw_error = err;
  d.is_anomaly = err > threshold;
  d.confidence = std::min(d.is_anomaly ? c : 1.0 - c, kMaxConfidence);
  if (d.confidence < 0.5) d.confidence = 0.5;
  return d;
}

inline Decision detect(const DetectorModel& det, std::span<const double> point) {
  return decide(raw_reconstruction_error(det.model, point), det.threshold);
}

// Offload when the decision's confidence is strictly below c_th.
inline bool should_offload(const Decision& d, double c_th) { return d.confidence < c_th; }

}  // namespace adm
