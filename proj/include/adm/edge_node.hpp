#pragma once

// Simulated cellular-IoT edge device: aggregates high-rate IMU samples over one
// low-rate GNSS interval, runs the edge detector and emits telemetry packets.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adm/detector.hpp"
#include "adm/wire_protocol.hpp"

namespace adm {

// Every feature a device can report, in dataset column order.
enum class Feature : std::uint8_t {
  lat, lon, alt, speed, sats,
  acc_rms_x, acc_rms_y, acc_rms_z,
  mag_rms_x, mag_rms_y, mag_rms_z,
};

inline constexpr std::size_t kFeatureCount = 11;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "lat",       "lon",       "alt",       "speed",     "sats",     "acc_rms_x",
    "acc_rms_y", "acc_rms_z", "mag_rms_x", "mag_rms_y", "mag_rms_z"};

inline std::string_view feature_name(Feature f) { return kFeatureNames[static_cast<std::size_t>(f)]; }

inline Feature parse_feature(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureCount; ++i)
    if (kFeatureNames[i] == name) return static_cast<Feature>(i);
  throw ConfigError("unknown feature '" + std::string(name) + "'");
}

using FeatureRecord = std::array<double, kFeatureCount>;

class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<Feature> features) : features_(std::move(features)) {
    if (features_.empty()) throw ConfigError("feature schema is empty");
  }

  // lat, lon, acc_rms_{x,y,z}, mag_rms_{x,y,z}; NO-GPS drops lat and lon.
  static FeatureSchema standard(bool gps) {
    std::vector<Feature> f;
    if (gps) f = {Feature::lat, Feature::lon};
    for (auto x : {Feature::acc_rms_x, Feature::acc_rms_y, Feature::acc_rms_z, Feature::mag_rms_x,
                   Feature::mag_rms_y, Feature::mag_rms_z})
      f.push_back(x);
    return FeatureSchema(std::move(f));
  }

  static FeatureSchema parse_variant(std::string_view v) {
    if (v == "gps") return standard(true);
    if (v == "no-gps") return standard(false);
    throw ConfigError("unknown schema '" + std::string(v) + "' (expected gps|no-gps)");
  }

  bool gps_enabled() const {
    for (auto f : features_)
      if (f == Feature::lat || f == Feature::lon) return true;
    return false;
  }

  std::size_t size() const { return features_.size(); }
  const std::vector<Feature>& features() const { return features_; }

  std::vector<double> select(const FeatureRecord& record) const {
    std::vector<double> out;
    out.reserve(features_.size());
    for (auto f : features_) out.push_back(record[static_cast<std::size_t>(f)]);
    return out;
  }

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;

 private:
  std::vector<Feature> features_;
};

// One low-rate GNSS sample.
struct S1Sample {
  double lat = 0.0;   // deg
  double lon = 0.0;   // deg
  double alt = 0.0;   // m
  double speed = 0.0; // m/s
  double sats = 0.0;
};

// One high-rate IMU sample: acceleration x,y,z in g then magnetic field x,y,z in uT.
using S2Sample = std::array<double, 6>;

struct SensorFrame {
  std::uint64_t t_ms = 0;
  std::optional<S1Sample> s1;  // empty when the GNSS module has no fix
  std::vector<S2Sample> s2_window;
};

struct DataPoint {
  std::uint32_t seq = 0;
  std::uint64_t t_emit_ms = 0;
  std::vector<double> features;
  bool stale_gnss = false;
};

// Number of high-rate samples l with (k-1)*delta1 < l*delta2 <= k*delta1 (times in microseconds).
inline std::size_t samples_in_interval(std::uint64_t k, std::uint64_t delta1_us, std::uint64_t delta2_us) {
  if (k == 0) return 0;
  const std::uint64_t hi = (k * delta1_us) / delta2_us;
  const std::uint64_t lo = ((k - 1) * delta1_us) / delta2_us;
  return static_cast<std::size_t>(hi - lo);
}

// Per-channel root mean square over the M samples actually present.
template <std::size_t C>
std::array<double, C> rms_aggregate(std::span<const std::array<double, C>> samples) {
  if (samples.empty()) throw EmptyDataset("RMS aggregation over an empty window");
  std::array<double, C> acc{};
  for (const auto& s : samples)
    for (std::size_t c = 0; c < C; ++c) acc[c] += s[c] * s[c];
  for (auto& a : acc) a = std::sqrt(a / static_cast<double>(samples.size()));
  return acc;
}

inline FeatureRecord make_record(const S1Sample& s1, const S2Sample& rms) {
  return {s1.lat, s1.lon, s1.alt, s1.speed, s1.sats, rms[0], rms[1], rms[2], rms[3], rms[4], rms[5]};
}

// Builds the schema-ordered data point for tick k. Without a fix the caller's last-known
// S1 sample is substituted and the point is marked stale.
inline DataPoint assemble_data_point(const SensorFrame& frame, const FeatureSchema& schema, std::uint32_t k,
                                     const S1Sample* last_known = nullptr) {
  DataPoint p;
  p.seq = k;
  p.t_emit_ms = frame.t_ms;
  const S1Sample* s1 = frame.s1 ? &*frame.s1 : last_known;
  if (!s1) throw Error("no GNSS fix and no last-known position for tick " + std::to_string(k));
  p.stale_gnss = !frame.s1.has_value();
  const auto rms = rms_aggregate<6>(frame.s2_window);
  p.features = schema.select(make_record(*s1, rms));
  return p;
}

// Tick-driven edge device. Keeps no sample history beyond the current frame.
class EdgeNode {
 public:
  EdgeNode(std::uint32_t device_id, DetectorModel detector, FeatureSchema schema, std::uint32_t first_seq = 0)
      : device_id_(device_id), detector_(std::move(detector)), schema_(std::move(schema)), next_seq_(first_seq) {
    if (detector_.input_dim() != schema_.size())
      throw ConfigError("edge detector expects " + std::to_string(detector_.input_dim()) +
                        " features but schema has " + std::to_string(schema_.size()));
    if (schema_.size() > kMaxWireFeatures) throw ConfigError("schema exceeds the wire feature limit");
  }

  TelemetryPacket tick(const SensorFrame& frame) {
    auto point = assemble_data_point(frame, schema_, next_seq_, last_fix_ ? &*last_fix_ : nullptr);
    if (frame.s1) last_fix_ = frame.s1;
    return emit(point.features, point.t_emit_ms, point.stale_gnss);
  }

  // Tick with an already-aggregated point (dataset replay).
  TelemetryPacket tick(std::span<const double> features, std::uint64_t t_emit_ms, bool stale_gnss = false) {
    return emit(features, t_emit_ms, stale_gnss);
  }

  std::uint32_t device_id() const { return device_id_; }
  std::uint32_t next_seq() const { return next_seq_; }
  const Decision& last_decision() const { return last_decision_; }
  // Wall-clock time of the last detection (assembly excluded).
  double last_latency_ms() const { return last_latency_ms_; }
  const FeatureSchema& schema() const { return schema_; }

 private:
  TelemetryPacket emit(std::span<const double> features, std::uint64_t t_emit_ms, bool stale) {
    const auto start = std::chrono::steady_clock::now();
    last_decision_ = detect(detector_, features);
    last_latency_ms_ =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    TelemetryPacket p;
    p.device_id = device_id_;
    p.seq = next_seq_++;
    p.timestamp_ms = t_emit_ms;
    p.flags = stale ? kFlagStaleGnss : 0;
    p.features.assign(features.begin(), features.end());
    p.edge_is_anomaly = last_decision_.is_anomaly;
    p.edge_confidence = to_wire_confidence(last_decision_.confidence);
    return p;
  }

  std::uint32_t device_id_;
  DetectorModel detector_;
  FeatureSchema schema_;
  std::uint32_t next_seq_;
  std::optional<S1Sample> last_fix_;
  Decision last_decision_;
  double last_latency_ms_ = 0.0;
};

}  // namespace adm
