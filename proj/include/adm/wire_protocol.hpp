#pragma once

// Telemetry datagram codec (little-endian, no padding):
//
//   0xAD 0x01 | device_id u32 | seq u32 | timestamp_ms u64 | flags u8
//   | feature_count u8 | features f32 x feature_count | edge_is_anomaly u8
//   | edge_confidence f32

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "adm/model_format.hpp"

namespace adm {

inline constexpr std::uint8_t kWireMagic0 = 0xAD;
inline constexpr std::uint8_t kWireMagic1 = 0x01;
inline constexpr std::size_t kMaxWireFeatures = 64;
inline constexpr std::size_t kWireFixedBytes = 25;
inline constexpr std::uint16_t kDefaultPort = 47808;

enum PacketFlags : std::uint8_t {
  kFlagStaleGnss = 0x01,
};

struct TelemetryPacket {
  std::uint32_t device_id = 0;
  std::uint32_t seq = 0;
  std::uint64_t timestamp_ms = 0;
  std::uint8_t flags = 0;
  std::vector<float> features;
  bool edge_is_anomaly = false;
  float edge_confidence = 0.5f;

  friend bool operator==(const TelemetryPacket&, const TelemetryPacket&) = default;
};

// Largest float strictly below 1.
inline constexpr float kMaxWireConfidence = 1.0f - 0x1p-24f;

// Narrows a [0.5, 1) confidence to f32 without rounding up to 1.
inline float to_wire_confidence(double c) {
  float f = static_cast<float>(c);
  if (f > kMaxWireConfidence) f = kMaxWireConfidence;
  if (f < 0.5f) f = 0.5f;
  return f;
}

inline std::size_t encoded_size(std::size_t feature_count) {
  return kWireFixedBytes + 4 * feature_count;
}

inline std::vector<std::uint8_t> encode(const TelemetryPacket& p) {
  if (p.features.size() > kMaxWireFeatures)
    throw WireError(WireErrc::size, std::to_string(p.features.size()) + " features (max 64)");
  detail::ByteWriter w;
  w.put<std::uint8_t>(kWireMagic0);
  w.put<std::uint8_t>(kWireMagic1);
  w.put(p.device_id);
  w.put(p.seq);
  w.put(p.timestamp_ms);
  w.put(p.flags);
  w.put(static_cast<std::uint8_t>(p.features.size()));
  for (float f : p.features) w.put(f);
  w.put<std::uint8_t>(p.edge_is_anomaly ? 1 : 0);
  w.put(p.edge_confidence);
  return std::move(w.bytes());
}

inline TelemetryPacket decode(std::span<const std::uint8_t> bytes) {
  auto short_read = [n = bytes.size()] {
    throw WireError(WireErrc::short_read, std::to_string(n) + " bytes");
  };
  if (bytes.size() < 2) short_read();
  if (bytes[0] != kWireMagic0 || bytes[1] != kWireMagic1)
    throw WireError(WireErrc::bad_magic, "expected 0xAD 0x01");
  if (bytes.size() < kWireFixedBytes) short_read();

  detail::ByteReader r(bytes.subspan(2), short_read);
  TelemetryPacket p;
  p.device_id = r.get<std::uint32_t>();
  p.seq = r.get<std::uint32_t>();
  p.timestamp_ms = r.get<std::uint64_t>();
  p.flags = r.get<std::uint8_t>();
  const std::size_t count = r.get<std::uint8_t>();
  if (count > kMaxWireFeatures)
    throw WireError(WireErrc::size, "feature_count " + std::to_string(count));
  if (bytes.size() != encoded_size(count))
    throw WireError(WireErrc::length_mismatch, "feature_count " + std::to_string(count) + " needs " +
                                                   std::to_string(encoded_size(count)) + " bytes, got " +
                                                   std::to_string(bytes.size()));
  p.features.resize(count);
  for (auto& f : p.features) {
    f = r.get<float>();
    if (!std::isfinite(f)) throw WireError(WireErrc::invalid_field, "non-finite feature");
  }
  const auto anomaly = r.get<std::uint8_t>();
  if (anomaly > 1) throw WireError(WireErrc::invalid_field, "edge_is_anomaly must be 0 or 1");
  p.edge_is_anomaly = anomaly == 1;
  p.edge_confidence = r.get<float>();
  if (!(p.edge_confidence >= 0.5f && p.edge_confidence < 1.0f))
    throw WireError(WireErrc::confidence_range, "edge_confidence outside [0.5, 1)");
  return p;
}

}  // namespace adm
