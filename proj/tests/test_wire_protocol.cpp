#include <gtest/gtest.h>

#include <random>

#include "adm/udp.hpp"
#include "adm/wire_protocol.hpp"

using namespace adm;

namespace {

TelemetryPacket random_packet(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> u32;
  std::uniform_int_distribution<std::uint64_t> u64;
  std::uniform_int_distribution<int> count(0, 64), byte(0, 255), bit(0, 1);
  std::normal_distribution<float> z(0.0f, 100.0f);
  std::uniform_real_distribution<float> conf(0.5f, 1.0f);
  TelemetryPacket p;
  p.device_id = u32(rng);
  p.seq = u32(rng);
  p.timestamp_ms = u64(rng);
  p.flags = static_cast<std::uint8_t>(byte(rng));
  p.features.resize(static_cast<std::size_t>(count(rng)));
  for (auto& f : p.features) f = z(rng);
  p.edge_is_anomaly = bit(rng) == 1;
  p.edge_confidence = std::min(conf(rng), kMaxWireConfidence);
  return p;
}

WireErrc decode_error(std::span<const std::uint8_t> bytes) {
  try {
    decode(bytes);
  } catch (const WireError& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode succeeded";
  return WireErrc::size;
}

}  // namespace

TEST(Encode, EightFeaturePacketIs57Bytes) {
  TelemetryPacket p;
  p.features.assign(8, 1.0f);
  p.edge_confidence = 0.9f;
  EXPECT_EQ(encode(p).size(), 2u + 4 + 4 + 8 + 1 + 1 + 32 + 1 + 4);
  EXPECT_EQ(encoded_size(8), 57u);
}

TEST(Encode, ZeroPacket) {
  TelemetryPacket p;
  p.edge_confidence = 0.0f;
  const auto b = encode(p);
  ASSERT_EQ(b.size(), 25u);
  EXPECT_EQ(b[0], 0xAD);
  EXPECT_EQ(b[1], 0x01);
  for (std::size_t i = 2; i < b.size(); ++i) EXPECT_EQ(b[i], 0) << i;
}

TEST(Encode, FieldOrderLittleEndian) {
  TelemetryPacket p;
  p.device_id = 0x04030201;
  p.seq = 0x08070605;
  p.timestamp_ms = 0x100f0e0d0c0b0a09ULL;
  p.flags = kFlagStaleGnss;
  p.features = {1.0f};
  p.edge_is_anomaly = true;
  p.edge_confidence = 0.75f;
  const auto b = encode(p);
  for (int i = 0; i < 16; ++i) EXPECT_EQ(b[2 + i], i + 1);
  EXPECT_EQ(b[18], 1);  // flags
  EXPECT_EQ(b[19], 1);  // count
  EXPECT_EQ(b[23], 0x3f);  // 1.0f = 0x3f800000
  EXPECT_EQ(b[24], 1);
  EXPECT_EQ(b[28], 0x3f);  // 0.75f = 0x3f400000
}

TEST(Encode, TooManyFeatures) {
  TelemetryPacket p;
  p.features.assign(65, 0.0f);
  try {
    encode(p);
    FAIL();
  } catch (const WireError& e) {
    EXPECT_EQ(e.code(), WireErrc::size);
  }
}

TEST(Decode, RoundTripRandomPackets) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10000; ++i) {
    const auto p = random_packet(rng);
    const auto bytes = encode(p);
    EXPECT_EQ(bytes.size(), encoded_size(p.features.size()));
    const auto q = decode(bytes);
    ASSERT_EQ(q, p);
    EXPECT_EQ(encode(q), bytes);
  }
}

TEST(Decode, DistinctErrors) {
  TelemetryPacket p;
  p.features.assign(8, 2.0f);
  p.edge_confidence = 0.8f;
  auto good = encode(p);

  auto bad = good;
  bad[0] = 0x00;
  EXPECT_EQ(decode_error(bad), WireErrc::bad_magic);
  EXPECT_EQ(decode_error(std::span<const std::uint8_t>(good).first(1)), WireErrc::short_read);
  EXPECT_EQ(decode_error(std::span<const std::uint8_t>(good).first(20)), WireErrc::short_read);
  // Declared 8 features, payload of 4.
  EXPECT_EQ(decode_error(std::span<const std::uint8_t>(good).first(encoded_size(4))), WireErrc::length_mismatch);
  auto longer = good;
  longer.push_back(0);
  EXPECT_EQ(decode_error(longer), WireErrc::length_mismatch);

  auto conf = good;
  const float one = 1.0f;
  std::memcpy(conf.data() + conf.size() - 4, &one, 4);
  EXPECT_EQ(decode_error(conf), WireErrc::confidence_range);
  const float low = 0.25f;
  std::memcpy(conf.data() + conf.size() - 4, &low, 4);
  EXPECT_EQ(decode_error(conf), WireErrc::confidence_range);

  auto flag = good;
  flag[flag.size() - 5] = 2;
  EXPECT_EQ(decode_error(flag), WireErrc::invalid_field);

  auto count = good;
  count[19] = 65;
  EXPECT_EQ(decode_error(count), WireErrc::size);

  auto nan = good;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + 20, &q, 4);
  EXPECT_EQ(decode_error(nan), WireErrc::invalid_field);
}

TEST(Decode, FuzzNeverCrashes) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> byte(0, 255), len(0, 300), coin(0, 3);
  std::size_t ok = 0;
  for (int i = 0; i < 100000; ++i) {
    std::vector<std::uint8_t> b(static_cast<std::size_t>(len(rng)));
    for (auto& x : b) x = static_cast<std::uint8_t>(byte(rng));
    // Bias a share of inputs towards the valid prefix so deeper checks are exercised.
    if (coin(rng) != 0 && b.size() >= 2) {
      b[0] = kWireMagic0;
      b[1] = kWireMagic1;
    }
    try {
      decode(b);
      ++ok;
    } catch (const WireError&) {
    }
  }
  SUCCEED() << ok << " accepted";
}

TEST(WireConfidence, NeverReachesOne) {
  EXPECT_EQ(to_wire_confidence(0.5), 0.5f);
  EXPECT_LT(to_wire_confidence(1.0 - 1e-12), 1.0f);
  EXPECT_EQ(to_wire_confidence(0.75), 0.75f);
  EXPECT_GE(to_wire_confidence(0.4), 0.5f);
}

TEST(Udp, LoopbackRoundTrip) {
  UdpSocket rx;
  rx.bind("127.0.0.1", 0);
  const auto port = rx.local_port();
  ASSERT_NE(port, 0);
  UdpSocket tx;
  TelemetryPacket p{7, 42, 1234567, 0, {1.5f, -2.0f, 0.25f}, true, 0.875f};
  tx.send_to(encode(p), "127.0.0.1", port);
  const auto got = rx.receive(2000);
  ASSERT_TRUE(got.has_value());
  EXPECT_EQ(decode(*got), p);
  EXPECT_FALSE(rx.receive(10).has_value());
  EXPECT_THROW(tx.send_to(encode(p), "not-an-ip", port), ConfigError);
}
