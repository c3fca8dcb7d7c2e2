#pragma once

// Deterministic in-process replay: edge ticks in simulated time, per-packet delay/loss,
// arrival-ordered delivery of encoded datagrams to the fog gateway.

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "adm/edge_node.hpp"
#include "adm/fog_gateway.hpp"
#include "adm/scenario.hpp"

namespace adm {

struct ReplayOptions {
  DelayModel delay = DelayModel::ideal();
  std::uint64_t seed = 0;
  std::size_t devices = 1;  // each device replays the same test stream
  std::uint32_t first_device_id = 1;
};

struct ReplayResult {
  std::vector<FinalDecision> decisions;
  std::uint64_t sent = 0;
  std::uint64_t lost = 0;
  std::uint64_t delivered = 0;
  GatewayStats gateway;
};

inline ReplayResult replay(const LabeledDataset& test, const FeatureSchema& schema, const DetectorModel& edge,
                           FogGateway& gateway, const ReplayOptions& opt = {}) {
  opt.delay.validate();
  struct InFlight {
    double arrival_ms;
    std::uint64_t order;
    std::vector<std::uint8_t> bytes;
  };
  std::vector<InFlight> flights;
  ReplayResult result;
  std::mt19937_64 rng(opt.seed);
  const Matrix points = test.select(schema);

  for (std::size_t dev = 0; dev < opt.devices; ++dev) {
    const auto device_id = static_cast<std::uint32_t>(opt.first_device_id + dev);
    EdgeNode node(device_id, edge, schema, test.size() ? test.seq.front() : 0);
    for (std::size_t i = 0; i < test.size(); ++i) {
      auto packet = node.tick(points.row(i), test.timestamp_ms[i]);
      ++result.sent;
      const auto delay = sample_delay(opt.delay, rng);
      if (!delay) {
        ++result.lost;
        continue;
      }
      flights.push_back({static_cast<double>(test.timestamp_ms[i]) + *delay, result.sent, encode(packet)});
    }
  }
  std::stable_sort(flights.begin(), flights.end(), [](const InFlight& a, const InFlight& b) {
    return a.arrival_ms < b.arrival_ms || (a.arrival_ms == b.arrival_ms && a.order < b.order);
  });
  for (const auto& f : flights) {
    ++result.delivered;
    if (auto d = gateway.ingest_datagram(f.bytes, f.arrival_ms)) result.decisions.push_back(*d);
  }
  result.gateway = gateway.stats();
  return result;
}

}  // namespace adm
