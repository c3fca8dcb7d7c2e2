#pragma once

// Fog gateway: per-device sliding windows over received telemetry and confidence-gated
// re-evaluation of edge decisions with a windowed detector.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "adm/detail/format.hpp"
#include "adm/detector.hpp"
#include "adm/wire_protocol.hpp"

namespace adm {

struct FogConfig {
  std::size_t L = 10;
  double c_th = 0.75;
  std::size_t reorder_tolerance = 3;
  Profile profile = Profile::HL5;

  void validate() const {
    if (L < 2 || L > 20) throw ConfigError("window length L must lie in [2, 20]");
    // 0.5 is accepted and disables offloading (no confidence lies below it).
    if (!(c_th >= 0.5 && c_th <= 1.0)) throw ConfigError("c_th must lie in [0.5, 1]");
  }
};

// Windowed training rows: row i is points i..i+L-1 concatenated oldest first.
inline Matrix build_fog_training_set(const Matrix& points, std::size_t L) {
  if (L == 0 || points.rows() < L)
    throw EmptyDataset("need at least L=" + std::to_string(L) + " points, got " + std::to_string(points.rows()));
  const std::size_t f = points.cols();
  const std::size_t rows = points.rows() - L + 1;
  Matrix out(rows, L * f);
  for (std::size_t i = 0; i < rows; ++i) {
    auto dst = out.row(i);
    for (std::size_t j = 0; j < L; ++j) {
      auto src = points.row(i + j);
      std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(j * f));
    }
  }
  return out;
}

struct WindowPoint {
  std::uint32_t seq = 0;
  std::vector<double> features;
};

// Points received from one device, ordered by seq. Holds the last L points plus
// reorder_tolerance extra so a late point can still be evaluated against its own past.
class DeviceWindow {
 public:
  enum class Insert { inserted, duplicate, too_late };

  DeviceWindow(std::uint32_t device_id, std::size_t L, std::size_t reorder_tolerance)
      : device_id_(device_id), L_(L), tolerance_(reorder_tolerance) {}

  Insert insert(std::uint32_t seq, std::vector<double> features) {
    if (highest_ && static_cast<std::int64_t>(seq) < static_cast<std::int64_t>(*highest_) -
                                                         static_cast<std::int64_t>(tolerance_))
      return Insert::too_late;
    auto it = std::lower_bound(points_.begin(), points_.end(), seq,
                               [](const WindowPoint& p, std::uint32_t s) { return p.seq < s; });
    if (it != points_.end() && it->seq == seq) return Insert::duplicate;
    points_.insert(it, WindowPoint{seq, std::move(features)});
    if (!highest_ || seq > *highest_) highest_ = seq;
    while (points_.size() > L_ + tolerance_) points_.pop_front();
    return Insert::inserted;
  }

  // The last L received points with seq <= k, oldest first; empty when fewer than L exist.
  std::vector<const WindowPoint*> window_ending_at(std::uint32_t k) const {
    auto end = std::upper_bound(points_.begin(), points_.end(), k,
                                [](std::uint32_t s, const WindowPoint& p) { return s < p.seq; });
    const auto available = static_cast<std::size_t>(end - points_.begin());
    if (available < L_) return {};
    std::vector<const WindowPoint*> out;
    for (auto it = end - static_cast<std::ptrdiff_t>(L_); it != end; ++it) out.push_back(&*it);
    return out;
  }

  std::size_t size() const { return std::min(points_.size(), L_); }
  bool full() const { return points_.size() >= L_; }
  std::size_t L() const { return L_; }
  std::uint32_t device_id() const { return device_id_; }
  std::optional<std::uint32_t> highest_seq_seen() const { return highest_; }

 private:
  std::uint32_t device_id_;
  std::size_t L_;
  std::size_t tolerance_;
  std::deque<WindowPoint> points_;
  std::optional<std::uint32_t> highest_;
};

inline std::vector<double> concatenate(std::span<const WindowPoint* const> points) {
  std::vector<double> out;
  for (const auto* p : points) out.insert(out.end(), p->features.begin(), p->features.end());
  return out;
}

// Latest L points oldest first.
inline std::vector<double> concatenate_window(const DeviceWindow& w) {
  if (!w.full()) throw EmptyDataset("window holds fewer than L points");
  return concatenate(w.window_ending_at(*w.highest_seq_seen()));
}

enum class DecisionSource { edge, fog };

inline const char* to_string(DecisionSource s) { return s == DecisionSource::edge ? "EDGE" : "FOG"; }

enum DecisionFlags : std::uint8_t {
  kWindowNotReady = 0x01,
  kWindowGap = 0x02,
  kDecisionStaleGnss = 0x04,
};

struct FinalDecision {
  std::uint32_t device_id = 0;
  std::uint32_t seq = 0;
  DecisionSource source = DecisionSource::edge;
  bool is_anomaly = false;
  double confidence = 0.5;
  double response_delay_ms = 0.0;
  std::uint8_t flags = 0;

  friend bool operator==(const FinalDecision&, const FinalDecision&) = default;
};

struct GatewayStats {
  std::uint64_t received = 0;
  std::uint64_t malformed = 0;
  std::uint64_t schema_mismatch = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t too_late = 0;
  std::uint64_t fog_invocations = 0;
};

class FogGateway {
 public:
  FogGateway(FogConfig cfg, std::shared_ptr<const DetectorModel> fog)
      : cfg_(cfg), fog_(std::move(fog)) {
    cfg_.validate();
    if (!fog_) throw ConfigError("fog gateway requires a fog detector");
    if (fog_->input_dim() % cfg_.L != 0)
      throw ConfigError("fog detector input_dim " + std::to_string(fog_->input_dim()) +
                        " is not a multiple of L=" + std::to_string(cfg_.L));
    features_per_point_ = fog_->input_dim() / cfg_.L;
  }

  // Returns nothing for duplicates, points beyond the reorder tolerance and schema mismatches.
  std::optional<FinalDecision> ingest(const TelemetryPacket& p, double arrival_ms) {
    ++stats_.received;
    if (p.features.size() != features_per_point_) {
      ++stats_.schema_mismatch;
      return std::nullopt;
    }
    auto [it, _] = windows_.try_emplace(p.device_id, p.device_id, cfg_.L, cfg_.reorder_tolerance);
    auto& window = it->second;
    std::vector<double> features(p.features.begin(), p.features.end());
    switch (window.insert(p.seq, std::move(features))) {
      case DeviceWindow::Insert::duplicate: ++stats_.duplicates; return std::nullopt;
      case DeviceWindow::Insert::too_late: ++stats_.too_late; return std::nullopt;
      case DeviceWindow::Insert::inserted: break;
    }

    FinalDecision d;
    d.device_id = p.device_id;
    d.seq = p.seq;
    d.is_anomaly = p.edge_is_anomaly;
    d.confidence = p.edge_confidence;
    if (p.flags & kFlagStaleGnss) d.flags |= kDecisionStaleGnss;
    if (!(p.edge_confidence < cfg_.c_th)) return d;

    const auto points = window.window_ending_at(p.seq);
    if (points.empty()) {
      d.flags |= kWindowNotReady;
      return d;
    }
    if (points.back()->seq - points.front()->seq != cfg_.L - 1) d.flags |= kWindowGap;
    ++stats_.fog_invocations;
    const auto decision = detect(*fog_, concatenate(points));
    d.source = DecisionSource::fog;
    d.is_anomaly = decision.is_anomaly;
    d.confidence = decision.confidence;
    d.response_delay_ms = arrival_ms - static_cast<double>(p.timestamp_ms);
    return d;
  }

  // Malformed datagrams are counted and dropped.
  std::optional<FinalDecision> ingest_datagram(std::span<const std::uint8_t> bytes, double arrival_ms) {
    TelemetryPacket p;
    try {
      p = decode(bytes);
    } catch (const WireError&) {
      ++stats_.malformed;
      return std::nullopt;
    }
    return ingest(p, arrival_ms);
  }

  const GatewayStats& stats() const { return stats_; }
  const FogConfig& config() const { return cfg_; }
  std::size_t features_per_point() const { return features_per_point_; }
  const DeviceWindow* window(std::uint32_t device_id) const {
    auto it = windows_.find(device_id);
    return it == windows_.end() ? nullptr : &it->second;
  }

 private:
  FogConfig cfg_;
  std::shared_ptr<const DetectorModel> fog_;
  std::size_t features_per_point_ = 0;
  std::map<std::uint32_t, DeviceWindow> windows_;
  GatewayStats stats_;
};

inline void write_decision_header(std::ostream& os) {
  os << "device_id,seq,source,is_anomaly,confidence,response_delay_ms,flags\n";
}

inline void write_decision_row(std::ostream& os, const FinalDecision& d) {
  os << d.device_id << ',' << d.seq << ',' << to_string(d.source) << ',' << (d.is_anomaly ? 1 : 0) << ','
     << detail::format_double(d.confidence) << ',' << detail::format_double(d.response_delay_ms) << ','
     << static_cast<int>(d.flags) << '\n';
}

}  // namespace adm
