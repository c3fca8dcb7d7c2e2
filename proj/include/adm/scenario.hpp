#pragma once

// Seeded synthetic smart-logistics telemetry: a vehicle driving a closed route with an
// IMU-equipped container, optional shake/overturn incidents, and a network-delay model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "adm/config.hpp"
#include "adm/edge_node.hpp"
#include "adm/matrix.hpp"

namespace adm {

enum class EventKind { shake, overturn };

inline const char* to_string(EventKind k) { return k == EventKind::shake ? "SHAKE" : "OVERTURN"; }

inline EventKind parse_event_kind(std::string_view s) {
  if (s == "SHAKE" || s == "shake") return EventKind::shake;
  if (s == "OVERTURN" || s == "overturn") return EventKind::overturn;
  throw ConfigError("unknown event kind '" + std::string(s) + "'");
}

struct AnomalyEvent {
  std::uint32_t event_id = 0;
  EventKind kind = EventKind::shake;
  std::uint32_t start_seq = 0;
  std::uint32_t end_seq = 0;  // inclusive

  bool contains(std::uint32_t seq) const { return seq >= start_seq && seq <= end_seq; }
  friend bool operator==(const AnomalyEvent&, const AnomalyEvent&) = default;
};

// Log-normal one-way network delay with a cap and i.i.d. loss.
// median_ms = 0 gives a constant zero delay.
struct DelayModel {
  double median_ms = 200.0;
  double sigma = 1.2;
  double cap_ms = 30000.0;
  double loss_rate = 0.01;

  static DelayModel ideal() { return {0.0, 0.0, 30000.0, 0.0}; }

  void validate() const {
    if (median_ms < 0 || sigma < 0 || !(cap_ms > 0)) throw ConfigError("invalid delay model parameters");
    if (!(loss_rate >= 0.0 && loss_rate < 1.0)) throw ConfigError("loss_rate must lie in [0, 1)");
  }
};

// Delay in ms, or nothing when the packet is lost.
template <typename Rng>
std::optional<double> sample_delay(const DelayModel& m, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  const bool lost = m.loss_rate > 0.0 && u(rng) < m.loss_rate;
  const double tau = m.median_ms * std::exp(m.sigma * z(rng));
  if (lost) return std::nullopt;
  return std::min(tau, m.cap_ms);
}

struct Waypoint {
  double lat = 0.0;
  double lon = 0.0;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  std::size_t n_train_points = 12000;
  std::size_t n_test_points = 1600;
  std::size_t n_events = 42;
  double delta1_s = 10.0;
  double delta2_ms = 15.0;

  // Closed delivery loop; the last waypoint connects back to the first.
  std::vector<Waypoint> route = {{45.2551, 19.8451}, {45.2671, 19.8335}, {45.2598, 19.8112},
                                 {45.2462, 19.8120}, {45.2396, 19.8420}, {45.2480, 19.8600}};
  double speed_mean_mps = 9.0;
  double speed_jitter_mps = 1.5;
  double gps_noise_m = 3.0;
  double gnss_dropout = 0.0;  // probability that a tick has no GNSS fix

  // Road-induced vibration: per-tick roughness level (g) following an AR(1) process.
  double vib_mean_g = 0.06;
  double vib_sigma_g = 0.015;
  double vib_corr = 0.8;
  double vib_axis_x = 1.0;
  double vib_axis_y = 0.8;
  double vib_axis_z = 1.3;
  // Isolated road shocks (potholes, kerbs) in normal driving: per-tick probability and
  // the largest vibration gain; each shock draws its gain uniformly from [1, shock_gain].
  double shock_rate = 0.0;
  double shock_gain = 4.0;
  // Earth field in the vehicle frame rotates with heading.
  double mag_horizontal_ut = 22.0;
  double mag_vertical_ut = 41.0;
  double mag_sigma_ut = 0.6;

  double shake_intensity = 8.0;
  std::vector<EventKind> event_kinds = {EventKind::shake, EventKind::overturn};
  std::size_t event_min_len = 3;
  std::size_t event_max_len = 8;

  DelayModel delay;

  void validate() const {
    if (n_train_points < 2) throw ConfigError("n_train_points must be >= 2");
    if (n_test_points < 1) throw ConfigError("n_test_points must be >= 1");
    if (!(delta1_s > 0) || !(delta2_ms > 0) || delta2_ms >= delta1_s * 1000.0)
      throw ConfigError("need 0 < delta2 < delta1");
    if (route.size() < 2) throw ConfigError("route needs at least two waypoints");
    if (event_min_len == 0 || event_min_len > event_max_len) throw ConfigError("invalid event length range");
    if (n_events > 0 && event_kinds.empty()) throw ConfigError("event_kinds is empty");
    if (!(shake_intensity > 0)) throw ConfigError("shake_intensity must be positive");
    if (!(gnss_dropout >= 0 && gnss_dropout < 1)) throw ConfigError("gnss_dropout must lie in [0, 1)");
    if (!(shock_rate >= 0 && shock_rate < 1)) throw ConfigError("shock_rate must lie in [0, 1)");
    if (!(shock_gain >= 1)) throw ConfigError("shock_gain must be >= 1");
    for (const auto& w : route)
      if (std::abs(w.lat) > 90 || std::abs(w.lon) > 180) throw ConfigError("waypoint out of range");
    delay.validate();
  }

  // Reads every documented key; absent keys keep their defaults.
  static ScenarioConfig from(const KeyValueConfig& kv) {
    ScenarioConfig c;
    c.seed = kv.get_int<std::uint64_t>("seed", c.seed);
    c.n_train_points = kv.get_int<std::size_t>("n_train_points", c.n_train_points);
    c.n_test_points = kv.get_int<std::size_t>("n_test_points", c.n_test_points);
    c.n_events = kv.get_int<std::size_t>("n_events", c.n_events);
    c.delta1_s = kv.get_double("delta1_s", c.delta1_s);
    c.delta2_ms = kv.get_double("delta2_ms", c.delta2_ms);
    if (kv.has("route")) {
      c.route.clear();
      std::stringstream ss(kv.get("route", ""));
      std::string item;
      while (std::getline(ss, item, ';')) {
        auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("route entries must be lat:lon");
        c.route.push_back({detail::parse_double(item.substr(0, colon)), detail::parse_double(item.substr(colon + 1))});
      }
    }
    c.speed_mean_mps = kv.get_double("speed_mean_mps", c.speed_mean_mps);
    c.speed_jitter_mps = kv.get_double("speed_jitter_mps", c.speed_jitter_mps);
    c.gps_noise_m = kv.get_double("gps_noise_m", c.gps_noise_m);
    c.gnss_dropout = kv.get_double("gnss_dropout", c.gnss_dropout);
    c.vib_mean_g = kv.get_double("vib_mean_g", c.vib_mean_g);
    c.vib_sigma_g = kv.get_double("vib_sigma_g", c.vib_sigma_g);
    c.vib_corr = kv.get_double("vib_corr", c.vib_corr);
    c.vib_axis_x = kv.get_double("vib_axis_x", c.vib_axis_x);
    c.vib_axis_y = kv.get_double("vib_axis_y", c.vib_axis_y);
    c.vib_axis_z = kv.get_double("vib_axis_z", c.vib_axis_z);
    c.shock_rate = kv.get_double("shock_rate", c.shock_rate);
    c.shock_gain = kv.get_double("shock_gain", c.shock_gain);
    c.mag_horizontal_ut = kv.get_double("mag_horizontal_ut", c.mag_horizontal_ut);
    c.mag_vertical_ut = kv.get_double("mag_vertical_ut", c.mag_vertical_ut);
    c.mag_sigma_ut = kv.get_double("mag_sigma_ut", c.mag_sigma_ut);
    c.shake_intensity = kv.get_double("shake_intensity", c.shake_intensity);
    if (kv.has("event_kinds")) {
      c.event_kinds.clear();
      std::stringstream ss(kv.get("event_kinds", ""));
      std::string item;
      while (std::getline(ss, item, ',')) c.event_kinds.push_back(parse_event_kind(detail::trim(item)));
    }
    c.event_min_len = kv.get_int<std::size_t>("event_min_len", c.event_min_len);
    c.event_max_len = kv.get_int<std::size_t>("event_max_len", c.event_max_len);
    c.delay.median_ms = kv.get_double("delay_median_ms", c.delay.median_ms);
    c.delay.sigma = kv.get_double("delay_sigma", c.delay.sigma);
    c.delay.cap_ms = kv.get_double("delay_cap_ms", c.delay.cap_ms);
    c.delay.loss_rate = kv.get_double("loss_rate", c.delay.loss_rate);
    c.validate();
    return c;
  }
};

// Rows of full feature records with their sequence numbers and ground-truth events.
struct LabeledDataset {
  std::vector<std::uint32_t> seq;
  std::vector<std::uint64_t> timestamp_ms;
  Matrix records{0, kFeatureCount};
  std::vector<AnomalyEvent> events;

  std::size_t size() const { return seq.size(); }

  FeatureRecord record(std::size_t i) const {
    FeatureRecord r;
    auto row = records.row(i);
    std::copy(row.begin(), row.end(), r.begin());
    return r;
  }

  Matrix select(const FeatureSchema& schema) const {
    Matrix out(size(), schema.size());
    for (std::size_t i = 0; i < size(); ++i) {
      auto sel = schema.select(record(i));
      std::copy(sel.begin(), sel.end(), out.row(i).begin());
    }
    return out;
  }

  bool is_anomalous(std::uint32_t s) const {
    return std::any_of(events.begin(), events.end(), [s](const auto& e) { return e.contains(s); });
  }
};

// Tick-by-tick sensor frame source for one simulated device.
class DeviceSimulator {
 public:
  DeviceSimulator(const ScenarioConfig& cfg, std::uint64_t stream_seed, double start_fraction = 0.0)
      : cfg_(cfg), rng_(stream_seed) {
    lat0_ = cfg_.route.front().lat;
    lon0_ = cfg_.route.front().lon;
    for (const auto& w : cfg_.route) pts_.push_back(to_local(w));
    cum_.push_back(0.0);
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      const auto& a = pts_[i];
      const auto& b = pts_[(i + 1) % pts_.size()];
      cum_.push_back(cum_.back() + std::hypot(b.first - a.first, b.second - a.second));
    }
    position_m_ = std::fmod(start_fraction, 1.0) * cum_.back();
    speed_ = cfg_.speed_mean_mps;
    roughness_ = cfg_.vib_mean_g;
  }

  std::uint64_t tick_index() const { return tick_; }

  // Produces the frame for the next Delta1 interval, applying `event` to its IMU samples.
  SensorFrame next_frame(std::optional<EventKind> event) {
    ++tick_;
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    const double prev_speed = speed_;
    speed_ = cfg_.speed_mean_mps + 0.7 * (speed_ - cfg_.speed_mean_mps) +
             std::sqrt(1.0 - 0.49) * cfg_.speed_jitter_mps * z(rng_);
    speed_ = std::clamp(speed_, 0.5, 2.0 * cfg_.speed_mean_mps);
    position_m_ = std::fmod(position_m_ + speed_ * cfg_.delta1_s, cum_.back());
    const double phi = std::clamp(cfg_.vib_corr, 0.0, 0.999);
    roughness_ = cfg_.vib_mean_g + phi * (roughness_ - cfg_.vib_mean_g) +
                 std::sqrt(1.0 - phi * phi) * cfg_.vib_sigma_g * z(rng_);
    roughness_ = std::max(roughness_, 0.2 * cfg_.vib_mean_g);
    double vib = roughness_;
    if (cfg_.shock_rate > 0.0 && u(rng_) < cfg_.shock_rate) vib *= 1.0 + (cfg_.shock_gain - 1.0) * u(rng_);

    auto [x, y, heading] = locate(position_m_);
    x += cfg_.gps_noise_m * z(rng_);
    y += cfg_.gps_noise_m * z(rng_);

    SensorFrame frame;
    const auto d1_us = static_cast<std::uint64_t>(std::llround(cfg_.delta1_s * 1e6));
    const auto d2_us = static_cast<std::uint64_t>(std::llround(cfg_.delta2_ms * 1e3));
    frame.t_ms = tick_ * d1_us / 1000;
    S1Sample s1;
    s1.lat = lat0_ + y / kMetersPerDegLat;
    s1.lon = lon0_ + x / (kMetersPerDegLat * std::cos(lat0_ * std::numbers::pi / 180.0));
    s1.alt = 80.0 + 5.0 * std::sin(position_m_ / 1000.0) + z(rng_);
    s1.speed = speed_;
    s1.sats = std::clamp(std::round(9.0 + 1.5 * z(rng_)), 4.0, 14.0);
    const bool fix = !(cfg_.gnss_dropout > 0.0 && u(rng_) < cfg_.gnss_dropout);
    if (fix) frame.s1 = s1;

    const double long_acc_g = (speed_ - prev_speed) / cfg_.delta1_s / 9.80665;
    const double hx = cfg_.mag_horizontal_ut * std::cos(heading);
    const double hy = cfg_.mag_horizontal_ut * std::sin(heading);
    const std::size_t m = samples_in_interval(tick_, d1_us, d2_us);
    frame.s2_window.resize(m);
    for (auto& s : frame.s2_window) {
      double ax = long_acc_g + cfg_.vib_axis_x * vib * z(rng_);
      double ay = cfg_.vib_axis_y * vib * z(rng_);
      double az = 1.0 + cfg_.vib_axis_z * vib * z(rng_);
      double mx = hx + cfg_.mag_sigma_ut * z(rng_);
      double my = hy + cfg_.mag_sigma_ut * z(rng_);
      double mz = -cfg_.mag_vertical_ut + cfg_.mag_sigma_ut * z(rng_);
      if (event == EventKind::shake) {
        ax *= cfg_.shake_intensity;
        ay *= cfg_.shake_intensity;
        az *= cfg_.shake_intensity;
      } else if (event == EventKind::overturn) {
        std::swap(ax, az);  // gravity now along the device x axis
        mx = -mx;
        my = -my;
        mz = -mz;
      }
      s = {ax, ay, az, mx, my, mz};
    }
    return frame;
  }

 private:
  static constexpr double kMetersPerDegLat = 111320.0;

  std::pair<double, double> to_local(const Waypoint& w) const {
    const double x = (w.lon - lon0_) * kMetersPerDegLat * std::cos(lat0_ * std::numbers::pi / 180.0);
    const double y = (w.lat - lat0_) * kMetersPerDegLat;
    return {x, y};
  }

  // Local position and heading (radians from north, clockwise) at arc length s.
  std::tuple<double, double, double> locate(double s) const {
    auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    std::size_t seg = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - cum_.begin()) - 1));
    seg = std::min(seg, pts_.size() - 1);
    const auto& a = pts_[seg];
    const auto& b = pts_[(seg + 1) % pts_.size()];
    const double len = cum_[seg + 1] - cum_[seg];
    const double t = len > 0 ? (s - cum_[seg]) / len : 0.0;
    return {a.first + t * (b.first - a.first), a.second + t * (b.second - a.second),
            std::atan2(b.first - a.first, b.second - a.second)};
  }

  ScenarioConfig cfg_;
  std::mt19937_64 rng_;
  double lat0_ = 0.0, lon0_ = 0.0;
  std::vector<std::pair<double, double>> pts_;
  std::vector<double> cum_;
  double position_m_ = 0.0;
  double speed_ = 0.0;
  double roughness_ = 0.0;
  std::uint64_t tick_ = 0;
};

// Disjoint events, one per equal slot of the test span.
inline std::vector<AnomalyEvent> place_events(const ScenarioConfig& cfg, std::mt19937_64& rng) {
  std::vector<AnomalyEvent> events;
  if (cfg.n_events == 0) return events;
  const std::size_t slot = cfg.n_test_points / cfg.n_events;
  if (slot < cfg.event_max_len + 2)
    throw ConfigError("cannot pack " + std::to_string(cfg.n_events) + " events of up to " +
                      std::to_string(cfg.event_max_len) + " points into " + std::to_string(cfg.n_test_points) +
                      " test points");
  std::uniform_int_distribution<std::size_t> len_dist(cfg.event_min_len, cfg.event_max_len);
  std::uniform_int_distribution<std::size_t> kind_dist(0, cfg.event_kinds.size() - 1);
  for (std::size_t i = 0; i < cfg.n_events; ++i) {
    const std::size_t len = len_dist(rng);
    std::uniform_int_distribution<std::size_t> offset_dist(1, slot - len - 1);
    const std::size_t start = i * slot + offset_dist(rng);
    events.push_back({static_cast<std::uint32_t>(i + 1), cfg.event_kinds[kind_dist(rng)],
                      static_cast<std::uint32_t>(start), static_cast<std::uint32_t>(start + len - 1)});
  }
  return events;
}

namespace detail {

inline LabeledDataset simulate(DeviceSimulator& sim, std::size_t n,
                               const std::vector<AnomalyEvent>& events) {
  LabeledDataset ds;
  ds.events = events;
  ds.records = Matrix(0, kFeatureCount);
  std::optional<S1Sample> last_fix;
  std::size_t next_event = 0;
  for (std::size_t k = 0; k < n; ++k) {
    while (next_event < events.size() && events[next_event].end_seq < k) ++next_event;
    std::optional<EventKind> active;
    if (next_event < events.size() && events[next_event].contains(static_cast<std::uint32_t>(k)))
      active = events[next_event].kind;
    const auto frame = sim.next_frame(active);
    // The first tick of a stream always needs a position; fall back to the fix-less sample.
    const S1Sample* fallback = last_fix ? &*last_fix : nullptr;
    S1Sample synthetic;
    if (!frame.s1 && !fallback) fallback = &synthetic;
    if (frame.s1) last_fix = frame.s1;
    const S1Sample& s1 = frame.s1 ? *frame.s1 : *fallback;
    const auto rms = rms_aggregate<6>(frame.s2_window);
    const auto record = make_record(s1, rms);
    ds.seq.push_back(static_cast<std::uint32_t>(k));
    ds.timestamp_ms.push_back(frame.t_ms);
    ds.records.append_row(record);
  }
  return ds;
}

}  // namespace detail

struct Scenario {
  LabeledDataset train;
  LabeledDataset test;
};

// Event-free training stream plus a test stream with labeled incidents.
inline Scenario generate(const ScenarioConfig& cfg) {
  cfg.validate();
  std::mt19937_64 master(cfg.seed);
  const std::uint64_t train_seed = master();
  const std::uint64_t test_seed = master();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double test_start = u(master);

  Scenario out;
  DeviceSimulator train_sim(cfg, train_seed, 0.0);
  out.train = detail::simulate(train_sim, cfg.n_train_points, {});
  const auto events = place_events(cfg, master);
  DeviceSimulator test_sim(cfg, test_seed, test_start);
  out.test = detail::simulate(test_sim, cfg.n_test_points, events);
  return out;
}

inline constexpr const char* kDatasetHeader =
    "seq,timestamp_ms,lat,lon,alt,speed,sats,acc_rms_x,acc_rms_y,acc_rms_z,mag_rms_x,mag_rms_y,mag_rms_z";
inline constexpr const char* kEventsHeader = "event_id,kind,start_seq,end_seq";

inline void write_dataset_csv(std::ostream& os, const LabeledDataset& ds) {
  os << kDatasetHeader << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    os << ds.seq[i] << ',' << ds.timestamp_ms[i];
    for (double v : ds.records.row(i)) os << ',' << detail::format_double(v);
    os << '\n';
  }
}

inline void write_events_csv(std::ostream& os, const std::vector<AnomalyEvent>& events) {
  os << kEventsHeader << '\n';
  for (const auto& e : events)
    os << e.event_id << ',' << to_string(e.kind) << ',' << e.start_seq << ',' << e.end_seq << '\n';
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

inline LabeledDataset read_dataset_csv(std::istream& is, const std::string& origin = "<dataset>") {
  LabeledDataset ds;
  ds.records = Matrix(0, kFeatureCount);
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != kDatasetHeader)
    throw ConfigError(origin + ": unexpected dataset header");
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cols = detail::split(detail::trim(line), ',');
    if (cols.size() != 2 + kFeatureCount)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 13 columns");
    ds.seq.push_back(detail::parse_int<std::uint32_t>(cols[0]));
    ds.timestamp_ms.push_back(detail::parse_int<std::uint64_t>(cols[1]));
    FeatureRecord r;
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      r[c] = detail::parse_double(cols[2 + c]);
      if (!std::isfinite(r[c])) throw ConfigError(origin + ":" + std::to_string(lineno) + ": non-finite value");
    }
    ds.records.append_row(r);
  }
  return ds;
}

inline std::vector<AnomalyEvent> read_events_csv(std::istream& is, const std::string& origin = "<events>") {
  std::vector<AnomalyEvent> events;
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != kEventsHeader)
    throw ConfigError(origin + ": unexpected events header");
  while (std::getline(is, line)) {
    if (detail::trim(line).empty()) continue;
    auto cols = detail::split(detail::trim(line), ',');
    if (cols.size() != 4) throw ConfigError(origin + ": expected 4 columns");
    AnomalyEvent e{detail::parse_int<std::uint32_t>(cols[0]), parse_event_kind(cols[1]),
                   detail::parse_int<std::uint32_t>(cols[2]), detail::parse_int<std::uint32_t>(cols[3])};
    if (e.start_seq > e.end_seq) throw ConfigError(origin + ": event with start_seq > end_seq");
    events.push_back(e);
  }
  return events;
}

inline LabeledDataset load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open dataset '" + path + "'");
  return read_dataset_csv(is, path);
}

inline std::vector<AnomalyEvent> load_events(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open events file '" + path + "'");
  return read_events_csv(is, path);
}

}  // namespace adm
