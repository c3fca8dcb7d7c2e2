// adm: command-line front end for data generation, training, export, replay and evaluation.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "adm/config.hpp"
#include "adm/evaluation.hpp"
#include "adm/model_format.hpp"
#include "adm/udp.hpp"

namespace fs = std::filesystem;
using namespace adm;

namespace {

constexpr std::uint16_t kDefaultPort = 47808;

// Everything a config file may set. Every command reads all of it so that an unknown key
// is reported regardless of which command is run.
struct Settings {
  ScenarioConfig scenario;
  TrainConfig train;
  double c_th = 0.75;
  std::size_t reorder_tolerance = 3;
  BaselineConfig baseline;
  std::size_t ensemble = 20;
  std::size_t threads = 1;
  std::vector<std::size_t> window_lengths = {10};
  std::vector<std::string> variants = {"gps"};
  std::vector<Profile> edge_profiles = {Profile::HL1};
  std::vector<Profile> fog_profiles = {Profile::HL5};
  bool baselines = false;
  std::vector<std::string> detectors;  // empty: autoencoders only
  std::string host = "127.0.0.1";
  std::uint16_t port = kDefaultPort;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : detail::split(s, ',')) {
    auto t = detail::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

// "2-20", "5,10" or a mix such as "2-4,10".
std::vector<std::size_t> parse_lengths(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) {
    auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(detail::parse_int<std::size_t>(item));
      continue;
    }
    const auto lo = detail::parse_int<std::size_t>(item.substr(0, dash));
    const auto hi = detail::parse_int<std::size_t>(item.substr(dash + 1));
    if (lo > hi) throw ConfigError("empty window length range '" + item + "'");
    for (auto L = lo; L <= hi; ++L) out.push_back(L);
  }
  if (out.empty()) throw ConfigError("no window lengths given");
  for (auto L : out)
    if (L < 2 || L > 20) throw ConfigError("window length " + std::to_string(L) + " outside [2, 20]");
  return out;
}

std::vector<Profile> parse_profiles(const std::string& s) {
  std::vector<Profile> out;
  for (const auto& p : split_list(s)) out.push_back(parse_profile(p));
  return out;
}

// "ae" selects the autoencoder rows; every other name must be a baseline.
std::vector<std::string> parse_detectors(const std::string& s) {
  auto out = split_list(s);
  if (out.empty()) throw ConfigError("empty detector list");
  for (const auto& d : out)
    if (d != "ae") parse_baseline(d);
  return out;
}

bool parse_bool(const std::string& s) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("not a boolean: '" + s + "'");
}

Settings load_settings(const std::string& path, std::optional<std::uint64_t> seed) {
  KeyValueConfig kv;
  if (!path.empty()) kv = KeyValueConfig::load(path);
  Settings s;
  s.scenario = ScenarioConfig::from(kv);
  if (seed) s.scenario.seed = *seed;

  auto& t = s.train;
  t.epochs = kv.get_int<int>("epochs", t.epochs);
  t.batch_size = kv.get_int<std::size_t>("batch_size", t.batch_size);
  t.learning_rate = kv.get_double("learning_rate", t.learning_rate);
  t.beta1 = kv.get_double("beta1", t.beta1);
  t.beta2 = kv.get_double("beta2", t.beta2);
  t.epsilon = kv.get_double("epsilon", t.epsilon);
  t.early_stop_patience = kv.get_int<int>("early_stop_patience", t.early_stop_patience);
  t.validate();

  s.c_th = kv.get_double("c_th", s.c_th);
  s.reorder_tolerance = kv.get_int<std::size_t>("reorder_tolerance", s.reorder_tolerance);

  auto& b = s.baseline;
  b.contamination = kv.get_double("contamination", b.contamination);
  b.knn_k = kv.get_int<std::size_t>("knn_k", b.knn_k);
  b.pca_variance = kv.get_double("pca_variance", b.pca_variance);
  b.hbod_bins = kv.get_int<std::size_t>("hbod_bins", b.hbod_bins);
  b.abod_max_reference = kv.get_int<std::size_t>("abod_max_reference", b.abod_max_reference);

  s.ensemble = kv.get_int<std::size_t>("ensemble", s.ensemble);
  s.threads = kv.get_int<std::size_t>("threads", s.threads);
  if (kv.has("window_lengths")) s.window_lengths = parse_lengths(kv.get("window_lengths", ""));
  if (kv.has("variants")) s.variants = split_list(kv.get("variants", ""));
  if (kv.has("edge_profiles")) s.edge_profiles = parse_profiles(kv.get("edge_profiles", ""));
  if (kv.has("fog_profiles")) s.fog_profiles = parse_profiles(kv.get("fog_profiles", ""));
  if (kv.has("baselines")) s.baselines = parse_bool(kv.get("baselines", ""));
  if (kv.has("detectors")) s.detectors = parse_detectors(kv.get("detectors", ""));
  s.host = kv.get("host", s.host);
  s.port = kv.get_int<std::uint16_t>("port", s.port);

  const auto unused = kv.unused_keys();
  if (!unused.empty()) throw ConfigError(path + ": unknown config key '" + unused.front() + "'");
  return s;
}

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path + "'");
  return os;
}

std::uint64_t wall_ms() {
  using namespace std::chrono;
  return static_cast<std::uint64_t>(duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count());
}

std::size_t window_length_of(const DetectorModel& fog, const FeatureSchema& schema) {
  if (fog.input_dim() % schema.size() != 0)
    throw ConfigError("fog model input_dim " + std::to_string(fog.input_dim()) +
                      " is not a multiple of the schema size " + std::to_string(schema.size()));
  return fog.input_dim() / schema.size();
}

void print_metrics(const LabeledDataset& test, const std::vector<FinalDecision>& decisions, std::uint32_t device) {
  const auto counts = score_events(test.events, flagged_seqs(decisions, device));
  const auto m = precision_recall_f1(counts);
  std::cout << "precision " << fixed(m.precision) << " recall " << fixed(m.recall) << " f1 " << fixed(m.f1)
            << " (tp " << counts.tp << ", fp " << counts.fp << ", fn " << counts.fn << ")\n";
}

void write_decisions(const std::string& path, const std::vector<FinalDecision>& decisions) {
  auto os = open_out(path);
  write_decision_header(os);
  for (const auto& d : decisions) write_decision_row(os, d);
}

std::atomic<bool> g_stop{false};

// ---- commands ---------------------------------------------------------------------------

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key = value configuration file");
  cmd->add_option("--seed", c.seed, "master seed (overrides the config 'seed' key)");
}

int cmd_generate(const Common& c, const std::string& out_dir) {
  const auto s = load_settings(c.config, c.seed);
  const auto sc = generate(s.scenario);
  fs::create_directories(out_dir);
  const auto dir = fs::path(out_dir);
  {
    auto os = open_out((dir / "train.csv").string());
    write_dataset_csv(os, sc.train);
  }
  {
    auto os = open_out((dir / "test.csv").string());
    write_dataset_csv(os, sc.test);
  }
  {
    auto os = open_out((dir / "events.csv").string());
    write_events_csv(os, sc.test.events);
  }
  std::size_t shake = 0;
  for (const auto& e : sc.test.events) shake += e.kind == EventKind::shake;
  std::cout << "train rows " << sc.train.size() << ", test rows " << sc.test.size() << ", events "
            << sc.test.events.size() << " (" << shake << " SHAKE, " << sc.test.events.size() - shake
            << " OVERTURN), seed " << s.scenario.seed << " -> " << out_dir << "\n";
  return 0;
}

struct TrainArgs {
  std::string role = "edge";
  std::string profile;
  std::optional<std::size_t> L;
  std::string schema = "gps";
  std::string train_csv;
  std::string out;
  std::string precision = "f32";
  std::string history;
};

int cmd_train(const Common& c, const TrainArgs& a) {
  if (a.role == "fog" && !a.L) throw ConfigError("--role fog requires --L");
  if (a.role == "edge" && a.L) throw ConfigError("--role edge does not take --L");
  if (a.L && (*a.L < 2 || *a.L > 20)) throw ConfigError("--L must lie in [2, 20]");
  auto s = load_settings(c.config, c.seed);
  const auto profile = parse_profile(a.profile.empty() ? (a.role == "edge" ? "hl1" : "hl5") : a.profile);
  const auto schema = FeatureSchema::parse_variant(a.schema);
  const auto prec = parse_precision(a.precision);

  const auto train = load_dataset(a.train_csv);
  Matrix rows = train.select(schema);
  if (a.L) rows = build_fog_training_set(rows, *a.L);
  spdlog::info("training {} {} on {} rows x {} inputs", a.role, to_string(profile), rows.rows(), rows.cols());

  TrainingHistory history;
  const auto det = train_detector(rows, profile, s.train, s.scenario.seed, &history);
  save_model(a.out, det, prec);
  if (!a.history.empty()) {
    auto os = open_out(a.history);
    write_history_csv(os, history);
  }
  const auto& last = history.epochs.back();
  std::cout << a.role << " " << to_string(profile) << " input_dim " << det.input_dim() << ": " << last.epoch
            << " epochs" << (history.stopped_early ? " (early stop)" : "") << ", final loss "
            << detail::format_double(last.loss) << ", threshold e " << detail::format_double(det.threshold)
            << ", footprint " << footprint(det, prec) << " bytes (" << a.precision << ") -> " << a.out << "\n";
  return 0;
}

int cmd_export(const Common& c, const std::string& in, const std::string& out, const std::string& precision) {
  load_settings(c.config, c.seed);
  const auto det = load_model(in);
  const auto prec = parse_precision(precision);
  save_model(out, det, prec);
  std::cout << "input_dim " << det.input_dim() << ", threshold e " << detail::format_double(det.threshold)
            << ", footprint " << footprint(det, prec) << " bytes (" << precision << ") -> " << out << "\n";
  return 0;
}

struct NetArgs {
  std::string host;
  std::optional<std::uint16_t> port;
};

struct ServeArgs {
  std::string fog_model;
  std::string schema = "gps";
  std::optional<double> c_th;
  std::string decisions;
  std::uint64_t max_packets = 0;
  int idle_timeout_ms = 0;
};

int cmd_serve_fog(const Common& c, const NetArgs& n, const ServeArgs& a) {
  const auto s = load_settings(c.config, c.seed);
  const auto schema = FeatureSchema::parse_variant(a.schema);
  auto fog = std::make_shared<const DetectorModel>(load_model(a.fog_model));
  FogConfig fc{window_length_of(*fog, schema), a.c_th.value_or(s.c_th), s.reorder_tolerance, Profile::HL5};
  FogGateway gw(fc, fog);

  UdpSocket sock;
  const auto host = n.host.empty() ? s.host : n.host;
  sock.bind(host, n.port.value_or(s.port));
  spdlog::info("fog gateway on {}:{} (L={}, c_th={})", host, sock.local_port(), fc.L, fc.c_th);

  std::ofstream file;
  std::ostream* log = &std::cout;
  if (!a.decisions.empty()) {
    file = open_out(a.decisions);
    log = &file;
  }
  write_decision_header(*log);

  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  auto idle_since = std::chrono::steady_clock::now();
  std::uint64_t packets = 0;
  while (!g_stop && (a.max_packets == 0 || packets < a.max_packets)) {
    auto dgram = sock.receive(200);
    if (!dgram) {
      const auto idle = std::chrono::steady_clock::now() - idle_since;
      if (a.idle_timeout_ms > 0 && idle >= std::chrono::milliseconds(a.idle_timeout_ms)) break;
      continue;
    }
    idle_since = std::chrono::steady_clock::now();
    ++packets;
    if (auto d = gw.ingest_datagram(*dgram, static_cast<double>(wall_ms()))) {
      write_decision_row(*log, *d);
      log->flush();
    }
  }
  const auto& st = gw.stats();
  spdlog::info("received {}, malformed {}, schema mismatch {}, duplicates {}, too late {}, fog invocations {}",
               st.received, st.malformed, st.schema_mismatch, st.duplicates, st.too_late, st.fog_invocations);
  return 0;
}

struct EdgeArgs {
  std::string edge_model;
  std::string test_csv;
  std::string schema = "gps";
  std::uint32_t device_id = 1;
  int interval_ms = 0;
  bool apply_loss = false;
};

int cmd_run_edge(const Common& c, const NetArgs& n, const EdgeArgs& a) {
  const auto s = load_settings(c.config, c.seed);
  const auto schema = FeatureSchema::parse_variant(a.schema);
  const auto test = load_dataset(a.test_csv);
  EdgeNode node(a.device_id, load_model(a.edge_model), schema, test.size() ? test.seq.front() : 0);
  const Matrix points = test.select(schema);
  const auto host = n.host.empty() ? s.host : n.host;
  const auto port = n.port.value_or(s.port);

  UdpSocket sock;
  std::mt19937_64 rng(s.scenario.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t sent = 0, dropped = 0, flagged = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    // Timestamps are wall-clock so that the gateway can measure the real one-way delay.
    const auto p = node.tick(points.row(i), wall_ms());
    flagged += p.edge_is_anomaly;
    if (a.apply_loss && u(rng) < s.scenario.delay.loss_rate) {
      ++dropped;
      continue;
    }
    sock.send_to(encode(p), host, port);
    ++sent;
    if (a.interval_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(a.interval_ms));
  }
  std::cout << "device " << a.device_id << ": " << sent << " packets sent to " << host << ":" << port << ", "
            << dropped << " dropped, " << flagged << " flagged at the edge\n";
  return 0;
}

struct ReplayArgs {
  std::string edge_model;
  std::string fog_model;
  std::string test_csv;
  std::string events_csv;
  std::string schema = "gps";
  std::optional<double> c_th;
  std::string mode = "inproc";
  std::string decisions;
  std::size_t devices = 1;
};

// Real datagrams over loopback. Delay is the measured send-to-receive latency.
std::vector<FinalDecision> replay_socket(const LabeledDataset& test, const FeatureSchema& schema,
                                         const DetectorModel& edge, FogGateway& gw, std::size_t devices) {
  UdpSocket rx;
  rx.bind("127.0.0.1", 0);
  const auto port = rx.local_port();
  using clock = std::chrono::steady_clock;
  struct Arrival {
    clock::time_point at;
    std::vector<std::uint8_t> bytes;
  };
  std::vector<Arrival> arrivals;
  std::atomic<bool> done{false};
  std::thread receiver([&] {
    while (true) {
      auto d = rx.receive(done ? 300 : 50);
      if (d) arrivals.push_back({clock::now(), std::move(*d)});
      else if (done) break;
    }
  });

  const Matrix points = test.select(schema);
  std::map<std::pair<std::uint32_t, std::uint32_t>, clock::time_point> sent_at;
  UdpSocket tx;
  for (std::size_t dev = 0; dev < devices; ++dev) {
    EdgeNode node(static_cast<std::uint32_t>(dev + 1), edge, schema, test.size() ? test.seq.front() : 0);
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto p = node.tick(points.row(i), test.timestamp_ms[i]);
      sent_at[{p.device_id, p.seq}] = clock::now();
      tx.send_to(encode(p), "127.0.0.1", port);
    }
  }
  done = true;
  receiver.join();

  std::vector<FinalDecision> out;
  for (const auto& a : arrivals) {
    double arrival_ms = 0.0;
    try {
      const auto p = decode(a.bytes);
      const auto lag = std::chrono::duration<double, std::milli>(a.at - sent_at.at({p.device_id, p.seq}));
      arrival_ms = static_cast<double>(p.timestamp_ms) + lag.count();
    } catch (const std::exception&) {
    }
    if (auto d = gw.ingest_datagram(a.bytes, arrival_ms)) out.push_back(*d);
  }
  spdlog::info("socket replay: {} datagrams sent, {} received", devices * test.size(), arrivals.size());
  return out;
}

int cmd_replay(const Common& c, const ReplayArgs& a) {
  const auto s = load_settings(c.config, c.seed);
  if (a.mode != "inproc" && a.mode != "socket") throw ConfigError("--mode must be inproc or socket");
  const auto schema = FeatureSchema::parse_variant(a.schema);
  const auto edge = load_model(a.edge_model);
  auto fog = std::make_shared<const DetectorModel>(load_model(a.fog_model));
  auto test = load_dataset(a.test_csv);
  if (!a.events_csv.empty()) test.events = load_events(a.events_csv);

  FogConfig fc{window_length_of(*fog, schema), a.c_th.value_or(s.c_th), s.reorder_tolerance, Profile::HL5};
  FogGateway gw(fc, fog);
  std::vector<FinalDecision> decisions;
  std::uint64_t lost = 0;
  if (a.mode == "inproc") {
    ReplayOptions opt;
    opt.delay = s.scenario.delay;
    opt.seed = s.scenario.seed;
    opt.devices = a.devices;
    auto r = replay(test, schema, edge, gw, opt);
    decisions = std::move(r.decisions);
    lost = r.lost;
  } else {
    if (edge.input_dim() != schema.size()) throw ConfigError("edge model does not match the schema");
    decisions = replay_socket(test, schema, edge, gw, a.devices);
    lost = a.devices * test.size() - gw.stats().received;
  }
  if (!a.decisions.empty()) write_decisions(a.decisions, decisions);

  std::size_t fog_count = 0;
  for (const auto& d : decisions) fog_count += d.source == DecisionSource::fog;
  std::cout << "mode " << a.mode << ", L " << fc.L << ", c_th " << fixed(fc.c_th, 2) << ": decisions "
            << decisions.size() << " (edge " << decisions.size() - fog_count << ", fog " << fog_count << "), lost "
            << lost << "\n";
  std::cout << "offload fraction " << fixed(offload_fraction(decisions)) << ", mean response delay "
            << fixed(mean_response_delay(decisions), 3) << " ms\n";
  if (!a.events_csv.empty())
    for (std::size_t dev = 0; dev < a.devices; ++dev) {
      if (a.devices > 1) std::cout << "device " << dev + 1 << ": ";
      print_metrics(test, decisions, static_cast<std::uint32_t>(dev + 1));
    }
  return 0;
}

struct EvalArgs {
  std::string data_dir;
  std::optional<std::size_t> ensemble;
  std::string lengths;
  std::string variants;
  std::string edge_profiles;
  std::string fog_profiles;
  bool baselines = false;
  std::string detectors;
  std::optional<std::size_t> threads;
  std::string out = "report.csv";
  std::string plot_dir;
};

void print_report(const ExperimentReport& r) {
  std::printf("%-22s %-7s %3s %8s %8s %8s %8s %9s %8s\n", "model", "variant", "L", "P", "R", "F1", "F1_sigma",
              "delay_ms", "offload");
  for (const auto& row : r.rows)
    std::printf("%-22s %-7s %3zu %8.4f %8.4f %8.4f %8.4f %9.3f %8.4f\n", row.model.c_str(), row.variant.c_str(),
                row.L, row.precision.mean, row.recall.mean, row.f1.mean, row.f1.sigma, row.mean_response_delay_ms,
                row.offload_fraction);
  std::fflush(stdout);
}

int cmd_evaluate(const Common& c, const EvalArgs& a) {
  const auto s = load_settings(c.config, c.seed);
  ExperimentSpec spec;
  spec.variants = a.variants.empty() ? s.variants : split_list(a.variants);
  for (const auto& v : spec.variants) FeatureSchema::parse_variant(v);
  spec.edge_profiles = a.edge_profiles.empty() ? s.edge_profiles : parse_profiles(a.edge_profiles);
  spec.fog_profiles = a.fog_profiles.empty() ? s.fog_profiles : parse_profiles(a.fog_profiles);
  spec.window_lengths = a.lengths.empty() ? s.window_lengths : parse_lengths(a.lengths);
  spec.ensemble = a.ensemble.value_or(s.ensemble);
  spec.seed = s.scenario.seed;
  spec.train = s.train;
  spec.c_th = s.c_th;
  spec.reorder_tolerance = s.reorder_tolerance;
  spec.delay = s.scenario.delay;
  const auto detectors = a.detectors.empty() ? s.detectors : parse_detectors(a.detectors);
  bool autoencoders = detectors.empty();
  for (const auto& d : detectors) {
    if (d == "ae") {
      autoencoders = true;
    } else if (std::find(spec.baselines.begin(), spec.baselines.end(), parse_baseline(d)) == spec.baselines.end()) {
      spec.baselines.push_back(parse_baseline(d));
    }
  }
  if (a.baselines || s.baselines)
    for (auto k : kAllBaselines)
      if (std::find(spec.baselines.begin(), spec.baselines.end(), k) == spec.baselines.end()) spec.baselines.push_back(k);
  if (!autoencoders) {
    spec.edge_profiles.clear();
    spec.fog_profiles.clear();
  }
  spec.baseline = s.baseline;
  spec.threads = a.threads.value_or(s.threads);

  Scenario data;
  if (a.data_dir.empty()) {
    spdlog::info("generating scenario with seed {}", s.scenario.seed);
    data = generate(s.scenario);
  } else {
    const auto dir = fs::path(a.data_dir);
    data.train = load_dataset((dir / "train.csv").string());
    data.test = load_dataset((dir / "test.csv").string());
    data.test.events = load_events((dir / "events.csv").string());
  }
  const auto report = run_experiment(spec, data.train, data.test, [](const std::string& msg) { spdlog::info(msg); });
  {
    auto os = open_out(a.out);
    write_report_csv(os, report);
  }
  if (!a.plot_dir.empty()) {
    fs::create_directories(a.plot_dir);
    std::set<std::pair<std::string, std::string>> curves;
    for (const auto& row : report.rows) curves.insert({row.model, row.variant});
    for (const auto& [model, variant] : curves) {
      auto os = open_out((fs::path(a.plot_dir) / ("f1_vs_L_" + model + "_" + variant + ".csv")).string());
      write_plot_csv(os, report, model, variant);
    }
  }
  print_report(report);
  std::cout << "report -> " << a.out << "\n";
  return 0;
}

int cmd_report(const Common& c, const std::string& path, const std::string& model, const std::string& variant,
               const std::string& plot_out) {
  load_settings(c.config, c.seed);
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open report '" + path + "'");
  const auto report = read_report_csv(is, path);
  if (!model.empty()) {
    if (plot_out.empty()) {
      write_plot_csv(std::cout, report, model, variant);
    } else {
      auto os = open_out(plot_out);
      write_plot_csv(os, report, model, variant);
    }
    return 0;
  }
  print_report(report);
  return 0;
}

void setup_logging() {
  auto logger = spdlog::stderr_logger_mt("adm");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  const char* env = std::getenv("ADMF_LOG");
  const std::string level = env ? env : "info";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else {
    spdlog::set_level(spdlog::level::info);
    if (level != "info") spdlog::warn("ADMF_LOG='{}' not recognised, using info", level);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Edge/fog autoencoder anomaly detection toolkit"};
  app.require_subcommand(1);

  Common common;

  auto* gen = app.add_subcommand("generate", "Generate synthetic train/test/events CSVs");
  add_common(gen, common);
  std::string out_dir = "data";
  gen->add_option("--out-dir", out_dir, "output directory")->capture_default_str();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train and calibrate a detector, write a .admf model");
  add_common(train, common);
  train->add_option("--role", ta.role, "edge or fog")->check(CLI::IsMember({"edge", "fog"}))->capture_default_str();
  train->add_option("--profile", ta.profile, "hl1, hl3 or hl5 (default hl1 for edge, hl5 for fog)")
      ->check(CLI::IsMember({"hl1", "hl3", "hl5"}));
  train->add_option("--L", ta.L, "window length for --role fog, in [2, 20]");
  train->add_option("--schema", ta.schema, "gps or no-gps")->check(CLI::IsMember({"gps", "no-gps"}))
      ->capture_default_str();
  train->add_option("--train-csv", ta.train_csv, "training dataset CSV")->required();
  train->add_option("--out", ta.out, "output .admf path")->required();
  train->add_option("--precision", ta.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();
  train->add_option("--history", ta.history, "write the per-epoch loss history CSV (includes timings)");

  std::string ex_in, ex_out, ex_prec = "f32";
  auto* exp = app.add_subcommand("export", "Re-export a .admf model at another precision");
  add_common(exp, common);
  exp->add_option("--model", ex_in, "input .admf")->required();
  exp->add_option("--out", ex_out, "output .admf")->required();
  exp->add_option("--precision", ex_prec, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();

  NetArgs net;
  ServeArgs sa;
  auto* serve = app.add_subcommand("serve-fog", "Run the fog gateway on a UDP port");
  add_common(serve, common);
  serve->add_option("--fog-model", sa.fog_model, "fog .admf")->required();
  serve->add_option("--schema", sa.schema, "gps or no-gps")->check(CLI::IsMember({"gps", "no-gps"}))
      ->capture_default_str();
  serve->add_option("--host", net.host, "bind address (default from config, 127.0.0.1)");
  serve->add_option("--port", net.port, "UDP port (default 47808)");
  serve->add_option("--c-th", sa.c_th, "offload threshold in [0.5, 1]");
  serve->add_option("--decisions", sa.decisions, "decision log CSV (default stdout)");
  serve->add_option("--max-packets", sa.max_packets, "exit after this many datagrams (0 = no limit)");
  serve->add_option("--idle-timeout-ms", sa.idle_timeout_ms, "exit after this long without traffic (0 = never)");

  EdgeArgs ea;
  auto* edge = app.add_subcommand("run-edge", "Stream a test CSV through an edge node to a gateway over UDP");
  add_common(edge, common);
  edge->add_option("--edge-model", ea.edge_model, "edge .admf")->required();
  edge->add_option("--test-csv", ea.test_csv, "dataset CSV to stream")->required();
  edge->add_option("--schema", ea.schema, "gps or no-gps")->check(CLI::IsMember({"gps", "no-gps"}))
      ->capture_default_str();
  edge->add_option("--host", net.host, "gateway address");
  edge->add_option("--port", net.port, "gateway UDP port");
  edge->add_option("--device-id", ea.device_id, "device id")->capture_default_str();
  edge->add_option("--interval-ms", ea.interval_ms, "pause between packets")->capture_default_str();
  edge->add_flag("--apply-loss", ea.apply_loss, "drop packets with the configured loss_rate (seeded)");

  ReplayArgs ra;
  auto* rep = app.add_subcommand("replay", "Replay a test stream through edge and fog, then score it");
  add_common(rep, common);
  rep->add_option("--edge-model", ra.edge_model, "edge .admf")->required();
  rep->add_option("--fog-model", ra.fog_model, "fog .admf")->required();
  rep->add_option("--test-csv", ra.test_csv, "test dataset CSV")->required();
  rep->add_option("--events-csv", ra.events_csv, "ground-truth events; enables P/R/F1");
  rep->add_option("--schema", ra.schema, "gps or no-gps")->check(CLI::IsMember({"gps", "no-gps"}))
      ->capture_default_str();
  rep->add_option("--c-th", ra.c_th, "offload threshold in [0.5, 1]");
  rep->add_option("--mode", ra.mode, "inproc (deterministic) or socket (loopback UDP)")
      ->check(CLI::IsMember({"inproc", "socket"}))->capture_default_str();
  rep->add_option("--decisions", ra.decisions, "write the decision log CSV");
  rep->add_option("--devices", ra.devices, "number of devices replaying the stream")->capture_default_str();

  EvalArgs va;
  auto* eval = app.add_subcommand("evaluate", "Train ensembles and write the edge/fog/baseline report");
  add_common(eval, common);
  eval->add_option("--data-dir", va.data_dir, "directory with train.csv, test.csv, events.csv (default: generate)");
  eval->add_option("--ensemble", va.ensemble, "ensemble size (default 20)");
  eval->add_option("--L", va.lengths, "window lengths, e.g. 10, 2-20 or 2,5,10");
  eval->add_option("--variants", va.variants, "comma list of gps, no-gps");
  eval->add_option("--edge-profiles", va.edge_profiles, "comma list of hl1, hl3, hl5");
  eval->add_option("--fog-profiles", va.fog_profiles, "comma list of hl1, hl3, hl5");
  eval->add_flag("--baselines", va.baselines, "also evaluate KNN, PCA, HBOD and ABOD");
  eval->add_option("--detector", va.detectors, "comma list of ae, knn, pca, hbod, abod (default ae)");
  eval->add_option("--threads", va.threads, "ensemble members trained concurrently");
  eval->add_option("--out", va.out, "report CSV")->capture_default_str();
  eval->add_option("--plot-dir", va.plot_dir, "write one L,f1_mean,f1_sigma CSV per curve");

  std::string rp_in, rp_model, rp_variant = "gps", rp_out;
  auto* rpt = app.add_subcommand("report", "Print a report CSV or extract one F1-vs-L curve");
  add_common(rpt, common);
  rpt->add_option("--report", rp_in, "report CSV")->required();
  rpt->add_option("--model", rp_model, "extract the curve of this model");
  rpt->add_option("--variant", rp_variant, "variant of the curve")->capture_default_str();
  rpt->add_option("--out", rp_out, "plot CSV path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(common, out_dir);
    if (*train) return cmd_train(common, ta);
    if (*exp) return cmd_export(common, ex_in, ex_out, ex_prec);
    if (*serve) return cmd_serve_fog(common, net, sa);
    if (*edge) return cmd_run_edge(common, net, ea);
    if (*rep) return cmd_replay(common, ra);
    if (*eval) return cmd_evaluate(common, va);
    if (*rpt) return cmd_report(common, rp_in, rp_model, rp_variant, rp_out);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 2;
}
