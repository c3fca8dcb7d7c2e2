#pragma once

// Event-level scoring, precision/recall/F1 and the ensemble edge-vs-fog experiment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <istream>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "adm/baselines.hpp"
#include "adm/detail/format.hpp"
#include "adm/replay.hpp"
#include "adm/training.hpp"

namespace adm {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// An event is detected when any flagged seq falls inside it. Each maximal run of
// consecutive flagged seqs lying wholly outside every event is one false positive.
inline ConfusionCounts score_events(std::span<const AnomalyEvent> events, const std::set<std::uint32_t>& flagged) {
  ConfusionCounts c;
  auto inside = [&](std::uint32_t s) {
    return std::any_of(events.begin(), events.end(), [s](const auto& e) { return e.contains(s); });
  };
  for (const auto& e : events) {
    auto it = flagged.lower_bound(e.start_seq);
    if (it != flagged.end() && *it <= e.end_seq)
      ++c.tp;
    else
      ++c.fn;
  }
  bool run_touches_event = false;
  std::optional<std::uint32_t> prev;
  for (auto s : flagged) {
    if (prev && s == *prev + 1) {
      run_touches_event = run_touches_event || inside(s);
    } else {
      if (prev && !run_touches_event) ++c.fp;
      run_touches_event = inside(s);
    }
    prev = s;
  }
  if (prev && !run_touches_event) ++c.fp;
  return c;
}

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline double f1_score(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

// 0/0 is defined as 0 for every ratio.
inline Metrics precision_recall_f1(const ConfusionCounts& c) {
  Metrics m;
  m.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

// Point-level diagnostics: every seq counts individually.
inline Metrics point_metrics(const LabeledDataset& test, const std::set<std::uint32_t>& flagged) {
  ConfusionCounts c;
  for (auto s : test.seq) {
    const bool truth = test.is_anomalous(s), flag = flagged.count(s) != 0;
    if (truth && flag) ++c.tp;
    if (!truth && flag) ++c.fp;
    if (truth && !flag) ++c.fn;
  }
  return precision_recall_f1(c);
}

inline std::set<std::uint32_t> flagged_seqs(std::span<const FinalDecision> decisions, std::uint32_t device_id) {
  std::set<std::uint32_t> out;
  for (const auto& d : decisions)
    if (d.device_id == device_id && d.is_anomaly) out.insert(d.seq);
  return out;
}

inline double offload_fraction(std::span<const FinalDecision> decisions) {
  if (decisions.empty()) return 0.0;
  auto fog = std::count_if(decisions.begin(), decisions.end(),
                           [](const auto& d) { return d.source == DecisionSource::fog; });
  return static_cast<double>(fog) / static_cast<double>(decisions.size());
}

inline double mean_response_delay(std::span<const FinalDecision> decisions) {
  if (decisions.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : decisions) s += d.response_delay_ms;
  return s / static_cast<double>(decisions.size());
}

struct MeanSigma {
  double mean = 0.0;
  double sigma = 0.0;  // population standard deviation over members
};

inline MeanSigma summarize(std::span<const double> xs) {
  MeanSigma m;
  if (xs.empty()) return m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  for (double x : xs) m.sigma += (x - m.mean) * (x - m.mean);
  m.sigma = std::sqrt(m.sigma / static_cast<double>(xs.size()));
  return m;
}

// Flags from a detector applied to every test point on its own.
inline std::set<std::uint32_t> flag_points(const DetectorModel& det, const LabeledDataset& test, const Matrix& points) {
  std::set<std::uint32_t> out;
  for (std::size_t i = 0; i < points.rows(); ++i)
    if (detect(det, points.row(i)).is_anomaly) out.insert(test.seq[i]);
  return out;
}

// Flags from a windowed detector: window ending at point i flags seq i.
inline std::set<std::uint32_t> flag_windows(const DetectorModel& det, const LabeledDataset& test,
                                            const Matrix& points, std::size_t L) {
  std::set<std::uint32_t> out;
  if (points.rows() < L) return out;
  const Matrix windows = build_fog_training_set(points, L);
  for (std::size_t i = 0; i < windows.rows(); ++i)
    if (detect(det, windows.row(i)).is_anomaly) out.insert(test.seq[i + L - 1]);
  return out;
}

struct ReportRow {
  std::string model;    // e.g. edge-hl1, fog-hl5, system-hl1+hl5, knn-point, knn-window
  std::string variant;  // gps | no-gps
  std::size_t L = 1;
  std::string profile;
  std::size_t members = 0;
  MeanSigma precision, recall, f1;
  double point_f1 = 0.0;
  double mean_response_delay_ms = 0.0;
  double offload_fraction = 0.0;
  std::vector<double> member_f1;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;

  const ReportRow* find(const std::string& model, const std::string& variant, std::size_t L) const {
    for (const auto& r : rows)
      if (r.model == model && r.variant == variant && r.L == L) return &r;
    return nullptr;
  }
};

struct ExperimentSpec {
  std::vector<std::string> variants = {"gps"};
  std::vector<Profile> edge_profiles = {Profile::HL1};
  std::vector<Profile> fog_profiles = {Profile::HL5};
  std::vector<std::size_t> window_lengths = {10};
  std::size_t ensemble = 20;
  std::uint64_t seed = 1;
  TrainConfig train;
  double c_th = 0.75;
  std::size_t reorder_tolerance = 3;
  DelayModel delay;
  std::vector<BaselineKind> baselines;  // evaluated once each, in this order
  BaselineConfig baseline;
  std::size_t threads = 1;
};

// Training seed of ensemble member m.
inline std::uint64_t member_seed(std::uint64_t base, std::size_t m) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(m)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

inline DetectorModel train_detector(const Matrix& rows, Profile profile, TrainConfig cfg, std::uint64_t seed,
                                    TrainingHistory* history = nullptr) {
  cfg.rng_seed = seed;
  auto result = fit(rows, build_architecture(rows.cols(), profile), cfg);
  if (history) *history = result.history;
  return calibrate(std::move(result.model), rows);
}

namespace detail {

struct MemberOutcome {
  Metrics metrics;
  double point_f1 = 0.0;
  double delay_ms = 0.0;
  double offload = 0.0;
};

// Key of one report row; outcomes are collected per key in member order.
struct RowKey {
  std::string model, variant, profile;
  std::size_t L = 1;
  bool operator<(const RowKey& o) const {
    return std::tie(model, variant, L, profile) < std::tie(o.model, o.variant, o.L, o.profile);
  }
};

using MemberResults = std::vector<std::pair<RowKey, MemberOutcome>>;

inline MemberOutcome outcome(const LabeledDataset& test, const std::set<std::uint32_t>& flags) {
  MemberOutcome o;
  o.metrics = precision_recall_f1(score_events(test.events, flags));
  o.point_f1 = point_metrics(test, flags).f1;
  return o;
}

inline MemberResults run_member(const ExperimentSpec& spec, const LabeledDataset& train, const LabeledDataset& test,
                                std::size_t m) {
  MemberResults out;
  const std::uint64_t seed = member_seed(spec.seed, m);
  for (const auto& variant : spec.variants) {
    const auto schema = FeatureSchema::parse_variant(variant);
    const Matrix train_pts = train.select(schema);
    const Matrix test_pts = test.select(schema);

    std::vector<std::pair<Profile, DetectorModel>> edges;
    for (auto p : spec.edge_profiles) {
      auto det = train_detector(train_pts, p, spec.train, seed);
      out.push_back({{"edge-" + std::string(to_string(p)), variant, std::string(to_string(p)), 1},
                     outcome(test, flag_points(det, test, test_pts))});
      edges.emplace_back(p, std::move(det));
    }
    for (auto fp : spec.fog_profiles) {
      for (auto L : spec.window_lengths) {
        const Matrix windows = build_fog_training_set(train_pts, L);
        auto fog = std::make_shared<const DetectorModel>(train_detector(windows, fp, spec.train, seed + L));
        out.push_back({{"fog-" + std::string(to_string(fp)), variant, std::string(to_string(fp)), L},
                       outcome(test, flag_windows(*fog, test, test_pts, L))});
        for (const auto& [ep, edge] : edges) {
          FogGateway gateway(FogConfig{L, spec.c_th, spec.reorder_tolerance, fp}, fog);
          ReplayOptions opt;
          opt.delay = spec.delay;
          opt.seed = seed ^ 0xde1a7ULL;
          const auto result = replay(test, schema, edge, gateway, opt);
          auto o = outcome(test, flagged_seqs(result.decisions, opt.first_device_id));
          o.delay_ms = mean_response_delay(result.decisions);
          o.offload = offload_fraction(result.decisions);
          out.push_back({{"system-" + std::string(to_string(ep)) + "+" + std::string(to_string(fp)), variant,
                          std::string(to_string(fp)), L},
                         o});
        }
      }
    }
  }
  return out;
}

inline ReportRow make_row(const RowKey& key, const std::vector<MemberOutcome>& outs) {
  ReportRow row;
  row.model = key.model;
  row.variant = key.variant;
  row.L = key.L;
  row.profile = key.profile;
  row.members = outs.size();
  std::vector<double> p, r, f, pf;
  for (const auto& o : outs) {
    p.push_back(o.metrics.precision);
    r.push_back(o.metrics.recall);
    f.push_back(o.metrics.f1);
    pf.push_back(o.point_f1);
    row.mean_response_delay_ms += o.delay_ms / static_cast<double>(outs.size());
    row.offload_fraction += o.offload / static_cast<double>(outs.size());
  }
  row.precision = summarize(p);
  row.recall = summarize(r);
  row.f1 = summarize(f);
  row.point_f1 = summarize(pf).mean;
  row.member_f1 = f;
  return row;
}

}  // namespace detail

// Trains every ensemble member, evaluates edge, fog and end-to-end variants, and
// averages per-member metrics. Baselines are deterministic and evaluated once.
inline ExperimentReport run_experiment(const ExperimentSpec& spec, const LabeledDataset& train,
                                       const LabeledDataset& test,
                                       const std::function<void(const std::string&)>& progress = {}) {
  if (spec.ensemble == 0) throw ConfigError("ensemble size must be >= 1");
  std::vector<detail::MemberResults> members(spec.ensemble);
  const std::size_t threads = std::max<std::size_t>(1, spec.threads);
  for (std::size_t begin = 0; begin < spec.ensemble; begin += threads) {
    const std::size_t end = std::min(spec.ensemble, begin + threads);
    std::vector<std::future<detail::MemberResults>> jobs;
    for (std::size_t m = begin; m < end; ++m)
      jobs.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred,
                                [&, m] { return detail::run_member(spec, train, test, m); }));
    for (std::size_t m = begin; m < end; ++m) {
      members[m] = jobs[m - begin].get();
      if (progress) progress("ensemble member " + std::to_string(m + 1) + "/" + std::to_string(spec.ensemble) + " done");
    }
  }

  std::map<detail::RowKey, std::vector<detail::MemberOutcome>> grouped;
  std::vector<detail::RowKey> order;
  for (const auto& member : members)
    for (const auto& [key, o] : member) {
      if (!grouped.count(key)) order.push_back(key);
      grouped[key].push_back(o);
    }
  ExperimentReport report;
  for (const auto& key : order) report.rows.push_back(detail::make_row(key, grouped[key]));

  if (!spec.baselines.empty()) {
    for (const auto& variant : spec.variants) {
      const auto schema = FeatureSchema::parse_variant(variant);
      const Matrix train_pts = train.select(schema);
      const Matrix test_pts = test.select(schema);
      // Baselines see z-scored features, fitted on the training rows.
      auto run = [&](BaselineKind kind, const Matrix& tr, const Matrix& te, std::size_t L) {
        const auto norm = fit_normalizer(tr);
        const auto model = BaselineModel::fit(kind, normalize_rows(norm, tr), spec.baseline);
        std::set<std::uint32_t> flags;
        for (std::size_t i = 0; i < te.rows(); ++i)
          if (model.decide(norm.apply(te.row(i)))) flags.insert(test.seq[i + L - 1]);
        const std::string suffix = L == 1 ? "-point" : "-window";
        report.rows.push_back(
            detail::make_row({std::string(to_string(kind)) + suffix, variant, "", L}, {detail::outcome(test, flags)}));
        if (progress) progress(std::string(to_string(kind)) + suffix + " L=" + std::to_string(L) + " done");
      };
      for (auto kind : spec.baselines) {
        run(kind, train_pts, test_pts, 1);
        for (auto L : spec.window_lengths)
          run(kind, build_fog_training_set(train_pts, L), build_fog_training_set(test_pts, L), L);
      }
    }
  }
  return report;
}

inline constexpr const char* kReportHeader =
    "model,variant,L,profile,members,precision_mean,precision_sigma,recall_mean,recall_sigma,f1_mean,f1_sigma,"
    "point_f1,mean_response_delay_ms,offload_fraction";

inline void write_report_csv(std::ostream& os, const ExperimentReport& report) {
  using detail::format_double;
  os << kReportHeader << '\n';
  for (const auto& r : report.rows) {
    os << r.model << ',' << r.variant << ',' << r.L << ',' << r.profile << ',' << r.members << ','
       << format_double(r.precision.mean) << ',' << format_double(r.precision.sigma) << ','
       << format_double(r.recall.mean) << ',' << format_double(r.recall.sigma) << ',' << format_double(r.f1.mean)
       << ',' << format_double(r.f1.sigma) << ',' << format_double(r.point_f1) << ','
       << format_double(r.mean_response_delay_ms) << ',' << format_double(r.offload_fraction) << '\n';
  }
}

// Member F1 values are not stored in the CSV and come back empty.
inline ExperimentReport read_report_csv(std::istream& is, const std::string& origin = "<report>") {
  ExperimentReport report;
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != kReportHeader)
    throw ConfigError(origin + ": unexpected report header");
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto c = detail::split(detail::trim(line), ',');
    if (c.size() != 14) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 14 columns");
    ReportRow r;
    r.model = c[0];
    r.variant = c[1];
    r.L = detail::parse_int<std::size_t>(c[2]);
    r.profile = c[3];
    r.members = detail::parse_int<std::size_t>(c[4]);
    r.precision = {detail::parse_double(c[5]), detail::parse_double(c[6])};
    r.recall = {detail::parse_double(c[7]), detail::parse_double(c[8])};
    r.f1 = {detail::parse_double(c[9]), detail::parse_double(c[10])};
    r.point_f1 = detail::parse_double(c[11]);
    r.mean_response_delay_ms = detail::parse_double(c[12]);
    r.offload_fraction = detail::parse_double(c[13]);
    report.rows.push_back(std::move(r));
  }
  return report;
}

// One F1-vs-L curve for (model, variant).
inline void write_plot_csv(std::ostream& os, const ExperimentReport& report, const std::string& model,
                           const std::string& variant) {
  using detail::format_double;
  os << "L,f1_mean,f1_sigma\n";
  for (const auto& r : report.rows)
    if (r.model == model && r.variant == variant)
      os << r.L << ',' << format_double(r.f1.mean) << ',' << format_double(r.f1.sigma) << '\n';
}

}  // namespace adm
