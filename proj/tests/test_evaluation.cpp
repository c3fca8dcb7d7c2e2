#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "adm/evaluation.hpp"

using namespace adm;

namespace {

std::vector<AnomalyEvent> events_of(std::initializer_list<std::pair<std::uint32_t, std::uint32_t>> spans) {
  std::vector<AnomalyEvent> out;
  std::uint32_t id = 1;
  for (auto [a, b] : spans) out.push_back({id++, EventKind::shake, a, b});
  return out;
}

Scenario tiny() {
  ScenarioConfig c;
  c.seed = 3;
  c.n_train_points = 400;
  c.n_test_points = 200;
  c.n_events = 5;
  return generate(c);
}

ExperimentSpec quick_spec(std::size_t ensemble) {
  ExperimentSpec s;
  s.ensemble = ensemble;
  s.window_lengths = {3};
  s.train.epochs = 8;
  s.seed = 21;
  return s;
}

}  // namespace

TEST(ScoreEvents, Examples) {
  const auto ev = events_of({{10, 20}});
  EXPECT_EQ(score_events(ev, {12, 35, 36}), (ConfusionCounts{1, 1, 0}));
  const auto three = events_of({{5, 7}, {20, 22}, {40, 49}});
  EXPECT_EQ(score_events(three, {}), (ConfusionCounts{0, 0, 3}));
  std::set<std::uint32_t> cover;
  for (const auto& e : three)
    for (auto s = e.start_seq; s <= e.end_seq; ++s) cover.insert(s);
  EXPECT_EQ(score_events(three, cover), (ConfusionCounts{3, 0, 0}));
}

TEST(ScoreEvents, RunsTouchingEventsAreNotFalsePositives) {
  const auto ev = events_of({{10, 20}});
  // 8..11 overlaps the event; 22 and 24 are separate runs.
  EXPECT_EQ(score_events(ev, {8, 9, 10, 11, 22, 24}), (ConfusionCounts{1, 2, 0}));
  EXPECT_EQ(score_events(ev, {0, 1, 2, 3}), (ConfusionCounts{0, 1, 1}));
}

TEST(ScoreEvents, TpPlusFnIsEventCountAndOrderFree) {
  std::mt19937_64 rng(4);
  const auto ev = events_of({{3, 6}, {15, 19}, {30, 31}, {50, 58}});
  std::uniform_int_distribution<std::uint32_t> seq(0, 70);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::uint32_t> flags(static_cast<std::size_t>(seq(rng) % 20));
    for (auto& f : flags) f = seq(rng);
    const auto c = score_events(ev, std::set<std::uint32_t>(flags.begin(), flags.end()));
    EXPECT_EQ(c.tp + c.fn, ev.size());
    std::shuffle(flags.begin(), flags.end(), rng);
    auto doubled = flags;
    doubled.insert(doubled.end(), flags.begin(), flags.end());
    EXPECT_EQ(score_events(ev, std::set<std::uint32_t>(doubled.begin(), doubled.end())), c);
  }
}

TEST(Metrics, ReferenceRows) {
  EXPECT_NEAR(f1_score(0.681, 0.764), 0.720, 0.001);
  EXPECT_NEAR(f1_score(0.821, 0.8205), 0.8208, 0.001);
  EXPECT_NEAR(f1_score(0.8255, 0.8462), 0.8357, 0.001);
}

TEST(Metrics, CountsAndZeroConvention) {
  const auto all = precision_recall_f1({5, 0, 0});
  EXPECT_EQ(all.precision, 1.0);
  EXPECT_EQ(all.recall, 1.0);
  EXPECT_EQ(all.f1, 1.0);
  const auto none = precision_recall_f1({0, 0, 4});
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
  EXPECT_EQ(precision_recall_f1({0, 0, 0}).f1, 0.0);
  const auto m = precision_recall_f1({3, 1, 2});
  EXPECT_DOUBLE_EQ(m.precision, 0.75);
  EXPECT_DOUBLE_EQ(m.recall, 0.6);
  EXPECT_DOUBLE_EQ(m.f1, 2 * 0.75 * 0.6 / 1.35);
}

TEST(Metrics, F1SymmetricAndBounded) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double p = u(rng), r = u(rng);
    const double f = f1_score(p, r);
    EXPECT_EQ(f, f1_score(r, p));
    EXPECT_GE(f, std::min(p, r) - 1e-15);
    EXPECT_LE(f, std::max(p, r) + 1e-15);
  }
}

TEST(Summaries, PopulationSigma) {
  const std::vector<double> xs = {0.5, 0.7, 0.9};
  const auto s = summarize(xs);
  EXPECT_DOUBLE_EQ(s.mean, 0.7);
  EXPECT_NEAR(s.sigma, std::sqrt(0.08 / 3.0), 1e-15);
  EXPECT_EQ(summarize(std::vector<double>{}).mean, 0.0);
}

TEST(DecisionLog, OffloadFractionAndDelay) {
  std::vector<FinalDecision> log = {
      {1, 0, DecisionSource::edge, false, 0.9, 0.0, 0},
      {1, 1, DecisionSource::fog, true, 0.8, 300.0, 0},
      {1, 2, DecisionSource::fog, false, 0.6, 100.0, 0},
      {2, 0, DecisionSource::edge, true, 0.7, 0.0, kWindowNotReady},
  };
  EXPECT_DOUBLE_EQ(offload_fraction(log), 0.5);
  EXPECT_DOUBLE_EQ(mean_response_delay(log), 100.0);
  EXPECT_EQ(flagged_seqs(log, 1), (std::set<std::uint32_t>{1}));
  EXPECT_EQ(flagged_seqs(log, 2), (std::set<std::uint32_t>{0}));
  EXPECT_EQ(offload_fraction({}), 0.0);
}

TEST(Flagging, WindowEndsAtItsLastPoint) {
  const auto sc = tiny();
  const auto schema = FeatureSchema::standard(true);
  const Matrix pts = sc.test.select(schema);
  const std::size_t L = 4;
  // Threshold below any error flags every complete window.
  DetectorModel always{AutoencoderModel(build_architecture(L * schema.size(), Profile::HL1)), -1.0};
  const auto flags = flag_windows(always, sc.test, pts, L);
  EXPECT_EQ(flags.size(), sc.test.size() - L + 1);
  EXPECT_EQ(*flags.begin(), sc.test.seq[L - 1]);
  EXPECT_EQ(*flags.rbegin(), sc.test.seq.back());
  DetectorModel point{AutoencoderModel(build_architecture(schema.size(), Profile::HL1)), -1.0};
  EXPECT_EQ(flag_points(point, sc.test, pts).size(), sc.test.size());
}

TEST(Experiment, SingleMemberEqualsDirectRun) {
  const auto sc = tiny();
  const auto spec = quick_spec(1);
  const auto report = run_experiment(spec, sc.train, sc.test);
  const auto* edge = report.find("edge-hl1", "gps", 1);
  ASSERT_NE(edge, nullptr);
  EXPECT_EQ(edge->members, 1u);
  EXPECT_EQ(edge->f1.sigma, 0.0);

  const auto schema = FeatureSchema::standard(true);
  const auto det = train_detector(sc.train.select(schema), Profile::HL1, spec.train, member_seed(spec.seed, 0));
  const auto m = precision_recall_f1(score_events(sc.test.events, flag_points(det, sc.test, sc.test.select(schema))));
  EXPECT_EQ(edge->precision.mean, m.precision);
  EXPECT_EQ(edge->recall.mean, m.recall);
  EXPECT_EQ(edge->f1.mean, m.f1);
  ASSERT_NE(report.find("fog-hl5", "gps", 3), nullptr);
  ASSERT_NE(report.find("system-hl1+hl5", "gps", 3), nullptr);
}

TEST(Experiment, EnsembleMeanIsMemberMean) {
  const auto sc = tiny();
  auto spec = quick_spec(3);
  spec.threads = 2;
  const auto report = run_experiment(spec, sc.train, sc.test);
  for (const auto& row : report.rows) {
    ASSERT_EQ(row.member_f1.size(), 3u);
    double mean = 0.0;
    for (double f : row.member_f1) mean += f / 3.0;
    EXPECT_NEAR(row.f1.mean, mean, 1e-15);
    for (const auto* ms : {&row.precision, &row.recall, &row.f1}) {
      EXPECT_GE(ms->mean, 0.0);
      EXPECT_LE(ms->mean, 1.0);
    }
    EXPECT_GE(row.offload_fraction, 0.0);
    EXPECT_LE(row.offload_fraction, 1.0);
  }
  // Thread count does not change the result.
  spec.threads = 1;
  std::ostringstream a, b;
  write_report_csv(a, report);
  write_report_csv(b, run_experiment(spec, sc.train, sc.test));
  EXPECT_EQ(a.str(), b.str());
}

TEST(Experiment, RejectsEmptyEnsemble) {
  const auto sc = tiny();
  EXPECT_THROW(run_experiment(quick_spec(0), sc.train, sc.test), ConfigError);
}

TEST(Experiment, BaselineRows) {
  const auto sc = tiny();
  auto spec = quick_spec(1);
  spec.edge_profiles.clear();
  spec.fog_profiles.clear();
  spec.baselines.assign(std::begin(kAllBaselines), std::end(kAllBaselines));
  const auto report = run_experiment(spec, sc.train, sc.test);
  for (const char* k : {"knn", "pca", "hbod", "abod"}) {
    EXPECT_NE(report.find(std::string(k) + "-point", "gps", 1), nullptr) << k;
    EXPECT_NE(report.find(std::string(k) + "-window", "gps", 3), nullptr) << k;
  }
  EXPECT_EQ(report.rows.size(), 8u);
  spec.baselines = {BaselineKind::hbod};
  const auto one = run_experiment(spec, sc.train, sc.test);
  ASSERT_EQ(one.rows.size(), 2u);
  EXPECT_EQ(one.rows[0].model, "hbod-point");
  EXPECT_EQ(one.rows[1].model, "hbod-window");
}

TEST(ReportCsv, Layout) {
  ExperimentReport r;
  ReportRow row;
  row.model = "fog-HL5";
  row.variant = "no-gps";
  row.L = 7;
  row.profile = "HL5";
  row.members = 2;
  row.f1 = {0.75, 0.25};
  r.rows.push_back(row);
  row.L = 9;
  row.f1 = {0.5, 0.0};
  r.rows.push_back(row);
  std::ostringstream os;
  write_report_csv(os, r);
  std::istringstream is(os.str());
  std::string header, first;
  std::getline(is, header);
  std::getline(is, first);
  EXPECT_EQ(header,
            "model,variant,L,profile,members,precision_mean,precision_sigma,recall_mean,recall_sigma,f1_mean,f1_sigma,"
            "point_f1,mean_response_delay_ms,offload_fraction");
  EXPECT_EQ(first, "fog-HL5,no-gps,7,HL5,2,0,0,0,0,0.75,0.25,0,0,0");
  std::ostringstream plot;
  write_plot_csv(plot, r, "fog-HL5", "no-gps");
  EXPECT_EQ(plot.str(), "L,f1_mean,f1_sigma\n7,0.75,0.25\n9,0.5,0\n");
}

TEST(ReportCsv, ReadBack) {
  const auto sc = tiny();
  const auto report = run_experiment(quick_spec(2), sc.train, sc.test);
  std::ostringstream os;
  write_report_csv(os, report);
  std::istringstream is(os.str());
  const auto back = read_report_csv(is);
  ASSERT_EQ(back.rows.size(), report.rows.size());
  std::ostringstream again;
  write_report_csv(again, back);
  EXPECT_EQ(again.str(), os.str());
  std::istringstream bad("model,variant\n");
  EXPECT_THROW(read_report_csv(bad), ConfigError);
}
