#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "support.hpp"
#include "zebra/detect.hpp"
#include "zebra/error.hpp"
#include "zebra/synth.hpp"

namespace zebra {
namespace {

using testing::TempDir;

struct Trace {
  std::vector<TimestampMs> t;
  std::vector<double> ax;
  std::vector<double> ay;
};

Trace run(const ScenarioSpec& spec) {
  SignalGenerator gen(spec);
  Trace out;
  TimestampMs t = 0;
  double v[2];
  while (gen.next(t, v)) {
    out.t.push_back(t);
    out.ax.push_back(v[0]);
    out.ay.push_back(v[1]);
  }
  return out;
}

std::string csv_of(const ScenarioSpec& spec) {
  std::ostringstream out;
  generate(spec, out);
  return out.str();
}

TEST(Synth, QuietScenarioIsFlat) {
  ScenarioSpec spec;
  spec.duration_s = 10;
  spec.noise_amplitude = 0.0;
  const Trace trace = run(spec);
  ASSERT_EQ(trace.t.size(), 1000u);
  for (std::size_t i = 0; i < trace.t.size(); ++i) {
    ASSERT_EQ(trace.t[i], static_cast<TimestampMs>(i) * 10);
    ASSERT_EQ(trace.ax[i], 0.0);
    ASSERT_EQ(trace.ay[i], 0.0);
  }
  TempDir dir;
  std::istringstream csv(csv_of(spec));
  const Store store = ingest_csv(csv, dir / "s", QuantizationConfig::default_2d());
  std::set<std::uint64_t> codes;
  for (const auto& p : store.spectrum(1000)) codes.insert(p.code.value);
  EXPECT_EQ(codes.size(), 1u);
}

TEST(Synth, BrakingPulseFollowsClosedForm) {
  ScenarioSpec spec;
  spec.duration_s = 60;
  spec.maneuvers = {{ManeuverKind::braking, 30000, 8.0}};
  std::ostringstream sink;
  const auto annotations = generate(spec, sink);
  ASSERT_EQ(annotations, (std::vector<Annotation>{{ManeuverKind::braking, 30000, 32500}}));

  const Trace trace = run(spec);
  double min_ax = 0.0;
  for (std::size_t i = 0; i < trace.t.size(); ++i) {
    const TimestampMs t = trace.t[i];
    if (t < 30000 || t > 32500) continue;
    const double u = static_cast<double>(t - 30000) / 2500.0;
    // Raised-cosine hat, evaluated independently; background is gated off here.
    ASSERT_NEAR(trace.ax[i], -8.0 * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * u)), 1e-12) << t;
    ASSERT_EQ(trace.ay[i], 0.0) << t;
    min_ax = std::min(min_ax, trace.ax[i]);
  }
  const double step = QuantizationConfig::default_2d().step(0);
  EXPECT_NEAR(min_ax, -8.0, step);
}

TEST(Synth, LaneChangeIsNegativeThenPositiveLobe) {
  ScenarioSpec spec;
  spec.duration_s = 20;
  spec.maneuvers = {{ManeuverKind::lane_change, 5000, 3.0}};
  const Trace trace = run(spec);
  for (std::size_t i = 0; i < trace.t.size(); ++i) {
    const TimestampMs t = trace.t[i];
    if (t > 5000 && t < 6250) {
      ASSERT_LT(trace.ay[i], 0.0) << t;
    }
    if (t > 6250 && t < 7500) {
      ASSERT_GT(trace.ay[i], 0.0) << t;
    }
    if (t >= 5000 && t <= 7500) {
      ASSERT_EQ(trace.ax[i], 0.0) << t;
    }
  }
  // Lobe apexes at 5625 and 6875 ms fall between samples; the nearest sample
  // is 5 ms off, where the lobe is 3 * (1 + cos(2 pi 5 / 1250)) / 2.
  const double near_apex = 1.5 * (1.0 + std::cos(2.0 * std::numbers::pi * 5.0 / 1250.0));
  EXPECT_NEAR(*std::min_element(trace.ay.begin(), trace.ay.end()), -near_apex, 1e-12);
  EXPECT_NEAR(*std::max_element(trace.ay.begin(), trace.ay.end()), near_apex, 1e-12);
}

TEST(Synth, BackgroundStaysWithinAmplitude) {
  ScenarioSpec spec;
  spec.duration_s = 120;
  spec.noise_amplitude = 0.4;
  spec.background_phases = {{60000, 2.0, 50.0, 500}};
  const Trace trace = run(spec);
  double early = 0.0;
  double late = 0.0;
  for (std::size_t i = 0; i < trace.t.size(); ++i) {
    const double m = std::max(std::abs(trace.ax[i]), std::abs(trace.ay[i]));
    (trace.t[i] < 60000 ? early : late) = std::max(trace.t[i] < 60000 ? early : late, m);
  }
  EXPECT_LE(early, 0.4);
  EXPECT_GT(early, 0.1);
  EXPECT_LE(late, 2.0);
  EXPECT_GT(late, 1.0);
}

TEST(Synth, SameSeedSameBytes) {
  ScenarioSpec spec;
  spec.duration_s = 120;
  spec.seed = 99;
  spec.maneuvers = schedule_maneuvers(5, 120, 30, 3, 10);
  EXPECT_EQ(csv_of(spec), csv_of(spec));
  ScenarioSpec other = spec;
  other.seed = 100;
  EXPECT_NE(csv_of(spec), csv_of(other));
}

TEST(Synth, ValidationRejectsBadSpecs) {
  auto rejects = [](auto mutate) {
    ScenarioSpec spec;
    mutate(spec);
    EXPECT_THROW(spec.validate(), InvalidInput);
  };
  rejects([](ScenarioSpec& s) { s.maneuvers = {{ManeuverKind::braking, 1000, 5}, {ManeuverKind::lane_change, 3000, 5}}; });
  rejects([](ScenarioSpec& s) { s.maneuvers = {{ManeuverKind::braking, 58000, 5}}; });
  rejects([](ScenarioSpec& s) { s.maneuvers = {{ManeuverKind::braking, -10, 5}}; });
  rejects([](ScenarioSpec& s) { s.maneuvers = {{ManeuverKind::braking, 0, -1}}; });
  rejects([](ScenarioSpec& s) { s.sample_rate_hz = 300; });
  rejects([](ScenarioSpec& s) { s.sample_rate_hz = 0; });
  rejects([](ScenarioSpec& s) { s.noise_amplitude = -1; });
  rejects([](ScenarioSpec& s) { s.noise_correlation_ms = 0; });
  rejects([](ScenarioSpec& s) { s.background_phases = {{100, 1.0}, {100, 1.0}}; });
  rejects([](ScenarioSpec& s) { s.background_phases = {{0, 1.0, 0.0}}; });
  rejects([](ScenarioSpec& s) { s.background_phases = {{0, 1.0, 10.0, -5}}; });

  ScenarioSpec adjacent;
  adjacent.maneuvers = {{ManeuverKind::braking, 1000, 5}, {ManeuverKind::lane_change, 3500, 5}};
  EXPECT_NO_THROW(adjacent.validate());
  EXPECT_THROW(parse_maneuver_kind("drift"), InvalidInput);
}

TEST(Synth, ScheduledManeuversFitTheirSlots) {
  const auto ms = schedule_maneuvers(3, 600, 60, 3, 10);
  ASSERT_EQ(ms.size(), 10u);
  for (std::size_t i = 0; i < ms.size(); ++i) {
    EXPECT_EQ(ms[i].kind, i % 2 ? ManeuverKind::lane_change : ManeuverKind::braking);
    EXPECT_GE(ms[i].t_insert_ms, static_cast<TimestampMs>(i) * 60000);
    EXPECT_LE(ms[i].t_insert_ms + kManeuverWidthMs, static_cast<TimestampMs>(i + 1) * 60000);
    EXPECT_EQ(ms[i].t_insert_ms % 10, 0);
    EXPECT_GE(ms[i].magnitude, 3.0);
    EXPECT_LE(ms[i].magnitude, 10.0);
  }
  ScenarioSpec spec;
  spec.duration_s = 600;
  spec.maneuvers = ms;
  EXPECT_NO_THROW(spec.validate());
  EXPECT_THROW(schedule_maneuvers(3, 600, 5, 3, 10), InvalidInput);
}

TEST(Synth, AnnotationsCsv) {
  std::ostringstream out;
  const std::vector<Annotation> a{{ManeuverKind::braking, 1, 2501}, {ManeuverKind::lane_change, 9000, 11500}};
  write_annotations_csv(out, a);
  EXPECT_EQ(out.str(), "kind,t_start_ms,t_end_ms\nbraking,1,2501\nlane_change,9000,11500\n");
}

TEST(Synth, ScaleCorpusBuildsNestedPrefixes) {
  TempDir dir;
  ScenarioSpec spec;
  spec.seed = 4;
  spec.background_phases = {{0, 3.0, 50.0, 2500}};
  spec.maneuvers = schedule_maneuvers(4, 400, 20, 3, 10);
  spec.duration_s = 400;
  const std::vector<std::uint64_t> counts{4000, 15000, 40000};
  const auto stores = scale_corpus(spec, counts, dir.path(), QuantizationConfig::default_2d());
  ASSERT_EQ(stores.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(stores[k].size(), counts[k]);
  for (std::size_t i = 0; i < counts[0]; ++i) {
    ASSERT_EQ(stores[0].time_at(i), stores[2].time_at(i));
    ASSERT_EQ(stores[0].values_at(i)[0], stores[2].values_at(i)[0]);
    ASSERT_EQ(stores[1].values_at(i)[1], stores[2].values_at(i)[1]);
  }

  // Events of a prefix store are the larger store's events that end inside
  // the prefix, except where a segment is cut at the prefix boundary.
  const auto braking = parse_mask("stage -16 -0.0002 -1 1\noutlier 20\n");
  const auto small = detect_bf_primitive(stores[0], braking);
  const auto large = detect_bf_primitive(stores[2], braking);
  ASSERT_FALSE(small.empty());
  const TimestampMs horizon = stores[0].time_at(stores[0].size() - 1);
  for (const auto& e : small) {
    if (e.t_end + braking.params.max_outlier_ms >= horizon) continue;
    EXPECT_NE(std::find(large.begin(), large.end(), e), large.end()) << e.t_start;
  }

  EXPECT_TRUE(scale_corpus(spec, {}, dir / "none", QuantizationConfig::default_2d()).empty());
  const std::vector<std::uint64_t> descending{10, 5};
  EXPECT_THROW(scale_corpus(spec, descending, dir / "bad", QuantizationConfig::default_2d()), InvalidInput);
}

TEST(Synth, CanonicalMasksRecoverAnnotations) {
  ScenarioSpec spec;
  spec.duration_s = 300;
  spec.seed = 21;
  spec.maneuvers = schedule_maneuvers(21, 300, 30, 3, 10);
  std::stringstream csv;
  const auto annotations = generate(spec, csv);
  TempDir dir;
  const Store store = ingest_csv(csv, dir / "s", QuantizationConfig::default_2d());
  const auto braking = load_mask(std::string(ZEBRA_MASK_DIR) + "/braking.mask");
  const auto lane = load_mask(std::string(ZEBRA_MASK_DIR) + "/lane_change.mask");
  std::vector<Event> found;
  for (const auto& mask : {braking, lane}) {
    const auto events = detect_bf_primitive(store, mask);
    found.insert(found.end(), events.begin(), events.end());
  }
  std::sort(found.begin(), found.end());
  ASSERT_EQ(found.size(), annotations.size());
  for (std::size_t i = 0; i < found.size(); ++i) {
    EXPECT_NEAR(found[i].t_start, annotations[i].t_start, 10);
    EXPECT_NEAR(found[i].t_end, annotations[i].t_end, 10);
  }
}

}  // namespace
}  // namespace zebra
