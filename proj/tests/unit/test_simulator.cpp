#include <gtest/gtest.h>

#include <cmath>

#include "traitwave/codec.hpp"
#include "traitwave/dataset.hpp"
#include "traitwave/simulator.hpp"

using namespace traitwave;
using namespace traitwave::sim;

TEST(Cohort, SeededDeterminism) {
  const auto a = sample_cohort(80, default_effects(), 7);
  const auto b = sample_cohort(80, default_effects(), 7);
  const auto c = sample_cohort(80, default_effects(), 8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(a.front().subject_id, "S001");
  EXPECT_EQ(a.back().subject_id, "S080");
}

TEST(Cohort, SingleSubjectShape) {
  const auto c = sample_cohort(1, default_effects(), 1);
  ASSERT_EQ(c.size(), 1u);
  for (double m : c[0].base_log_mean) EXPECT_TRUE(std::isfinite(m));
  for (double s : c[0].base_log_std) EXPECT_GT(s, 0.0);
}

TEST(Cohort, ZeroSubjectsRejected) {
  EXPECT_THROW(sample_cohort(0, default_effects(), 1), Error);
}

TEST(Cohort, NullScaleLeavesBandParametersIndependentOfLabels) {
  // At scale 0 a subject's band parameters are the same whatever the effect
  // layout, so they cannot depend on the labels.
  EffectConfig none = default_effects(kScaleNone);
  EffectConfig empty;
  empty.scale = 1.0;
  const auto a = sample_cohort(40, none, 3);
  const auto b = sample_cohort(40, empty, 3);
  EXPECT_EQ(a, b);
}

TEST(Cohort, PositiveRateRespected) {
  PopulationConfig pop;
  pop.positive_rate = 0.2;
  const auto c = sample_cohort(500, default_effects(), 4, pop);
  std::size_t pos = 0;
  for (const auto& p : c)
    for (bool v : p.labels.values) pos += v ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(pos) / (500.0 * kNumTraits), 0.2, 0.02);
}

TEST(Cohort, EffectShiftsTargetBand) {
  const auto c0 = sample_cohort(1, default_effects(kScaleNone), 9);
  const auto c1 = sample_cohort(1, default_effects(kScaleStrong), 9);
  const auto& labels = c0[0].labels;
  const auto effects = default_effects();
  for (std::size_t b = 0; b < kNumBands; ++b) {
    double expected = 0.0;
    for (std::size_t t = 0; t < kNumTraits; ++t)
      if (labels.values[t])
        for (const auto& s : effects.effects[t])
          if (index_of(s.band) == b) expected += s.log_shift;
    EXPECT_NEAR(c1[0].base_log_mean[b] - c0[0].base_log_mean[b], expected, 1e-12);
  }
}

TEST(Segment, RowCountAndTimestamps) {
  const auto p = sample_cohort(1, default_effects(), 2)[0];
  const auto seg = generate_segment(p, Emotion::Sad, 120, 1, 5);
  ASSERT_EQ(seg.rows.size(), 120u);
  EXPECT_EQ(seg.rows[0].timestamp_ms, 0u);
  EXPECT_EQ(seg.rows[1].timestamp_ms, 1000u);
  const auto fast = generate_segment(p, Emotion::Sad, 2, 3, 5);
  ASSERT_EQ(fast.rows.size(), 6u);
  for (std::size_t k = 1; k < fast.rows.size(); ++k) EXPECT_GT(fast.rows[k].timestamp_ms, fast.rows[k - 1].timestamp_ms);
  EXPECT_THROW(generate_segment(p, Emotion::Sad, 0, 1, 5), Error);
}

TEST(Segment, TinyVarianceGivesTheMedian) {
  auto p = sample_cohort(1, default_effects(), 2)[0];
  p.base_log_std.fill(1e-9);
  const auto seg = generate_segment(p, Emotion::Happy, 10, 1, 1);
  for (const auto& row : seg.rows)
    for (std::size_t b = 0; b < kNumBands; ++b) {
      const double target = std::exp(p.base_log_mean[b] + p.emotion_shift[0][b]);
      EXPECT_NEAR(row.bands[b], target, 1.0 + 1e-6 * target);
    }
}

TEST(Segment, DeltaMeanMatchesLogNormalMean) {
  const auto p = sample_cohort(1, default_effects(), 12)[0];
  const auto seg = generate_segment(p, Emotion::Neutral, 10000, 1, 77);
  const double mu = p.base_log_mean[0] + p.emotion_shift[index_of(Emotion::Neutral)][0];
  const double s2 = p.base_log_std[0] * p.base_log_std[0];
  const double mean = std::exp(mu + s2 / 2);
  const double sd = std::sqrt((std::exp(s2) - 1) * std::exp(2 * mu + s2));
  double sum = 0;
  for (const auto& r : seg.rows) sum += r.bands[0];
  EXPECT_NEAR(sum / 10000.0, mean, 3 * sd / 100.0);
}

TEST(Segment, MagnitudesClampTo24Bits) {
  auto p = sample_cohort(1, default_effects(), 2)[0];
  p.base_log_mean.fill(30.0);
  const auto seg = generate_segment(p, Emotion::Happy, 5, 1, 1);
  for (const auto& row : seg.rows)
    for (auto v : row.bands) EXPECT_EQ(v, kMaxBandValue);
}

TEST(Wire, SegmentRoundTripsThroughCodec) {
  const auto p = sample_cohort(1, default_effects(), 6)[0];
  const auto seg = generate_segment(p, Emotion::Meditation, 30, 1, 3);
  const auto bytes = segment_to_wire(seg);
  const auto r = codec::decode_stream(bytes, {});
  EXPECT_TRUE(r.errors.empty());
  ASSERT_EQ(r.events.size(), seg.rows.size());
  for (std::size_t k = 0; k < seg.rows.size(); ++k)
    EXPECT_EQ(std::get<codec::event::EegPower>(r.events[k]).row.bands, seg.rows[k].bands);
}

TEST(Wire, EmptySegmentGivesNoBytes) {
  EXPECT_TRUE(segment_to_wire(Segment{"S001", Emotion::Happy, {}}).empty());
}

TEST(Wire, PacketCountEqualsRowCountForCohort) {
  dataset::SimulationConfig cfg;
  cfg.subjects = 80;
  cfg.duration_s = 5;
  const auto records = dataset::simulate_records(cfg, 7);
  std::size_t rows = 0, packets = 0;
  for (const auto& r : records)
    for (const auto& seg : r.segments) {
      rows += seg.rows.size();
      packets += codec::decode_stream(segment_to_wire(seg), {}).events.size();
    }
  EXPECT_EQ(rows, 80u * 4u * 5u);
  EXPECT_EQ(packets, rows);
}

TEST(Manifest, ProfileJsonRoundTrip) {
  for (const auto& p : sample_cohort(5, default_effects(), 1)) {
    const auto text = profile_to_json(p).dump();
    EXPECT_EQ(profile_from_json(nlohmann::json::parse(text)), p);
  }
  auto j = profile_to_json(sample_cohort(1, default_effects(), 1)[0]);
  j["labels"].erase("smoking");
  try {
    profile_from_json(j);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LabelError);
  }
}

TEST(EffectScale, NamedAndNumeric) {
  EXPECT_EQ(parse_effect_scale("strong"), 1.0);
  EXPECT_EQ(parse_effect_scale("none"), 0.0);
  EXPECT_EQ(parse_effect_scale("0.3"), 0.3);
  EXPECT_FALSE(parse_effect_scale("-1"));
  EXPECT_FALSE(parse_effect_scale("loud"));
}
