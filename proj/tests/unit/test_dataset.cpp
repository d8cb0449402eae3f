#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "support/generators.hpp"
#include "traitwave/dataset.hpp"

using namespace traitwave;
using namespace traitwave::dataset;

namespace {

std::vector<SessionRecord> small_cohort(std::size_t n, std::uint64_t seed = 7) {
  SimulationConfig cfg;
  cfg.subjects = n;
  cfg.duration_s = 4;
  return simulate_records(cfg, seed);
}

}  // namespace

TEST(Export, IngestRoundTrip) {
  const auto dir = tw_test::scratch_dir("dataset_roundtrip");
  const auto records = small_cohort(6);
  export_records(records, dir);
  EXPECT_EQ(ingest(dir), records);
}

TEST(Export, SecondExportByteIdentical) {
  const auto a = tw_test::scratch_dir("dataset_canon_a");
  const auto b = tw_test::scratch_dir("dataset_canon_b");
  export_records(small_cohort(5), a);
  export_records(ingest(a), b);
  EXPECT_EQ(read_text(a / "labels.jsonl"), read_text(b / "labels.jsonl"));
  for (const auto& entry : std::filesystem::directory_iterator(a / "segments"))
    EXPECT_EQ(read_text(entry.path()), read_text(b / "segments" / entry.path().filename()));
}

TEST(Export, EmptyRecordListIsValid) {
  const auto dir = tw_test::scratch_dir("dataset_empty");
  export_records({}, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "labels.jsonl"));
  EXPECT_TRUE(ingest(dir).empty());
}

TEST(Export, SegmentCsvHeader) {
  const auto dir = tw_test::scratch_dir("dataset_header");
  export_records(small_cohort(5), dir);
  std::ifstream in(dir / "segments" / "S001_happy.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, kSegmentHeader);
}

TEST(Ingest, FullCohortCounts) {
  const auto dir = tw_test::scratch_dir("dataset_full");
  SimulationConfig cfg;
  cfg.duration_s = 2;
  export_records(simulate_records(cfg, 7), dir);
  const auto back = ingest(dir);
  ASSERT_EQ(back.size(), 80u);
  std::size_t segments = 0;
  for (const auto& r : back)
    for (const auto& s : r.segments) segments += s.rows.empty() ? 0 : 1;
  EXPECT_EQ(segments, 320u);
}

TEST(Ingest, MissingMeditationSegmentNamed) {
  const auto dir = tw_test::scratch_dir("dataset_missing");
  export_records(small_cohort(5), dir);
  std::filesystem::remove(dir / "segments" / "S003_meditation.csv");
  try {
    ingest(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmotionError);
    EXPECT_NE(e.detail().find("S003"), std::string::npos);
    EXPECT_NE(e.detail().find("meditation"), std::string::npos);
  }
}

TEST(Ingest, MissingTraitIsLabelError) {
  const auto dir = tw_test::scratch_dir("dataset_label");
  export_records(small_cohort(5), dir);
  auto text = read_text(dir / "labels.jsonl");
  const auto at = text.find("\"smoking\":");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, std::string("\"smoking\":").size(), "\"smokin\":");
  write_text(dir / "labels.jsonl", text);
  try {
    ingest(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LabelError);
  }
}

TEST(Ingest, BadColumnIsSchemaError) {
  const auto dir = tw_test::scratch_dir("dataset_schema");
  export_records(small_cohort(5), dir);
  const auto file = dir / "segments" / "S002_sad.csv";
  auto text = read_text(file);
  text.replace(0, text.find('\n'), "subject_id,emotion,timestamp_ms,delta");
  write_text(file, text);
  try {
    ingest(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaError);
  }
}

TEST(Ingest, MissingDirectoryIsIoError) {
  try {
    ingest("/nonexistent/traitwave");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

TEST(Split, EightyTwentyOfEighty) {
  const auto records = small_cohort(80);
  const auto s = split_80_20(records, 7);
  EXPECT_EQ(s.train.size(), 64u);
  EXPECT_EQ(s.test.size(), 16u);
  const auto [train, test] = partition(records, s);
  std::size_t train_segments = 0, test_segments = 0;
  for (const auto& r : train) train_segments += r.segments.size();
  for (const auto& r : test) test_segments += r.segments.size();
  EXPECT_EQ(train_segments, 256u);
  EXPECT_EQ(test_segments, 64u);
}

TEST(Split, RoundingRule) {
  EXPECT_EQ(train_size_for(5), 4u);
  EXPECT_EQ(train_size_for(6), 5u);   // 4.8
  EXPECT_EQ(train_size_for(7), 6u);   // 5.6
  EXPECT_EQ(train_size_for(8), 6u);   // 6.4
  EXPECT_EQ(train_size_for(10), 8u);
  const auto s = split_80_20(small_cohort(5), 1);
  EXPECT_EQ(s.train.size(), 4u);
  EXPECT_EQ(s.test.size(), 1u);
}

TEST(Split, TooFewSubjects) {
  try {
    split_80_20(std::vector<std::string>{"a", "b", "c", "d"}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewSubjects);
  }
}

TEST(Split, OrderIndependent) {
  auto records = small_cohort(20);
  const auto a = split_80_20(records, 11);
  std::reverse(records.begin(), records.end());
  EXPECT_EQ(split_80_20(records, 11), a);
}

TEST(Split, PropertiesAcrossSizesAndSeeds) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 5 + rng.below(150);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("id" + std::to_string(i));
    const auto seed = rng.next_u64();
    const auto s = split_80_20(ids, seed);
    ASSERT_EQ(s.train.size(), (8 * n + 5) / 10);
    ASSERT_EQ(s.train.size() + s.test.size(), n);
    std::set<std::string> all(s.train.begin(), s.train.end());
    for (const auto& id : s.test) ASSERT_TRUE(all.insert(id).second);
    ASSERT_EQ(all.size(), n);
    ASSERT_EQ(split_80_20(ids, seed), s);
  }
}

TEST(Split, JsonRoundTrip) {
  const auto s = split_80_20(small_cohort(10), 3);
  EXPECT_EQ(split_from_json(split_to_json(s)), s);
  EXPECT_THROW(split_from_json("{\"seed\":1,\"train\":[\"a\"],\"test\":[\"a\"]}"), Error);
  EXPECT_THROW(split_from_json("not json"), Error);
}
