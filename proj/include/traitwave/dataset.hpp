#pragma once

// On-disk dataset layout and the subject-level 80/20 split.
//
//   <dir>/labels.jsonl                     one subject per line
//   <dir>/segments/<subject>_<emotion>.csv one file per (subject, emotion)
//
// Segment files share the header
//   subject_id,emotion,timestamp_ms,delta,theta,low_alpha,high_alpha,
//   low_beta,high_beta,low_gamma,mid_gamma
// and the subject_id/emotion columns are authoritative; file names are only a
// convention.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "traitwave/core.hpp"
#include "traitwave/random.hpp"
#include "traitwave/simulator.hpp"

namespace traitwave::dataset {

namespace fs = std::filesystem;

enum class Provenance { Simulated, Replayed, Live };

inline std::string_view name_of(Provenance p) {
  switch (p) {
    case Provenance::Simulated: return "simulated";
    case Provenance::Replayed: return "replayed";
    case Provenance::Live: return "live";
  }
  return "?";
}

inline std::optional<Provenance> parse_provenance(std::string_view s) {
  if (s == "simulated") return Provenance::Simulated;
  if (s == "replayed") return Provenance::Replayed;
  if (s == "live") return Provenance::Live;
  return std::nullopt;
}

/// One subject: exactly one segment per emotion, indexed by Emotion.
struct SessionRecord {
  std::string subject_id;
  std::array<Segment, kNumEmotions> segments;
  TraitLabels labels;
  Provenance provenance = Provenance::Simulated;

  const Segment& segment(Emotion e) const { return segments[index_of(e)]; }
  bool operator==(const SessionRecord&) const = default;
};

inline constexpr std::string_view kSegmentHeader =
    "subject_id,emotion,timestamp_ms,delta,theta,low_alpha,high_alpha,low_beta,high_beta,low_gamma,mid_gamma";

inline fs::path segment_file_name(const std::string& subject_id, Emotion e) {
  return subject_id + "_" + std::string(traitwave::name_of(e)) + ".csv";
}

// ---------------------------------------------------------------------------
// Segment CSV

inline void write_segment_csv(std::ostream& out, const Segment& seg, bool header = true) {
  if (header) out << kSegmentHeader << '\n';
  const auto emotion = traitwave::name_of(seg.emotion);
  for (const auto& row : seg.rows) {
    out << seg.subject_id << ',' << emotion << ',' << row.timestamp_ms;
    for (auto v : row.bands) out << ',' << v;
    out << '\n';
  }
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

template <class T>
bool parse_uint(std::string_view s, T& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

/// Parses every segment in a CSV stream (one or more subject/emotion groups,
/// contiguous). `where` names the source in error messages.
inline std::vector<Segment> read_segment_csv(std::istream& in, const std::string& where) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::SchemaError, where + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSegmentHeader) throw Error(ErrorCode::SchemaError, where + ": unexpected header '" + line + "'");

  std::vector<Segment> segments;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    const std::string at = where + ":" + std::to_string(line_no);
    if (cells.size() != 3 + kNumBands)
      throw Error(ErrorCode::SchemaError, at + ": expected 11 columns, got " + std::to_string(cells.size()));
    const auto emotion = parse_emotion(cells[1]);
    if (!emotion) throw Error(ErrorCode::SchemaError, at + ": unknown emotion '" + std::string(cells[1]) + "'");
    if (cells[0].empty()) throw Error(ErrorCode::SchemaError, at + ": empty subject_id");
    BandPowerRow row;
    if (!parse_uint(cells[2], row.timestamp_ms))
      throw Error(ErrorCode::SchemaError, at + ": bad timestamp_ms");
    for (std::size_t b = 0; b < kNumBands; ++b) {
      if (!parse_uint(cells[3 + b], row.bands[b]) || row.bands[b] > kMaxBandValue)
        throw Error(ErrorCode::SchemaError, at + ": bad " + std::string(kBandNames[b]) + " value");
    }
    if (segments.empty() || segments.back().subject_id != cells[0] || segments.back().emotion != *emotion) {
      segments.push_back(Segment{std::string(cells[0]), *emotion, {}});
    } else if (row.timestamp_ms < segments.back().rows.back().timestamp_ms) {
      throw Error(ErrorCode::SchemaError, at + ": timestamps must be non-decreasing");
    }
    segments.back().rows.push_back(row);
  }
  return segments;
}

// ---------------------------------------------------------------------------
// Labels JSONL

inline std::string labels_line(const SessionRecord& r) {
  nlohmann::ordered_json j;
  j["subject_id"] = r.subject_id;
  j["provenance"] = std::string(name_of(r.provenance));
  for (std::size_t t = 0; t < kNumTraits; ++t) j[std::string(kTraitNames[t])] = r.labels.values[t];
  return j.dump();
}

// ---------------------------------------------------------------------------
// ingest / export

inline void export_records(const std::vector<SessionRecord>& records, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "segments", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + (dir / "segments").string() + ": " + ec.message());
  {
    std::ofstream labels(dir / "labels.jsonl", std::ios::trunc);
    if (!labels) throw Error(ErrorCode::IoError, "cannot write " + (dir / "labels.jsonl").string());
    for (const auto& r : records) labels << labels_line(r) << '\n';
    if (!labels) throw Error(ErrorCode::IoError, "short write to labels.jsonl");
  }
  for (const auto& r : records) {
    for (const auto& seg : r.segments) {
      const auto path = dir / "segments" / segment_file_name(r.subject_id, seg.emotion);
      std::ofstream out(path, std::ios::trunc);
      if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
      write_segment_csv(out, seg);
      if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
    }
  }
}

inline std::vector<SessionRecord> ingest(const fs::path& dir) {
  const auto labels_path = dir / "labels.jsonl";
  std::ifstream labels_in(labels_path);
  if (!labels_in) throw Error(ErrorCode::IoError, "cannot open " + labels_path.string());

  std::vector<SessionRecord> records;
  std::map<std::string, std::size_t> by_id;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(labels_in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string at = labels_path.filename().string() + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::SchemaError, at + ": " + ex.what());
    }
    if (!j.is_object() || !j.contains("subject_id") || !j["subject_id"].is_string())
      throw Error(ErrorCode::SchemaError, at + ": missing subject_id");
    SessionRecord r;
    r.subject_id = j["subject_id"].get<std::string>();
    r.labels = sim::labels_from_json(j, "subject " + r.subject_id);
    if (j.contains("provenance")) {
      const auto p = j["provenance"].is_string() ? parse_provenance(j["provenance"].get<std::string>())
                                                 : std::nullopt;
      if (!p) throw Error(ErrorCode::SchemaError, at + ": bad provenance");
      r.provenance = *p;
    }
    if (by_id.contains(r.subject_id)) throw Error(ErrorCode::SchemaError, at + ": duplicate subject " + r.subject_id);
    by_id[r.subject_id] = records.size();
    records.push_back(std::move(r));
  }

  std::vector<std::array<bool, kNumEmotions>> seen(records.size());
  const auto seg_dir = dir / "segments";
  if (fs::exists(seg_dir)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(seg_dir))
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::ifstream in(file);
      if (!in) throw Error(ErrorCode::IoError, "cannot open " + file.string());
      for (auto& seg : read_segment_csv(in, file.filename().string())) {
        const auto it = by_id.find(seg.subject_id);
        if (it == by_id.end())
          throw Error(ErrorCode::LabelError, "no labels for subject " + seg.subject_id + " (" +
                                                 file.filename().string() + ")");
        const auto e = index_of(seg.emotion);
        if (seen[it->second][e])
          throw Error(ErrorCode::SchemaError, "duplicate " + std::string(kEmotionNames[e]) +
                                                  " segment for subject " + seg.subject_id);
        seen[it->second][e] = true;
        records[it->second].segments[e] = std::move(seg);
      }
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t e = 0; e < kNumEmotions; ++e) {
      if (!seen[i][e])
        throw Error(ErrorCode::EmotionError, "subject " + records[i].subject_id + " is missing the " +
                                                 std::string(kEmotionNames[e]) + " segment");
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Split

struct Split {
  std::vector<std::string> train;  // sorted
  std::vector<std::string> test;   // sorted
  std::uint64_t seed = 0;

  bool operator==(const Split&) const = default;
  bool in_train(const std::string& id) const { return std::binary_search(train.begin(), train.end(), id); }
  bool in_test(const std::string& id) const { return std::binary_search(test.begin(), test.end(), id); }
};

/// round(0.8 n) with halves going to the training side.
constexpr std::size_t train_size_for(std::size_t n) { return (8 * n + 5) / 10; }

/// Subject-level split: ids are sorted, shuffled with a seeded Fisher-Yates,
/// and the first round(0.8 n) go to training. Input order is irrelevant.
inline Split split_80_20(const std::vector<std::string>& subject_ids, std::uint64_t seed) {
  std::vector<std::string> ids = subject_ids;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 5)
    throw Error(ErrorCode::TooFewSubjects, "split needs at least 5 subjects, got " + std::to_string(ids.size()));
  Rng rng(derive_seed(seed, {0x5911u}));
  rng.shuffle(std::span(ids));
  const auto n_train = train_size_for(ids.size());
  Split s;
  s.seed = seed;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

inline Split split_80_20(const std::vector<SessionRecord>& records, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.subject_id);
  return split_80_20(ids, seed);
}

inline std::string split_to_json(const Split& s) {
  nlohmann::ordered_json j;
  j["seed"] = s.seed;
  j["train"] = s.train;
  j["test"] = s.test;
  return j.dump(2) + "\n";
}

inline Split split_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Split s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.train = j.at("train").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    for (const auto& id : s.train)
      if (s.in_test(id)) throw Error(ErrorCode::SchemaError, "split: subject " + id + " on both sides");
    return s;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::SchemaError, std::string("split file: ") + ex.what());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Records partitioned by a split, in input order.
inline std::pair<std::vector<SessionRecord>, std::vector<SessionRecord>> partition(
    const std::vector<SessionRecord>& records, const Split& split) {
  std::vector<SessionRecord> train, test;
  for (const auto& r : records) {
    if (split.in_train(r.subject_id)) train.push_back(r);
    else if (split.in_test(r.subject_id)) test.push_back(r);
  }
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Simulated cohorts as records

struct SimulationConfig {
  std::size_t subjects = 80;
  std::uint32_t duration_s = 120;
  std::uint32_t rows_per_second = 1;
  sim::EffectConfig effects = sim::default_effects();
  sim::PopulationConfig population;
};

inline SessionRecord record_for(const sim::SubjectProfile& profile, std::size_t subject_index,
                                const SimulationConfig& cfg, std::uint64_t seed) {
  SessionRecord r;
  r.subject_id = profile.subject_id;
  r.labels = profile.labels;
  r.provenance = Provenance::Simulated;
  for (auto e : kEmotions)
    r.segments[index_of(e)] = sim::generate_segment(profile, e, cfg.duration_s, cfg.rows_per_second,
                                                    sim::segment_seed(seed, subject_index, e));
  return r;
}

inline std::vector<SessionRecord> simulate_records(const std::vector<sim::SubjectProfile>& cohort,
                                                   const SimulationConfig& cfg, std::uint64_t seed) {
  std::vector<SessionRecord> records;
  records.reserve(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) records.push_back(record_for(cohort[i], i, cfg, seed));
  return records;
}

inline std::vector<SessionRecord> simulate_records(const SimulationConfig& cfg, std::uint64_t seed) {
  return simulate_records(sim::sample_cohort(cfg.subjects, cfg.effects, seed, cfg.population), cfg, seed);
}

}  // namespace traitwave::dataset
