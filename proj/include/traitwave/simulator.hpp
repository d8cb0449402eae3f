#pragma once

// Seeded synthetic cohort generator.
//
// Every band value is log-normal: log(value) ~ N(mu_b + shift_{e,b}, sigma_b)
// where mu_b is the subject's baseline (population baseline + per-subject
// jitter + trait effects) and shift_{e,b} the emotion modulation. Samples are
// rounded and clamped into the 24-bit range of the wire format.

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "traitwave/codec.hpp"
#include "traitwave/core.hpp"
#include "traitwave/random.hpp"

namespace traitwave::sim {

using BandVector = std::array<double, kNumBands>;

struct BandShift {
  Band band;
  double log_shift;
};

/// Trait -> (bands, log-space shift when the trait is positive), scaled
/// globally. A scale of 0 makes labels independent of every band statistic.
struct EffectConfig {
  std::array<std::vector<BandShift>, kNumTraits> effects;
  double scale = 1.0;
};

/// Named effect scales accepted by the CLI.
inline constexpr double kScaleNone = 0.0;
inline constexpr double kScaleWeak = 0.25;
inline constexpr double kScaleModerate = 0.5;
inline constexpr double kScaleStrong = 1.0;

inline std::optional<double> parse_effect_scale(std::string_view s) {
  if (s == "none") return kScaleNone;
  if (s == "weak") return kScaleWeak;
  if (s == "moderate") return kScaleModerate;
  if (s == "strong") return kScaleStrong;
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(s), &used);
    if (used == s.size() && v >= 0.0 && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

/// The documented default effect layout. Bands delta..high_beta each carry a
/// major (+1.6) and a minor (+0.7) trait; the two gamma bands carry one trait
/// each (+1.0). The four resulting levels per shared band stay separated by
/// at least 0.7 in log space, far above the between-subject spread.
inline EffectConfig default_effects(double scale = kScaleStrong) {
  EffectConfig cfg;
  cfg.scale = scale;
  auto set = [&](Trait t, Band b, double shift) { cfg.effects[index_of(t)] = {{b, shift}}; };
  set(Trait::ReligiousPractice, Band::Delta, 1.6);
  set(Trait::Smoking, Band::Delta, 0.7);
  set(Trait::ReligiousBeliefs, Band::Theta, 1.6);
  set(Trait::PhysicalExercise, Band::Theta, 0.7);
  set(Trait::FamilyDiabetes, Band::LowAlpha, 1.6);
  set(Trait::FamilyHeartDisease, Band::LowAlpha, 0.7);
  set(Trait::FamilyBrainStroke, Band::HighAlpha, 1.6);
  set(Trait::FastFood, Band::HighAlpha, 0.7);
  set(Trait::HighFat, Band::LowBeta, 1.6);
  set(Trait::HighSugar, Band::LowBeta, 0.7);
  set(Trait::OutdoorGames, Band::HighBeta, 1.6);
  set(Trait::SleepIssues, Band::HighBeta, 0.7);
  set(Trait::RegularSleepPattern, Band::LowGamma, 1.0);
  set(Trait::VegetableConsumption, Band::MidGamma, 1.0);
  return cfg;
}

/// Population-level parameters shared by every subject in a cohort.
struct PopulationConfig {
  // ln of typical headset magnitudes: ~2e5 delta down to ~2.5e3 mid gamma.
  BandVector log_baseline = {12.2, 10.8, 9.6, 9.4, 9.2, 9.2, 8.3, 7.8};
  double within_log_std = 0.35;
  double subject_mean_jitter = 0.08;
  double subject_std_jitter = 0.05;  // multiplicative, in log space
  double emotion_jitter = 0.03;
  // happy > neutral > meditation > sad on every band.
  std::array<BandVector, kNumEmotions> emotion_shift = {{
      {0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25},
      {-0.10, -0.10, -0.10, -0.10, -0.10, -0.10, -0.10, -0.10},
      {0.15, 0.15, 0.15, 0.15, 0.15, 0.15, 0.15, 0.15},
      {0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05},
  }};
  double positive_rate = 0.5;
};

struct SubjectProfile {
  std::string subject_id;
  TraitLabels labels;
  BandVector base_log_mean{};
  BandVector base_log_std{};
  std::array<BandVector, kNumEmotions> emotion_shift{};

  bool operator==(const SubjectProfile&) const = default;
};

inline std::string subject_id_for(std::size_t index) {
  std::ostringstream os;
  os << 'S' << std::setw(3) << std::setfill('0') << (index + 1);
  return os.str();
}

inline SubjectProfile sample_subject(std::size_t index, const EffectConfig& effects,
                                     const PopulationConfig& pop, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x5u, index}));
  SubjectProfile p;
  p.subject_id = subject_id_for(index);
  // Labels are drawn first and from their own draws so the null configuration
  // leaves band parameters independent of them.
  for (std::size_t t = 0; t < kNumTraits; ++t) p.labels.values[t] = rng.bernoulli(pop.positive_rate);
  for (std::size_t b = 0; b < kNumBands; ++b) {
    p.base_log_mean[b] = pop.log_baseline[b] + rng.normal(0.0, pop.subject_mean_jitter);
    p.base_log_std[b] = pop.within_log_std * std::exp(rng.normal(0.0, pop.subject_std_jitter));
  }
  for (std::size_t e = 0; e < kNumEmotions; ++e)
    for (std::size_t b = 0; b < kNumBands; ++b)
      p.emotion_shift[e][b] = pop.emotion_shift[e][b] + rng.normal(0.0, pop.emotion_jitter);
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    if (!p.labels.values[t]) continue;
    for (const auto& s : effects.effects[t])
      p.base_log_mean[index_of(s.band)] += effects.scale * s.log_shift;
  }
  return p;
}

/// Deterministic per seed; subject i uses derive_seed(seed, {5, i}), so any
/// subset of subjects can be regenerated independently.
inline std::vector<SubjectProfile> sample_cohort(std::size_t n_subjects, const EffectConfig& effects,
                                                 std::uint64_t seed, const PopulationConfig& pop = {}) {
  if (n_subjects == 0) throw Error(ErrorCode::TooFewSubjects, "cohort needs at least one subject");
  std::vector<SubjectProfile> cohort;
  cohort.reserve(n_subjects);
  for (std::size_t i = 0; i < n_subjects; ++i) cohort.push_back(sample_subject(i, effects, pop, seed));
  return cohort;
}

inline std::uint32_t draw_band_value(Rng& rng, double log_mean, double log_std) {
  const double v = std::round(std::exp(rng.normal(log_mean, log_std)));
  if (!(v > 0.0)) return 0;
  if (v >= static_cast<double>(kMaxBandValue)) return kMaxBandValue;
  return static_cast<std::uint32_t>(v);
}

/// duration_s * rows_per_second rows; row k is stamped k*1000/rows_per_second ms.
inline Segment generate_segment(const SubjectProfile& profile, Emotion emotion, std::uint32_t duration_s,
                                std::uint32_t rows_per_second, std::uint64_t seed) {
  if (duration_s == 0 || rows_per_second == 0 || rows_per_second > 1000)
    throw Error(ErrorCode::BadRequest, "duration must be >= 1 s and rate within 1..1000 rows/s");
  Rng rng(seed);
  Segment seg{profile.subject_id, emotion, {}};
  const std::size_t n = std::size_t{duration_s} * rows_per_second;
  seg.rows.resize(n);
  const auto& shift = profile.emotion_shift[index_of(emotion)];
  for (std::size_t k = 0; k < n; ++k) {
    auto& row = seg.rows[k];
    row.timestamp_ms = k * 1000 / rows_per_second;
    for (std::size_t b = 0; b < kNumBands; ++b)
      row.bands[b] = draw_band_value(rng, profile.base_log_mean[b] + shift[b], profile.base_log_std[b]);
  }
  return seg;
}

/// Seed used for the segment of (subject index, emotion) under a cohort seed.
inline std::uint64_t segment_seed(std::uint64_t cohort_seed, std::size_t subject_index, Emotion e) {
  return derive_seed(cohort_seed, {0x5e6u, subject_index, index_of(e)});
}

/// One EEG power packet per row.
inline codec::Bytes segment_to_wire(const Segment& segment) {
  codec::Bytes out;
  out.reserve(segment.rows.size() * (4 + 2 + codec::kEegPowerLength));
  for (const auto& row : segment.rows) {
    const auto packet = codec::encode_packet(codec::eeg_power_row(row));
    out.insert(out.end(), packet.begin(), packet.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cohort manifest (JSON Lines, one subject per line)

inline nlohmann::ordered_json labels_to_json(const TraitLabels& labels) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t t = 0; t < kNumTraits; ++t) j[std::string(kTraitNames[t])] = labels.values[t];
  return j;
}

inline TraitLabels labels_from_json(const nlohmann::json& j, const std::string& who) {
  TraitLabels labels;
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    const std::string key(kTraitNames[t]);
    if (!j.contains(key) || !j[key].is_boolean())
      throw Error(ErrorCode::LabelError, who + ": missing or non-boolean trait '" + key + "'");
    labels.values[t] = j[key].get<bool>();
  }
  return labels;
}

inline nlohmann::ordered_json profile_to_json(const SubjectProfile& p) {
  nlohmann::ordered_json j;
  j["subject_id"] = p.subject_id;
  j["labels"] = labels_to_json(p.labels);
  j["base_log_mean"] = p.base_log_mean;
  j["base_log_std"] = p.base_log_std;
  nlohmann::ordered_json shifts = nlohmann::ordered_json::object();
  for (std::size_t e = 0; e < kNumEmotions; ++e) shifts[std::string(kEmotionNames[e])] = p.emotion_shift[e];
  j["emotion_shift"] = shifts;
  return j;
}

inline SubjectProfile profile_from_json(const nlohmann::json& j) {
  try {
    SubjectProfile p;
    p.subject_id = j.at("subject_id").get<std::string>();
    p.labels = labels_from_json(j.at("labels"), p.subject_id);
    p.base_log_mean = j.at("base_log_mean").get<BandVector>();
    p.base_log_std = j.at("base_log_std").get<BandVector>();
    for (std::size_t e = 0; e < kNumEmotions; ++e)
      p.emotion_shift[e] = j.at("emotion_shift").at(std::string(kEmotionNames[e])).get<BandVector>();
    for (double s : p.base_log_std)
      if (!(s > 0.0)) throw Error(ErrorCode::SchemaError, p.subject_id + ": base_log_std must be > 0");
    return p;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::SchemaError, std::string("cohort manifest: ") + ex.what());
  }
}

}  // namespace traitwave::sim
