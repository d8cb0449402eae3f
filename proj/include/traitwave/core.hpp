#pragma once

// Shared vocabulary: bands, emotions, traits, band-power rows and the error
// type used across the library.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace traitwave {

inline constexpr std::size_t kNumBands = 8;
inline constexpr std::size_t kNumEmotions = 4;
inline constexpr std::size_t kNumTraits = 14;
inline constexpr std::size_t kFeatureDim = 2 * kNumBands;
inline constexpr std::uint32_t kMaxBandValue = (1u << 24) - 1;

/// Canonical band order, identical to the order of the 24-byte EEG power block.
enum class Band : std::uint8_t {
  Delta,
  Theta,
  LowAlpha,
  HighAlpha,
  LowBeta,
  HighBeta,
  LowGamma,
  MidGamma,
};

inline constexpr std::array<std::string_view, kNumBands> kBandNames = {
    "delta",   "theta",     "low_alpha", "high_alpha",
    "low_beta", "high_beta", "low_gamma", "mid_gamma"};

/// Elicitation order: sessions and training grids always iterate in this order.
enum class Emotion : std::uint8_t { Happy, Sad, Neutral, Meditation };

inline constexpr std::array<Emotion, kNumEmotions> kEmotions = {
    Emotion::Happy, Emotion::Sad, Emotion::Neutral, Emotion::Meditation};

inline constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "happy", "sad", "neutral", "meditation"};

enum class Trait : std::uint8_t {
  ReligiousPractice,
  Smoking,
  ReligiousBeliefs,
  PhysicalExercise,
  FamilyDiabetes,
  FamilyHeartDisease,
  FamilyBrainStroke,
  FastFood,
  HighFat,
  HighSugar,
  OutdoorGames,
  SleepIssues,
  RegularSleepPattern,
  VegetableConsumption,
};

inline constexpr std::array<std::string_view, kNumTraits> kTraitNames = {
    "religious_practice",   "smoking",
    "religious_beliefs",    "physical_exercise",
    "family_diabetes",      "family_heart_disease",
    "family_brain_stroke",  "fast_food",
    "high_fat",             "high_sugar",
    "outdoor_games",        "sleep_issues",
    "regular_sleep_pattern", "vegetable_consumption"};

constexpr std::size_t index_of(Band b) { return static_cast<std::size_t>(b); }
constexpr std::size_t index_of(Emotion e) { return static_cast<std::size_t>(e); }
constexpr std::size_t index_of(Trait t) { return static_cast<std::size_t>(t); }

constexpr Trait trait_at(std::size_t i) { return static_cast<Trait>(i); }
constexpr Emotion emotion_at(std::size_t i) { return static_cast<Emotion>(i); }

inline std::string_view name_of(Band b) { return kBandNames[index_of(b)]; }
inline std::string_view name_of(Emotion e) { return kEmotionNames[index_of(e)]; }
inline std::string_view name_of(Trait t) { return kTraitNames[index_of(t)]; }

/// Error categories shared by every module. Each maps onto one named failure
/// in the public contracts (e.g. `DegenerateLabels`, `EmotionError`).
enum class ErrorCode {
  PayloadTooSmall,
  PayloadTooLarge,
  InvalidRow,
  SchemaError,
  LabelError,
  EmotionError,
  IoError,
  TooFewSubjects,
  EmptySegment,
  AllZeroRow,
  EmptyInput,
  DegenerateLabels,
  TooFewSamples,
  MissingEmotion,
  MissingEmotionFeatures,
  NonFiniteInput,
  BundleError,
  SelectorLoadError,
  UnknownSession,
  EmptyPhaseBuffer,
  InvalidTransition,
  WrongPhase,
  BadRatingCount,
  SatisfactionOutOfRange,
  BadRequest,
};

inline std::string_view name_of(ErrorCode c) {
  switch (c) {
    case ErrorCode::PayloadTooSmall: return "PayloadTooSmall";
    case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
    case ErrorCode::InvalidRow: return "InvalidRow";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::LabelError: return "LabelError";
    case ErrorCode::EmotionError: return "EmotionError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::TooFewSubjects: return "TooFewSubjects";
    case ErrorCode::EmptySegment: return "EmptySegment";
    case ErrorCode::AllZeroRow: return "AllZeroRow";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::MissingEmotion: return "MissingEmotion";
    case ErrorCode::MissingEmotionFeatures: return "MissingEmotionFeatures";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::BundleError: return "BundleError";
    case ErrorCode::SelectorLoadError: return "SelectorLoadError";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::EmptyPhaseBuffer: return "EmptyPhaseBuffer";
    case ErrorCode::InvalidTransition: return "InvalidTransition";
    case ErrorCode::WrongPhase: return "WrongPhase";
    case ErrorCode::BadRatingCount: return "BadRatingCount";
    case ErrorCode::SatisfactionOutOfRange: return "SatisfactionOutOfRange";
    case ErrorCode::BadRequest: return "BadRequest";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(name_of(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

inline std::optional<Band> parse_band(std::string_view s) {
  for (std::size_t i = 0; i < kNumBands; ++i)
    if (kBandNames[i] == s) return static_cast<Band>(i);
  return std::nullopt;
}

inline std::optional<Emotion> parse_emotion(std::string_view s) {
  for (std::size_t i = 0; i < kNumEmotions; ++i)
    if (kEmotionNames[i] == s) return emotion_at(i);
  return std::nullopt;
}

inline std::optional<Trait> parse_trait(std::string_view s) {
  for (std::size_t i = 0; i < kNumTraits; ++i)
    if (kTraitNames[i] == s) return trait_at(i);
  return std::nullopt;
}

/// One EEG power emission: eight unitless magnitudes in canonical band order.
struct BandPowerRow {
  std::uint64_t timestamp_ms = 0;
  std::array<std::uint32_t, kNumBands> bands{};

  std::uint32_t operator[](Band b) const { return bands[index_of(b)]; }
  bool operator==(const BandPowerRow&) const = default;
};

/// Ground-truth answers for the fourteen binary traits, indexed by Trait.
struct TraitLabels {
  std::array<bool, kNumTraits> values{};

  bool operator[](Trait t) const { return values[index_of(t)]; }
  bool& operator[](Trait t) { return values[index_of(t)]; }
  bool operator==(const TraitLabels&) const = default;
};

/// Contiguous rows for one (subject, emotion) recording.
struct Segment {
  std::string subject_id;
  Emotion emotion = Emotion::Happy;
  std::vector<BandPowerRow> rows;

  bool operator==(const Segment&) const = default;
};

}  // namespace traitwave
