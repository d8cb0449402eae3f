#pragma once

// Evaluation reports: per-trait (prediction, rating) pairs, session accuracy
// and satisfaction, and the aggregate over many sessions.

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "traitwave/classical/grid.hpp"

namespace traitwave::service {

inline constexpr double kMaxSatisfaction = 5.0;

struct EvaluationReport {
  std::string session_id;
  std::array<bool, kNumTraits> predictions{};
  std::array<int, kNumTraits> ratings{};  // 1 = prediction judged correct
  double accuracy = 0.0;
  double satisfaction = 0.0;
};

/// Ratings must be exactly 14 values in {0, 1}; satisfaction a real in [0, 5].
inline EvaluationReport make_report(const std::string& session_id,
                                    const std::array<classical::TraitPrediction, kNumTraits>& predictions,
                                    std::span<const int> ratings, double satisfaction) {
  if (ratings.size() != kNumTraits)
    throw Error(ErrorCode::BadRatingCount, "expected 14 ratings, got " + std::to_string(ratings.size()));
  if (!std::isfinite(satisfaction) || satisfaction < 0.0 || satisfaction > kMaxSatisfaction)
    throw Error(ErrorCode::SatisfactionOutOfRange, "satisfaction must lie in [0, 5]");
  EvaluationReport r;
  r.session_id = session_id;
  int ones = 0;
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    if (ratings[t] != 0 && ratings[t] != 1) throw Error(ErrorCode::BadRequest, "ratings must be 0 or 1");
    r.ratings[t] = ratings[t];
    r.predictions[t] = predictions[t].value;
    ones += ratings[t];
  }
  r.accuracy = static_cast<double>(ones) / static_cast<double>(kNumTraits);
  r.satisfaction = satisfaction;
  return r;
}

inline double mean_satisfaction(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorCode::EmptyInput, "no satisfaction scores");
  // Extended precision keeps the mean of identical scores equal to the score.
  long double sum = 0.0L;
  for (double s : scores) sum += s;
  return static_cast<double>(sum / static_cast<long double>(scores.size()));
}

inline double mean_satisfaction(std::span<const EvaluationReport> reports) {
  std::vector<double> scores;
  for (const auto& r : reports) scores.push_back(r.satisfaction);
  return mean_satisfaction(scores);
}

inline nlohmann::ordered_json report_to_json(const EvaluationReport& r) {
  nlohmann::ordered_json items = nlohmann::ordered_json::array();
  int ones = 0;
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    items.push_back({{"trait", kTraitNames[t]}, {"prediction", r.predictions[t]}, {"rating", r.ratings[t]}});
    ones += r.ratings[t];
  }
  return {{"session_id", r.session_id}, {"items", items},       {"correct", ones},
          {"accuracy", r.accuracy},     {"satisfaction", r.satisfaction}};
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
  EvaluationReport r;
  r.session_id = j.at("session_id").get<std::string>();
  const auto& items = j.at("items");
  if (items.size() != kNumTraits) throw Error(ErrorCode::SchemaError, "report needs 14 items");
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    r.predictions[t] = items[t].at("prediction").get<bool>();
    r.ratings[t] = items[t].at("rating").get<int>();
  }
  r.accuracy = j.at("accuracy").get<double>();
  r.satisfaction = j.at("satisfaction").get<double>();
  return r;
}

/// Mean satisfaction (null without reports), mean session accuracy and the
/// fraction of sessions that rated each trait correct.
inline nlohmann::ordered_json summary_to_json(std::span<const EvaluationReport> reports) {
  nlohmann::ordered_json j;
  j["sessions"] = reports.size();
  if (reports.empty()) {
    j["mean_satisfaction"] = nullptr;
    j["mean_accuracy"] = nullptr;
  } else {
    j["mean_satisfaction"] = mean_satisfaction(reports);
    double acc = 0.0;
    for (const auto& r : reports) acc += r.accuracy;
    j["mean_accuracy"] = acc / static_cast<double>(reports.size());
  }
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    int ones = 0;
    for (const auto& r : reports) ones += r.ratings[t];
    nlohmann::ordered_json row{{"trait", kTraitNames[t]}, {"correct", ones}};
    row["accuracy"] = reports.empty() ? nlohmann::ordered_json()
                                      : nlohmann::ordered_json(static_cast<double>(ones) /
                                                               static_cast<double>(reports.size()));
    per.push_back(row);
  }
  j["per_trait"] = per;
  return j;
}

}  // namespace traitwave::service
