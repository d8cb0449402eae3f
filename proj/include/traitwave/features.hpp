#pragma once

// Segment statistics: the 16-value feature vector (eight band means followed
// by eight band standard deviations), relative band power, and the box-plot
// summaries used for the per-emotion band report.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "traitwave/core.hpp"
#include "traitwave/dataset.hpp"

namespace traitwave::features {

using Vector = std::array<double, kFeatureDim>;

struct FeatureVector {
  std::string subject_id;
  Emotion emotion = Emotion::Happy;
  Vector values{};

  double mean(Band b) const { return values[index_of(b)]; }
  double stddev(Band b) const { return values[kNumBands + index_of(b)]; }
  bool operator==(const FeatureVector&) const = default;
};

inline std::vector<std::string> feature_names() {
  std::vector<std::string> names;
  for (auto b : kBandNames) names.push_back("mean_" + std::string(b));
  for (auto b : kBandNames) names.push_back("std_" + std::string(b));
  return names;
}

/// Each band's share of the row total; throws AllZeroRow when every band is 0.
inline std::array<double, kNumBands> relative_band_power(const BandPowerRow& row);

/// Mean and sample (n-1) standard deviation per band; std is 0 for one row.
/// Raw magnitudes are integers below 2^24, so their sum and sum of squares
/// are accumulated exactly and only the final division and square root
/// round. Relative powers use a plain two-pass computation.
inline FeatureVector extract_features(const Segment& segment, bool relative = false) {
  if (segment.rows.empty())
    throw Error(ErrorCode::EmptySegment, "segment " + segment.subject_id + "/" +
                                             std::string(traitwave::name_of(segment.emotion)) + " has no rows");
  const std::size_t n = segment.rows.size();
  FeatureVector fv{segment.subject_id, segment.emotion, {}};
  if (!relative) {
    __extension__ using wide = unsigned __int128;
    for (std::size_t b = 0; b < kNumBands; ++b) {
      std::uint64_t sum = 0;
      wide sq = 0;
      for (const auto& row : segment.rows) {
        sum += row.bands[b];
        sq += static_cast<wide>(std::uint64_t{row.bands[b]} * row.bands[b]);
      }
      fv.values[b] = static_cast<double>(sum) / static_cast<double>(n);
      if (n > 1) {
        // n * sum(x^2) - (sum x)^2 is an exact non-negative integer.
        const wide d = static_cast<wide>(n) * sq - static_cast<wide>(sum) * sum;
        const long double var = static_cast<long double>(d) / (static_cast<long double>(n) * static_cast<long double>(n - 1));
        fv.values[kNumBands + b] = static_cast<double>(std::sqrt(var));
      }
    }
    return fv;
  }
  std::vector<std::array<double, kNumBands>> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = relative_band_power(segment.rows[k]);
  for (std::size_t b = 0; b < kNumBands; ++b) {
    double sum = 0.0;
    for (const auto& r : x) sum += r[b];
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& r : x) ss += (r[b] - mean) * (r[b] - mean);
    fv.values[b] = mean;
    fv.values[kNumBands + b] = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  }
  return fv;
}

inline std::array<double, kNumBands> relative_band_power(const BandPowerRow& row) {
  double total = 0.0;
  for (auto v : row.bands) total += v;
  if (total <= 0.0) throw Error(ErrorCode::AllZeroRow, "relative power undefined for an all-zero row");
  std::array<double, kNumBands> out;
  for (std::size_t b = 0; b < kNumBands; ++b) out[b] = row.bands[b] / total;
  return out;
}

// ---------------------------------------------------------------------------
// Box plots

struct BoxplotStats {
  std::size_t n = 0;
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
  double whisker_low = 0, whisker_high = 0;
  std::vector<double> outliers;

  bool operator==(const BoxplotStats&) const = default;
};

/// Linear interpolation at zero-based position p*(n-1) of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// Tukey box plot. Whiskers reach the most extreme points inside the
/// 1.5*IQR fences, and are pulled back to the quartile when no point lies
/// between fence and quartile (possible with interpolated quartiles).
inline BoxplotStats boxplot_stats(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "box plot of an empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  BoxplotStats s;
  s.n = v.size();
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile_sorted(v, 0.25);
  s.median = quantile_sorted(v, 0.5);
  s.q3 = quantile_sorted(v, 0.75);
  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr;
  const double hi_fence = s.q3 + 1.5 * iqr;
  s.whisker_low = s.q1;
  s.whisker_high = s.q3;
  for (double x : v) {
    if (x < lo_fence || x > hi_fence) {
      s.outliers.push_back(x);
      continue;
    }
    s.whisker_low = std::min(s.whisker_low, x);
    s.whisker_high = std::max(s.whisker_high, x);
  }
  return s;
}

inline nlohmann::ordered_json to_json(const BoxplotStats& s) {
  nlohmann::ordered_json j;
  j["n"] = s.n;
  j["min"] = s.min;
  j["q1"] = s.q1;
  j["median"] = s.median;
  j["q3"] = s.q3;
  j["max"] = s.max;
  j["whisker_low"] = s.whisker_low;
  j["whisker_high"] = s.whisker_high;
  j["outliers"] = s.outliers;
  return j;
}

/// grid[band][emotion]
using BandEmotionGrid = std::array<std::array<BoxplotStats, kNumEmotions>, kNumBands>;

/// One box plot per (band, emotion) over per-segment band means.
inline BandEmotionGrid band_emotion_report(const std::vector<dataset::SessionRecord>& records,
                                           bool use_relative) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "band report needs at least one record");
  BandEmotionGrid grid;
  for (auto e : kEmotions) {
    std::array<std::vector<double>, kNumBands> means;
    for (const auto& r : records) {
      const auto fv = extract_features(r.segment(e), use_relative);
      for (std::size_t b = 0; b < kNumBands; ++b) means[b].push_back(fv.values[b]);
    }
    for (std::size_t b = 0; b < kNumBands; ++b) grid[b][index_of(e)] = boxplot_stats(means[b]);
  }
  return grid;
}

/// {"relative": bool, "bands": {band: {emotion: stats}}}
inline nlohmann::ordered_json report_to_json(const BandEmotionGrid& grid, bool use_relative) {
  nlohmann::ordered_json j;
  j["relative"] = use_relative;
  nlohmann::ordered_json bands = nlohmann::ordered_json::object();
  for (std::size_t b = 0; b < kNumBands; ++b) {
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (std::size_t e = 0; e < kNumEmotions; ++e) per[std::string(kEmotionNames[e])] = to_json(grid[b][e]);
    bands[std::string(kBandNames[b])] = per;
  }
  j["bands"] = bands;
  return j;
}

// ---------------------------------------------------------------------------
// Feature matrix CSV and z-scoring

inline void write_feature_csv(std::ostream& out, const std::vector<FeatureVector>& rows) {
  out << "subject_id,emotion";
  for (const auto& n : feature_names()) out << ',' << n;
  out << '\n';
  char buf[64];
  for (const auto& fv : rows) {
    out << fv.subject_id << ',' << traitwave::name_of(fv.emotion);
    for (double v : fv.values) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

/// Per-feature z-scoring fitted on training vectors only.
struct Standardizer {
  Vector mean{};
  Vector scale{};  // population std, 1 where a feature is constant

  static Standardizer identity() {
    Standardizer s;
    s.scale.fill(1.0);
    return s;
  }

  static Standardizer fit(std::span<const Vector> rows) {
    Standardizer s = identity();
    if (rows.empty()) return s;
    const double n = static_cast<double>(rows.size());
    for (std::size_t j = 0; j < kFeatureDim; ++j) {
      double m = 0;
      for (const auto& r : rows) m += r[j];
      m /= n;
      double var = 0;
      for (const auto& r : rows) var += (r[j] - m) * (r[j] - m);
      var /= n;
      s.mean[j] = m;
      s.scale[j] = var > 0 ? std::sqrt(var) : 1.0;
    }
    return s;
  }

  Vector apply(const Vector& x) const {
    Vector out;
    for (std::size_t j = 0; j < kFeatureDim; ++j) out[j] = (x[j] - mean[j]) / scale[j];
    return out;
  }
};

}  // namespace traitwave::features
