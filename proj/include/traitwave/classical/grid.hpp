#pragma once

// The 14 x 4 (trait, emotion) model grid, the per-trait selector, and their
// file formats.

#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "traitwave/classical/search.hpp"
#include "traitwave/dataset.hpp"
#include "traitwave/features.hpp"

namespace traitwave::classical {

inline constexpr int kBundleFormatVersion = 1;

struct TrainedModel {
  ModelSpec spec;
  Classifier model;
  std::optional<features::Standardizer> scaler;
  Trait trait = Trait::ReligiousPractice;
  Emotion emotion = Emotion::Happy;
  double training_accuracy = 0.0;
  double cv_accuracy = 0.0;

  double probability(const features::Vector& x) const {
    for (double v : x)
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteInput, "feature vector has a non-finite value");
    if (scaler) {
      const auto z = scaler->apply(x);
      return predict_proba(model, z);
    }
    return predict_proba(model, x);
  }
  bool predict(const features::Vector& x) const { return probability(x) >= 0.5; }
};

struct GridConfig {
  SearchBudget budget;
  bool standardize = false;       // z-score features, fitted on the training side
  std::uint64_t seed = 0;
  unsigned threads = 0;           // 0 = hardware concurrency
};

/// Per-record, per-emotion feature vectors.
using FeatureTable = std::vector<std::array<features::FeatureVector, kNumEmotions>>;

inline FeatureTable feature_table(const std::vector<dataset::SessionRecord>& records, bool relative) {
  FeatureTable table(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    for (auto e : kEmotions) table[i][index_of(e)] = features::extract_features(records[i].segment(e), relative);
  return table;
}

inline std::uint64_t cell_seed(std::uint64_t seed, Trait t, Emotion e) {
  return derive_seed(seed, {0x6d1u, index_of(t), index_of(e)});
}

/// Runs `work(i)` for i in [0, n) on a small worker pool; rethrows the first
/// failure after all workers stop.
template <class Work>
void parallel_for(std::size_t n, unsigned threads, Work&& work) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        work(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  if (threads <= 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(run);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

/// Trains one searched model per (trait, emotion) on the training side of
/// `split` only. Output order: trait-major, emotions in elicitation order.
inline std::vector<TrainedModel> train_grid(const std::vector<dataset::SessionRecord>& records,
                                            const dataset::Split& split, const GridConfig& cfg) {
  const auto train = dataset::partition(records, split).first;
  if (train.empty()) throw Error(ErrorCode::TooFewSamples, "no training subjects in split");
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    std::size_t pos = 0;
    for (const auto& r : train) pos += r.labels.values[t] ? 1 : 0;
    if (pos == 0 || pos == train.size())
      throw Error(ErrorCode::DegenerateLabels, std::string(kTraitNames[t]));
  }
  const auto table = feature_table(train, false);

  std::array<Matrix, kNumEmotions> X;
  std::array<std::optional<features::Standardizer>, kNumEmotions> scalers;
  for (auto e : kEmotions) {
    std::vector<features::Vector> rows;
    for (const auto& fv : table) rows.push_back(fv[index_of(e)].values);
    if (cfg.standardize) {
      scalers[index_of(e)] = features::Standardizer::fit(rows);
      for (auto& r : rows) r = scalers[index_of(e)]->apply(r);
    }
    X[index_of(e)] = Matrix::from_rows(rows);
  }

  std::vector<TrainedModel> out(kNumTraits * kNumEmotions);
  parallel_for(out.size(), cfg.threads, [&](std::size_t cell) {
    const auto t = trait_at(cell / kNumEmotions);
    const auto e = emotion_at(cell % kNumEmotions);
    Labels y;
    for (const auto& r : train) y.push_back(r.labels[t] ? 1 : 0);
    auto found = model_search(X[index_of(e)], y, cfg.budget, cell_seed(cfg.seed, t, e));
    TrainedModel m;
    m.spec = found.spec;
    m.model = std::move(found.model);
    m.scaler = scalers[index_of(e)];
    m.trait = t;
    m.emotion = e;
    m.training_accuracy = found.training_accuracy;
    m.cv_accuracy = found.cv_accuracy;
    out[cell] = std::move(m);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Selection

enum class SelectionMode { Argmax, Vote };

inline std::string_view name_of(SelectionMode m) { return m == SelectionMode::Argmax ? "argmax" : "vote"; }

struct TraitChoice {
  Emotion emotion = Emotion::Happy;
  std::shared_ptr<const TrainedModel> model;
  // Vote mode only: the four emotion models in elicitation order.
  std::vector<std::shared_ptr<const TrainedModel>> voters;
};

struct TraitSelector {
  SelectionMode mode = SelectionMode::Argmax;
  std::array<TraitChoice, kNumTraits> choices;
};

/// Index of the maximum; ties resolve to the lowest index.
inline std::size_t argmax_first(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

/// Per trait, the emotion model with the highest training accuracy (ties go
/// to the earlier emotion: happy, sad, neutral, meditation).
inline TraitSelector select_per_trait(const std::vector<TrainedModel>& models,
                                      SelectionMode mode = SelectionMode::Argmax) {
  std::array<std::array<std::shared_ptr<const TrainedModel>, kNumEmotions>, kNumTraits> cells{};
  for (const auto& m : models) cells[index_of(m.trait)][index_of(m.emotion)] = std::make_shared<TrainedModel>(m);
  TraitSelector sel;
  sel.mode = mode;
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    std::array<double, kNumEmotions> acc{};
    for (std::size_t e = 0; e < kNumEmotions; ++e) {
      if (!cells[t][e])
        throw Error(ErrorCode::MissingEmotion, std::string(kTraitNames[t]) + " has no " +
                                                   std::string(kEmotionNames[e]) + " model");
      acc[e] = cells[t][e]->training_accuracy;
    }
    const auto best = argmax_first(acc);
    sel.choices[t].emotion = emotion_at(best);
    sel.choices[t].model = cells[t][best];
    if (mode == SelectionMode::Vote) sel.choices[t].voters.assign(cells[t].begin(), cells[t].end());
  }
  return sel;
}

struct TraitPrediction {
  Trait trait = Trait::ReligiousPractice;
  bool value = false;
  double probability = 0.0;
  Emotion emotion = Emotion::Happy;  // emotion whose features decided (argmax mode)

  bool operator==(const TraitPrediction&) const = default;
};

using EmotionFeatures = std::array<std::optional<features::Vector>, kNumEmotions>;

inline const features::Vector& require_features(const EmotionFeatures& f, Emotion e, Trait t) {
  if (!f[index_of(e)])
    throw Error(ErrorCode::MissingEmotionFeatures, std::string(traitwave::name_of(t)) + " needs " +
                                                       std::string(traitwave::name_of(e)) + " features");
  return *f[index_of(e)];
}

/// Vote mode: majority of the four emotion models; a 2-2 split falls back to
/// the mean probability.
inline std::array<TraitPrediction, kNumTraits> predict_traits(const TraitSelector& sel, const EmotionFeatures& f) {
  std::array<TraitPrediction, kNumTraits> out;
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    const auto& choice = sel.choices[t];
    auto& p = out[t];
    p.trait = trait_at(t);
    p.emotion = choice.emotion;
    if (sel.mode == SelectionMode::Argmax || choice.voters.empty()) {
      p.probability = choice.model->probability(require_features(f, choice.emotion, p.trait));
      p.value = p.probability >= 0.5;
    } else {
      std::size_t yes = 0;
      double sum = 0;
      for (const auto& v : choice.voters) {
        const double pr = v->probability(require_features(f, v->emotion, p.trait));
        sum += pr;
        yes += pr >= 0.5 ? 1 : 0;
      }
      p.probability = sum / static_cast<double>(choice.voters.size());
      const auto half = choice.voters.size();
      p.value = 2 * yes == half ? p.probability >= 0.5 : 2 * yes > half;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bundle and selector files

inline json bundle_to_json(const TrainedModel& m) {
  json j;
  j["format_version"] = kBundleFormatVersion;
  j["spec"] = spec_to_json(m.spec);
  json params;
  params["model"] = parameters_to_json(m.model);
  if (m.scaler) {
    params["scaler"] = json{{"mean", m.scaler->mean}, {"scale", m.scaler->scale}};
  } else {
    params["scaler"] = nullptr;
  }
  j["parameters"] = params;
  j["trait"] = std::string(traitwave::name_of(m.trait));
  j["emotion"] = std::string(traitwave::name_of(m.emotion));
  j["training_accuracy"] = m.training_accuracy;
  j["cv_accuracy"] = m.cv_accuracy;
  return j;
}

inline TrainedModel bundle_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kBundleFormatVersion)
      throw Error(ErrorCode::BundleError, "unsupported bundle format_version");
    TrainedModel m;
    m.spec = spec_from_json(j.at("spec"));
    const auto& params = j.at("parameters");
    m.model = parameters_from_json(m.spec.family, params.at("model"));
    if (!params.at("scaler").is_null()) {
      features::Standardizer s;
      s.mean = params["scaler"].at("mean").get<features::Vector>();
      s.scale = params["scaler"].at("scale").get<features::Vector>();
      m.scaler = s;
    }
    const auto trait = parse_trait(j.at("trait").get<std::string>());
    const auto emotion = parse_emotion(j.at("emotion").get<std::string>());
    if (!trait || !emotion) throw Error(ErrorCode::BundleError, "unknown trait or emotion");
    m.trait = *trait;
    m.emotion = *emotion;
    m.training_accuracy = j.at("training_accuracy").get<double>();
    m.cv_accuracy = j.at("cv_accuracy").get<double>();
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::BundleError, ex.what());
  }
}

inline std::filesystem::path bundle_file_name(Trait t, Emotion e) {
  return std::string(traitwave::name_of(t)) + "_" + std::string(traitwave::name_of(e)) + ".json";
}

inline void save_bundle(const TrainedModel& m, const std::filesystem::path& path) {
  dataset::write_text(path, bundle_to_json(m).dump() + "\n");
}

inline TrainedModel load_bundle(const std::filesystem::path& path) {
  const auto text = dataset::read_text(path);
  try {
    return bundle_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::BundleError, path.string() + ": " + ex.what());
  }
}

/// Writes every model as <dir>/<trait>_<emotion>.json.
inline void save_models(const std::vector<TrainedModel>& models, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& m : models) save_bundle(m, dir / bundle_file_name(m.trait, m.emotion));
}

inline std::vector<TrainedModel> load_models(const std::filesystem::path& dir) {
  std::vector<TrainedModel> models;
  for (std::size_t t = 0; t < kNumTraits; ++t)
    for (auto e : kEmotions) {
      const auto path = dir / bundle_file_name(trait_at(t), e);
      if (std::filesystem::exists(path)) models.push_back(load_bundle(path));
    }
  return models;
}

/// Selector file: bundle references relative to `models_ref` (a path as seen
/// from the selector's directory).
inline std::string selector_to_json(const TraitSelector& sel, const std::string& models_ref) {
  json j;
  j["format_version"] = kBundleFormatVersion;
  j["mode"] = std::string(name_of(sel.mode));
  json entries = json::array();
  for (std::size_t t = 0; t < kNumTraits; ++t) {
    const auto& c = sel.choices[t];
    json entry;
    entry["trait"] = std::string(kTraitNames[t]);
    entry["emotion"] = std::string(traitwave::name_of(c.emotion));
    entry["training_accuracy"] = c.model->training_accuracy;
    entry["bundle"] = models_ref + "/" + bundle_file_name(trait_at(t), c.emotion).string();
    if (sel.mode == SelectionMode::Vote) {
      json voters = json::array();
      for (const auto& v : c.voters) voters.push_back(models_ref + "/" + bundle_file_name(v->trait, v->emotion).string());
      entry["voters"] = voters;
    }
    entries.push_back(entry);
  }
  j["entries"] = entries;
  return j.dump(2) + "\n";
}

inline TraitSelector load_selector(const std::filesystem::path& path) {
  try {
    const auto j = nlohmann::json::parse(dataset::read_text(path));
    const auto base = path.parent_path();
    TraitSelector sel;
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "argmax") sel.mode = SelectionMode::Argmax;
    else if (mode == "vote") sel.mode = SelectionMode::Vote;
    else throw Error(ErrorCode::SelectorLoadError, "unknown mode " + mode);
    const auto& entries = j.at("entries");
    if (!entries.is_array() || entries.size() != kNumTraits)
      throw Error(ErrorCode::SelectorLoadError, "selector must list exactly 14 models, found " +
                                                    std::to_string(entries.is_array() ? entries.size() : 0));
    std::array<bool, kNumTraits> seen{};
    for (const auto& entry : entries) {
      const auto trait = parse_trait(entry.at("trait").get<std::string>());
      if (!trait) throw Error(ErrorCode::SelectorLoadError, "unknown trait in selector");
      if (seen[index_of(*trait)]) throw Error(ErrorCode::SelectorLoadError, "duplicate trait in selector");
      seen[index_of(*trait)] = true;
      auto& choice = sel.choices[index_of(*trait)];
      auto model = std::make_shared<TrainedModel>(load_bundle(base / entry.at("bundle").get<std::string>()));
      if (model->trait != *trait) throw Error(ErrorCode::SelectorLoadError, "bundle trait does not match entry");
      choice.emotion = model->emotion;
      choice.model = std::move(model);
      if (sel.mode == SelectionMode::Vote) {
        for (const auto& v : entry.at("voters"))
          choice.voters.push_back(std::make_shared<TrainedModel>(load_bundle(base / v.get<std::string>())));
      }
    }
    return sel;
  } catch (const Error& ex) {
    if (ex.code() == ErrorCode::SelectorLoadError) throw;
    throw Error(ErrorCode::SelectorLoadError, ex.what());
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::SelectorLoadError, ex.what());
  }
}

/// trait,emotion,family,cv_accuracy,training_accuracy
inline void write_accuracy_grid(std::ostream& out, const std::vector<TrainedModel>& models) {
  out << "trait,emotion,family,cv_accuracy,training_accuracy\n";
  char buf[64];
  for (const auto& m : models) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", m.cv_accuracy, m.training_accuracy);
    out << traitwave::name_of(m.trait) << ',' << traitwave::name_of(m.emotion) << ',' << name_of(m.spec.family)
        << ',' << buf << '\n';
  }
}

/// Feature vectors for every emotion of one record.
inline EmotionFeatures emotion_features(const dataset::SessionRecord& r, bool relative = false) {
  EmotionFeatures f;
  for (auto e : kEmotions) f[index_of(e)] = features::extract_features(r.segment(e), relative).values;
  return f;
}

struct TraitScore {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

/// Per-trait accuracy of the selector's predictions against the records'
/// labels.
inline std::array<TraitScore, kNumTraits> score_selector(const TraitSelector& sel,
                                                         const std::vector<dataset::SessionRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "no records to evaluate");
  std::array<TraitScore, kNumTraits> scores{};
  for (const auto& r : records) {
    const auto preds = predict_traits(sel, emotion_features(r));
    for (std::size_t t = 0; t < kNumTraits; ++t) {
      scores[t].total += 1;
      scores[t].correct += preds[t].value == r.labels.values[t] ? 1 : 0;
    }
  }
  return scores;
}

}  // namespace traitwave::classical
