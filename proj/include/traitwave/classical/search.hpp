#pragma once

// Stratified k-fold cross-validation and the grid search that stands in for
// an automated model-selection tool.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "traitwave/classical/models.hpp"

namespace traitwave::classical {

/// fold[i] in [0, folds). Positives and negatives are shuffled separately and
/// dealt round-robin, negatives continuing where positives stopped, so fold
/// sizes differ by at most one and class ratios are preserved.
inline std::vector<std::size_t> stratified_folds(const Labels& y, std::size_t folds, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg).push_back(i);
  Rng rng(derive_seed(seed, {0xf01du}));
  rng.shuffle(std::span(pos));
  rng.shuffle(std::span(neg));
  std::vector<std::size_t> fold(y.size());
  std::size_t next = 0;
  for (auto i : pos) fold[i] = next++ % folds;
  for (auto i : neg) fold[i] = next++ % folds;
  return fold;
}

inline void check_trainable(const Labels& y, std::size_t folds) {
  const auto pos = count_positive(y);
  if (pos == 0 || pos == y.size())
    throw Error(ErrorCode::DegenerateLabels, "labels contain a single class");
  if (folds < 2 || y.size() < folds)
    throw Error(ErrorCode::TooFewSamples, std::to_string(y.size()) + " samples for " + std::to_string(folds) + " folds");
}

inline double accuracy_of(const Classifier& model, const Matrix& X, const Labels& y) {
  if (X.rows() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const bool predicted = predict_proba(model, X.row(i)) >= 0.5;
    correct += predicted == (y[i] != 0) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(X.rows());
}

/// Mean held-fold accuracy. The same seed always yields the same partition,
/// so specs searched under one seed are compared on identical folds.
inline double cross_validate(const ModelSpec& spec, const Matrix& X, const Labels& y, std::size_t folds,
                             std::uint64_t seed) {
  check_trainable(y, folds);
  const auto fold = stratified_folds(y, folds, seed);
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train, held;
    for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == f ? held : train).push_back(i);
    if (held.empty() || train.empty()) continue;
    const auto model = fit(spec, X.select(train), select(y, train), derive_seed(seed, {0xf17u, f}));
    total += accuracy_of(model, X.select(held), select(y, held));
    ++used;
  }
  return total / static_cast<double>(used);
}

struct SearchBudget {
  std::vector<ModelSpec> grid = default_grid();
  std::optional<std::size_t> max_evaluations;  // seeded subset of the grid when set
  std::size_t folds = 5;
};

struct SearchOutcome {
  ModelSpec spec;
  Classifier model;
  double cv_accuracy = 0.0;
  double training_accuracy = 0.0;
  std::vector<double> cv_scores;  // aligned with the evaluated specs
  std::vector<ModelSpec> evaluated;
};

/// Position of the winning spec: highest cv accuracy, then lower complexity,
/// then earlier position.
inline std::size_t pick_winner(std::span<const ModelSpec> specs, std::span<const double> cv) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < specs.size(); ++i) {
    if (cv[i] > cv[best] || (cv[i] == cv[best] && specs[i].complexity() < specs[best].complexity())) best = i;
  }
  return best;
}

/// Evaluates candidates by cross-validation and refits the winner on all
/// data. Winner: highest cv accuracy, then lower complexity, then earlier
/// grid position.
inline SearchOutcome model_search(const Matrix& X, const Labels& y, const SearchBudget& budget,
                                  std::uint64_t seed) {
  check_trainable(y, budget.folds);
  if (budget.grid.empty()) throw Error(ErrorCode::BadRequest, "empty search grid");

  std::vector<std::size_t> order(budget.grid.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (budget.max_evaluations && *budget.max_evaluations < order.size()) {
    Rng rng(derive_seed(seed, {0xb0d6u}));
    rng.shuffle(std::span(order));
    order.resize(std::max<std::size_t>(1, *budget.max_evaluations));
    std::sort(order.begin(), order.end());
  }

  SearchOutcome out;
  for (auto g : order) {
    out.evaluated.push_back(budget.grid[g]);
    out.cv_scores.push_back(cross_validate(budget.grid[g], X, y, budget.folds, seed));
  }
  const auto best = pick_winner(out.evaluated, out.cv_scores);
  out.spec = out.evaluated[best];
  out.cv_accuracy = out.cv_scores[best];
  out.model = fit(out.spec, X, y, derive_seed(seed, {0xf1au}));
  out.training_accuracy = accuracy_of(out.model, X, y);
  return out;
}

}  // namespace traitwave::classical
