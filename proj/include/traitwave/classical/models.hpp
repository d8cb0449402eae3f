#pragma once

// The classifier portfolio searched per (trait, emotion): k-nearest
// neighbours, CART decision tree, L2 logistic regression, Gaussian naive
// Bayes and a random forest. Every model yields P(label = 1 | x) in [0, 1].

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "traitwave/classical/matrix.hpp"
#include "traitwave/random.hpp"

namespace traitwave::classical {

using json = nlohmann::ordered_json;

enum class Family : std::uint8_t { Knn, DecisionTree, Logistic, NaiveBayes, RandomForest };

inline std::string_view name_of(Family f) {
  switch (f) {
    case Family::Knn: return "k-nearest-neighbors";
    case Family::DecisionTree: return "decision-tree";
    case Family::Logistic: return "logistic-regression";
    case Family::NaiveBayes: return "gaussian-naive-bayes";
    case Family::RandomForest: return "random-forest";
  }
  return "?";
}

inline std::optional<Family> parse_family(std::string_view s) {
  for (auto f : {Family::Knn, Family::DecisionTree, Family::Logistic, Family::NaiveBayes, Family::RandomForest})
    if (name_of(f) == s) return f;
  return std::nullopt;
}

/// A family plus its hyperparameters. Fields not used by the family stay at
/// their defaults. max_depth 0 means unlimited.
struct ModelSpec {
  Family family = Family::NaiveBayes;
  int k = 0;
  int max_depth = 0;
  int min_leaf = 1;
  double l2 = 0.0;
  int trees = 0;

  /// Number of tunable hyperparameters; smaller wins search ties.
  int complexity() const {
    switch (family) {
      case Family::NaiveBayes: return 0;
      case Family::Knn: return 1;
      case Family::Logistic: return 1;
      case Family::DecisionTree: return 2;
      case Family::RandomForest: return 2;
    }
    return 0;
  }

  bool operator==(const ModelSpec&) const = default;
};

inline std::string describe(const ModelSpec& s) {
  std::string out(name_of(s.family));
  auto depth = [&] { return s.max_depth == 0 ? std::string("none") : std::to_string(s.max_depth); };
  switch (s.family) {
    case Family::Knn: out += "(k=" + std::to_string(s.k) + ")"; break;
    case Family::DecisionTree:
      out += "(max_depth=" + depth() + ",min_leaf=" + std::to_string(s.min_leaf) + ")";
      break;
    case Family::Logistic: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "(l2=%g)", s.l2);
      out += buf;
      break;
    }
    case Family::NaiveBayes: break;
    case Family::RandomForest:
      out += "(trees=" + std::to_string(s.trees) + ",max_depth=" + depth() + ")";
      break;
  }
  return out;
}

/// The documented search grid, in canonical order (29 specs).
inline std::vector<ModelSpec> default_grid() {
  std::vector<ModelSpec> grid;
  for (int k : {1, 3, 5, 7}) grid.push_back({Family::Knn, k, 0, 1, 0.0, 0});
  for (int depth : {2, 4, 8, 0})
    for (int leaf : {1, 3, 5}) grid.push_back({Family::DecisionTree, 0, depth, leaf, 0.0, 0});
  for (double l2 : {0.01, 0.1, 1.0, 10.0}) grid.push_back({Family::Logistic, 0, 0, 1, l2, 0});
  grid.push_back({Family::NaiveBayes, 0, 0, 1, 0.0, 0});
  for (int trees : {25, 100})
    for (int depth : {2, 4, 8, 0}) grid.push_back({Family::RandomForest, 0, depth, 1, 0.0, trees});
  return grid;
}

inline json spec_to_json(const ModelSpec& s) {
  json hp = json::object();
  switch (s.family) {
    case Family::Knn: hp["k"] = s.k; break;
    case Family::DecisionTree:
      hp["max_depth"] = s.max_depth == 0 ? json(nullptr) : json(s.max_depth);
      hp["min_leaf"] = s.min_leaf;
      break;
    case Family::Logistic: hp["l2"] = s.l2; break;
    case Family::NaiveBayes: break;
    case Family::RandomForest:
      hp["trees"] = s.trees;
      hp["max_depth"] = s.max_depth == 0 ? json(nullptr) : json(s.max_depth);
      break;
  }
  json j;
  j["family"] = std::string(name_of(s.family));
  j["hyperparameters"] = hp;
  return j;
}

inline ModelSpec spec_from_json(const nlohmann::json& j) {
  const auto family = parse_family(j.at("family").get<std::string>());
  if (!family) throw Error(ErrorCode::BundleError, "unknown model family");
  ModelSpec s;
  s.family = *family;
  const auto& hp = j.at("hyperparameters");
  auto depth = [&] { return hp.at("max_depth").is_null() ? 0 : hp.at("max_depth").get<int>(); };
  switch (s.family) {
    case Family::Knn: s.k = hp.at("k").get<int>(); break;
    case Family::DecisionTree:
      s.max_depth = depth();
      s.min_leaf = hp.at("min_leaf").get<int>();
      break;
    case Family::Logistic: s.l2 = hp.at("l2").get<double>(); break;
    case Family::NaiveBayes: break;
    case Family::RandomForest:
      s.trees = hp.at("trees").get<int>();
      s.max_depth = depth();
      break;
  }
  return s;
}

// ---------------------------------------------------------------------------
// k-nearest neighbours on min-max normalized features

struct KnnModel {
  int k = 1;
  std::vector<double> lo, range;
  Matrix points;  // normalized training rows
  Labels labels;

  static KnnModel fit(const Matrix& X, const Labels& y, int k) {
    KnnModel m;
    m.k = k;
    const auto d = X.cols();
    m.lo.assign(d, 0.0);
    m.range.assign(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t i = 0; i < X.rows(); ++i) {
        lo = std::min(lo, X(i, j));
        hi = std::max(hi, X(i, j));
      }
      m.lo[j] = lo;
      m.range[j] = hi > lo ? hi - lo : 1.0;
    }
    m.points = Matrix(X.rows(), d);
    for (std::size_t i = 0; i < X.rows(); ++i)
      for (std::size_t j = 0; j < d; ++j) m.points(i, j) = (X(i, j) - m.lo[j]) / m.range[j];
    m.labels = y;
    return m;
  }

  /// Fraction of positives among the k closest points; distance ties go to
  /// the earlier training row.
  double predict(std::span<const double> x) const {
    const auto n = points.rows();
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      auto p = points.row(i);
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double diff = (x[j] - lo[j]) / range[j] - p[j];
        s += diff * diff;
      }
      dist[i] = {s, i};
    }
    const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), n);
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < kk; ++i) pos += labels[dist[i].second];
    return static_cast<double>(pos) / static_cast<double>(kk);
  }
};

// ---------------------------------------------------------------------------
// CART tree (Gini impurity)

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  double prob = 0.0;  // positive fraction of training samples at the node

  bool operator==(const TreeNode&) const = default;
};

struct TreeModel {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const {
    int at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(at)];
      at = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(at)].prob;
  }

  struct Options {
    int max_depth = 0;
    int min_leaf = 1;
    std::size_t features_per_split = 0;  // 0 = all features
  };

  static TreeModel fit(const Matrix& X, const Labels& y, std::span<const std::size_t> sample,
                       const Options& opt, Rng* rng) {
    TreeModel t;
    std::vector<std::size_t> idx(sample.begin(), sample.end());
    t.grow(X, y, idx, 0, opt, rng);
    return t;
  }

  static TreeModel fit(const Matrix& X, const Labels& y, const Options& opt) {
    std::vector<std::size_t> all(X.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return fit(X, y, all, opt, nullptr);
  }

 private:
  static double gini(double pos, double n) {
    if (n <= 0) return 0.0;
    const double p = pos / n;
    return 2.0 * p * (1.0 - p);
  }

  int grow(const Matrix& X, const Labels& y, std::vector<std::size_t>& idx, int depth, const Options& opt,
           Rng* rng) {
    const auto id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    const std::size_t n = idx.size();
    std::size_t pos = 0;
    for (auto i : idx) pos += y[i];
    nodes.back().prob = static_cast<double>(pos) / static_cast<double>(n);

    const auto min_leaf = static_cast<std::size_t>(std::max(1, opt.min_leaf));
    if ((opt.max_depth > 0 && depth >= opt.max_depth) || pos == 0 || pos == n || n < 2 * min_leaf) return id;

    std::vector<std::size_t> features(X.cols());
    std::iota(features.begin(), features.end(), std::size_t{0});
    if (opt.features_per_split > 0 && opt.features_per_split < features.size() && rng != nullptr) {
      for (std::size_t i = 0; i < opt.features_per_split; ++i) {
        const auto j = i + static_cast<std::size_t>(rng->below(features.size() - i));
        std::swap(features[i], features[j]);
      }
      features.resize(opt.features_per_split);
      std::sort(features.begin(), features.end());
    }

    const double parent = gini(static_cast<double>(pos), static_cast<double>(n));
    double best_gain = 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> order(idx);
    for (auto f : features) {
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double xa = X(a, f), xb = X(b, f);
        return xa < xb || (xa == xb && a < b);
      });
      std::size_t left_pos = 0;
      for (std::size_t i = 1; i < n; ++i) {
        left_pos += y[order[i - 1]];
        if (i < min_leaf || n - i < min_leaf) continue;
        const double a = X(order[i - 1], f), b = X(order[i], f);
        if (!(a < b)) continue;
        const double nl = static_cast<double>(i), nr = static_cast<double>(n - i);
        const double child = (nl * gini(static_cast<double>(left_pos), nl) +
                              nr * gini(static_cast<double>(pos - left_pos), nr)) /
                             static_cast<double>(n);
        const double gain = parent - child;
        if (gain > best_gain + 1e-15) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          double thr = a + (b - a) / 2.0;
          if (!(thr < b)) thr = a;
          best_threshold = thr;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto i : idx)
      (X(i, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(X, y, left, depth + 1, opt, rng);
    const int r = grow(X, y, right, depth + 1, opt, rng);
    auto& node = nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

// ---------------------------------------------------------------------------
// L2-regularized logistic regression on standardized features.
//
// Minimizes  sum_i logloss(y_i, sigmoid(w.z_i + b)) + (l2 / 2) |w|^2  where
// z is x standardized with the training mean and population std. The bias is
// not penalized. Solved with damped Newton steps.

inline double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// log(1 + exp(t)) without overflow.
inline double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

struct LogisticModel {
  std::vector<double> mean, scale, weights;
  double bias = 0.0;
  double constant = -1.0;  // >= 0 when training saw a single class

  double predict(std::span<const double> x) const {
    if (constant >= 0.0) return constant;
    double t = bias;
    for (std::size_t j = 0; j < weights.size(); ++j) t += weights[j] * (x[j] - mean[j]) / scale[j];
    return sigmoid(t);
  }

  static LogisticModel fit(const Matrix& X, const Labels& y, double l2) {
    LogisticModel m;
    const auto n = X.rows(), d = X.cols();
    m.mean.assign(d, 0.0);
    m.scale.assign(d, 1.0);
    m.weights.assign(d, 0.0);
    const auto pos = count_positive(y);
    if (pos == 0 || pos == n) {
      m.constant = pos == 0 ? 0.0 : 1.0;
      return m;
    }
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) s += X(i, j);
      const double mu = s / static_cast<double>(n);
      double v = 0;
      for (std::size_t i = 0; i < n; ++i) v += (X(i, j) - mu) * (X(i, j) - mu);
      v /= static_cast<double>(n);
      m.mean[j] = mu;
      m.scale[j] = v > 0 ? std::sqrt(v) : 1.0;
    }
    // Design matrix with a trailing bias column.
    Eigen::MatrixXd Z(n, d + 1);
    Eigen::VectorXd target(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) Z(i, j) = (X(i, j) - m.mean[j]) / m.scale[j];
      Z(i, d) = 1.0;
      target(i) = y[i];
    }
    Eigen::VectorXd penalty = Eigen::VectorXd::Constant(d + 1, l2);
    penalty(d) = 0.0;

    auto objective = [&](const Eigen::VectorXd& beta) {
      const Eigen::VectorXd t = Z * beta;
      double f = 0;
      for (std::size_t i = 0; i < n; ++i) f += softplus(t(i)) - target(i) * t(i);
      return f + 0.5 * (penalty.array() * beta.array().square()).sum();
    };

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d + 1);
    double f = objective(beta);
    for (int iter = 0; iter < 200; ++iter) {
      const Eigen::VectorXd t = Z * beta;
      Eigen::VectorXd p(n), w(n);
      for (std::size_t i = 0; i < n; ++i) {
        p(i) = sigmoid(t(i));
        w(i) = std::max(p(i) * (1.0 - p(i)), 1e-12);
      }
      const Eigen::VectorXd grad = Z.transpose() * (p - target) + penalty.cwiseProduct(beta);
      Eigen::MatrixXd H = Z.transpose() * w.asDiagonal() * Z;
      H.diagonal() += penalty;
      H.diagonal().array() += 1e-10;
      const Eigen::VectorXd step = H.ldlt().solve(grad);
      double lr = 1.0;
      Eigen::VectorXd next = beta - step;
      double f_next = objective(next);
      const double decrease = grad.dot(step);
      while (f_next > f - 1e-4 * lr * decrease && lr > 1e-10) {
        lr *= 0.5;
        next = beta - lr * step;
        f_next = objective(next);
      }
      const double moved = (next - beta).cwiseAbs().maxCoeff();
      beta = next;
      f = f_next;
      if (moved < 1e-13 || grad.cwiseAbs().maxCoeff() < 1e-12) break;
    }
    for (std::size_t j = 0; j < d; ++j) m.weights[j] = beta(static_cast<Eigen::Index>(j));
    m.bias = beta(static_cast<Eigen::Index>(d));
    return m;
  }
};

// ---------------------------------------------------------------------------
// Gaussian naive Bayes. Class variances are maximum-likelihood estimates plus
// 1e-9 times the largest overall feature variance.

struct NaiveBayesModel {
  std::array<double, 2> prior{};
  std::array<std::vector<double>, 2> mean, var;
  double constant = -1.0;

  double predict(std::span<const double> x) const {
    if (constant >= 0.0) return constant;
    std::array<double, 2> logp{};
    for (int c = 0; c < 2; ++c) {
      double s = std::log(prior[c]);
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double diff = x[j] - mean[c][j];
        s += -0.5 * std::log(2.0 * 3.14159265358979323846 * var[c][j]) - diff * diff / (2.0 * var[c][j]);
      }
      logp[c] = s;
    }
    return sigmoid(logp[1] - logp[0]);
  }

  static NaiveBayesModel fit(const Matrix& X, const Labels& y) {
    NaiveBayesModel m;
    const auto n = X.rows(), d = X.cols();
    const auto pos = count_positive(y);
    if (pos == 0 || pos == n) {
      m.constant = pos == 0 ? 0.0 : 1.0;
      return m;
    }
    double max_var = 0;
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) s += X(i, j);
      const double mu = s / static_cast<double>(n);
      double v = 0;
      for (std::size_t i = 0; i < n; ++i) v += (X(i, j) - mu) * (X(i, j) - mu);
      max_var = std::max(max_var, v / static_cast<double>(n));
    }
    const double eps = 1e-9 * (max_var > 0 ? max_var : 1.0);
    const std::array<double, 2> count = {static_cast<double>(n - pos), static_cast<double>(pos)};
    for (int c = 0; c < 2; ++c) {
      m.prior[c] = count[c] / static_cast<double>(n);
      m.mean[c].assign(d, 0.0);
      m.var[c].assign(d, 0.0);
      for (std::size_t j = 0; j < d; ++j) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i)
          if (y[i] == c) s += X(i, j);
        const double mu = s / count[c];
        double v = 0;
        for (std::size_t i = 0; i < n; ++i)
          if (y[i] == c) v += (X(i, j) - mu) * (X(i, j) - mu);
        m.mean[c][j] = mu;
        m.var[c][j] = v / count[c] + eps;
      }
    }
    return m;
  }
};

// ---------------------------------------------------------------------------
// Random forest: bootstrap samples, floor(sqrt(d)) candidate features per
// split, mean of tree probabilities. Tree t draws from derive_seed(seed, {t}).

struct ForestModel {
  std::vector<TreeModel> trees;

  double predict(std::span<const double> x) const {
    double s = 0;
    for (const auto& t : trees) s += t.predict(x);
    return trees.empty() ? 0.5 : s / static_cast<double>(trees.size());
  }

  static ForestModel fit(const Matrix& X, const Labels& y, int n_trees, int max_depth, std::uint64_t seed) {
    ForestModel f;
    const auto n = X.rows();
    TreeModel::Options opt;
    opt.max_depth = max_depth;
    opt.min_leaf = 1;
    opt.features_per_split =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(X.cols())))));
    f.trees.reserve(static_cast<std::size_t>(n_trees));
    std::vector<std::size_t> sample(n);
    for (int t = 0; t < n_trees; ++t) {
      Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(t)}));
      for (auto& s : sample) s = static_cast<std::size_t>(rng.below(n));
      f.trees.push_back(TreeModel::fit(X, y, sample, opt, &rng));
    }
    return f;
  }
};

// ---------------------------------------------------------------------------

using Classifier = std::variant<KnnModel, TreeModel, LogisticModel, NaiveBayesModel, ForestModel>;

inline Classifier fit(const ModelSpec& spec, const Matrix& X, const Labels& y, std::uint64_t seed) {
  if (X.rows() == 0 || X.rows() != y.size()) throw Error(ErrorCode::TooFewSamples, "empty or mismatched training set");
  switch (spec.family) {
    case Family::Knn: return KnnModel::fit(X, y, spec.k);
    case Family::DecisionTree: return TreeModel::fit(X, y, {spec.max_depth, spec.min_leaf, 0});
    case Family::Logistic: return LogisticModel::fit(X, y, spec.l2);
    case Family::NaiveBayes: return NaiveBayesModel::fit(X, y);
    case Family::RandomForest: return ForestModel::fit(X, y, spec.trees, spec.max_depth, seed);
  }
  throw Error(ErrorCode::BundleError, "unknown family");
}

inline double predict_proba(const Classifier& model, std::span<const double> x) {
  const double p = std::visit([&](const auto& m) { return m.predict(x); }, model);
  return std::clamp(p, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Parameter payloads

inline json tree_to_json(const TreeModel& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) nodes.push_back(json::array({n.feature, n.threshold, n.left, n.right, n.prob}));
  return nodes;
}

inline TreeModel tree_from_json(const nlohmann::json& j) {
  TreeModel t;
  for (const auto& n : j) {
    TreeNode node{n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                  n.at(4).get<double>()};
    t.nodes.push_back(node);
  }
  const auto count = static_cast<int>(t.nodes.size());
  if (count == 0) throw Error(ErrorCode::BundleError, "empty tree");
  // Children always follow their parent, which also rules out cycles.
  for (int i = 0; i < count; ++i) {
    const auto& node = t.nodes[static_cast<std::size_t>(i)];
    if (node.feature >= 0 && (node.left <= i || node.left >= count || node.right <= i || node.right >= count))
      throw Error(ErrorCode::BundleError, "tree node child out of range");
  }
  return t;
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m;
  for (const auto& r : j) m.push_row(r.get<std::vector<double>>());
  return m;
}

inline json parameters_to_json(const Classifier& model) {
  struct V {
    json operator()(const KnnModel& m) const {
      json j;
      j["k"] = m.k;
      j["lo"] = m.lo;
      j["range"] = m.range;
      j["points"] = matrix_to_json(m.points);
      j["labels"] = m.labels;
      return j;
    }
    json operator()(const TreeModel& m) const { return json{{"nodes", tree_to_json(m)}}; }
    json operator()(const LogisticModel& m) const {
      json j;
      j["mean"] = m.mean;
      j["scale"] = m.scale;
      j["weights"] = m.weights;
      j["bias"] = m.bias;
      j["constant"] = m.constant;
      return j;
    }
    json operator()(const NaiveBayesModel& m) const {
      json j;
      j["prior"] = m.prior;
      j["mean"] = m.mean;
      j["var"] = m.var;
      j["constant"] = m.constant;
      return j;
    }
    json operator()(const ForestModel& m) const {
      json trees = json::array();
      for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
      return json{{"trees", trees}};
    }
  };
  return std::visit(V{}, model);
}

inline Classifier parameters_from_json(Family family, const nlohmann::json& j) {
  try {
    switch (family) {
      case Family::Knn: {
        KnnModel m;
        m.k = j.at("k").get<int>();
        m.lo = j.at("lo").get<std::vector<double>>();
        m.range = j.at("range").get<std::vector<double>>();
        m.points = matrix_from_json(j.at("points"));
        m.labels = j.at("labels").get<Labels>();
        if (m.points.rows() != m.labels.size() || m.points.rows() == 0 || m.k < 1)
          throw Error(ErrorCode::BundleError, "inconsistent k-NN parameters");
        return m;
      }
      case Family::DecisionTree: return tree_from_json(j.at("nodes"));
      case Family::Logistic: {
        LogisticModel m;
        m.mean = j.at("mean").get<std::vector<double>>();
        m.scale = j.at("scale").get<std::vector<double>>();
        m.weights = j.at("weights").get<std::vector<double>>();
        m.bias = j.at("bias").get<double>();
        m.constant = j.at("constant").get<double>();
        return m;
      }
      case Family::NaiveBayes: {
        NaiveBayesModel m;
        m.prior = j.at("prior").get<std::array<double, 2>>();
        m.mean = j.at("mean").get<std::array<std::vector<double>, 2>>();
        m.var = j.at("var").get<std::array<std::vector<double>, 2>>();
        m.constant = j.at("constant").get<double>();
        return m;
      }
      case Family::RandomForest: {
        ForestModel m;
        for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t));
        return m;
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::BundleError, std::string("model parameters: ") + ex.what());
  }
  throw Error(ErrorCode::BundleError, "unknown family");
}

}  // namespace traitwave::classical
