#pragma once

// Adam training, gradient checking, and the per-(trait, emotion) deep grid.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "traitwave/classical/grid.hpp"
#include "traitwave/dataset.hpp"
#include "traitwave/deep/network.hpp"

namespace traitwave::deep {

struct TrainConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 50;
  int batch_size = 32;
  double dropout = 0.2;
  int hidden = kDefaultHidden;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::BadRequest, "dropout must lie in [0, 1)");
    if (epochs < 1) throw Error(ErrorCode::BadRequest, "epochs must be at least 1");
    if (batch_size < 1) throw Error(ErrorCode::BadRequest, "batch size must be at least 1");
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::BadRequest, "learning rate must be positive");
    if (hidden < 1) throw Error(ErrorCode::BadRequest, "hidden size must be at least 1");
  }
};

class Adam {
 public:
  Adam(std::size_t n, const TrainConfig& cfg)
      : lr_(cfg.learning_rate), b1_(cfg.beta1), b2_(cfg.beta2), eps_(cfg.epsilon), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      m_[k] = b1_ * m_[k] + (1.0 - b1_) * grad[k];
      v_[k] = b2_ * v_[k] + (1.0 - b2_) * grad[k] * grad[k];
      params[k] -= lr_ * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + eps_);
    }
  }

  std::uint64_t steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

struct EpochStat {
  int epoch = 0;
  double loss = 0.0;  // mean sample loss seen during the epoch
  double train_accuracy = 0.0;
};

struct TrainResult {
  Network network;
  std::vector<EpochStat> curve;
};

inline double accuracy_of(const Network& net, const std::vector<Sequence>& xs, const std::vector<int>& ys) {
  if (xs.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) correct += (net.probability(xs[i]) >= 0.5 ? 1 : 0) == ys[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(xs.size());
}

/// Inverted-dropout mask over the recurrent output.
inline std::vector<double> dropout_mask(Rng& rng, int width, double rate) {
  std::vector<double> mask(static_cast<std::size_t>(width));
  for (auto& m : mask) m = rng.bernoulli(1.0 - rate) ? 1.0 / (1.0 - rate) : 0.0;
  return mask;
}

/// One optimizer step on `batch`; returns the summed sample loss.
inline double train_batch(Network& net, Adam& opt, const std::vector<Sequence>& xs, const std::vector<int>& ys,
                          std::span<const std::size_t> batch, double dropout, Rng& mask_rng) {
  std::vector<double> grad(net.params.size(), 0.0);
  double total = 0.0;
  for (auto i : batch) {
    if (dropout > 0.0) {
      const auto mask = dropout_mask(mask_rng, net.shape.feature_dim(), dropout);
      total += net.loss_and_gradient(xs[i], ys[i], grad, mask);
    } else {
      total += net.loss_and_gradient(xs[i], ys[i], grad);
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& g : grad) g *= inv;
  opt.step(net.params, grad);
  return total;
}

/// Mini-batch training with full BPTT. Sample order is reshuffled each epoch
/// from the seed, so equal seeds give equal curves.
inline TrainResult train(ModelKind kind, const std::vector<Sequence>& xs, const std::vector<int>& ys,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (xs.empty() || xs.size() != ys.size()) throw Error(ErrorCode::TooFewSamples, "no training sequences");
  const auto pos = static_cast<std::size_t>(std::count(ys.begin(), ys.end(), 1));
  if (pos == 0 || pos == ys.size()) throw Error(ErrorCode::DegenerateLabels, "labels contain a single class");

  Shape shape{kind, static_cast<int>(xs.front().cols()), cfg.hidden};
  TrainResult out{Network::initialized(shape, derive_seed(cfg.seed, {0x1a17u})), {}};
  Adam opt(shape.size(), cfg);
  Rng order_rng(derive_seed(cfg.seed, {0xe90cu}));
  Rng mask_rng(derive_seed(cfg.seed, {0xd809u}));

  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(std::span(order));
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const auto len = std::min(bs, order.size() - start);
      total += train_batch(out.network, opt, xs, ys, std::span(order).subspan(start, len), cfg.dropout, mask_rng);
    }
    out.curve.push_back({epoch, total / static_cast<double>(xs.size()), accuracy_of(out.network, xs, ys)});
  }
  return out;
}

struct GradCheck {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

/// Central differences (step `h`) against the analytic gradient over a seeded
/// random subset of coordinates. Relative error |a - n| / max(|a|, |n|, 1e-6).
inline GradCheck grad_check(const Network& net, const Sequence& seq, int label, std::size_t coordinates,
                            std::uint64_t seed, double h = 1e-5) {
  std::vector<double> analytic(net.params.size(), 0.0);
  net.loss_and_gradient(seq, label, analytic);

  std::vector<std::size_t> pool(net.params.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span(pool));
  pool.resize(std::min(coordinates, pool.size()));

  Network probe = net;
  GradCheck out;
  for (auto k : pool) {
    const double saved = probe.params[k];
    probe.params[k] = saved + h;
    const double up = probe.loss(seq, label);
    probe.params[k] = saved - h;
    const double down = probe.loss(seq, label);
    probe.params[k] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[k];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
    out.max_relative_error = std::max(out.max_relative_error, rel);
  }
  out.coordinates = pool.size();
  return out;
}

/// Same comparison for the dense head alone, on a random standard-normal
/// feature vector and weights drawn like a fresh network. Every coordinate is
/// checked.
inline GradCheck head_grad_check(int feature_dim, std::uint64_t seed, double h = 1e-5) {
  Rng rng(seed);
  Vec x(feature_dim);
  for (auto& v : x) v = rng.normal();
  std::vector<double> head(static_cast<std::size_t>(kNumClasses * feature_dim + kNumClasses));
  for (auto& p : head) p = rng.uniform(-0.08, 0.08);
  const int label = rng.bernoulli(0.5) ? 1 : 0;
  std::vector<double> analytic(head.size(), 0.0);
  head_backward(head, x, label, analytic);
  GradCheck out;
  for (std::size_t k = 0; k < head.size(); ++k) {
    const double saved = head[k];
    head[k] = saved + h;
    const double up = softmax_cross_entropy(head_logits(head, x), label).loss;
    head[k] = saved - h;
    const double down = softmax_cross_entropy(head_logits(head, x), label).loss;
    head[k] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic[k] - numeric) / std::max({std::abs(analytic[k]), std::abs(numeric), 1e-6});
    out.max_relative_error = std::max(out.max_relative_error, rel);
  }
  out.coordinates = head.size();
  return out;
}

/// Random standard-normal sequence of `steps` x `width`.
inline Sequence random_sequence(Rng& rng, int steps, int width) {
  Sequence s(steps, width);
  for (int t = 0; t < steps; ++t)
    for (int j = 0; j < width; ++j) s(t, j) = rng.normal();
  return s;
}

struct ToyTask {
  std::vector<Sequence> xs;
  std::vector<int> ys;
};

/// Band 0 drawn around +1 or -1 per sample, other bands pure noise; the class
/// is the sign of the realized band-0 mean.
inline ToyTask toy_task(std::size_t n, int steps, std::uint64_t seed) {
  Rng rng(seed);
  ToyTask task;
  for (std::size_t i = 0; i < n; ++i) {
    const double centre = i % 2 == 0 ? 1.0 : -1.0;
    Sequence s = random_sequence(rng, steps, static_cast<int>(kNumBands));
    for (int t = 0; t < steps; ++t) s(t, 0) += centre;
    task.ys.push_back(s.col(0).mean() > 0.0 ? 1 : 0);
    task.xs.push_back(std::move(s));
  }
  return task;
}

// ---------------------------------------------------------------------------
// Band-power sequences

/// Per-band mean and population standard deviation of log1p(band power).
struct SequenceScaler {
  std::array<double, kNumBands> mean{};
  std::array<double, kNumBands> scale{};

  static SequenceScaler fit(const std::vector<const Segment*>& segments) {
    SequenceScaler s;
    std::array<double, kNumBands> sum{}, sq{};
    std::size_t n = 0;
    for (const auto* seg : segments)
      for (const auto& row : seg->rows) {
        for (std::size_t b = 0; b < kNumBands; ++b) sum[b] += std::log1p(static_cast<double>(row.bands[b]));
        ++n;
      }
    if (n == 0) throw Error(ErrorCode::EmptySegment, "no rows to fit the sequence scaler");
    for (std::size_t b = 0; b < kNumBands; ++b) s.mean[b] = sum[b] / static_cast<double>(n);
    for (const auto* seg : segments)
      for (const auto& row : seg->rows)
        for (std::size_t b = 0; b < kNumBands; ++b) {
          const double d = std::log1p(static_cast<double>(row.bands[b])) - s.mean[b];
          sq[b] += d * d;
        }
    for (std::size_t b = 0; b < kNumBands; ++b) {
      const double sd = std::sqrt(sq[b] / static_cast<double>(n));
      s.scale[b] = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  Sequence apply(const Segment& seg) const {
    if (seg.rows.empty()) throw Error(ErrorCode::EmptySegment, seg.subject_id + " has no rows");
    Sequence s(static_cast<Eigen::Index>(seg.rows.size()), static_cast<Eigen::Index>(kNumBands));
    for (std::size_t t = 0; t < seg.rows.size(); ++t)
      for (std::size_t b = 0; b < kNumBands; ++b)
        s(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(b)) =
            (std::log1p(static_cast<double>(seg.rows[t].bands[b])) - mean[b]) / scale[b];
    return s;
  }
};

struct DeepModel {
  ModelKind kind = ModelKind::Lstm;
  Trait trait = Trait::ReligiousPractice;
  Emotion emotion = Emotion::Happy;
  Network network;
  SequenceScaler scaler;
  TrainConfig config;
  std::vector<EpochStat> curve;
  double training_accuracy = 0.0;
  std::optional<double> test_accuracy;
};

struct DeepGridConfig {
  TrainConfig train;
  std::vector<ModelKind> kinds{ModelKind::Lstm, ModelKind::BiLstm};
  std::vector<Trait> traits;  // empty = all 14
  unsigned threads = 0;
};

inline std::uint64_t deep_cell_seed(std::uint64_t seed, ModelKind k, Trait t, Emotion e) {
  return derive_seed(seed, {0xdee9u, static_cast<std::uint64_t>(k), index_of(t), index_of(e)});
}

/// Trains one network per (kind, trait, emotion) on the training side and
/// scores it on the test side when that side is non-empty.
inline std::vector<DeepModel> train_deep_grid(const std::vector<dataset::SessionRecord>& records,
                                              const dataset::Split& split, const DeepGridConfig& cfg) {
  const auto [train_side, test_side] = dataset::partition(records, split);
  if (train_side.empty()) throw Error(ErrorCode::TooFewSamples, "no training subjects in split");
  std::vector<Trait> traits = cfg.traits;
  if (traits.empty())
    for (std::size_t t = 0; t < kNumTraits; ++t) traits.push_back(trait_at(t));

  std::array<SequenceScaler, kNumEmotions> scalers;
  std::array<std::vector<Sequence>, kNumEmotions> train_x, test_x;
  for (auto e : kEmotions) {
    std::vector<const Segment*> segs;
    for (const auto& r : train_side) segs.push_back(&r.segment(e));
    scalers[index_of(e)] = SequenceScaler::fit(segs);
    for (const auto& r : train_side) train_x[index_of(e)].push_back(scalers[index_of(e)].apply(r.segment(e)));
    for (const auto& r : test_side) test_x[index_of(e)].push_back(scalers[index_of(e)].apply(r.segment(e)));
  }

  std::vector<DeepModel> out(cfg.kinds.size() * traits.size() * kNumEmotions);
  classical::parallel_for(out.size(), cfg.threads, [&](std::size_t cell) {
    const auto kind = cfg.kinds[cell / (traits.size() * kNumEmotions)];
    const auto t = traits[(cell / kNumEmotions) % traits.size()];
    const auto e = emotion_at(cell % kNumEmotions);
    std::vector<int> train_y, test_y;
    for (const auto& r : train_side) train_y.push_back(r.labels[t] ? 1 : 0);
    for (const auto& r : test_side) test_y.push_back(r.labels[t] ? 1 : 0);
    TrainConfig tc = cfg.train;
    tc.seed = deep_cell_seed(cfg.train.seed, kind, t, e);
    auto result = train(kind, train_x[index_of(e)], train_y, tc);
    DeepModel m{kind, t, e, std::move(result.network), scalers[index_of(e)], tc, std::move(result.curve), 0.0, {}};
    m.training_accuracy = accuracy_of(m.network, train_x[index_of(e)], train_y);
    if (!test_side.empty()) m.test_accuracy = accuracy_of(m.network, test_x[index_of(e)], test_y);
    out[cell] = std::move(m);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Files

inline void write_loss_curve(std::ostream& out, const std::vector<EpochStat>& curve) {
  out << "epoch,loss,train_accuracy\n";
  char buf[96];
  for (const auto& s : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", s.epoch, s.loss, s.train_accuracy);
    out << buf;
  }
}

inline nlohmann::ordered_json config_to_json(const TrainConfig& c) {
  return {{"optimizer", "adam"}, {"learning_rate", c.learning_rate}, {"beta1", c.beta1},
          {"beta2", c.beta2},    {"epsilon", c.epsilon},             {"epochs", c.epochs},
          {"batch_size", c.batch_size}, {"dropout", c.dropout},      {"hidden", c.hidden},
          {"seed", c.seed}};
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.learning_rate = j.at("learning_rate").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.epsilon = j.at("epsilon").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.dropout = j.at("dropout").get<double>();
  c.hidden = j.at("hidden").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

/// Tensor list in flat-vector order.
inline nlohmann::ordered_json layout_to_json(const Shape& s) {
  auto out = nlohmann::ordered_json::array();
  const char* dirs[] = {"forward", "backward"};
  for (int d = 0; d < s.directions(); ++d) {
    const std::string p = s.kind == ModelKind::Lstm ? "lstm" : dirs[d];
    out.push_back({{"name", p + ".W"}, {"rows", 4 * s.hidden}, {"cols", s.input}});
    out.push_back({{"name", p + ".U"}, {"rows", 4 * s.hidden}, {"cols", s.hidden}});
    out.push_back({{"name", p + ".b"}, {"rows", 4 * s.hidden}, {"cols", 1}});
  }
  out.push_back({{"name", "head.W"}, {"rows", kNumClasses}, {"cols", s.feature_dim()}});
  out.push_back({{"name", "head.b"}, {"rows", kNumClasses}, {"cols", 1}});
  return out;
}

inline nlohmann::ordered_json deep_bundle_to_json(const DeepModel& m) {
  nlohmann::ordered_json j;
  j["format_version"] = classical::kBundleFormatVersion;
  j["kind"] = name_of(m.kind);
  j["trait"] = name_of(m.trait);
  j["emotion"] = name_of(m.emotion);
  j["shape"] = {{"input", m.network.shape.input},
                {"hidden", m.network.shape.hidden},
                {"gate_order", "i,f,o,c"},
                {"tensors", layout_to_json(m.network.shape)}};
  j["parameters"] = m.network.params;
  j["scaler"] = {{"transform", "log1p"}, {"mean", m.scaler.mean}, {"scale", m.scaler.scale}};
  j["config"] = config_to_json(m.config);
  nlohmann::ordered_json metrics{{"training_accuracy", m.training_accuracy},
                                 {"final_loss", m.curve.empty() ? 0.0 : m.curve.back().loss}};
  metrics["test_accuracy"] = m.test_accuracy ? nlohmann::ordered_json(*m.test_accuracy) : nlohmann::ordered_json();
  j["metrics"] = metrics;
  return j;
}

inline DeepModel deep_bundle_from_json(const nlohmann::json& j) {
  try {
    DeepModel m;
    const auto kind = parse_model_kind(j.at("kind").get<std::string>());
    const auto trait = parse_trait(j.at("trait").get<std::string>());
    const auto emotion = parse_emotion(j.at("emotion").get<std::string>());
    if (!kind || !trait || !emotion) throw Error(ErrorCode::BundleError, "unknown kind, trait or emotion");
    m.kind = *kind;
    m.trait = *trait;
    m.emotion = *emotion;
    const Shape shape{*kind, j.at("shape").at("input").get<int>(), j.at("shape").at("hidden").get<int>()};
    m.network = Network(shape);
    m.network.params = j.at("parameters").get<std::vector<double>>();
    if (m.network.params.size() != shape.size()) throw Error(ErrorCode::BundleError, "parameter count does not match shape");
    for (double p : m.network.params)
      if (!std::isfinite(p)) throw Error(ErrorCode::BundleError, "non-finite parameter");
    m.scaler.mean = j.at("scaler").at("mean").get<std::array<double, kNumBands>>();
    m.scaler.scale = j.at("scaler").at("scale").get<std::array<double, kNumBands>>();
    m.config = config_from_json(j.at("config"));
    m.training_accuracy = j.at("metrics").at("training_accuracy").get<double>();
    if (!j.at("metrics").at("test_accuracy").is_null())
      m.test_accuracy = j.at("metrics").at("test_accuracy").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BundleError, e.what());
  }
}

inline std::filesystem::path deep_bundle_file_name(const DeepModel& m) {
  return std::string(name_of(m.kind)) + "_" + std::string(name_of(m.trait)) + "_" + std::string(name_of(m.emotion)) +
         ".json";
}

/// CSV `kind,trait,emotion,training_accuracy,test_accuracy`.
inline void write_deep_accuracy(std::ostream& out, const std::vector<DeepModel>& models) {
  out << "kind,trait,emotion,training_accuracy,test_accuracy\n";
  char buf[64];
  for (const auto& m : models) {
    out << name_of(m.kind) << ',' << name_of(m.trait) << ',' << name_of(m.emotion) << ',';
    std::snprintf(buf, sizeof buf, "%.6f,", m.training_accuracy);
    out << buf;
    if (m.test_accuracy) {
      std::snprintf(buf, sizeof buf, "%.6f", *m.test_accuracy);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace traitwave::deep
