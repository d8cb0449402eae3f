#pragma once

// LSTM and BiLSTM sequence classifiers with hand-written backpropagation
// through time.
//
// Parameters live in one flat vector so the optimizer and the gradient
// checker can treat them uniformly. Layout per LSTM direction (hidden H,
// input I), gate blocks stacked in the order input, forget, output, cell:
//
//   W  4H x I   row-major
//   U  4H x H   row-major
//   b  4H
//
// followed (after the backward direction, for a BiLSTM) by the dense head
//
//   V  2 x F    row-major, F = H (LSTM) or 2H (BiLSTM)
//   c  2
//
// The recurrence starts from zero hidden and cell state and the classifier
// reads only the final hidden state.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "traitwave/core.hpp"
#include "traitwave/random.hpp"

namespace traitwave::deep {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Vec>;
using ConstVecMap = Eigen::Map<const Vec>;

/// T x I, one row per time step.
using Sequence = Mat;

inline constexpr int kNumClasses = 2;
inline constexpr int kDefaultHidden = 50;

enum class ModelKind { Lstm, BiLstm };

inline std::string_view name_of(ModelKind k) { return k == ModelKind::Lstm ? "lstm" : "bilstm"; }

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  if (s == "lstm") return ModelKind::Lstm;
  if (s == "bilstm") return ModelKind::BiLstm;
  return std::nullopt;
}

struct Shape {
  ModelKind kind = ModelKind::Lstm;
  int input = static_cast<int>(kNumBands);
  int hidden = kDefaultHidden;

  int directions() const { return kind == ModelKind::Lstm ? 1 : 2; }
  int feature_dim() const { return hidden * directions(); }
  std::size_t lstm_size() const {
    return static_cast<std::size_t>(4 * hidden) * static_cast<std::size_t>(input + hidden + 1);
  }
  std::size_t head_offset() const { return lstm_size() * static_cast<std::size_t>(directions()); }
  std::size_t size() const {
    return head_offset() + static_cast<std::size_t>(kNumClasses * feature_dim() + kNumClasses);
  }

  bool operator==(const Shape&) const = default;
};

inline double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// Views of one LSTM direction inside a flat parameter (or gradient) vector.
struct ConstLstmView {
  ConstMatMap W, U;
  ConstVecMap b;
};

inline ConstLstmView lstm_view(std::span<const double> p, const Shape& s, int direction) {
  const double* base = p.data() + s.lstm_size() * static_cast<std::size_t>(direction);
  const int g = 4 * s.hidden;
  return {ConstMatMap(base, g, s.input), ConstMatMap(base + g * s.input, g, s.hidden),
          ConstVecMap(base + g * (s.input + s.hidden), g)};
}

struct MutLstmView {
  MatMap W, U;
  VecMap b;
};

inline MutLstmView lstm_view(std::span<double> p, const Shape& s, int direction) {
  double* base = p.data() + s.lstm_size() * static_cast<std::size_t>(direction);
  const int g = 4 * s.hidden;
  return {MatMap(base, g, s.input), MatMap(base + g * s.input, g, s.hidden), VecMap(base + g * (s.input + s.hidden), g)};
}

/// Activations cached by a forward pass, one column per time step.
struct LstmTrace {
  Mat gate_i, gate_f, gate_o, cand, cell, hidden;  // H x T

  Vec last_hidden() const { return hidden.col(hidden.cols() - 1); }
};

inline void check_finite(const Sequence& seq) {
  if (seq.rows() < 1) throw Error(ErrorCode::EmptySegment, "sequence needs at least one time step");
  if (!seq.allFinite()) throw Error(ErrorCode::NonFiniteInput, "sequence has a non-finite value");
}

/// Runs one LSTM direction over `seq` (reversed when `reverse`).
inline LstmTrace lstm_forward(const ConstLstmView& p, const Sequence& seq, bool reverse = false) {
  check_finite(seq);
  const auto T = seq.rows();
  const auto H = p.U.cols();
  LstmTrace tr;
  tr.gate_i.resize(H, T);
  tr.gate_f.resize(H, T);
  tr.gate_o.resize(H, T);
  tr.cand.resize(H, T);
  tr.cell.resize(H, T);
  tr.hidden.resize(H, T);
  Vec h = Vec::Zero(H), c = Vec::Zero(H);
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto row = reverse ? T - 1 - t : t;
    const Vec z = p.W * seq.row(row).transpose() + p.U * h + p.b;
    for (Eigen::Index k = 0; k < H; ++k) {
      const double i = sigmoid(z(k)), f = sigmoid(z(H + k)), o = sigmoid(z(2 * H + k)), g = std::tanh(z(3 * H + k));
      c(k) = f * c(k) + i * g;
      h(k) = o * std::tanh(c(k));
      tr.gate_i(k, t) = i;
      tr.gate_f(k, t) = f;
      tr.gate_o(k, t) = o;
      tr.cand(k, t) = g;
    }
    tr.cell.col(t) = c;
    tr.hidden.col(t) = h;
  }
  return tr;
}

/// Accumulates parameter gradients of one direction given dL/dh at the final
/// step.
inline void lstm_backward(const ConstLstmView& p, MutLstmView& grad, const Sequence& seq, const LstmTrace& tr,
                          const Vec& d_last_hidden, bool reverse = false) {
  const auto T = seq.rows();
  const auto H = p.U.cols();
  Vec dh = d_last_hidden;
  Vec dc_next = Vec::Zero(H);
  Vec dz(4 * H);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const auto row = reverse ? T - 1 - t : t;
    for (Eigen::Index k = 0; k < H; ++k) {
      const double i = tr.gate_i(k, t), f = tr.gate_f(k, t), o = tr.gate_o(k, t), g = tr.cand(k, t);
      const double c = tr.cell(k, t);
      const double c_prev = t > 0 ? tr.cell(k, t - 1) : 0.0;
      const double tc = std::tanh(c);
      const double d_o = dh(k) * tc;
      const double dc = dc_next(k) + dh(k) * o * (1.0 - tc * tc);
      dz(k) = dc * g * i * (1.0 - i);
      dz(H + k) = dc * c_prev * f * (1.0 - f);
      dz(2 * H + k) = d_o * o * (1.0 - o);
      dz(3 * H + k) = dc * i * (1.0 - g * g);
      dc_next(k) = dc * f;
    }
    grad.W.noalias() += dz * seq.row(row);
    if (t > 0) grad.U.noalias() += dz * tr.hidden.col(t - 1).transpose();
    grad.b += dz;
    dh.noalias() = p.U.transpose() * dz;
  }
}

struct SoftmaxResult {
  double loss = 0.0;
  std::array<double, kNumClasses> prob{};
};

/// Max-subtracted softmax and cross-entropy against `label`. The log-sum is
/// taken as log1p over the non-maximal terms so small losses keep their
/// relative precision.
inline SoftmaxResult softmax_cross_entropy(std::span<const double> logits, int label) {
  std::size_t top = 0;
  for (std::size_t k = 1; k < logits.size(); ++k)
    if (logits[k] > logits[top]) top = k;
  const double m = logits[top];
  double rest = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k)
    if (k != top) rest += std::exp(logits[k] - m);
  SoftmaxResult r;
  for (std::size_t k = 0; k < kNumClasses; ++k) r.prob[k] = std::exp(logits[k] - m) / (1.0 + rest);
  r.loss = (m - logits[static_cast<std::size_t>(label)]) + std::log1p(rest);
  return r;
}

/// Dense head on a feature vector `x`. `head` holds V (2 x F, row-major)
/// then c (2).
inline std::array<double, kNumClasses> head_logits(std::span<const double> head, const Vec& x) {
  const auto F = x.size();
  const Vec z = ConstMatMap(head.data(), kNumClasses, F) * x + ConstVecMap(head.data() + kNumClasses * F, kNumClasses);
  return {z(0), z(1)};
}

/// Loss of the head alone; adds dL/dhead into `grad` and returns dL/dx.
inline Vec head_backward(std::span<const double> head, const Vec& x, int label, std::span<double> grad,
                         double* loss = nullptr) {
  const auto F = x.size();
  const auto sm = softmax_cross_entropy(head_logits(head, x), label);
  if (loss) *loss = sm.loss;
  Vec dlogits(kNumClasses);
  for (int k = 0; k < kNumClasses; ++k) dlogits(k) = sm.prob[static_cast<std::size_t>(k)] - (k == label ? 1.0 : 0.0);
  MatMap(grad.data(), kNumClasses, F).noalias() += dlogits * x.transpose();
  VecMap(grad.data() + kNumClasses * F, kNumClasses) += dlogits;
  return ConstMatMap(head.data(), kNumClasses, F).transpose() * dlogits;
}

/// Network with its flat parameters.
struct Network {
  Shape shape;
  std::vector<double> params;

  explicit Network(Shape s = {}) : shape(s), params(s.size(), 0.0) {}

  /// Weights uniform(-0.08, 0.08); biases 0 except the forget gate at +1.
  static Network initialized(Shape s, std::uint64_t seed) {
    Network net(s);
    Rng rng(seed);
    for (auto& p : net.params) p = rng.uniform(-0.08, 0.08);
    for (int d = 0; d < s.directions(); ++d) {
      auto v = lstm_view(std::span<double>(net.params), s, d);
      v.b.setZero();
      v.b.segment(s.hidden, s.hidden).setConstant(1.0);
    }
    net.head_bias().setZero();
    return net;
  }

  std::span<const double> head() const { return std::span<const double>(params).subspan(shape.head_offset()); }
  VecMap head_bias() {
    return VecMap(params.data() + shape.head_offset() + kNumClasses * shape.feature_dim(), kNumClasses);
  }

  struct Pass {
    std::vector<LstmTrace> traces;  // per direction
    Vec features;                   // concatenated final hidden states
    Vec dropped;                    // features after the dropout mask
    std::array<double, kNumClasses> logits{};
  };

  /// `mask` (length F, entries 0 or 1/(1-p)) is applied to the recurrent
  /// output when non-empty.
  Pass forward(const Sequence& seq, std::span<const double> mask = {}) const {
    if (seq.cols() != shape.input) throw Error(ErrorCode::SchemaError, "sequence width does not match the network input");
    Pass pass;
    const std::span<const double> p(params);
    pass.features.resize(shape.feature_dim());
    for (int d = 0; d < shape.directions(); ++d) {
      pass.traces.push_back(lstm_forward(lstm_view(p, shape, d), seq, d == 1));
      pass.features.segment(d * shape.hidden, shape.hidden) = pass.traces.back().last_hidden();
    }
    pass.dropped = pass.features;
    if (!mask.empty()) pass.dropped.array() *= ConstVecMap(mask.data(), shape.feature_dim()).array();
    pass.logits = head_logits(head(), pass.dropped);
    return pass;
  }

  /// Class-1 probability without dropout.
  double probability(const Sequence& seq) const {
    const auto pass = forward(seq);
    return softmax_cross_entropy(pass.logits, 0).prob[1];
  }

  /// Loss for one sample; adds its gradient into `grad` (same layout).
  double loss_and_gradient(const Sequence& seq, int label, std::span<double> grad,
                           std::span<const double> mask = {}) const {
    const auto pass = forward(seq, mask);
    double loss = 0.0;
    Vec dfeat = head_backward(head(), pass.dropped, label, grad.subspan(shape.head_offset()), &loss);
    if (!mask.empty()) dfeat.array() *= ConstVecMap(mask.data(), shape.feature_dim()).array();

    const std::span<const double> p(params);
    for (int d = 0; d < shape.directions(); ++d) {
      auto gv = lstm_view(grad, shape, d);
      lstm_backward(lstm_view(p, shape, d), gv, seq, pass.traces[static_cast<std::size_t>(d)],
                    dfeat.segment(d * shape.hidden, shape.hidden), d == 1);
    }
    return loss;
  }

  double loss(const Sequence& seq, int label) const {
    return softmax_cross_entropy(forward(seq).logits, label).loss;
  }
};

}  // namespace traitwave::deep
