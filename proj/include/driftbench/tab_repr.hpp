#pragma once

// Simplified attentive tabular learner: per-step softmax feature attention,
// elementwise gating, a dense tanh block per step with summed outputs, plus a
// linear reconstruction decoder (pretraining) and a linear softmax head
// (classification). Supports copying a pretrained encoder into a classifier.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "driftbench/batch.hpp"
#include "driftbench/metrics.hpp"
#include "driftbench/rng.hpp"

namespace driftbench {

// Column standardizer fitted on whatever data a model first learns from. It
// travels with the encoder on transfer, so a classifier initialized from a
// pretrained learner sees inputs through the pretraining data's statistics.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> sdev;

  void fit(const FeatureMatrix& x) {
    mean.assign(x.cols, 0.0);
    sdev.assign(x.cols, 0.0);
    if (x.rows == 0) throw std::invalid_argument("FeatureScaler: empty input");
    for (std::size_t r = 0; r < x.rows; ++r)
      for (std::size_t c = 0; c < x.cols; ++c) mean[c] += x.at(r, c);
    for (auto& m : mean) m /= static_cast<double>(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r)
      for (std::size_t c = 0; c < x.cols; ++c) {
        const double d = x.at(r, c) - mean[c];
        sdev[c] += d * d;
      }
    for (auto& s : sdev) {
      s = std::sqrt(s / static_cast<double>(x.rows));
      if (s < 1e-12) s = 1.0;  // constant column maps to zero
    }
  }

  double scaled(const FeatureMatrix& x, std::size_t r, std::size_t c) const {
    return (x.at(r, c) - mean[c]) / sdev[c];
  }
};

struct TrainTrace {
  std::vector<double> losses;  // one entry per epoch
  std::vector<double> f1s;     // supervised phases only, else empty
};

struct AttentiveTabularLearner {
  int feature_count = 0;
  int hidden_width = 64;
  int step_count = 2;
  int class_count = 0;  // 0 until a head exists

  // encoder: per-step attention logits and dense transform
  std::vector<std::vector<double>> attn_logits;  // [step][feature]
  std::vector<std::vector<double>> step_w;       // [step][hidden*feature]
  std::vector<std::vector<double>> step_b;       // [step][hidden]
  // decoder (reconstruction pretraining)
  std::vector<double> decoder_w;  // [feature*hidden]
  std::vector<double> decoder_b;  // [feature]
  // classification head
  std::vector<double> head_w;  // [class*hidden]
  std::vector<double> head_b;  // [class]

  FeatureScaler scaler;
  std::uint64_t rng_seed = 0;

  std::size_t parameter_count() const {
    const std::size_t f = feature_count, h = hidden_width, s = step_count;
    std::size_t n = s * f + s * (h * f + h);  // logits + dense blocks
    n += f * h + f;                           // decoder
    if (class_count > 0) n += std::size_t(class_count) * h + class_count;
    return n;
  }

  // softmax over one step's attention logits
  std::vector<double> attention(int step) const {
    const auto& logits = attn_logits[step];
    double hi = logits[0];
    for (double v : logits) hi = std::max(hi, v);
    std::vector<double> a(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      a[i] = std::exp(logits[i] - hi);
      sum += a[i];
    }
    for (auto& v : a) v /= sum;
    return a;
  }
};

namespace detail {

inline void xavier_fill(std::vector<double>& w, int fan_in, int fan_out,
                        std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> draw(-limit, limit);
  for (auto& v : w) v = draw(rng);
}

inline AttentiveTabularLearner make_tab_learner(int feature_count, int hidden_width,
                                                int step_count, std::uint64_t rng_seed) {
  if (feature_count <= 0 || hidden_width <= 0 || step_count <= 0) {
    throw std::invalid_argument("tab learner: sizes must be positive");
  }
  AttentiveTabularLearner m;
  m.feature_count = feature_count;
  m.hidden_width = hidden_width;
  m.step_count = step_count;
  m.rng_seed = rng_seed;
  m.attn_logits.assign(step_count, std::vector<double>(feature_count, 0.0));
  m.step_w.assign(step_count, std::vector<double>(std::size_t(hidden_width) * feature_count));
  m.step_b.assign(step_count, std::vector<double>(hidden_width, 0.0));
  auto enc_rng = make_rng(rng_seed, 0x7ab0);
  for (auto& w : m.step_w) xavier_fill(w, feature_count, hidden_width, enc_rng);
  m.decoder_w.assign(std::size_t(feature_count) * hidden_width, 0.0);
  m.decoder_b.assign(feature_count, 0.0);
  auto dec_rng = make_rng(rng_seed, 0x7ab1);
  xavier_fill(m.decoder_w, hidden_width, feature_count, dec_rng);
  return m;
}

// The head starts at zero, linear-probe style: the first update moves the
// logits along the class-mean directions of the current representation, so
// early-epoch scores reflect the encoder instead of a random head draw.
inline void attach_head(AttentiveTabularLearner& m, int class_count) {
  if (class_count <= 0) throw std::invalid_argument("tab learner: class_count must be positive");
  m.class_count = class_count;
  m.head_w.assign(std::size_t(class_count) * m.hidden_width, 0.0);
  m.head_b.assign(class_count, 0.0);
}

// Per-row encoder state kept around for the backward pass.
struct EncoderState {
  std::vector<double> scaled;                // gated input source x~
  std::vector<std::vector<double>> gated;    // [step][feature] alpha .* x~
  std::vector<std::vector<double>> hidden;   // [step][hidden] tanh outputs
  std::vector<double> z;                     // summed hidden
};

inline void encode_row(const AttentiveTabularLearner& m,
                       const std::vector<std::vector<double>>& attn,
                       std::vector<double> scaled, EncoderState& st) {
  const int F = m.feature_count, H = m.hidden_width, S = m.step_count;
  st.scaled = std::move(scaled);
  st.gated.assign(S, std::vector<double>(F));
  st.hidden.assign(S, std::vector<double>(H));
  st.z.assign(H, 0.0);
  for (int s = 0; s < S; ++s) {
    for (int f = 0; f < F; ++f) st.gated[s][f] = attn[s][f] * st.scaled[f];
    const auto& w = m.step_w[s];
    for (int h = 0; h < H; ++h) {
      double pre = m.step_b[s][h];
      for (int f = 0; f < F; ++f) pre += w[std::size_t(h) * F + f] * st.gated[s][f];
      const double t = std::tanh(pre);
      st.hidden[s][h] = t;
      st.z[h] += t;
    }
  }
}

}  // namespace detail

// Gradient buffers shaped like the learner's parameter groups.
struct TabGradients {
  double loss = 0.0;
  std::vector<std::vector<double>> attn_logits;
  std::vector<std::vector<double>> step_w;
  std::vector<std::vector<double>> step_b;
  std::vector<double> decoder_w, decoder_b;
  std::vector<double> head_w, head_b;

  explicit TabGradients(const AttentiveTabularLearner& m) {
    attn_logits.assign(m.step_count, std::vector<double>(m.feature_count, 0.0));
    step_w.assign(m.step_count,
                  std::vector<double>(std::size_t(m.hidden_width) * m.feature_count, 0.0));
    step_b.assign(m.step_count, std::vector<double>(m.hidden_width, 0.0));
    decoder_w.assign(m.decoder_w.size(), 0.0);
    decoder_b.assign(m.decoder_b.size(), 0.0);
    head_w.assign(m.head_w.size(), 0.0);
    head_b.assign(m.head_b.size(), 0.0);
  }
};

namespace detail {

// Backpropagates d(loss)/dz for one row into the shared gradient buffers.
// Attention-softmax gradients are accumulated as d(loss)/d(alpha) here and
// folded through the softmax Jacobian once per batch (alpha is row-independent).
inline void backward_encoder_row(const AttentiveTabularLearner& m,
                                 const std::vector<std::vector<double>>& attn,
                                 const EncoderState& st, const std::vector<double>& dz,
                                 TabGradients& g,
                                 std::vector<std::vector<double>>& dalpha) {
  const int F = m.feature_count, H = m.hidden_width, S = m.step_count;
  std::vector<double> dpre(H);
  for (int s = 0; s < S; ++s) {
    for (int h = 0; h < H; ++h) {
      const double t = st.hidden[s][h];
      dpre[h] = dz[h] * (1.0 - t * t);
    }
    const auto& w = m.step_w[s];
    auto& gw = g.step_w[s];
    auto& gb = g.step_b[s];
    for (int h = 0; h < H; ++h) {
      const double d = dpre[h];
      gb[h] += d;
      const std::size_t row = std::size_t(h) * F;
      for (int f = 0; f < F; ++f) gw[row + f] += d * st.gated[s][f];
    }
    for (int f = 0; f < F; ++f) {
      double du = 0.0;
      for (int h = 0; h < H; ++h) du += w[std::size_t(h) * F + f] * dpre[h];
      dalpha[s][f] += du * st.scaled[f];
    }
  }
}

inline void fold_attention_jacobian(const AttentiveTabularLearner& m,
                                    const std::vector<std::vector<double>>& attn,
                                    const std::vector<std::vector<double>>& dalpha,
                                    TabGradients& g) {
  for (int s = 0; s < m.step_count; ++s) {
    double dot = 0.0;
    for (int f = 0; f < m.feature_count; ++f) dot += attn[s][f] * dalpha[s][f];
    for (int f = 0; f < m.feature_count; ++f) {
      g.attn_logits[s][f] += attn[s][f] * (dalpha[s][f] - dot);
    }
  }
}

}  // namespace detail

// Masked-reconstruction loss and analytic gradients on an explicit row set.
// mask[r][c] nonzero means feature c of row r is hidden from the encoder and
// scored by the decoder. Loss is the mean squared error over masked entries.
inline TabGradients reconstruction_gradients(const AttentiveTabularLearner& m,
                                             const FeatureMatrix& x,
                                             const std::vector<std::size_t>& rows,
                                             const std::vector<std::vector<char>>& mask) {
  const int F = m.feature_count, H = m.hidden_width;
  if (x.cols != std::size_t(F)) throw std::invalid_argument("reconstruction: feature mismatch");
  TabGradients g(m);
  std::vector<std::vector<double>> attn(m.step_count);
  for (int s = 0; s < m.step_count; ++s) attn[s] = m.attention(s);
  std::vector<std::vector<double>> dalpha(m.step_count,
                                          std::vector<double>(F, 0.0));

  double masked_total = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k)
    for (int f = 0; f < F; ++f) masked_total += mask[k][f] ? 1.0 : 0.0;
  if (masked_total == 0.0) return g;  // nothing to reconstruct, zero loss

  detail::EncoderState st;
  std::vector<double> target(F), recon(F), dz(H);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t r = rows[k];
    std::vector<double> scaled(F);
    for (int f = 0; f < F; ++f) {
      target[f] = m.scaler.scaled(x, r, f);
      scaled[f] = mask[k][f] ? 0.0 : target[f];
    }
    detail::encode_row(m, attn, std::move(scaled), st);
    for (int f = 0; f < F; ++f) {
      double v = m.decoder_b[f];
      const std::size_t row = std::size_t(f) * H;
      for (int h = 0; h < H; ++h) v += m.decoder_w[row + h] * st.z[h];
      recon[f] = v;
    }
    std::fill(dz.begin(), dz.end(), 0.0);
    for (int f = 0; f < F; ++f) {
      if (!mask[k][f]) continue;
      const double err = recon[f] - target[f];
      g.loss += err * err;
      const double d = 2.0 * err / masked_total;
      g.decoder_b[f] += d;
      const std::size_t row = std::size_t(f) * H;
      for (int h = 0; h < H; ++h) {
        g.decoder_w[row + h] += d * st.z[h];
        dz[h] += d * m.decoder_w[row + h];
      }
    }
    detail::backward_encoder_row(m, attn, st, dz, g, dalpha);
  }
  g.loss /= masked_total;
  detail::fold_attention_jacobian(m, attn, dalpha, g);
  return g;
}

// Cross-entropy loss and analytic gradients over an explicit row set; loss is
// the mean over rows.
inline TabGradients classification_gradients(const AttentiveTabularLearner& m,
                                             const LabeledBatch& batch,
                                             const std::vector<std::size_t>& rows) {
  const int F = m.feature_count, H = m.hidden_width, C = m.class_count;
  if (C <= 0) throw std::invalid_argument("classification: learner has no head");
  if (!batch.has_labels()) throw std::invalid_argument("classification: batch unlabeled");
  if (batch.features.cols != std::size_t(F)) {
    throw std::invalid_argument("classification: feature mismatch");
  }
  TabGradients g(m);
  std::vector<std::vector<double>> attn(m.step_count);
  for (int s = 0; s < m.step_count; ++s) attn[s] = m.attention(s);
  std::vector<std::vector<double>> dalpha(m.step_count,
                                          std::vector<double>(F, 0.0));

  const double inv_n = 1.0 / static_cast<double>(rows.size());
  detail::EncoderState st;
  std::vector<double> logits(C), prob(C), dz(H);
  for (const std::size_t r : rows) {
    std::vector<double> scaled(F);
    for (int f = 0; f < F; ++f) scaled[f] = m.scaler.scaled(batch.features, r, f);
    detail::encode_row(m, attn, std::move(scaled), st);
    for (int c = 0; c < C; ++c) {
      double v = m.head_b[c];
      const std::size_t row = std::size_t(c) * H;
      for (int h = 0; h < H; ++h) v += m.head_w[row + h] * st.z[h];
      logits[c] = v;
    }
    double hi = logits[0];
    for (double v : logits) hi = std::max(hi, v);
    double sum = 0.0;
    for (int c = 0; c < C; ++c) {
      prob[c] = std::exp(logits[c] - hi);
      sum += prob[c];
    }
    for (auto& p : prob) p /= sum;
    const int y = (*batch.labels)[r];
    if (y < 0 || y >= C) throw std::invalid_argument("classification: label out of range");
    g.loss += -std::log(std::max(prob[y], 1e-300)) * inv_n;

    std::fill(dz.begin(), dz.end(), 0.0);
    for (int c = 0; c < C; ++c) {
      const double d = (prob[c] - (c == y ? 1.0 : 0.0)) * inv_n;
      g.head_b[c] += d;
      const std::size_t row = std::size_t(c) * H;
      for (int h = 0; h < H; ++h) {
        g.head_w[row + h] += d * st.z[h];
        dz[h] += d * m.head_w[row + h];
      }
    }
    detail::backward_encoder_row(m, attn, st, dz, g, dalpha);
  }
  detail::fold_attention_jacobian(m, attn, dalpha, g);
  return g;
}

inline std::vector<int> tab_predict_classes(const AttentiveTabularLearner& m,
                                            const FeatureMatrix& x) {
  if (m.class_count <= 0) throw std::invalid_argument("tab_predict: learner has no head");
  if (x.cols != std::size_t(m.feature_count)) {
    throw std::invalid_argument("tab_predict: feature mismatch");
  }
  std::vector<std::vector<double>> attn(m.step_count);
  for (int s = 0; s < m.step_count; ++s) attn[s] = m.attention(s);
  std::vector<int> out(x.rows);
  detail::EncoderState st;
  const int F = m.feature_count, H = m.hidden_width, C = m.class_count;
  for (std::size_t r = 0; r < x.rows; ++r) {
    std::vector<double> scaled(F);
    for (int f = 0; f < F; ++f) scaled[f] = m.scaler.scaled(x, r, f);
    detail::encode_row(m, attn, std::move(scaled), st);
    int best = 0;
    double best_v = -1e300;
    for (int c = 0; c < C; ++c) {
      double v = m.head_b[c];
      const std::size_t row = std::size_t(c) * H;
      for (int h = 0; h < H; ++h) v += m.head_w[row + h] * st.z[h];
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    out[r] = best;
  }
  return out;
}

namespace detail {

inline void apply_sgd(std::vector<double>& w, const std::vector<double>& g, double lr) {
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
}

inline void apply_update(AttentiveTabularLearner& m, const TabGradients& g, double lr) {
  for (int s = 0; s < m.step_count; ++s) {
    apply_sgd(m.attn_logits[s], g.attn_logits[s], lr);
    apply_sgd(m.step_w[s], g.step_w[s], lr);
    apply_sgd(m.step_b[s], g.step_b[s], lr);
  }
  apply_sgd(m.decoder_w, g.decoder_w, lr);
  apply_sgd(m.decoder_b, g.decoder_b, lr);
  apply_sgd(m.head_w, g.head_w, lr);
  apply_sgd(m.head_b, g.head_b, lr);
}

inline std::vector<std::vector<std::size_t>> minibatch_plan(std::size_t rows,
                                                            std::mt19937_64& shuffle_rng) {
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), shuffle_rng);
  const std::size_t batch = std::min<std::size_t>(256, rows);
  std::vector<std::vector<std::size_t>> plan;
  for (std::size_t at = 0; at < rows; at += batch) {
    const std::size_t end = std::min(rows, at + batch);
    plan.emplace_back(order.begin() + at, order.begin() + end);
  }
  return plan;
}

}  // namespace detail

// Unsupervised masked-reconstruction pretraining. Labels on d1, if any, are
// ignored. Per epoch the trace records the mean of minibatch losses.
inline std::pair<AttentiveTabularLearner, TrainTrace> pretrain_masked(
    const LabeledBatch& d1, double mask_ratio, int epochs, std::uint64_t rng_seed,
    int hidden_width = 64, int step_count = 2, double learning_rate = 0.02) {
  if (d1.rows() == 0) throw std::invalid_argument("pretrain_masked: empty batch");
  if (!(mask_ratio > 0.0) || !(mask_ratio < 1.0)) {
    throw std::invalid_argument("pretrain_masked: mask_ratio must lie strictly inside (0,1)");
  }
  if (epochs <= 0) throw std::invalid_argument("pretrain_masked: epochs must be positive");

  auto m = detail::make_tab_learner(int(d1.cols()), hidden_width, step_count, rng_seed);
  m.scaler.fit(d1.features);
  auto shuffle_rng = make_rng(rng_seed, 0x7ab3);
  auto mask_rng = make_rng(rng_seed, 0x7ab4);
  std::bernoulli_distribution hide(mask_ratio);

  TrainTrace trace;
  for (int e = 0; e < epochs; ++e) {
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (const auto& rows : detail::minibatch_plan(d1.rows(), shuffle_rng)) {
      std::vector<std::vector<char>> mask(rows.size(),
                                          std::vector<char>(m.feature_count, 0));
      for (auto& row_mask : mask)
        for (auto& bit : row_mask) bit = hide(mask_rng) ? 1 : 0;
      auto g = reconstruction_gradients(m, d1.features, rows, mask);
      detail::apply_update(m, g, learning_rate);
      epoch_loss += g.loss;
      ++batches;
    }
    trace.losses.push_back(epoch_loss / static_cast<double>(batches));
  }
  return {std::move(m), std::move(trace)};
}

// Supervised classifier training with an optional transferred encoder. The
// head always starts fresh (at zero) and the shuffle order comes from the same
// seeded sub-stream in both modes, so a fresh and a transferred run differ
// only in the encoder weights and scaler they start from.
inline std::pair<AttentiveTabularLearner, TrainTrace> train_classifier(
    const AttentiveTabularLearner* pretrained, const LabeledBatch& train, int epochs,
    std::uint64_t rng_seed, int hidden_width = 64, int step_count = 2,
    double learning_rate = 0.02) {
  if (!train.has_labels()) throw std::invalid_argument("train_classifier: labels required");
  if (train.rows() == 0) throw std::invalid_argument("train_classifier: empty batch");
  if (epochs <= 0) throw std::invalid_argument("train_classifier: epochs must be positive");
  const int class_count = class_count_of(train);

  AttentiveTabularLearner m;
  if (pretrained != nullptr) {
    if (pretrained->feature_count != int(train.cols())) {
      throw std::invalid_argument("train_classifier: transferred encoder shape mismatch");
    }
    m = *pretrained;  // encoder weights and scaler carry over
  } else {
    m = detail::make_tab_learner(int(train.cols()), hidden_width, step_count, rng_seed);
    m.scaler.fit(train.features);
  }
  detail::attach_head(m, class_count);

  auto shuffle_rng = make_rng(rng_seed, 0x7ab3);
  TrainTrace trace;
  for (int e = 0; e < epochs; ++e) {
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (const auto& rows : detail::minibatch_plan(train.rows(), shuffle_rng)) {
      auto g = classification_gradients(m, train, rows);
      detail::apply_update(m, g, learning_rate);
      epoch_loss += g.loss;
      ++batches;
    }
    trace.losses.push_back(epoch_loss / static_cast<double>(batches));
    trace.f1s.push_back(macro_f1(*train.labels, tab_predict_classes(m, train.features),
                                 class_count));
  }
  return {std::move(m), std::move(trace)};
}

}  // namespace driftbench
