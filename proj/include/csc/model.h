#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "csc/corpus.h"
#include "csc/matrix.h"

namespace csc {

// Per-character hidden representation, one row per batch anchor (K x d).
using HiddenStates = Matrix;
// Correction scores, one row per anchor (K x vocab_size).
using Logits = Matrix;

struct BackboneConfig {
  int vocab_size = 0;
  int d = 32;
  int layers = 2;
  int heads = 1;
  // Which layer output feeds the contrastive objective: 0 = embeddings plus
  // position signal, layers = final output. -1 means final.
  int representation_tap = -1;
  std::uint64_t seed = 0;

  int ffn_hidden() const { return 4 * d; }
  int tap() const { return representation_tap < 0 ? layers : representation_tap; }
  void validate() const;  // throws DataError
};

struct LayerParams {
  Matrix wq, wk, wv, wo;      // d x d
  Matrix bq, bk, bv, bo;      // 1 x d
  Matrix ln_gamma, ln_beta;   // 1 x d
  Matrix w1, b1;              // d x f, 1 x f
  Matrix w2, b2;              // f x d, 1 x d
};

struct Parameters {
  Matrix embedding;           // vocab x d
  std::vector<LayerParams> layers;
  Matrix w_out;               // d x vocab
  Matrix b_out;               // 1 x vocab

  // Visits every tensor in a fixed order under a stable name.
  void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const;

  static Parameters zeros(const BackboneConfig& cfg);
  // Weights and embeddings uniform in (-1/sqrt(d), 1/sqrt(d)), seeded;
  // biases zero, layer norm gain one.
  static Parameters init(const BackboneConfig& cfg);
};

// Per-layer forward caches for one sentence, kept for backprop.
struct LayerTrace {
  Matrix x_in;                 // N x d
  Matrix q, k, v;              // N x d
  std::vector<Matrix> attn;    // per head: N x N softmax rows
  Matrix concat;               // N x d, heads concatenated
  Matrix r1;                   // N x d, residual before layer norm
  Matrix xhat;                 // N x d, normalized rows pre-affine
  std::vector<double> inv_std; // N
  Matrix x_mid;                // N x d, layer norm output
  Matrix ffn_pre;              // N x f
  Matrix ffn_act;              // N x f
};

struct SentenceTrace {
  Matrix x0;                   // embeddings + position signal
  std::vector<LayerTrace> layers;
};

struct ForwardTrace {
  std::vector<SentenceTrace> sentences;
  std::vector<int> row_offset;  // anchor row of each sentence start
  Matrix final_states;          // K x d, layer L output
  Matrix tap_states;            // K x d, representation feeding the RCL loss
};

// Reference backbone: embedding lookup + sinusoidal position signal, then
// `layers` blocks of multi-head scaled dot-product self-attention (residual,
// layer norm) and a two-layer GELU feed-forward (residual). Attention never
// crosses sentence boundaries.
class Model {
 public:
  explicit Model(const BackboneConfig& cfg);
  Model(const BackboneConfig& cfg, Parameters params);

  const BackboneConfig& config() const { return cfg_; }
  Parameters& params() { return params_; }
  const Parameters& params() const { return params_; }

  // Final-layer hidden states, one row per anchor.
  HiddenStates encode(const Batch& batch) const;
  ForwardTrace encode_traced(const Batch& batch) const;

  // logits = h . w_out + b_out
  Logits correct_logits(const HiddenStates& h) const;

  // Accumulates gradients for every parameter given the loss gradient at the
  // logits and an extra gradient injected at the tap representation.
  Parameters backward(const Batch& batch, const ForwardTrace& trace, const Matrix& dlogits,
                      const Matrix& dh_tap) const;

  // Per-position argmax correction; output lengths equal input lengths.
  std::vector<std::vector<CharId>> predict(const std::vector<std::vector<CharId>>& sources) const;

 private:
  BackboneConfig cfg_;
  Parameters params_;
};

// Mean over anchors of -log softmax(logits_i)[target_i].
double correction_loss(const Logits& logits, const Batch& batch);
// d correction_loss / d logits = (softmax - onehot) / K
Matrix correction_loss_grad(const Logits& logits, const Batch& batch);

// Row-wise layer normalization; writes the pre-affine normalized row to
// xhat and returns 1/sqrt(var + eps). Exposed for direct testing.
double layer_norm_row(std::span<const double> x, std::span<const double> gamma,
                      std::span<const double> beta, std::span<double> y, std::span<double> xhat);

}  // namespace csc
