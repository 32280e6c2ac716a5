#pragma once

#include <vector>

#include "csc/corpus.h"
#include "csc/lexicon.h"
#include "csc/model.h"

namespace csc {

struct RclConfig {
  double tau = 0.1;        // temperature; smaller sharpens the objective
  double alpha = 0.0005;   // weight of the reverse contrastive term
  bool use_pinyin = true;
  bool use_confusion = true;
  // Two occurrences of the same character trivially share pinyin; pushing
  // them apart is counterproductive, so they are excluded by default.
  bool exclude_identical = true;

  void validate() const;  // throws DataError
};

// In-batch negative sets per anchor: s[i] holds same-pinyin anchor indices,
// w[i] confusion-set anchor indices. Members are ascending and never include
// i itself; the two sets may overlap.
struct NegativeSets {
  std::vector<std::vector<int>> s;
  std::vector<std::vector<int>> w;
};

struct LossBreakdown {
  double l_correct = 0.0;
  std::vector<double> l_p;  // per-anchor pinyin term
  std::vector<double> l_c;  // per-anchor confusion term
  double l_rcl = 0.0;       // sum of l_p and l_c
  double total = 0.0;       // l_correct - alpha * l_rcl
};

// Mines S_i = {s != i : same pinyin} and W_i = {w != i : char(w) in
// confusion(char(i))} over the batch anchors. PAD/UNK anchors get empty
// sets; a disabled channel yields empty sets for every anchor.
NegativeSets mine_pairs(const Batch& batch, const Lexicon& lex, const RclConfig& cfg);

// L_{P_i}: mean over s in S_i of -log( exp(sim(h_i,h_s)/tau) /
// sum_{k != i} exp(sim(h_i,h_k)/tau) ), sim = cosine. Empty set yields 0.
// Zero-norm rows raise NumericError (cosine undefined).
double rcl_pinyin_loss(const HiddenStates& h, const std::vector<int>& s_i, int i, double tau);
// Identical form over the confusion set W_i.
double rcl_confusion_loss(const HiddenStates& h, const std::vector<int>& w_i, int i, double tau);

// Composes the full objective: total = l_correct - alpha * sum_i(L_P + L_C).
LossBreakdown total_loss(double l_correct, const HiddenStates& h, const NegativeSets& sets,
                         const RclConfig& cfg);

// Gradient of (-alpha * L_RCL) with respect to h; all-zero when no anchor
// has a negative set.
Matrix rcl_gradients(const HiddenStates& h, const NegativeSets& sets, const RclConfig& cfg);

}  // namespace csc
