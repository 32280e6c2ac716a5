#include "csc/rcl.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "csc/errors.h"

namespace csc {

namespace {

std::vector<double> row_norms(const HiddenStates& h) {
  std::vector<double> norms(h.rows);
  for (int i = 0; i < h.rows; ++i) {
    double s = 0.0;
    for (double v : h.row(i)) s += v * v;
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0) {
      throw NumericError("hidden state row " + std::to_string(i) +
                         " has zero norm; cosine similarity undefined");
    }
  }
  return norms;
}

// Cosine similarities of row i against every row, via normalized rows.
std::vector<double> cosine_row(const Matrix& unit, int i) {
  std::vector<double> sims(unit.rows);
  const auto ui = unit.row(i);
  for (int k = 0; k < unit.rows; ++k) {
    const auto uk = unit.row(k);
    double s = 0.0;
    for (int j = 0; j < unit.cols; ++j) s += ui[j] * uk[j];
    sims[k] = s;
  }
  return sims;
}

// log sum_{k != i} exp(sims_k / tau), stabilized.
double logsumexp_others(const std::vector<double>& sims, int i, double tau) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < sims.size(); ++k) {
    if (static_cast<int>(k) == i) continue;
    mx = std::max(mx, sims[k] / tau);
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < sims.size(); ++k) {
    if (static_cast<int>(k) == i) continue;
    sum += std::exp(sims[k] / tau - mx);
  }
  return mx + std::log(sum);
}

double set_loss_from_sims(const std::vector<double>& sims, const std::vector<int>& members, int i,
                          double tau, double lse) {
  if (members.empty()) return 0.0;
  double mean_sim = 0.0;
  for (int s : members) {
    if (s == i || s < 0 || s >= static_cast<int>(sims.size())) {
      throw DataError("negative set member " + std::to_string(s) + " invalid for anchor " +
                      std::to_string(i));
    }
    mean_sim += sims[s] / tau;
  }
  mean_sim /= static_cast<double>(members.size());
  return lse - mean_sim;
}

Matrix normalized_rows(const HiddenStates& h, const std::vector<double>& norms) {
  Matrix unit(h.rows, h.cols);
  for (int i = 0; i < h.rows; ++i) {
    const auto src = h.row(i);
    auto dst = unit.row(i);
    for (int j = 0; j < h.cols; ++j) dst[j] = src[j] / norms[i];
  }
  return unit;
}

double single_set_loss(const HiddenStates& h, const std::vector<int>& members, int i, double tau) {
  if (members.empty()) return 0.0;
  if (tau <= 0.0) throw DataError("temperature must be positive");
  if (h.rows < 2) throw DataError("reverse contrastive loss needs at least two anchors");
  const auto norms = row_norms(h);
  const Matrix unit = normalized_rows(h, norms);
  const auto sims = cosine_row(unit, i);
  return set_loss_from_sims(sims, members, i, tau, logsumexp_others(sims, i, tau));
}

}  // namespace

void RclConfig::validate() const {
  if (tau <= 0.0) throw DataError("temperature tau must be positive");
  if (alpha < 0.0) throw DataError("alpha must be non-negative");
  if (alpha > 0.0 && !use_pinyin && !use_confusion) {
    throw DataError("alpha > 0 requires at least one of the pinyin/confusion channels");
  }
}

NegativeSets mine_pairs(const Batch& batch, const Lexicon& lex, const RclConfig& cfg) {
  const int k = batch.K();
  NegativeSets sets;
  sets.s.resize(k);
  sets.w.resize(k);

  std::unordered_map<std::string, std::vector<int>> by_pinyin;
  std::unordered_map<CharId, std::vector<int>> by_char;
  for (int i = 0; i < k; ++i) {
    const CharId c = batch.source_char(i);
    if (c <= kUnkId) continue;
    by_char[c].push_back(i);
    const std::string& key = lex.pinyin(c);
    if (!key.empty()) by_pinyin[key].push_back(i);
  }

  for (int i = 0; i < k; ++i) {
    const CharId c = batch.source_char(i);
    if (c <= kUnkId) continue;

    if (cfg.use_pinyin) {
      const std::string& key = lex.pinyin(c);
      if (!key.empty()) {
        for (int j : by_pinyin[key]) {
          if (j == i) continue;
          if (cfg.exclude_identical && batch.source_char(j) == c) continue;
          sets.s[i].push_back(j);
        }
      }
    }
    if (cfg.use_confusion) {
      for (CharId member : lex.confusion(c)) {
        auto it = by_char.find(member);
        if (it == by_char.end()) continue;
        sets.w[i].insert(sets.w[i].end(), it->second.begin(), it->second.end());
      }
      std::sort(sets.w[i].begin(), sets.w[i].end());
    }
  }
  return sets;
}

double rcl_pinyin_loss(const HiddenStates& h, const std::vector<int>& s_i, int i, double tau) {
  return single_set_loss(h, s_i, i, tau);
}

double rcl_confusion_loss(const HiddenStates& h, const std::vector<int>& w_i, int i, double tau) {
  return single_set_loss(h, w_i, i, tau);
}

LossBreakdown total_loss(double l_correct, const HiddenStates& h, const NegativeSets& sets,
                         const RclConfig& cfg) {
  cfg.validate();
  const int k = h.rows;
  LossBreakdown out;
  out.l_correct = l_correct;
  out.l_p.assign(k, 0.0);
  out.l_c.assign(k, 0.0);

  bool any = false;
  for (int i = 0; i < k; ++i) {
    any = any || !sets.s[i].empty() || !sets.w[i].empty();
  }
  if (any) {
    if (k < 2) throw DataError("reverse contrastive loss needs at least two anchors");
    const auto norms = row_norms(h);
    const Matrix unit = normalized_rows(h, norms);
    for (int i = 0; i < k; ++i) {
      if (sets.s[i].empty() && sets.w[i].empty()) continue;
      const auto sims = cosine_row(unit, i);
      const double lse = logsumexp_others(sims, i, cfg.tau);
      out.l_p[i] = set_loss_from_sims(sims, sets.s[i], i, cfg.tau, lse);
      out.l_c[i] = set_loss_from_sims(sims, sets.w[i], i, cfg.tau, lse);
    }
  }
  for (int i = 0; i < k; ++i) out.l_rcl += out.l_p[i] + out.l_c[i];
  out.total = out.l_correct - cfg.alpha * out.l_rcl;
  if (!std::isfinite(out.total) || !std::isfinite(out.l_rcl)) {
    throw NumericError("non-finite loss breakdown");
  }
  return out;
}

Matrix rcl_gradients(const HiddenStates& h, const NegativeSets& sets, const RclConfig& cfg) {
  cfg.validate();
  const int k = h.rows;
  const int d = h.cols;
  Matrix grad(k, d);

  bool any = false;
  for (int i = 0; i < k; ++i) {
    any = any || !sets.s[i].empty() || !sets.w[i].empty();
  }
  if (!any || cfg.alpha == 0.0) return grad;
  if (k < 2) throw DataError("reverse contrastive loss needs at least two anchors");

  const auto norms = row_norms(h);
  const Matrix unit = normalized_rows(h, norms);

  for (int i = 0; i < k; ++i) {
    const auto& s_i = sets.s[i];
    const auto& w_i = sets.w[i];
    if (s_i.empty() && w_i.empty()) continue;

    const auto sims = cosine_row(unit, i);
    const double lse = logsumexp_others(sims, i, cfg.tau);
    const double active = (s_i.empty() ? 0.0 : 1.0) + (w_i.empty() ? 0.0 : 1.0);

    // dL_RCL/d sim(i,k) = (1/tau) * (active * p_k - [k in S]/|S| - [k in W]/|W|)
    std::vector<double> coeff(k, 0.0);
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      coeff[j] = active * std::exp(sims[j] / cfg.tau - lse) / cfg.tau;
    }
    if (!s_i.empty()) {
      const double inv = 1.0 / (cfg.tau * static_cast<double>(s_i.size()));
      for (int s : s_i) coeff[s] -= inv;
    }
    if (!w_i.empty()) {
      const double inv = 1.0 / (cfg.tau * static_cast<double>(w_i.size()));
      for (int w : w_i) coeff[w] -= inv;
    }

    // chain through the cosine: sim = u_i . u_k
    const auto ui = unit.row(i);
    auto gi = grad.row(i);
    for (int j = 0; j < k; ++j) {
      if (j == i || coeff[j] == 0.0) continue;
      const auto uj = unit.row(j);
      auto gj = grad.row(j);
      const double sim = sims[j];
      const double ci = coeff[j] / norms[i];
      const double cj = coeff[j] / norms[j];
      for (int c = 0; c < d; ++c) {
        gi[c] += ci * (uj[c] - sim * ui[c]);
        gj[c] += cj * (ui[c] - sim * uj[c]);
      }
    }
  }

  // objective carries -alpha * L_RCL
  for (double& v : grad.data) v *= -cfg.alpha;
  if (!grad.finite()) throw NumericError("non-finite reverse contrastive gradient");
  return grad;
}

}  // namespace csc
