#include "csc/model.h"

#include <cmath>

#include "csc/errors.h"
#include "csc/rng.h"

namespace csc {

namespace {

constexpr double kLnEps = 1e-12;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double gelu_grad(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
  return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))) + x * phi;
}

// PE(pos, 2i) = sin(pos / 10000^(2i/d)), PE(pos, 2i+1) = cos(same)
void add_position_signal(Matrix& x) {
  const int d = x.cols;
  for (int pos = 0; pos < x.rows; ++pos) {
    auto row = x.row(pos);
    for (int i = 0; i < d; i += 2) {
      const double rate = std::pow(10000.0, -static_cast<double>(i) / d);
      row[i] += std::sin(pos * rate);
      if (i + 1 < d) row[i + 1] += std::cos(pos * rate);
    }
  }
}

void check_finite(const Matrix& m, int layer, const char* stage) {
  if (!m.finite()) {
    throw NumericError("encoder layer " + std::to_string(layer) + ": non-finite activation after " +
                       stage);
  }
}

void softmax_rows(Matrix& m) {
  for (int i = 0; i < m.rows; ++i) {
    auto row = m.row(i);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
}

Matrix slice_cols(const Matrix& m, int c0, int c1) {
  Matrix out(m.rows, c1 - c0);
  for (int i = 0; i < m.rows; ++i) {
    const auto src = m.row(i);
    auto dst = out.row(i);
    for (int j = c0; j < c1; ++j) dst[j - c0] = src[j];
  }
  return out;
}

void add_cols(Matrix& m, const Matrix& part, int c0) {
  for (int i = 0; i < m.rows; ++i) {
    const auto src = part.row(i);
    auto dst = m.row(i);
    for (int j = 0; j < part.cols; ++j) dst[c0 + j] += src[j];
  }
}

// y = x * w + b with b broadcast over rows
Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = matmul(x, w);
  for (int i = 0; i < y.rows; ++i) {
    auto row = y.row(i);
    const auto brow = b.row(0);
    for (int j = 0; j < y.cols; ++j) row[j] += brow[j];
  }
  return y;
}

void accumulate_colsum(Matrix& acc, const Matrix& g) {
  auto row = acc.row(0);
  for (int i = 0; i < g.rows; ++i) {
    const auto grow = g.row(i);
    for (int j = 0; j < g.cols; ++j) row[j] += grow[j];
  }
}

}  // namespace

void BackboneConfig::validate() const {
  if (vocab_size < 2) throw DataError("vocab_size must be at least 2");
  if (d < 2) throw DataError("hidden width d must be at least 2");
  if (layers < 1) throw DataError("encoder must have at least one layer");
  if (heads < 1 || d % heads != 0) throw DataError("d must be divisible by heads");
  if (representation_tap < -1 || representation_tap > layers) {
    throw DataError("representation_tap must be in [0, layers]");
  }
}

double layer_norm_row(std::span<const double> x, std::span<const double> gamma,
                      std::span<const double> beta, std::span<double> y, std::span<double> xhat) {
  const int d = static_cast<int>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= d;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= d;
  const double inv_std = 1.0 / std::sqrt(var + kLnEps);
  for (int j = 0; j < d; ++j) {
    xhat[j] = (x[j] - mean) * inv_std;
    y[j] = gamma[j] * xhat[j] + beta[j];
  }
  return inv_std;
}

void Parameters::for_each(const std::function<void(const std::string&, Matrix&)>& fn) {
  fn("embedding", embedding);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    LayerParams& lp = layers[l];
    fn(p + "wq", lp.wq);
    fn(p + "wk", lp.wk);
    fn(p + "wv", lp.wv);
    fn(p + "wo", lp.wo);
    fn(p + "bq", lp.bq);
    fn(p + "bk", lp.bk);
    fn(p + "bv", lp.bv);
    fn(p + "bo", lp.bo);
    fn(p + "ln_gamma", lp.ln_gamma);
    fn(p + "ln_beta", lp.ln_beta);
    fn(p + "w1", lp.w1);
    fn(p + "b1", lp.b1);
    fn(p + "w2", lp.w2);
    fn(p + "b2", lp.b2);
  }
  fn("head.w_out", w_out);
  fn("head.b_out", b_out);
}

void Parameters::for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const {
  const_cast<Parameters*>(this)->for_each(
      [&fn](const std::string& name, Matrix& m) { fn(name, m); });
}

Parameters Parameters::zeros(const BackboneConfig& cfg) {
  Parameters p;
  const int d = cfg.d;
  const int f = cfg.ffn_hidden();
  p.embedding = Matrix(cfg.vocab_size, d);
  p.layers.resize(cfg.layers);
  for (auto& lp : p.layers) {
    lp.wq = Matrix(d, d);
    lp.wk = Matrix(d, d);
    lp.wv = Matrix(d, d);
    lp.wo = Matrix(d, d);
    lp.bq = Matrix(1, d);
    lp.bk = Matrix(1, d);
    lp.bv = Matrix(1, d);
    lp.bo = Matrix(1, d);
    lp.ln_gamma = Matrix(1, d);
    lp.ln_beta = Matrix(1, d);
    lp.w1 = Matrix(d, f);
    lp.b1 = Matrix(1, f);
    lp.w2 = Matrix(f, d);
    lp.b2 = Matrix(1, d);
  }
  p.w_out = Matrix(d, cfg.vocab_size);
  p.b_out = Matrix(1, cfg.vocab_size);
  return p;
}

Parameters Parameters::init(const BackboneConfig& cfg) {
  Parameters p = zeros(cfg);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  Rng rng(mix_seed(cfg.seed, 0x9a7a));
  auto fill = [&rng, bound](Matrix& m) {
    for (double& v : m.data) v = rng.uniform(-bound, bound);
  };
  fill(p.embedding);
  for (auto& lp : p.layers) {
    fill(lp.wq);
    fill(lp.wk);
    fill(lp.wv);
    fill(lp.wo);
    fill(lp.w1);
    fill(lp.w2);
    for (double& v : lp.ln_gamma.data) v = 1.0;
  }
  fill(p.w_out);
  return p;
}

Model::Model(const BackboneConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  params_ = Parameters::init(cfg_);
}

Model::Model(const BackboneConfig& cfg, Parameters params) : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
}

ForwardTrace Model::encode_traced(const Batch& batch) const {
  const int d = cfg_.d;
  const int heads = cfg_.heads;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const int tap = cfg_.tap();

  ForwardTrace trace;
  trace.final_states = Matrix(batch.K(), d);
  trace.tap_states = Matrix(batch.K(), d);

  int row = 0;
  for (const auto& pair : batch.pairs) {
    trace.row_offset.push_back(row);
    const int n = static_cast<int>(pair.source.size());

    SentenceTrace st;
    st.x0 = Matrix(n, d);
    for (int i = 0; i < n; ++i) {
      const CharId id = pair.source[i];
      if (id < 0 || id >= cfg_.vocab_size) {
        throw DataError("token id " + std::to_string(id) + " outside vocabulary");
      }
      const auto erow = params_.embedding.row(id);
      auto xrow = st.x0.row(i);
      for (int j = 0; j < d; ++j) xrow[j] = erow[j];
    }
    add_position_signal(st.x0);
    check_finite(st.x0, 0, "embedding");

    Matrix x = st.x0;
    for (int l = 0; l < cfg_.layers; ++l) {
      const LayerParams& lp = params_.layers[l];
      LayerTrace lt;
      lt.x_in = x;
      lt.q = affine(x, lp.wq, lp.bq);
      lt.k = affine(x, lp.wk, lp.bk);
      lt.v = affine(x, lp.wv, lp.bv);

      lt.concat = Matrix(n, d);
      for (int h = 0; h < heads; ++h) {
        const int c0 = h * dh;
        Matrix qh = slice_cols(lt.q, c0, c0 + dh);
        Matrix kh = slice_cols(lt.k, c0, c0 + dh);
        Matrix vh = slice_cols(lt.v, c0, c0 + dh);
        Matrix scores = matmul_nt(qh, kh);
        for (double& s : scores.data) s *= scale;
        softmax_rows(scores);
        Matrix oh = matmul(scores, vh);
        add_cols(lt.concat, oh, c0);
        lt.attn.push_back(std::move(scores));
      }
      Matrix attn_proj = affine(lt.concat, lp.wo, lp.bo);
      check_finite(attn_proj, l + 1, "attention");

      lt.r1 = lt.x_in;
      add_inplace(lt.r1, attn_proj);

      lt.xhat = Matrix(n, d);
      lt.x_mid = Matrix(n, d);
      lt.inv_std.resize(n);
      for (int i = 0; i < n; ++i) {
        lt.inv_std[i] = layer_norm_row(lt.r1.row(i), lp.ln_gamma.row(0), lp.ln_beta.row(0),
                                       lt.x_mid.row(i), lt.xhat.row(i));
      }

      lt.ffn_pre = affine(lt.x_mid, lp.w1, lp.b1);
      lt.ffn_act = lt.ffn_pre;
      for (double& v : lt.ffn_act.data) v = gelu(v);
      Matrix ffn_out = affine(lt.ffn_act, lp.w2, lp.b2);

      x = lt.x_mid;
      add_inplace(x, ffn_out);
      check_finite(x, l + 1, "feed-forward");

      st.layers.push_back(std::move(lt));
    }

    for (int i = 0; i < n; ++i) {
      const auto src = x.row(i);
      auto dst = trace.final_states.row(row + i);
      for (int j = 0; j < d; ++j) dst[j] = src[j];

      const Matrix& tap_x = (tap == cfg_.layers) ? x
                            : (tap == 0 ? st.x0 : st.layers[tap].x_in);
      const auto tsrc = tap_x.row(i);
      auto tdst = trace.tap_states.row(row + i);
      for (int j = 0; j < d; ++j) tdst[j] = tsrc[j];
    }

    trace.sentences.push_back(std::move(st));
    row += n;
  }
  return trace;
}

HiddenStates Model::encode(const Batch& batch) const { return encode_traced(batch).final_states; }

Logits Model::correct_logits(const HiddenStates& h) const {
  if (!h.finite()) throw NumericError("non-finite hidden states fed to correction head");
  return affine(h, params_.w_out, params_.b_out);
}

Parameters Model::backward(const Batch& batch, const ForwardTrace& trace, const Matrix& dlogits,
                           const Matrix& dh_tap) const {
  const int d = cfg_.d;
  const int heads = cfg_.heads;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const int tap = cfg_.tap();

  Parameters grads = Parameters::zeros(cfg_);

  // Correction head; only the correction loss flows through it.
  Matrix dh_final(trace.final_states.rows, d);
  if (dlogits.rows > 0) {
    add_inplace(grads.w_out, matmul_tn(trace.final_states, dlogits));
    accumulate_colsum(grads.b_out, dlogits);
    dh_final = matmul_nt(dlogits, params_.w_out);
  }

  for (std::size_t sidx = 0; sidx < trace.sentences.size(); ++sidx) {
    const SentenceTrace& st = trace.sentences[sidx];
    const int offset = trace.row_offset[sidx];
    const int n = st.x0.rows;

    // Gradient flowing at the output of layer `layers`.
    Matrix dx(n, d);
    for (int i = 0; i < n; ++i) {
      const auto src = dh_final.row(offset + i);
      auto dst = dx.row(i);
      for (int j = 0; j < d; ++j) dst[j] = src[j];
    }
    auto inject_tap = [&](int level, Matrix& g) {
      if (level != tap || dh_tap.rows == 0) return;
      for (int i = 0; i < n; ++i) {
        const auto src = dh_tap.row(offset + i);
        auto dst = g.row(i);
        for (int j = 0; j < d; ++j) dst[j] += src[j];
      }
    };
    inject_tap(cfg_.layers, dx);

    for (int l = cfg_.layers - 1; l >= 0; --l) {
      const LayerParams& lp = params_.layers[l];
      LayerParams& gp = grads.layers[l];
      const LayerTrace& lt = st.layers[l];

      // x_out = x_mid + gelu(x_mid w1 + b1) w2 + b2
      const Matrix& d_out = dx;
      add_inplace(gp.w2, matmul_tn(lt.ffn_act, d_out));
      accumulate_colsum(gp.b2, d_out);
      Matrix d_act = matmul_nt(d_out, lp.w2);
      Matrix d_pre = d_act;
      for (std::size_t i = 0; i < d_pre.data.size(); ++i) {
        d_pre.data[i] *= gelu_grad(lt.ffn_pre.data[i]);
      }
      add_inplace(gp.w1, matmul_tn(lt.x_mid, d_pre));
      accumulate_colsum(gp.b1, d_pre);
      Matrix d_xmid = matmul_nt(d_pre, lp.w1);
      add_inplace(d_xmid, d_out);

      // layer norm backward, rowwise
      Matrix d_r1(n, d);
      for (int i = 0; i < n; ++i) {
        const auto dy = d_xmid.row(i);
        const auto xhat = lt.xhat.row(i);
        const auto gamma = lp.ln_gamma.row(0);
        auto ggamma = gp.ln_gamma.row(0);
        auto gbeta = gp.ln_beta.row(0);
        double m1 = 0.0, m2 = 0.0;
        for (int j = 0; j < d; ++j) {
          ggamma[j] += dy[j] * xhat[j];
          gbeta[j] += dy[j];
          const double dxhat = dy[j] * gamma[j];
          m1 += dxhat;
          m2 += dxhat * xhat[j];
        }
        m1 /= d;
        m2 /= d;
        auto dr = d_r1.row(i);
        for (int j = 0; j < d; ++j) {
          const double dxhat = dy[j] * gamma[j];
          dr[j] = lt.inv_std[i] * (dxhat - m1 - xhat[j] * m2);
        }
      }

      // r1 = x_in + concat wo + bo
      Matrix d_xin = d_r1;
      add_inplace(gp.wo, matmul_tn(lt.concat, d_r1));
      accumulate_colsum(gp.bo, d_r1);
      Matrix d_concat = matmul_nt(d_r1, lp.wo);

      Matrix d_q(n, d), d_k(n, d), d_v(n, d);
      for (int h = 0; h < heads; ++h) {
        const int c0 = h * dh;
        Matrix d_oh = slice_cols(d_concat, c0, c0 + dh);
        Matrix vh = slice_cols(lt.v, c0, c0 + dh);
        Matrix qh = slice_cols(lt.q, c0, c0 + dh);
        Matrix kh = slice_cols(lt.k, c0, c0 + dh);
        const Matrix& a = lt.attn[h];

        Matrix d_a = matmul_nt(d_oh, vh);
        Matrix d_vh = matmul_tn(a, d_oh);
        // softmax rows backward
        Matrix d_scores(n, n);
        for (int i = 0; i < n; ++i) {
          const auto arow = a.row(i);
          const auto darow = d_a.row(i);
          double dot = 0.0;
          for (int j = 0; j < n; ++j) dot += arow[j] * darow[j];
          auto dsrow = d_scores.row(i);
          for (int j = 0; j < n; ++j) dsrow[j] = arow[j] * (darow[j] - dot) * scale;
        }
        Matrix d_qh = matmul(d_scores, kh);
        Matrix d_kh = matmul_tn(d_scores, qh);
        add_cols(d_q, d_qh, c0);
        add_cols(d_k, d_kh, c0);
        add_cols(d_v, d_vh, c0);
      }

      add_inplace(gp.wq, matmul_tn(lt.x_in, d_q));
      accumulate_colsum(gp.bq, d_q);
      add_inplace(d_xin, matmul_nt(d_q, lp.wq));
      add_inplace(gp.wk, matmul_tn(lt.x_in, d_k));
      accumulate_colsum(gp.bk, d_k);
      add_inplace(d_xin, matmul_nt(d_k, lp.wk));
      add_inplace(gp.wv, matmul_tn(lt.x_in, d_v));
      accumulate_colsum(gp.bv, d_v);
      add_inplace(d_xin, matmul_nt(d_v, lp.wv));

      dx = std::move(d_xin);
      inject_tap(l, dx);
    }

    const auto& pair = batch.pairs[sidx];
    for (int i = 0; i < n; ++i) {
      const auto src = dx.row(i);
      auto erow = grads.embedding.row(pair.source[i]);
      for (int j = 0; j < d; ++j) erow[j] += src[j];
    }
  }
  return grads;
}

std::vector<std::vector<CharId>> Model::predict(
    const std::vector<std::vector<CharId>>& sources) const {
  std::vector<SentencePair> pairs;
  pairs.reserve(sources.size());
  for (const auto& s : sources) pairs.push_back({s, s});
  const Batch batch = make_batch(std::move(pairs));

  const Logits logits = correct_logits(encode(batch));
  std::vector<std::vector<CharId>> out(sources.size());
  for (int a = 0; a < batch.K(); ++a) {
    const auto row = logits.row(a);
    int best = 0;
    for (int j = 1; j < logits.cols; ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[batch.anchors[a].pair].push_back(static_cast<CharId>(best));
  }
  return out;
}

double correction_loss(const Logits& logits, const Batch& batch) {
  const int k = batch.K();
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    const auto row = logits.row(i);
    const CharId target = batch.target_char(i);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    total += mx + std::log(sum) - row[target];
  }
  const double loss = total / k;
  if (!std::isfinite(loss)) throw NumericError("non-finite correction loss");
  return loss;
}

Matrix correction_loss_grad(const Logits& logits, const Batch& batch) {
  const int k = batch.K();
  Matrix grad(logits.rows, logits.cols);
  for (int i = 0; i < k; ++i) {
    const auto row = logits.row(i);
    auto grow = grad.row(i);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double sum = 0.0;
    for (int j = 0; j < logits.cols; ++j) {
      grow[j] = std::exp(row[j] - mx);
      sum += grow[j];
    }
    for (int j = 0; j < logits.cols; ++j) grow[j] /= sum * k;
    grow[batch.target_char(i)] -= 1.0 / k;
  }
  return grad;
}

}  // namespace csc
