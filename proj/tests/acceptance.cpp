// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exit code 0 only when all pass.
// An optional list of criterion numbers restricts the run (development aid).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "csc/corpus.h"
#include "csc/eval.h"
#include "csc/lexicon.h"
#include "csc/matrix.h"
#include "csc/model.h"
#include "csc/rcl.h"
#include "csc/rng.h"
#include "csc/train.h"
#include "support/test_support.h"

using namespace csc;
using test::TempDir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// 1. pair-mining oracle equivalence over 200 random batches
// ---------------------------------------------------------------------------

Outcome criterion_pair_mining() {
  TempDir dir;
  Rng rng(1701);
  const Lexicon lex = test::make_random_lexicon(dir, 60, 12, rng);

  int batches = 0;
  RclConfig cfg;
  for (int round = 0; round < 200; ++round) {
    cfg.use_pinyin = rng.below(5) != 0;
    cfg.use_confusion = rng.below(5) != 0;
    cfg.exclude_identical = rng.below(2) == 0;

    std::vector<SentencePair> pairs;
    int total_chars = 0;
    const int n_sentences = 1 + static_cast<int>(rng.below(5));
    for (int s = 0; s < n_sentences && total_chars < 32; ++s) {
      std::vector<CharId> ids;
      const int len = 1 + static_cast<int>(rng.below(8));
      for (int i = 0; i < len && total_chars < 32; ++i, ++total_chars) {
        ids.push_back(rng.below(25) == 0 ? kUnkId : static_cast<CharId>(2 + rng.below(62)));
      }
      if (!ids.empty()) pairs.push_back({ids, ids});
    }
    if (pairs.empty()) continue;
    const Batch batch = make_batch(std::move(pairs));
    const NegativeSets mined = mine_pairs(batch, lex, cfg);
    const NegativeSets oracle = test::brute_force_pairs(batch, lex, cfg);
    if (mined.s != oracle.s || mined.w != oracle.w) {
      return {false, "mismatch against brute force in round " + std::to_string(round)};
    }
    ++batches;
  }
  return {true, std::to_string(batches) + " batches identical to the O(K^2) oracle"};
}

// ---------------------------------------------------------------------------
// 2. loss formula fidelity at 1e-9 absolute
// ---------------------------------------------------------------------------

Matrix k3_fixture() {
  Matrix h(3, 2);
  h.at(0, 0) = 1.0;
  h.at(1, 1) = 1.0;
  h.at(2, 0) = 1.0 / std::sqrt(2.0);
  h.at(2, 1) = 1.0 / std::sqrt(2.0);
  return h;
}

Outcome criterion_loss_fidelity() {
  std::ostringstream detail;

  // K=2: numerator equals the single-term denominator
  Rng rng(2);
  for (int round = 0; round < 20; ++round) {
    const Matrix h2 = test::random_states(2, 3, rng);
    const double tau = 0.05 + rng.uniform01();
    if (std::abs(rcl_pinyin_loss(h2, {1}, 0, tau)) > 1e-9) {
      return {false, "K=2 identity violated"};
    }
  }

  const Matrix h = k3_fixture();
  const double v1 = rcl_pinyin_loss(h, {1}, 0, 1.0);
  const double v2 = rcl_pinyin_loss(h, {1}, 0, 0.5);
  if (std::abs(v1 - 1.1079403076572498) > 1e-9) {
    return {false, "tau=1 value " + std::to_string(v1)};
  }
  if (std::abs(v2 - 1.6318352839548387) > 1e-9) {
    return {false, "tau=0.5 value " + std::to_string(v2)};
  }

  // scale and rotation invariance of L_RCL
  NegativeSets sets;
  sets.s = {{1}, {0, 2}, {}, {4}, {}};
  sets.w = {{3}, {}, {0}, {}, {1}};
  const Matrix base = test::random_states(5, 4, rng);
  RclConfig cfg;
  cfg.tau = 0.2;
  const double reference = total_loss(0.0, base, sets, cfg).l_rcl;

  for (double scale : {1e-3, 0.5, 40.0}) {
    Matrix scaled = base;
    for (double& v : scaled.data) v *= scale;
    if (std::abs(total_loss(0.0, scaled, sets, cfg).l_rcl - reference) > 1e-9) {
      return {false, "not scale invariant at " + std::to_string(scale)};
    }
  }

  Matrix q(4, 4);
  for (double& v : q.data) v = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < i; ++j) {
      double dot = 0.0;
      for (int c = 0; c < 4; ++c) dot += q.at(i, c) * q.at(j, c);
      for (int c = 0; c < 4; ++c) q.at(i, c) -= dot * q.at(j, c);
    }
    double norm = 0.0;
    for (int c = 0; c < 4; ++c) norm += q.at(i, c) * q.at(i, c);
    norm = std::sqrt(norm);
    for (int c = 0; c < 4; ++c) q.at(i, c) /= norm;
  }
  Matrix rotated(5, 4);
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 4; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += base.at(r, k) * q.at(c, k);
      rotated.at(r, c) = acc;
    }
  }
  if (std::abs(total_loss(0.0, rotated, sets, cfg).l_rcl - reference) > 1e-9) {
    return {false, "not rotation invariant"};
  }

  detail << "K=2 identity, K=3 values (" << v1 << ", " << v2
         << "), scale/rotation invariance all within 1e-9";
  return {true, detail.str()};
}

// ---------------------------------------------------------------------------
// 3. gradient checks of the Eq. 5 total loss
// ---------------------------------------------------------------------------

Outcome criterion_gradients() {
  TempDir dir;
  test::LexiconSpec spec;
  // 16 characters; groups of 4 share a pinyin key; a couple of confusions
  for (int i = 0; i < 16; ++i) spec.chars.push_back(static_cast<char32_t>(0x4e00 + i));
  static const char* kKeys[] = {"ba", "ke", "li", "mo"};
  for (int i = 0; i < 16; ++i) spec.pinyin.push_back(kKeys[i % 4]);
  spec.confusion.resize(16);
  spec.confusion[0] = {static_cast<char32_t>(0x4e05)};
  spec.confusion[3] = {static_cast<char32_t>(0x4e02), static_cast<char32_t>(0x4e0a)};
  spec.confusion[9] = {static_cast<char32_t>(0x4e01)};
  const Lexicon lex = test::write_lexicon(dir, spec);

  BackboneConfig bcfg;
  bcfg.vocab_size = lex.vocab_size();  // 18
  bcfg.d = 6;
  bcfg.layers = 2;
  bcfg.heads = 2;
  bcfg.seed = 77;
  Model model(bcfg);

  // K = 7 anchors across two sentences with same-pinyin and confusion pairs
  std::vector<CharId> s1 = {2, 6, 3, 7};   // chars 0,4,1,5: 0/4 share "ba"
  std::vector<CharId> s2 = {5, 11, 2};     // char 3 confuses with 2 and 8
  const Batch batch = make_batch({{s1, s1}, {s2, {5, 15, 2}}});

  RclConfig rcl_cfg;
  rcl_cfg.tau = 0.5;
  rcl_cfg.alpha = 0.05;
  const NegativeSets sets = mine_pairs(batch, lex, rcl_cfg);
  int mined = 0;
  for (const auto& s : sets.s) mined += static_cast<int>(s.size());
  for (const auto& w : sets.w) mined += static_cast<int>(w.size());
  if (mined == 0) return {false, "fixture mined no pairs; gradcheck would be vacuous"};

  auto total_fn = [&]() {
    const ForwardTrace trace = model.encode_traced(batch);
    const double l_correct = correction_loss(model.correct_logits(trace.final_states), batch);
    return total_loss(l_correct, trace.tap_states, sets, rcl_cfg).total;
  };

  const ForwardTrace trace = model.encode_traced(batch);
  const Logits logits = model.correct_logits(trace.final_states);
  const Matrix dlogits = correction_loss_grad(logits, batch);
  const Matrix dh_tap = rcl_gradients(trace.tap_states, sets, rcl_cfg);
  const Parameters grads = model.backward(batch, trace, dlogits, dh_tap);

  const auto param_check = test::check_gradients(model.params(), grads, total_fn);
  if (param_check.max_rel > 1e-3) {
    return {false, "parameter gradients: max rel err " + std::to_string(param_check.max_rel) +
                       " at " + param_check.worst_tensor};
  }

  // gradient with respect to h itself: correction head plus RCL term
  Matrix h = trace.tap_states;
  auto h_loss_fn = [&]() {
    const double l_correct = correction_loss(model.correct_logits(h), batch);
    return total_loss(l_correct, h, sets, rcl_cfg).total;
  };
  Matrix dh_analytic(h.rows, h.cols);
  {
    const Logits hl = model.correct_logits(h);
    const Matrix dl = correction_loss_grad(hl, batch);
    dh_analytic = matmul_nt(dl, model.params().w_out);
    add_inplace(dh_analytic, rcl_gradients(h, sets, rcl_cfg));
  }
  const auto h_check = test::check_matrix_gradients(h, dh_analytic, h_loss_fn);
  if (h_check.max_rel > 1e-3) {
    return {false, "h gradients: max rel err " + std::to_string(h_check.max_rel)};
  }

  std::ostringstream detail;
  detail << "param max rel err " << param_check.max_rel << " (" << param_check.worst_tensor
         << "), h max rel err " << h_check.max_rel;
  return {true, detail.str()};
}

// ---------------------------------------------------------------------------
// 4. push-apart direction on the K=3 fixture
// ---------------------------------------------------------------------------

Outcome criterion_push_apart() {
  Matrix h = k3_fixture();
  NegativeSets sets;
  sets.s = {{1}, {}, {}};
  sets.w = {{}, {}, {}};
  RclConfig cfg;
  cfg.tau = 0.5;
  cfg.alpha = 0.01;

  auto cosine12 = [](const Matrix& m) {
    double dot = 0.0, n1 = 0.0, n2 = 0.0;
    for (int c = 0; c < m.cols; ++c) {
      dot += m.at(0, c) * m.at(1, c);
      n1 += m.at(0, c) * m.at(0, c);
      n2 += m.at(1, c) * m.at(1, c);
    }
    return dot / std::sqrt(n1 * n2);
  };

  const double before = cosine12(h);
  const Matrix grad = rcl_gradients(h, sets, cfg);
  for (std::size_t i = 0; i < h.data.size(); ++i) h.data[i] -= 0.5 * grad.data[i];
  const double after = cosine12(h);
  if (!(after < before)) {
    return {false, "cos(h1,h2) did not decrease: " + std::to_string(before) + " -> " +
                       std::to_string(after)};
  }
  return {true, "cos(h1,h2) " + std::to_string(before) + " -> " + std::to_string(after)};
}

// ---------------------------------------------------------------------------
// 5. ablation structure on mixed batches
// ---------------------------------------------------------------------------

Outcome criterion_ablation() {
  TempDir dir;
  const Lexicon lex = test::make_fig1_lexicon(dir);
  std::vector<CharId> ids;
  for (char32_t cp : std::u32string(U"喜希舞无欢观欣")) ids.push_back(lex.id_of(cp));
  const Batch batch = make_batch({{ids, ids}});
  Rng rng(5);
  const Matrix h = test::random_states(batch.K(), 6, rng);

  RclConfig cfg;
  cfg.tau = 0.3;
  const LossBreakdown full = total_loss(1.0, h, mine_pairs(batch, lex, cfg), cfg);
  bool has_p = false, has_c = false;
  for (double v : full.l_p) has_p = has_p || v != 0.0;
  for (double v : full.l_c) has_c = has_c || v != 0.0;
  if (!has_p || !has_c) return {false, "mixed batch should activate both channels"};

  cfg.use_pinyin = false;
  const LossBreakdown wo_pinyin = total_loss(1.0, h, mine_pairs(batch, lex, cfg), cfg);
  for (double v : wo_pinyin.l_p) {
    if (v != 0.0) return {false, "w/o pinyin left a nonzero L_P entry"};
  }
  for (int i = 0; i < batch.K(); ++i) {
    if (wo_pinyin.l_c[i] != full.l_c[i]) return {false, "w/o pinyin perturbed L_C"};
  }

  cfg.use_pinyin = true;
  cfg.use_confusion = false;
  const LossBreakdown wo_confusion = total_loss(1.0, h, mine_pairs(batch, lex, cfg), cfg);
  for (double v : wo_confusion.l_c) {
    if (v != 0.0) return {false, "w/o confusion left a nonzero L_C entry"};
  }
  for (int i = 0; i < batch.K(); ++i) {
    if (wo_confusion.l_p[i] != full.l_p[i]) return {false, "w/o confusion perturbed L_P"};
  }
  return {true, "each disabled channel zeroes exactly its per-anchor array"};
}

// ---------------------------------------------------------------------------
// 6. toy trend reproduction over five seeds
// ---------------------------------------------------------------------------

Outcome criterion_trend() {
  TempDir dir;
  test::SyntheticTask task = test::make_synthetic_task(dir, 500, 125, 160, 2000, 400, 42);

  const ErrorMix mix{0.7, 0.3};
  const auto train_pairs = inject_errors(task.clean_train, task.lex, 0.1, mix, 100);
  const auto dev_pairs = inject_errors(task.clean_dev, task.lex, 0.1, mix, 101);

  const std::vector<double> alphas = {0.0, 0.0005, 0.1};
  std::vector<std::vector<double>> cf(alphas.size());

  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (std::size_t a = 0; a < alphas.size(); ++a) {
      BackboneConfig bcfg;
      bcfg.vocab_size = task.lex.vocab_size();
      bcfg.d = 32;
      bcfg.layers = 2;
      bcfg.heads = 1;
      bcfg.seed = seed;

      TrainConfig tcfg;
      tcfg.lr = 1e-3;
      tcfg.batch_size = 16;
      tcfg.epochs = 6;
      tcfg.warmup_fraction = 0.1;
      tcfg.optimizer = OptimizerKind::kAdamW;
      tcfg.rcl.alpha = alphas[a];
      tcfg.rcl.tau = 0.1;
      tcfg.seed = seed;
      tcfg.eval_every = 125;

      Model model(bcfg);
      TrainData data{train_pairs, dev_pairs};
      const RunRecord record = train(data, task.lex, model, tcfg);

      double best = 0.0;
      for (const auto& ev : record.evals) best = std::max(best, ev.report.c_f);
      cf[a].push_back(best);
    }
  }

  auto mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  const double mean_baseline = mean(cf[0]);
  const double mean_small = mean(cf[1]);
  int large_worse = 0;
  for (int s = 0; s < 5; ++s) large_worse += cf[2][s] < cf[1][s] ? 1 : 0;

  std::ostringstream detail;
  detail.setf(std::ios::fixed);
  detail.precision(2);
  detail << "mean C-F: alpha=0 " << mean_baseline << ", alpha=0.0005 " << mean_small
         << ", alpha=0.1 " << mean(cf[2]) << "; alpha=0.1 worse in " << large_worse << "/5 seeds";

  const bool pass_a = mean_small >= mean_baseline;
  const bool pass_b = large_worse >= 4;
  return {pass_a && pass_b, detail.str()};
}

// ---------------------------------------------------------------------------
// 7. metric correctness
// ---------------------------------------------------------------------------

Outcome criterion_metrics() {
  std::vector<SentencePair> pairs = {
      {{2, 3, 4}, {2, 5, 4}},  // error, fixed exactly
      {{6, 7}, {6, 8}},        // error, missed
      {{9, 9}, {9, 9}},        // clean, falsely edited
      {{4, 2}, {4, 2}},        // clean, untouched
  };
  std::vector<std::vector<CharId>> preds = {{2, 5, 4}, {6, 7}, {9, 3}, {4, 2}};

  const EvalReport fixture = evaluate(pairs, preds, Granularity::kSentence);
  if (fixture.c_p != 50.0 || fixture.c_r != 50.0 || fixture.c_f != 50.0) {
    return {false, "hand-counted fixture gave C " + std::to_string(fixture.c_p) + "/" +
                       std::to_string(fixture.c_r) + "/" + std::to_string(fixture.c_f)};
  }

  std::vector<std::vector<CharId>> gold;
  for (const auto& pair : pairs) gold.push_back(pair.target);
  for (Granularity g : {Granularity::kSentence, Granularity::kCharacter}) {
    const EvalReport perfect = evaluate(pairs, gold, g);
    for (double v : {perfect.d_p, perfect.d_r, perfect.d_f, perfect.c_p, perfect.c_r,
                     perfect.c_f}) {
      if (v != 100.0) return {false, "evaluate(gold, gold) != 100"};
    }
  }

  TempDir dir;
  test::LexiconSpec spec;
  spec.chars = {U'我', U'的', U'地', U'得', U'书', U'跑'};
  spec.pinyin = {"wo", "de", "de", "de", "shu", "pao"};
  const Lexicon lex = test::write_lexicon(dir, spec);
  const auto src = tokenize("我的书的", lex);
  const auto prd = tokenize("我地书的", lex);
  const auto filtered = postfilter_de({prd}, {src}, lex);
  if (filtered[0] != src) return {false, "postfilter did not revert the particle edit"};
  // a genuine edit elsewhere survives
  const auto src2 = tokenize("我的跑", lex);
  const auto prd2 = tokenize("我地书", lex);
  const auto filtered2 = postfilter_de({prd2}, {src2}, lex);
  if (filtered2[0] != tokenize("我的书", lex)) {
    return {false, "postfilter touched a non-particle edit"};
  }
  return {true, "fixture C-P=C-R=C-F=50.0, gold self-eval 100.0, postfilter exact"};
}

// ---------------------------------------------------------------------------
// 8. determinism of seeded runs
// ---------------------------------------------------------------------------

Outcome criterion_determinism() {
  TempDir dir;
  const Lexicon lex = test::make_fig1_lexicon(dir);
  dir.file("corpus.tsv", "喜希舞\t喜希舞\n无欢观\t无欢观\n喜观\t喜观\n欣舞希\t欣舞希\n");
  const TrainData data{load_corpus(dir.join("corpus.tsv"), lex).pairs, {}};

  TrainConfig cfg;
  cfg.lr = 0.01;
  cfg.batch_size = 2;
  cfg.epochs = 4;
  cfg.rcl.alpha = 0.0005;
  cfg.seed = 9;

  BackboneConfig bcfg;
  bcfg.vocab_size = lex.vocab_size();
  bcfg.d = 8;
  bcfg.layers = 1;
  bcfg.seed = 9;

  TempDir run_a, run_b;
  Model model_a(bcfg);
  Model model_b(bcfg);
  train(data, lex, model_a, cfg, {run_a.path().string(), ""});
  train(data, lex, model_b, cfg, {run_b.path().string(), ""});

  const std::string csv_a = test::read_file(run_a.join("losses.csv"));
  const std::string csv_b = test::read_file(run_b.join("losses.csv"));
  if (csv_a.empty() || csv_a != csv_b) {
    return {false, "losses.csv differs between identical seeded runs"};
  }
  return {true, "losses.csv byte-identical across runs (" +
                    std::to_string(csv_a.size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    std::string name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "pair-mining oracle equivalence", criterion_pair_mining},
      {2, "loss formula fidelity", criterion_loss_fidelity},
      {3, "gradient checks", criterion_gradients},
      {4, "push-apart direction", criterion_push_apart},
      {5, "ablation structure", criterion_ablation},
      {6, "toy trend reproduction", criterion_trend},
      {7, "metric correctness", criterion_metrics},
      {8, "determinism", criterion_determinism},
  };

  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  const std::vector<double> budgets = {5.0, 0, 30.0, 0, 0, 1800.0, 0, 0};

  int failures = 0;
  for (const auto& criterion : criteria) {
    if (!only.empty() && only.count(criterion.id) == 0) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const double budget = budgets[criterion.id - 1];
    if (budget > 0 && seconds > budget) {
      outcome.pass = false;
      outcome.detail += " [over time budget " + std::to_string(budget) + "s]";
    }
    std::printf("criterion %d (%s): %s (%.2fs) %s\n", criterion.id, criterion.name.c_str(),
                outcome.pass ? "PASS" : "FAIL", seconds, outcome.detail.c_str());
    std::fflush(stdout);
    failures += outcome.pass ? 0 : 1;
  }
  if (failures == 0) {
    std::printf("ACCEPTANCE: all criteria passed\n");
  } else {
    std::printf("ACCEPTANCE: %d criterion(s) failed\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
