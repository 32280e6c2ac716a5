#include "csc/train.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "csc/errors.h"
#include "csc/rng.h"
#include "json.hpp"

namespace csc {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (lr <= 0.0) throw DataError("learning rate must be positive");
  if (batch_size < 1) throw DataError("batch size must be at least 1");
  if (epochs < 1) throw DataError("epochs must be at least 1");
  if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) {
    throw DataError("warmup fraction must be in [0, 1)");
  }
  if (max_steps < 0) throw DataError("max_steps must be non-negative");
  if (eval_every < 0) throw DataError("eval_every must be non-negative");
  rcl.validate();
}

double scheduled_lr(double base_lr, double warmup_fraction, std::int64_t step,
                    std::int64_t total_steps) {
  const std::int64_t warmup = static_cast<std::int64_t>(warmup_fraction * total_steps);
  if (step < warmup) {
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  return base_lr * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup);
}

namespace {

std::vector<Matrix*> tensor_list(Parameters& p) {
  std::vector<Matrix*> out;
  p.for_each([&out](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

std::vector<const Matrix*> tensor_list(const Parameters& p) {
  std::vector<const Matrix*> out;
  p.for_each([&out](const std::string&, const Matrix& m) { out.push_back(&m); });
  return out;
}

}  // namespace

void sgd_step(Parameters& params, const Parameters& grads, double lr) {
  const auto ps = tensor_list(params);
  const auto gs = tensor_list(grads);
  for (std::size_t k = 0; k < ps.size(); ++k) {
    Matrix& p = *ps[k];
    const Matrix& g = *gs[k];
    for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] -= lr * g.data[i];
  }
}

void adamw_step(Parameters& params, const Parameters& grads, Parameters& m, Parameters& v,
                std::int64_t t, double lr, const AdamWConfig& cfg) {
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const auto ps = tensor_list(params);
  const auto gs = tensor_list(grads);
  const auto ms = tensor_list(m);
  const auto vs = tensor_list(v);
  for (std::size_t k = 0; k < ps.size(); ++k) {
    Matrix& p = *ps[k];
    const Matrix& g = *gs[k];
    Matrix& mk = *ms[k];
    Matrix& vk = *vs[k];
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      mk.data[i] = cfg.beta1 * mk.data[i] + (1.0 - cfg.beta1) * g.data[i];
      vk.data[i] = cfg.beta2 * vk.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
      const double mhat = mk.data[i] / bc1;
      const double vhat = vk.data[i] / bc2;
      p.data[i] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * p.data[i]);
    }
  }
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json config_json(const TrainConfig& cfg, const BackboneConfig& backbone) {
  return {
      {"lr", cfg.lr},
      {"batch_size", cfg.batch_size},
      {"epochs", cfg.epochs},
      {"warmup_fraction", cfg.warmup_fraction},
      {"optimizer", cfg.optimizer == OptimizerKind::kSgd ? "sgd" : "adamw"},
      {"adamw",
       {{"beta1", cfg.adamw.beta1},
        {"beta2", cfg.adamw.beta2},
        {"eps", cfg.adamw.eps},
        {"weight_decay", cfg.adamw.weight_decay}}},
      {"rcl",
       {{"tau", cfg.rcl.tau},
        {"alpha", cfg.rcl.alpha},
        {"use_pinyin", cfg.rcl.use_pinyin},
        {"use_confusion", cfg.rcl.use_confusion},
        {"exclude_identical", cfg.rcl.exclude_identical}}},
      {"seed", cfg.seed},
      {"eval_every", cfg.eval_every},
      {"max_steps", cfg.max_steps},
      {"eval_granularity", granularity_name(cfg.eval_granularity)},
      {"backbone", {{"vocab_size", backbone.vocab_size},
                    {"d", backbone.d},
                    {"layers", backbone.layers},
                    {"heads", backbone.heads},
                    {"representation_tap", backbone.representation_tap},
                    {"seed", backbone.seed}}},
  };
}

EvalReport run_eval(const Model& model, const std::vector<SentencePair>& dev, Granularity gran) {
  std::vector<std::vector<CharId>> sources;
  sources.reserve(dev.size());
  for (const auto& pair : dev) sources.push_back(pair.source);
  return evaluate(dev, model.predict(sources), gran);
}

}  // namespace

RunRecord train(const TrainData& data, const Lexicon& lex, Model& model, const TrainConfig& cfg,
                const TrainIo& io) {
  cfg.validate();
  if (data.train.empty()) throw DataError("training corpus is empty");

  const bool to_disk = !io.run_dir.empty();
  std::ofstream losses_csv;
  if (to_disk) {
    fs::create_directories(fs::path(io.run_dir) / "checkpoints");
    std::ofstream cfg_out(fs::path(io.run_dir) / "config.json");
    cfg_out << config_json(cfg, model.config()).dump(2) << '\n';
    losses_csv.open(fs::path(io.run_dir) / "losses.csv");
    losses_csv << "step,l_correct,l_rcl,total\n";
  }

  const std::int64_t batches_per_epoch =
      (static_cast<std::int64_t>(data.train.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const std::int64_t total_steps = batches_per_epoch * cfg.epochs;

  TrainerState state;
  if (cfg.optimizer == OptimizerKind::kAdamW) {
    state.m = Parameters::zeros(model.config());
    state.v = Parameters::zeros(model.config());
    state.has_moments = true;
  }
  if (!io.resume_from.empty()) {
    LoadedCheckpoint loaded = load_checkpoint(io.resume_from, lex);
    model = std::move(loaded.model);
    if (loaded.trainer.has_value()) {
      state.global_step = loaded.trainer->global_step;
      if (loaded.trainer->has_moments && state.has_moments) {
        state.m = std::move(loaded.trainer->m);
        state.v = std::move(loaded.trainer->v);
      }
    }
  }

  RunRecord record;
  record.total_steps = total_steps;
  const std::uint64_t fingerprint = lex.fingerprint();

  double best_cf = -1.0;
  auto maybe_eval = [&](std::int64_t step) {
    if (data.dev.empty()) return;
    const EvalReport report = run_eval(model, data.dev, cfg.eval_granularity);
    record.evals.push_back({step, report});
    if (report.c_f > best_cf) {
      best_cf = report.c_f;
      if (to_disk) {
        record.best_checkpoint = (fs::path(io.run_dir) / "checkpoints" / "best.json").string();
        save_checkpoint(record.best_checkpoint, model, fingerprint);
      }
    }
  };

  Parameters last_good = model.params();
  bool stopped = false;

  for (std::int64_t epoch = state.global_step / batches_per_epoch;
       epoch < cfg.epochs && !stopped; ++epoch) {
    auto batches = make_batches(data.train, cfg.batch_size, mix_seed(cfg.seed, epoch));
    std::size_t batch_idx = static_cast<std::size_t>(state.global_step % batches_per_epoch);
    for (; batch_idx < batches.size(); ++batch_idx) {
      const Batch& batch = batches[batch_idx];
      const std::int64_t step = state.global_step;

      ForwardTrace trace;
      Matrix dlogits;
      LossBreakdown breakdown;
      Matrix dh_tap;
      try {
        trace = model.encode_traced(batch);
        const Logits logits = model.correct_logits(trace.final_states);
        const double l_correct = correction_loss(logits, batch);
        dlogits = correction_loss_grad(logits, batch);
        const NegativeSets sets = mine_pairs(batch, lex, cfg.rcl);
        breakdown = total_loss(l_correct, trace.tap_states, sets, cfg.rcl);
        dh_tap = rcl_gradients(trace.tap_states, sets, cfg.rcl);
      } catch (const NumericError&) {
        if (to_disk) {
          Model last(model.config(), last_good);
          save_checkpoint((fs::path(io.run_dir) / "checkpoints" / "last_good.json").string(), last,
                          fingerprint, &state);
        }
        throw;
      }

      const double lr = scheduled_lr(cfg.lr, cfg.warmup_fraction, step, total_steps);
      record.steps.push_back({step, lr, breakdown});
      if (to_disk) {
        losses_csv << step << ',' << format_double(breakdown.l_correct) << ','
                   << format_double(breakdown.l_rcl) << ',' << format_double(breakdown.total)
                   << '\n';
      }

      last_good = model.params();
      const Parameters grads = model.backward(batch, trace, dlogits, dh_tap);
      if (cfg.optimizer == OptimizerKind::kSgd) {
        sgd_step(model.params(), grads, lr);
      } else {
        adamw_step(model.params(), grads, state.m, state.v, step + 1, lr, cfg.adamw);
      }
      ++state.global_step;

      if (cfg.eval_every > 0 && state.global_step % cfg.eval_every == 0 &&
          state.global_step < total_steps) {
        maybe_eval(state.global_step);
      }
      if (cfg.max_steps > 0 && state.global_step >= cfg.max_steps) {
        stopped = true;
        break;
      }
    }
  }

  maybe_eval(state.global_step);

  if (to_disk) {
    record.final_checkpoint = (fs::path(io.run_dir) / "checkpoints" / "last.json").string();
    save_checkpoint(record.final_checkpoint, model, fingerprint, &state);
    if (record.best_checkpoint.empty()) record.best_checkpoint = record.final_checkpoint;

    std::vector<EvalReport> reports;
    if (!record.evals.empty()) {
      const auto best = std::max_element(
          record.evals.begin(), record.evals.end(),
          [](const EvalPoint& a, const EvalPoint& b) { return a.report.c_f < b.report.c_f; });
      reports.push_back(best->report);
    }
    std::ofstream metrics(fs::path(io.run_dir) / "metrics.csv");
    metrics << metrics_csv(reports);
  }
  return record;
}

std::vector<SweepRow> sweep_alpha(const TrainData& data, const Lexicon& lex,
                                  const BackboneConfig& backbone, const TrainConfig& base,
                                  const std::vector<std::pair<double, std::string>>& alphas,
                                  const std::string& out_dir, int jobs) {
  if (alphas.empty()) throw DataError("alpha sweep needs at least one value");
  if (data.dev.empty()) throw DataError("alpha sweep needs a dev split to evaluate");
  if (jobs < 1) jobs = 1;

  std::vector<SweepRow> rows(alphas.size());
  std::vector<std::exception_ptr> errors(alphas.size());
  std::size_t next = 0;
  std::mutex mu;

  auto worker = [&]() {
    while (true) {
      std::size_t idx;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= alphas.size()) return;
        idx = next++;
      }
      try {
        const auto& [alpha, label] = alphas[idx];
        TrainConfig cfg = base;
        cfg.rcl.alpha = alpha;
        Model model(backbone);
        TrainIo io;
        if (!out_dir.empty()) {
          io.run_dir = (fs::path(out_dir) / ("alpha_" + label)).string();
        }
        RunRecord record = train(data, lex, model, cfg, io);
        EvalReport best;
        double best_cf = -1.0;
        for (const auto& ev : record.evals) {
          if (ev.report.c_f > best_cf) {
            best_cf = ev.report.c_f;
            best = ev.report;
          }
        }
        rows[idx] = {alpha, label, best};
      } catch (...) {
        errors[idx] = std::current_exception();
      }
    }
  };

  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }

  std::sort(rows.begin(), rows.end(),
            [](const SweepRow& a, const SweepRow& b) { return a.alpha < b.alpha; });
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream csv(fs::path(out_dir) / "sweep.csv");
    csv << sweep_csv(rows);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "alpha,d_p,d_r,d_f,c_p,c_r,c_f\n";
  char buf[200];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.1f,%.1f,%.1f,%.1f,%.1f,%.1f\n", r.label.c_str(),
                  r.report.d_p, r.report.d_r, r.report.d_f, r.report.c_p, r.report.c_r,
                  r.report.c_f);
    out += buf;
  }
  return out;
}

}  // namespace csc
