#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csc/checkpoint.h"
#include "csc/corpus.h"
#include "csc/eval.h"
#include "csc/lexicon.h"
#include "csc/model.h"
#include "csc/rcl.h"

namespace csc {

enum class OptimizerKind { kSgd, kAdamW };

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 16;
  int epochs = 30;
  double warmup_fraction = 0.0;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  AdamWConfig adamw;
  RclConfig rcl;
  std::uint64_t seed = 0;
  int eval_every = 0;          // steps between dev evaluations; 0 = end only
  std::int64_t max_steps = 0;  // stop after this many optimizer steps; 0 = no cap
  Granularity eval_granularity = Granularity::kSentence;

  void validate() const;  // throws DataError
};

struct StepLoss {
  std::int64_t step = 0;
  double lr = 0.0;
  LossBreakdown loss;
};

struct EvalPoint {
  std::int64_t step = 0;
  EvalReport report;
};

struct RunRecord {
  std::vector<StepLoss> steps;
  std::vector<EvalPoint> evals;
  std::string best_checkpoint;
  std::string final_checkpoint;
  std::int64_t total_steps = 0;  // scheduled steps for the full run
};

struct TrainData {
  std::vector<SentencePair> train;
  std::vector<SentencePair> dev;  // may be empty; disables evaluation
};

struct TrainIo {
  std::string run_dir;      // empty = keep everything in memory
  std::string resume_from;  // checkpoint path; overrides model and step
};

// Linear ramp from 0 to base_lr over the warmup steps, then linear decay
// towards 0 at total_steps. warmup_fraction = 0 starts at base_lr.
double scheduled_lr(double base_lr, double warmup_fraction, std::int64_t step,
                    std::int64_t total_steps);

void sgd_step(Parameters& params, const Parameters& grads, double lr);
// t is the 1-based update count for bias correction.
void adamw_step(Parameters& params, const Parameters& grads, Parameters& m, Parameters& v,
                std::int64_t t, double lr, const AdamWConfig& cfg);

// Full optimization loop: per step encode -> logits -> correction loss,
// mine_pairs -> total loss, backprop, scheduled optimizer update. Writes
// config.json, losses.csv, metrics.csv and checkpoints/ when run_dir is
// set. Deterministic given the seed. A non-finite loss aborts with the
// last good parameters checkpointed.
RunRecord train(const TrainData& data, const Lexicon& lex, Model& model, const TrainConfig& cfg,
                const TrainIo& io = {});

struct SweepRow {
  double alpha = 0.0;
  std::string label;  // alpha as given on the command line
  EvalReport report;  // best dev evaluation of that run
};

// One full train+eval per alpha over shared data and seed; rows sorted by
// alpha ascending. jobs > 1 runs entries in parallel threads.
std::vector<SweepRow> sweep_alpha(const TrainData& data, const Lexicon& lex,
                                  const BackboneConfig& backbone, const TrainConfig& base,
                                  const std::vector<std::pair<double, std::string>>& alphas,
                                  const std::string& out_dir, int jobs);

std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace csc
