#include "csc/cli.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "csc/checkpoint.h"
#include "csc/corpus.h"
#include "csc/errors.h"
#include "csc/eval.h"
#include "csc/lexicon.h"
#include "csc/model.h"
#include "csc/rcl.h"
#include "csc/rng.h"
#include "csc/train.h"
#include "csc/utf8.h"
#include "json.hpp"

namespace csc::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct LexiconFlags {
  std::string vocab, pinyin, confusion, simp_map;
  bool allow_missing_pinyin = false;
  bool symmetrize_confusion = false;
};

void add_lexicon_flags(CLI::App* cmd, LexiconFlags& flags) {
  cmd->add_option("--vocab", flags.vocab, "vocabulary file (one codepoint per line)");
  cmd->add_option("--pinyin", flags.pinyin, "pinyin TSV (char<TAB>syllable)");
  cmd->add_option("--confusion", flags.confusion, "confusion TSV (char<TAB>members)");
  cmd->add_option("--simp-map", flags.simp_map, "traditional-to-simplified TSV");
  cmd->add_flag("--allow-missing-pinyin", flags.allow_missing_pinyin,
                "map Chinese characters without a pinyin entry to the no-pinyin sentinel");
  cmd->add_flag("--symmetrize-confusion", flags.symmetrize_confusion,
                "close confusion sets under symmetry");
}

// Flag defaults come last: explicit flags beat the config file, which beats
// the environment (CSC_DATA_DIR).
Lexicon load_lexicon_from_flags(const LexiconFlags& flags) {
  LexiconPaths paths{flags.vocab, flags.pinyin, flags.confusion, flags.simp_map};
  const char* env = std::getenv("CSC_DATA_DIR");
  if (env != nullptr) {
    const fs::path dir(env);
    if (paths.vocab.empty()) paths.vocab = (dir / "vocab.txt").string();
    if (paths.pinyin.empty()) paths.pinyin = (dir / "pinyin.tsv").string();
    if (paths.confusion.empty()) paths.confusion = (dir / "confusion.tsv").string();
    if (paths.simp_map.empty()) {
      const fs::path simp = dir / "simp_map.tsv";
      if (fs::exists(simp)) paths.simp_map = simp.string();
    }
  }
  if (paths.vocab.empty() || paths.pinyin.empty() || paths.confusion.empty()) {
    throw CLI::ValidationError(
        "lexicon", "missing --vocab/--pinyin/--confusion (or set CSC_DATA_DIR)");
  }
  LexiconOptions opts;
  opts.symmetrize_confusion = flags.symmetrize_confusion;
  return load_lexicon(paths, opts);
}

struct TrainFlags {
  std::string config_file;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  double tau = 0.0;
  bool use_pinyin = true;
  bool use_confusion = true;
  bool exclude_identical = true;
  int batch_size = 0;
  int epochs = 0;
  double lr = 0.0;
  double warmup = -1.0;
  std::string optimizer;
  double weight_decay = -1.0;
  int eval_every = -1;
  int d = 0;
  int layers = 0;
  int heads = 0;
  int tap = -2;
  std::string granularity;
};

void add_train_flags(CLI::App* cmd, TrainFlags& flags) {
  cmd->add_option("--config", flags.config_file, "JSON config file (flags override it)");
  cmd->add_option("--seed", flags.seed, "seed controlling all randomness");
  cmd->add_option("--alpha", flags.alpha, "weight of the reverse contrastive loss");
  cmd->add_option("--tau", flags.tau, "contrastive temperature");
  cmd->add_flag("--use-pinyin,!--no-use-pinyin", flags.use_pinyin, "mine same-pinyin negatives");
  cmd->add_flag("--use-confusion,!--no-use-confusion", flags.use_confusion,
                "mine confusion-set negatives");
  cmd->add_flag("--exclude-identical,!--no-exclude-identical", flags.exclude_identical,
                "drop identical-character pairs from the same-pinyin set");
  cmd->add_option("--batch-size", flags.batch_size, "sentences per batch");
  cmd->add_option("--epochs", flags.epochs, "training epochs");
  cmd->add_option("--lr", flags.lr, "base learning rate");
  cmd->add_option("--warmup", flags.warmup, "warmup fraction of total steps");
  cmd->add_option("--optimizer", flags.optimizer, "sgd or adamw")
      ->check(CLI::IsMember({"sgd", "adamw"}));
  cmd->add_option("--weight-decay", flags.weight_decay, "adamw weight decay");
  cmd->add_option("--eval-every", flags.eval_every, "steps between dev evaluations (0 = end)");
  cmd->add_option("--d", flags.d, "hidden width");
  cmd->add_option("--layers", flags.layers, "encoder layers");
  cmd->add_option("--heads", flags.heads, "attention heads");
  cmd->add_option("--tap", flags.tap, "layer output feeding the contrastive loss (-1 = last)");
  cmd->add_option("--granularity", flags.granularity, "sentence or character")
      ->check(CLI::IsMember({"sentence", "character"}));
}

// defaults < config file < explicit flags
void resolve_configs(const CLI::App* cmd, const TrainFlags& flags, TrainConfig& train_cfg,
                     BackboneConfig& backbone) {
  if (!flags.config_file.empty()) {
    std::ifstream in(flags.config_file);
    if (!in) throw DataError("cannot open config file " + flags.config_file);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw DataError(flags.config_file + ": invalid JSON: " + std::string(e.what()));
    }
    if (j.contains("lr")) train_cfg.lr = j["lr"].get<double>();
    if (j.contains("batch_size")) train_cfg.batch_size = j["batch_size"].get<int>();
    if (j.contains("epochs")) train_cfg.epochs = j["epochs"].get<int>();
    if (j.contains("warmup_fraction")) train_cfg.warmup_fraction = j["warmup_fraction"].get<double>();
    if (j.contains("optimizer")) {
      const std::string name = j["optimizer"].get<std::string>();
      if (name != "sgd" && name != "adamw") throw DataError("config optimizer must be sgd or adamw");
      train_cfg.optimizer = name == "sgd" ? OptimizerKind::kSgd : OptimizerKind::kAdamW;
    }
    if (j.contains("adamw")) {
      const json& a = j["adamw"];
      if (a.contains("beta1")) train_cfg.adamw.beta1 = a["beta1"].get<double>();
      if (a.contains("beta2")) train_cfg.adamw.beta2 = a["beta2"].get<double>();
      if (a.contains("eps")) train_cfg.adamw.eps = a["eps"].get<double>();
      if (a.contains("weight_decay")) train_cfg.adamw.weight_decay = a["weight_decay"].get<double>();
    }
    if (j.contains("rcl")) {
      const json& r = j["rcl"];
      if (r.contains("tau")) train_cfg.rcl.tau = r["tau"].get<double>();
      if (r.contains("alpha")) train_cfg.rcl.alpha = r["alpha"].get<double>();
      if (r.contains("use_pinyin")) train_cfg.rcl.use_pinyin = r["use_pinyin"].get<bool>();
      if (r.contains("use_confusion")) train_cfg.rcl.use_confusion = r["use_confusion"].get<bool>();
      if (r.contains("exclude_identical")) {
        train_cfg.rcl.exclude_identical = r["exclude_identical"].get<bool>();
      }
    }
    if (j.contains("seed")) train_cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("eval_every")) train_cfg.eval_every = j["eval_every"].get<int>();
    if (j.contains("eval_granularity")) {
      train_cfg.eval_granularity = parse_granularity(j["eval_granularity"].get<std::string>());
    }
    if (j.contains("backbone")) {
      const json& b = j["backbone"];
      if (b.contains("d")) backbone.d = b["d"].get<int>();
      if (b.contains("layers")) backbone.layers = b["layers"].get<int>();
      if (b.contains("heads")) backbone.heads = b["heads"].get<int>();
      if (b.contains("representation_tap")) {
        backbone.representation_tap = b["representation_tap"].get<int>();
      }
    }
  }

  if (cmd->count("--seed")) train_cfg.seed = flags.seed;
  if (cmd->count("--alpha")) train_cfg.rcl.alpha = flags.alpha;
  if (cmd->count("--tau")) train_cfg.rcl.tau = flags.tau;
  if (cmd->count("--use-pinyin") || cmd->count("--no-use-pinyin")) {
    train_cfg.rcl.use_pinyin = flags.use_pinyin;
  }
  if (cmd->count("--use-confusion") || cmd->count("--no-use-confusion")) {
    train_cfg.rcl.use_confusion = flags.use_confusion;
  }
  if (cmd->count("--exclude-identical") || cmd->count("--no-exclude-identical")) {
    train_cfg.rcl.exclude_identical = flags.exclude_identical;
  }
  if (cmd->count("--batch-size")) train_cfg.batch_size = flags.batch_size;
  if (cmd->count("--epochs")) train_cfg.epochs = flags.epochs;
  if (cmd->count("--lr")) train_cfg.lr = flags.lr;
  if (cmd->count("--warmup")) train_cfg.warmup_fraction = flags.warmup;
  if (cmd->count("--optimizer")) {
    train_cfg.optimizer = flags.optimizer == "sgd" ? OptimizerKind::kSgd : OptimizerKind::kAdamW;
  }
  if (cmd->count("--weight-decay")) train_cfg.adamw.weight_decay = flags.weight_decay;
  if (cmd->count("--eval-every")) train_cfg.eval_every = flags.eval_every;
  if (cmd->count("--d")) backbone.d = flags.d;
  if (cmd->count("--layers")) backbone.layers = flags.layers;
  if (cmd->count("--heads")) backbone.heads = flags.heads;
  if (cmd->count("--tap")) backbone.representation_tap = flags.tap;
  if (cmd->count("--granularity")) {
    train_cfg.eval_granularity = parse_granularity(flags.granularity);
  }
  backbone.seed = train_cfg.seed;
}

std::vector<std::vector<CharId>> read_sentences(const std::string& path, const Lexicon& lex) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::vector<CharId>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(tokenize(line, lex));
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
  if (!out) throw DataError("failed writing " + path);
}

// --- gen ------------------------------------------------------------------

int cmd_gen(const LexiconFlags& lex_flags, const std::string& clean_path,
            const std::string& out_path, double error_rate, double mix_pinyin,
            std::uint64_t seed) {
  const Lexicon lex = load_lexicon_from_flags(lex_flags);

  std::ifstream in(clean_path, std::ios::binary);
  if (!in) throw DataError("cannot open " + clean_path);
  std::vector<std::vector<CharId>> clean;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t unknown = 0;
    auto ids = tokenize(line, lex, &unknown);
    if (unknown > 0) {
      throw DataError(clean_path + ":" + std::to_string(lineno) +
                      ": sentence contains characters outside the vocabulary");
    }
    clean.push_back(std::move(ids));
  }
  if (clean.empty()) throw DataError(clean_path + ": no sentences");

  InjectStats stats;
  const ErrorMix mix{mix_pinyin, 1.0 - mix_pinyin};
  const auto pairs = inject_errors(clean, lex, error_rate, mix, seed, &stats);

  std::string tsv;
  for (const auto& pair : pairs) {
    tsv += detokenize(pair.source, lex);
    tsv += '\t';
    tsv += detokenize(pair.target, lex);
    tsv += '\n';
  }
  write_text_file(out_path, tsv);

  json sidecar = {
      {"seed", seed},
      {"error_rate", error_rate},
      {"mix", {{"p_pinyin", mix.p_pinyin}, {"p_confusion", mix.p_confusion}}},
      {"counts",
       {{"sentences", pairs.size()},
        {"characters", stats.characters},
        {"corrupted", stats.corrupted},
        {"via_pinyin", stats.via_pinyin},
        {"via_confusion", stats.via_confusion}}},
  };
  write_text_file(out_path + ".json", sidecar.dump(2) + "\n");
  return 0;
}

// --- train ----------------------------------------------------------------

int cmd_train(const CLI::App* cmd, const LexiconFlags& lex_flags, const TrainFlags& flags,
              const std::string& corpus_path, const std::string& dev_path,
              const std::string& out_dir, const std::string& resume, std::ostream& out) {
  const Lexicon lex = load_lexicon_from_flags(lex_flags);
  CorpusOptions copts;
  copts.allow_missing_pinyin = lex_flags.allow_missing_pinyin;

  TrainData data;
  data.train = load_corpus(corpus_path, lex, copts).pairs;
  if (!dev_path.empty()) data.dev = load_corpus(dev_path, lex, copts).pairs;

  TrainConfig train_cfg;
  BackboneConfig backbone;
  backbone.vocab_size = lex.vocab_size();
  resolve_configs(cmd, flags, train_cfg, backbone);

  Model model(backbone);
  TrainIo io;
  io.run_dir = out_dir;
  io.resume_from = resume;
  const RunRecord record = train(data, lex, model, train_cfg, io);

  out << "steps=" << record.steps.size() << " final_total=" << record.steps.back().loss.total
      << " checkpoint=" << record.final_checkpoint << '\n';
  return 0;
}

// --- eval -----------------------------------------------------------------

int cmd_eval(const LexiconFlags& lex_flags, const std::string& corpus_path,
             const std::string& checkpoint_path, const std::string& granularity,
             bool postfilter, const std::string& out_path, const std::string& preds_path,
             std::ostream& out) {
  const Lexicon lex = load_lexicon_from_flags(lex_flags);
  CorpusOptions copts;
  copts.allow_missing_pinyin = lex_flags.allow_missing_pinyin;
  const Corpus corpus = load_corpus(corpus_path, lex, copts);

  const Model model = load_checkpoint(checkpoint_path, lex).model;
  std::vector<std::vector<CharId>> sources;
  sources.reserve(corpus.pairs.size());
  for (const auto& pair : corpus.pairs) sources.push_back(pair.source);

  auto predictions = model.predict(sources);
  if (postfilter) predictions = postfilter_de(predictions, sources, lex);

  std::vector<EvalReport> reports;
  if (granularity == "both") {
    reports.push_back(evaluate(corpus.pairs, predictions, Granularity::kSentence));
    reports.push_back(evaluate(corpus.pairs, predictions, Granularity::kCharacter));
  } else {
    reports.push_back(evaluate(corpus.pairs, predictions, parse_granularity(granularity)));
  }

  const std::string csv = metrics_csv(reports);
  if (out_path.empty()) {
    out << csv;
  } else {
    write_text_file(out_path, csv);
  }
  if (!preds_path.empty()) {
    std::string text;
    for (const auto& pred : predictions) {
      text += detokenize(pred, lex);
      text += '\n';
    }
    write_text_file(preds_path, text);
  }
  return 0;
}

// --- sweep ----------------------------------------------------------------

std::vector<std::pair<double, std::string>> parse_alphas(const std::string& csv) {
  std::vector<std::pair<double, std::string>> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::string token =
        csv.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (token.empty()) throw DataError("empty alpha in --alphas");
    try {
      std::size_t used = 0;
      const double v = std::stod(token, &used);
      if (used != token.size() || v < 0.0) throw std::invalid_argument(token);
      out.emplace_back(v, token);
    } catch (const std::exception&) {
      throw DataError("invalid alpha '" + token + "' in --alphas");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

int cmd_sweep(const CLI::App* cmd, const LexiconFlags& lex_flags, const TrainFlags& flags,
              const std::string& corpus_path, const std::string& dev_path,
              const std::string& alphas_csv, const std::string& out_dir, int jobs,
              double dev_fraction, std::ostream& out) {
  const Lexicon lex = load_lexicon_from_flags(lex_flags);
  CorpusOptions copts;
  copts.allow_missing_pinyin = lex_flags.allow_missing_pinyin;

  TrainData data;
  data.train = load_corpus(corpus_path, lex, copts).pairs;
  TrainConfig train_cfg;
  BackboneConfig backbone;
  backbone.vocab_size = lex.vocab_size();
  resolve_configs(cmd, flags, train_cfg, backbone);

  if (!dev_path.empty()) {
    data.dev = load_corpus(dev_path, lex, copts).pairs;
  } else {
    // carve a held-out split off the end of a seeded shuffle
    Rng rng(mix_seed(train_cfg.seed, 0xde5));
    rng.shuffle(data.train);
    const std::size_t dev_n =
        std::max<std::size_t>(1, static_cast<std::size_t>(data.train.size() * dev_fraction));
    if (dev_n >= data.train.size()) throw DataError("corpus too small to carve a dev split");
    data.dev.assign(data.train.end() - dev_n, data.train.end());
    data.train.resize(data.train.size() - dev_n);
  }

  const auto alphas = parse_alphas(alphas_csv);
  const auto rows = sweep_alpha(data, lex, backbone, train_cfg, alphas, out_dir, jobs);
  out << sweep_csv(rows);
  return 0;
}

// --- pairs ----------------------------------------------------------------

int cmd_pairs(const LexiconFlags& lex_flags, const RclConfig& rcl, std::uint64_t seed,
              const std::string& corpus_path, int batch_size, const std::string& out_path,
              std::ostream& out) {
  const Lexicon lex = load_lexicon_from_flags(lex_flags);
  CorpusOptions copts;
  copts.allow_missing_pinyin = lex_flags.allow_missing_pinyin;
  const Corpus corpus = load_corpus(corpus_path, lex, copts);

  const auto batches = make_batches(corpus.pairs, batch_size, seed);
  json dump = json::array();
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const Batch& batch = batches[b];
    const NegativeSets sets = mine_pairs(batch, lex, rcl);
    json anchors = json::array();
    for (int i = 0; i < batch.K(); ++i) {
      const CharId c = batch.source_char(i);
      anchors.push_back({{"anchor_index", i},
                         {"char", utf8_encode(lex.codepoint(c))},
                         {"pinyin", lex.pinyin(c)},
                         {"S", sets.s[i]},
                         {"W", sets.w[i]}});
    }
    dump.push_back({{"batch", b}, {"anchors", std::move(anchors)}});
  }
  const std::string text = dump.dump(2) + "\n";
  if (out_path.empty()) {
    out << text;
  } else {
    write_text_file(out_path, text);
  }
  return 0;
}

// --- casediff ---------------------------------------------------------------

int cmd_casediff(const LexiconFlags& lex_flags, const std::string& corpus_path,
                 const std::string& a_path, const std::string& b_path,
                 const std::string& out_path, std::ostream& out) {
  const Lexicon lex = load_lexicon_from_flags(lex_flags);
  CorpusOptions copts;
  copts.allow_missing_pinyin = lex_flags.allow_missing_pinyin;
  const Corpus corpus = load_corpus(corpus_path, lex, copts);

  const auto preds_a = read_sentences(a_path, lex);
  const auto preds_b = read_sentences(b_path, lex);
  const auto diffs = case_report(corpus.pairs, preds_a, preds_b);
  const std::string text = case_report_markdown(diffs, lex);
  if (out_path.empty()) {
    out << text;
  } else {
    write_text_file(out_path, text);
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chinese spelling check trainer with reverse contrastive learning"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "inject confusable errors into a clean corpus");
  LexiconFlags gen_lex;
  add_lexicon_flags(gen, gen_lex);
  std::string gen_clean, gen_out;
  double gen_error_rate = 0.1, gen_mix_pinyin = 0.5;
  std::uint64_t gen_seed = 0;
  gen->add_option("--clean", gen_clean, "clean sentences, one per line")->required();
  gen->add_option("--out", gen_out, "output corpus TSV")->required();
  gen->add_option("--error-rate", gen_error_rate, "per-character corruption probability");
  gen->add_option("--mix-pinyin", gen_mix_pinyin, "probability of the same-pinyin route");
  gen->add_option("--seed", gen_seed, "generator seed");

  // train
  auto* train_cmd = app.add_subcommand("train", "train a correction model");
  LexiconFlags train_lex;
  TrainFlags train_flags;
  add_lexicon_flags(train_cmd, train_lex);
  add_train_flags(train_cmd, train_flags);
  std::string train_corpus, train_dev, train_out, train_resume;
  train_cmd->add_option("--corpus", train_corpus, "training corpus TSV")->required();
  train_cmd->add_option("--dev", train_dev, "dev corpus TSV for evaluation");
  train_cmd->add_option("--out", train_out, "run directory")->required();
  train_cmd->add_option("--resume", train_resume, "checkpoint to resume from");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
  LexiconFlags eval_lex;
  add_lexicon_flags(eval_cmd, eval_lex);
  std::string eval_corpus, eval_checkpoint, eval_gran = "sentence", eval_out, eval_preds;
  bool eval_postfilter = false;
  eval_cmd->add_option("--corpus", eval_corpus, "test corpus TSV")->required();
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--granularity", eval_gran, "sentence, character or both")
      ->check(CLI::IsMember({"sentence", "character", "both"}));
  eval_cmd->add_flag("--postfilter-de", eval_postfilter, "revert edits touching 的/地/得");
  eval_cmd->add_option("--out", eval_out, "metrics CSV path (default stdout)");
  eval_cmd->add_option("--write-preds", eval_preds, "write predictions, one per line");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "train once per alpha and tabulate dev metrics");
  LexiconFlags sweep_lex;
  TrainFlags sweep_flags;
  add_lexicon_flags(sweep_cmd, sweep_lex);
  add_train_flags(sweep_cmd, sweep_flags);
  std::string sweep_corpus, sweep_dev, sweep_alphas, sweep_out;
  int sweep_jobs = 1;
  double sweep_dev_fraction = 0.1;
  sweep_cmd->add_option("--corpus", sweep_corpus, "training corpus TSV")->required();
  sweep_cmd->add_option("--dev", sweep_dev, "dev corpus TSV (default: carve --dev-fraction)");
  sweep_cmd->add_option("--alphas", sweep_alphas, "comma-separated alpha grid")->required();
  sweep_cmd->add_option("--out", sweep_out, "sweep output directory")->required();
  sweep_cmd->add_option("--jobs", sweep_jobs, "parallel training runs");
  sweep_cmd->add_option("--dev-fraction", sweep_dev_fraction, "held-out fraction when no --dev");

  // pairs
  auto* pairs_cmd = app.add_subcommand("pairs", "dump mined negative pairs as JSON");
  LexiconFlags pairs_lex;
  add_lexicon_flags(pairs_cmd, pairs_lex);
  std::string pairs_corpus, pairs_out;
  int pairs_batch_size = 8;
  std::uint64_t pairs_seed = 0;
  RclConfig pairs_rcl;
  pairs_cmd->add_option("--corpus", pairs_corpus, "corpus TSV")->required();
  pairs_cmd->add_option("--batch-size", pairs_batch_size, "sentences per batch");
  pairs_cmd->add_option("--seed", pairs_seed, "batch shuffle seed");
  pairs_cmd->add_flag("--use-pinyin,!--no-use-pinyin", pairs_rcl.use_pinyin,
                      "mine same-pinyin negatives");
  pairs_cmd->add_flag("--use-confusion,!--no-use-confusion", pairs_rcl.use_confusion,
                      "mine confusion-set negatives");
  pairs_cmd->add_flag("--exclude-identical,!--no-exclude-identical", pairs_rcl.exclude_identical,
                      "drop identical-character pairs from the same-pinyin set");
  pairs_cmd->add_option("--out", pairs_out, "JSON path (default stdout)");

  // casediff
  auto* diff_cmd = app.add_subcommand("casediff", "compare two systems' predictions");
  LexiconFlags diff_lex;
  add_lexicon_flags(diff_cmd, diff_lex);
  std::string diff_corpus, diff_a, diff_b, diff_out;
  diff_cmd->add_option("--corpus", diff_corpus, "corpus TSV with gold targets")->required();
  diff_cmd->add_option("--a", diff_a, "system A predictions, one per line")->required();
  diff_cmd->add_option("--b", diff_b, "system B predictions, one per line")->required();
  diff_cmd->add_option("--out", diff_out, "markdown path (default stdout)");

  auto status_ok = [&err]() { err << "csc: status=ok code=0\n"; };
  auto status_error = [&err](int code, const std::string& msg) {
    err << "csc: status=error code=" << code << " msg=\"" << msg << "\"\n";
  };

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    status_ok();
    return 0;
  } catch (const CLI::ParseError& e) {
    status_error(1, e.what());
    return 1;
  }

  try {
    int rc = 0;
    if (gen->parsed()) {
      rc = cmd_gen(gen_lex, gen_clean, gen_out, gen_error_rate, gen_mix_pinyin, gen_seed);
    } else if (train_cmd->parsed()) {
      rc = cmd_train(train_cmd, train_lex, train_flags, train_corpus, train_dev, train_out,
                     train_resume, out);
    } else if (eval_cmd->parsed()) {
      rc = cmd_eval(eval_lex, eval_corpus, eval_checkpoint, eval_gran, eval_postfilter, eval_out,
                    eval_preds, out);
    } else if (sweep_cmd->parsed()) {
      rc = cmd_sweep(sweep_cmd, sweep_lex, sweep_flags, sweep_corpus, sweep_dev, sweep_alphas,
                     sweep_out, sweep_jobs, sweep_dev_fraction, out);
    } else if (pairs_cmd->parsed()) {
      rc = cmd_pairs(pairs_lex, pairs_rcl, pairs_seed, pairs_corpus, pairs_batch_size, pairs_out,
                     out);
    } else if (diff_cmd->parsed()) {
      rc = cmd_casediff(diff_lex, diff_corpus, diff_a, diff_b, diff_out, out);
    }
    status_ok();
    return rc;
  } catch (const NumericError& e) {
    status_error(3, e.what());
    return 3;
  } catch (const DataError& e) {
    status_error(2, e.what());
    return 2;
  } catch (const CLI::Error& e) {
    status_error(1, e.what());
    return 1;
  } catch (const std::exception& e) {
    status_error(2, e.what());
    return 2;
  }
}

}  // namespace csc::cli
