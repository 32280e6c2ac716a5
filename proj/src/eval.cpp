#include "csc/eval.h"

#include <cstdio>

#include "csc/errors.h"
#include "csc/utf8.h"

namespace csc {

namespace {

void check_alignment(const std::vector<SentencePair>& pairs,
                     const std::vector<std::vector<CharId>>& predictions) {
  if (pairs.size() != predictions.size()) {
    throw DataError("prediction count " + std::to_string(predictions.size()) +
                    " does not match sentence count " + std::to_string(pairs.size()));
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].source.size() != predictions[i].size()) {
      throw DataError("prediction " + std::to_string(i) + " length " +
                      std::to_string(predictions[i].size()) + " does not match sentence length " +
                      std::to_string(pairs[i].source.size()));
    }
  }
}

void fill_rates(EvalReport& r) {
  auto pct = [](std::int64_t num, std::int64_t den) {
    return den > 0 ? 100.0 * static_cast<double>(num) / static_cast<double>(den) : 0.0;
  };
  auto f1 = [](double p, double rec) { return p + rec > 0.0 ? 2.0 * p * rec / (p + rec) : 0.0; };
  r.d_p = pct(r.detection.tp, r.detection.flagged);
  r.d_r = pct(r.detection.tp, r.detection.gold);
  r.d_f = f1(r.d_p, r.d_r);
  r.c_p = pct(r.correction.tp, r.correction.flagged);
  r.c_r = pct(r.correction.tp, r.correction.gold);
  r.c_f = f1(r.c_p, r.c_r);
}

}  // namespace

std::string granularity_name(Granularity g) {
  return g == Granularity::kSentence ? "sentence" : "character";
}

Granularity parse_granularity(const std::string& name) {
  if (name == "sentence") return Granularity::kSentence;
  if (name == "character") return Granularity::kCharacter;
  throw DataError("unknown granularity '" + name + "' (expected sentence or character)");
}

EvalReport evaluate(const std::vector<SentencePair>& pairs,
                    const std::vector<std::vector<CharId>>& predictions, Granularity granularity) {
  check_alignment(pairs, predictions);

  EvalReport report;
  report.granularity = granularity;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& src = pairs[i].source;
    const auto& tgt = pairs[i].target;
    const auto& pred = predictions[i];

    if (granularity == Granularity::kSentence) {
      bool has_error = false, flagged = false, positions_match = true, corrected = true;
      for (std::size_t p = 0; p < src.size(); ++p) {
        const bool gold_err = src[p] != tgt[p];
        const bool pred_err = pred[p] != src[p];
        has_error = has_error || gold_err;
        flagged = flagged || pred_err;
        positions_match = positions_match && (gold_err == pred_err);
        corrected = corrected && pred[p] == tgt[p];
      }
      report.detection.gold += has_error ? 1 : 0;
      report.correction.gold += has_error ? 1 : 0;
      report.detection.flagged += flagged ? 1 : 0;
      report.correction.flagged += flagged ? 1 : 0;
      report.detection.tp += (has_error && positions_match) ? 1 : 0;
      report.correction.tp += (has_error && corrected) ? 1 : 0;
    } else {
      for (std::size_t p = 0; p < src.size(); ++p) {
        const bool gold_err = src[p] != tgt[p];
        const bool pred_err = pred[p] != src[p];
        report.detection.gold += gold_err ? 1 : 0;
        report.correction.gold += gold_err ? 1 : 0;
        report.detection.flagged += pred_err ? 1 : 0;
        report.correction.flagged += pred_err ? 1 : 0;
        report.detection.tp += (gold_err && pred_err) ? 1 : 0;
        report.correction.tp += (gold_err && pred[p] == tgt[p]) ? 1 : 0;
      }
    }
  }
  fill_rates(report);
  return report;
}

std::vector<std::vector<CharId>> postfilter_de(const std::vector<std::vector<CharId>>& predictions,
                                               const std::vector<std::vector<CharId>>& sources,
                                               const Lexicon& lex) {
  if (predictions.size() != sources.size()) {
    throw DataError("postfilter: prediction/source sentence counts differ");
  }
  std::vector<CharId> particles;
  for (char32_t cp : {U'的', U'地', U'得'}) {  // 的 地 得
    if (lex.has_char(cp)) particles.push_back(lex.id_of(cp));
  }
  auto is_particle = [&particles](CharId id) {
    for (CharId p : particles) {
      if (p == id) return true;
    }
    return false;
  };

  std::vector<std::vector<CharId>> out = predictions;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].size() != sources[i].size()) {
      throw DataError("postfilter: sentence " + std::to_string(i) + " lengths differ");
    }
    for (std::size_t p = 0; p < out[i].size(); ++p) {
      if (out[i][p] != sources[i][p] && (is_particle(out[i][p]) || is_particle(sources[i][p]))) {
        out[i][p] = sources[i][p];
      }
    }
  }
  return out;
}

namespace {

std::vector<Mark> mark_positions(const SentencePair& pair, const std::vector<CharId>& pred) {
  std::vector<Mark> marks(pair.source.size(), Mark::kNone);
  for (std::size_t p = 0; p < pair.source.size(); ++p) {
    const bool gold_err = pair.source[p] != pair.target[p];
    if (gold_err) {
      if (pred[p] == pair.target[p]) {
        marks[p] = Mark::kCorrectFix;
      } else if (pred[p] == pair.source[p]) {
        marks[p] = Mark::kMissed;
      } else {
        marks[p] = Mark::kWrongFix;
      }
    } else if (pred[p] != pair.source[p]) {
      marks[p] = Mark::kFalseAlarm;
    }
  }
  return marks;
}

char mark_letter(Mark m) {
  switch (m) {
    case Mark::kCorrectFix: return 'C';
    case Mark::kMissed: return 'M';
    case Mark::kWrongFix: return 'W';
    case Mark::kFalseAlarm: return 'F';
    case Mark::kNone: return '.';
  }
  return '.';
}

}  // namespace

std::vector<CaseDiff> case_report(const std::vector<SentencePair>& pairs,
                                  const std::vector<std::vector<CharId>>& predictions_a,
                                  const std::vector<std::vector<CharId>>& predictions_b) {
  check_alignment(pairs, predictions_a);
  check_alignment(pairs, predictions_b);

  std::vector<CaseDiff> diffs;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (predictions_a[i] == predictions_b[i]) continue;
    CaseDiff diff;
    diff.index = static_cast<int>(i);
    diff.input = pairs[i].source;
    diff.gold = pairs[i].target;
    diff.a = {predictions_a[i], mark_positions(pairs[i], predictions_a[i])};
    diff.b = {predictions_b[i], mark_positions(pairs[i], predictions_b[i])};
    diffs.push_back(std::move(diff));
  }
  return diffs;
}

std::string case_report_markdown(const std::vector<CaseDiff>& diffs, const Lexicon& lex) {
  std::string out;
  out += "| # | input | gold | A | A marks | B | B marks |\n";
  out += "|---|-------|------|---|---------|---|---------|\n";
  for (const auto& d : diffs) {
    auto text = [&lex](const std::vector<CharId>& ids) { return detokenize(ids, lex); };
    auto marks = [](const std::vector<Mark>& ms) {
      std::string s;
      for (Mark m : ms) s.push_back(mark_letter(m));
      return s;
    };
    out += "| " + std::to_string(d.index) + " | " + text(d.input) + " | " + text(d.gold) + " | " +
           text(d.a.prediction) + " | " + marks(d.a.marks) + " | " + text(d.b.prediction) + " | " +
           marks(d.b.marks) + " |\n";
  }
  out += "\nmarks: C correct fix, M missed, W wrong fix, F false alarm, . untouched\n";
  return out;
}

std::string metrics_csv(const std::vector<EvalReport>& reports) {
  std::string out = "granularity,d_p,d_r,d_f,c_p,c_r,c_f\n";
  char buf[160];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%s,%.1f,%.1f,%.1f,%.1f,%.1f,%.1f\n",
                  granularity_name(r.granularity).c_str(), r.d_p, r.d_r, r.d_f, r.c_p, r.c_r,
                  r.c_f);
    out += buf;
  }
  return out;
}

}  // namespace csc
