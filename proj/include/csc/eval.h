#pragma once

#include <string>
#include <vector>

#include "csc/corpus.h"
#include "csc/lexicon.h"

namespace csc {

enum class Granularity { kSentence, kCharacter };

std::string granularity_name(Granularity g);
Granularity parse_granularity(const std::string& name);  // throws DataError

struct MetricCounts {
  std::int64_t tp = 0;
  std::int64_t flagged = 0;
  std::int64_t gold = 0;
};

// Detection/correction precision, recall, F1 as percentages. Precision with
// nothing flagged is 0, not 100: a silent model earns no credit.
struct EvalReport {
  Granularity granularity = Granularity::kSentence;
  double d_p = 0, d_r = 0, d_f = 0;
  double c_p = 0, c_r = 0, c_f = 0;
  MetricCounts detection;
  MetricCounts correction;
};

// Sentence granularity: detection credits an exact match of the predicted
// error-position set, correction an exact match of the whole target;
// character granularity applies the per-position analogues.
EvalReport evaluate(const std::vector<SentencePair>& pairs,
                    const std::vector<std::vector<CharId>>& predictions, Granularity granularity);

// Reverts any edit touching 的/地/得: positions where source or prediction
// is one of the three particles and they differ go back to the source
// character. Idempotent.
std::vector<std::vector<CharId>> postfilter_de(const std::vector<std::vector<CharId>>& predictions,
                                               const std::vector<std::vector<CharId>>& sources,
                                               const Lexicon& lex);

enum class Mark { kNone, kCorrectFix, kMissed, kWrongFix, kFalseAlarm };

struct SystemDiff {
  std::vector<CharId> prediction;
  std::vector<Mark> marks;
};

struct CaseDiff {
  int index = 0;  // sentence index in the evaluated set
  std::vector<CharId> input;
  std::vector<CharId> gold;
  SystemDiff a;
  SystemDiff b;
};

// Side-by-side comparison of two systems; emits only sentences where the
// two predictions disagree.
std::vector<CaseDiff> case_report(const std::vector<SentencePair>& pairs,
                                  const std::vector<std::vector<CharId>>& predictions_a,
                                  const std::vector<std::vector<CharId>>& predictions_b);

std::string case_report_markdown(const std::vector<CaseDiff>& diffs, const Lexicon& lex);

// Header plus one row per report; percentages with one decimal.
std::string metrics_csv(const std::vector<EvalReport>& reports);

}  // namespace csc
