#include "csc/corpus.h"

#include <fstream>

#include "csc/errors.h"
#include "csc/rng.h"
#include "csc/utf8.h"

namespace csc {

std::vector<CharId> tokenize(const std::string& text, const Lexicon& lex, std::size_t* unknown) {
  std::u32string cps = utf8_decode(text);
  std::vector<CharId> ids;
  ids.reserve(cps.size());
  for (char32_t cp : cps) {
    if (lex.has_simp_map()) cp = lex.simplify_codepoint(cp);
    const CharId id = lex.id_of(cp);
    if (id == kUnkId && unknown != nullptr) ++*unknown;
    ids.push_back(id);
  }
  return ids;
}

std::string detokenize(std::span<const CharId> ids, const Lexicon& lex) {
  std::string out;
  for (CharId id : ids) out += utf8_encode(lex.codepoint(id));
  return out;
}

Corpus load_corpus(const std::string& path, const Lexicon& lex, const CorpusOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);

  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto where = path + ":" + std::to_string(lineno) + ": ";
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError(where + "expected source<TAB>target");

    SentencePair pair;
    pair.source = tokenize(line.substr(0, tab), lex, &corpus.unknown_chars);
    pair.target = tokenize(line.substr(tab + 1), lex, &corpus.unknown_chars);
    if (pair.source.size() != pair.target.size()) {
      throw DataError(where + "source and target lengths differ (" +
                      std::to_string(pair.source.size()) + " vs " +
                      std::to_string(pair.target.size()) + ")");
    }
    if (pair.source.empty()) throw DataError(where + "empty sentence");
    if (static_cast<int>(pair.source.size()) > opts.max_sentence_len) {
      throw DataError(where + "sentence longer than " + std::to_string(opts.max_sentence_len) +
                      " characters");
    }
    if (!opts.allow_missing_pinyin) {
      for (const auto& side : {pair.source, pair.target}) {
        for (CharId id : side) {
          if (id > kUnkId && is_cjk(lex.codepoint(id)) && lex.pinyin(id).empty()) {
            throw DataError(where + "character '" + utf8_encode(lex.codepoint(id)) +
                            "' has no pinyin entry (pass --allow-missing-pinyin to permit)");
          }
        }
      }
    }
    corpus.pairs.push_back(std::move(pair));
  }
  return corpus;
}

std::vector<SentencePair> inject_errors(const std::vector<std::vector<CharId>>& targets,
                                        const Lexicon& lex, double error_rate, ErrorMix mix,
                                        std::uint64_t seed, InjectStats* stats) {
  if (error_rate < 0.0 || error_rate > 1.0) throw DataError("error rate must be in [0, 1]");
  const double mix_sum = mix.p_pinyin + mix.p_confusion;
  if (mix.p_pinyin < 0.0 || mix.p_confusion < 0.0 || std::abs(mix_sum - 1.0) > 1e-9) {
    throw DataError("error mix probabilities must be non-negative and sum to 1");
  }

  Rng rng(seed);
  InjectStats local;
  std::vector<SentencePair> out;
  out.reserve(targets.size());
  for (const auto& clean : targets) {
    SentencePair pair;
    pair.target = clean;
    pair.source = clean;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      ++local.characters;
      const CharId original = clean[i];
      if (original <= kUnkId) continue;
      if (!rng.bernoulli(error_rate)) continue;
      const bool use_pinyin_route = rng.bernoulli(mix.p_pinyin);
      if (use_pinyin_route) {
        const auto& group = lex.homophones(lex.pinyin(original));
        // group includes the original; candidates exclude it
        const std::size_t n = group.size();
        std::size_t candidates = 0;
        for (CharId c : group) candidates += (c != original) ? 1 : 0;
        if (candidates == 0) continue;
        std::size_t pick = rng.below(candidates);
        for (std::size_t g = 0; g < n; ++g) {
          if (group[g] == original) continue;
          if (pick == 0) {
            pair.source[i] = group[g];
            break;
          }
          --pick;
        }
        ++local.corrupted;
        ++local.via_pinyin;
      } else {
        const auto& members = lex.confusion(original);
        if (members.empty()) continue;
        pair.source[i] = members[rng.below(members.size())];
        ++local.corrupted;
        ++local.via_confusion;
      }
    }
    out.push_back(std::move(pair));
  }
  if (stats != nullptr) *stats = local;
  return out;
}

Batch make_batch(std::vector<SentencePair> pairs) {
  Batch batch;
  batch.pairs = std::move(pairs);
  for (std::size_t p = 0; p < batch.pairs.size(); ++p) {
    for (std::size_t i = 0; i < batch.pairs[p].source.size(); ++i) {
      batch.anchors.push_back({static_cast<int>(p), static_cast<int>(i)});
    }
  }
  return batch;
}

std::vector<Batch> make_batches(std::vector<SentencePair> pairs, int batch_size,
                                std::uint64_t shuffle_seed) {
  if (pairs.empty()) throw DataError("cannot batch an empty corpus");
  if (batch_size < 1) throw DataError("batch size must be at least 1");

  Rng rng(shuffle_seed);
  rng.shuffle(pairs);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < pairs.size(); start += batch_size) {
    const std::size_t end = std::min(pairs.size(), start + batch_size);
    batches.push_back(make_batch({pairs.begin() + start, pairs.begin() + end}));
  }
  return batches;
}

}  // namespace csc
