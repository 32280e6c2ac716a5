#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csc/lexicon.h"

namespace csc {

// Parallel (misspelled, corrected) sentence. Non-autoregressive task: both
// sides always have equal length in characters.
struct SentencePair {
  std::vector<CharId> source;
  std::vector<CharId> target;

  std::vector<int> error_positions() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (source[i] != target[i]) out.push_back(static_cast<int>(i));
    }
    return out;
  }
  bool has_errors() const {
    for (std::size_t i = 0; i < source.size(); ++i) {
      if (source[i] != target[i]) return true;
    }
    return false;
  }
};

// Back-pointer from a flattened character anchor into its sentence.
struct AnchorRef {
  int pair;
  int pos;
};

// A minibatch: sentences plus the flat view of their K character anchors,
// enumerated in (pair, position) order.
struct Batch {
  std::vector<SentencePair> pairs;
  std::vector<AnchorRef> anchors;

  int K() const { return static_cast<int>(anchors.size()); }
  CharId source_char(int anchor) const {
    const AnchorRef& a = anchors[anchor];
    return pairs[a.pair].source[a.pos];
  }
  CharId target_char(int anchor) const {
    const AnchorRef& a = anchors[anchor];
    return pairs[a.pair].target[a.pos];
  }
};

struct CorpusOptions {
  bool allow_missing_pinyin = false;
  int max_sentence_len = 128;
};

struct Corpus {
  std::vector<SentencePair> pairs;
  std::size_t unknown_chars = 0;  // codepoints mapped to UNK
};

// Maps text to CharIds; simplification is applied first when the lexicon
// carries a map. Unknown codepoints become UNK and bump *unknown.
std::vector<CharId> tokenize(const std::string& text, const Lexicon& lex,
                             std::size_t* unknown = nullptr);
std::string detokenize(std::span<const CharId> ids, const Lexicon& lex);

// Loads a TSV corpus of source<TAB>target lines. Length mismatches and
// over-long sentences are hard errors naming the line. Chinese characters
// without a pinyin entry are an error unless allow_missing_pinyin is set.
Corpus load_corpus(const std::string& path, const Lexicon& lex, const CorpusOptions& opts = {});

struct ErrorMix {
  double p_pinyin = 0.5;
  double p_confusion = 0.5;
};

struct InjectStats {
  std::size_t characters = 0;
  std::size_t corrupted = 0;
  std::size_t via_pinyin = 0;
  std::size_t via_confusion = 0;
};

// Corrupts each character independently with probability error_rate. A
// corruption draws a same-pinyin vocabulary character (excluding the
// original) with probability mix.p_pinyin, else a confusion-set member; a
// position whose drawn candidate pool is empty is left unchanged.
// Deterministic under seed.
std::vector<SentencePair> inject_errors(const std::vector<std::vector<CharId>>& targets,
                                        const Lexicon& lex, double error_rate, ErrorMix mix,
                                        std::uint64_t seed, InjectStats* stats = nullptr);

// Single batch over the given sentences, anchors in (pair, position) order.
Batch make_batch(std::vector<SentencePair> pairs);

// Seeded shuffle, then fixed-size batches; the last partial batch is kept.
std::vector<Batch> make_batches(std::vector<SentencePair> pairs, int batch_size,
                                std::uint64_t shuffle_seed);

}  // namespace csc
