#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace csc {

// Dense vocabulary index. Id 0 is PAD, id 1 is UNK; real characters start at 2.
using CharId = std::int32_t;
inline constexpr CharId kPadId = 0;
inline constexpr CharId kUnkId = 1;

struct LexiconStats {
  std::size_t duplicate_vocab_lines = 0;
  std::size_t duplicate_pinyin_lines = 0;
  std::size_t duplicate_confusion_lines = 0;
  std::size_t self_confusion_dropped = 0;
};

// Character vocabulary, toneless pinyin table, confusion sets and the
// traditional-to-simplified map. Immutable after load; safe to share across
// threads.
class Lexicon {
 public:
  int vocab_size() const { return static_cast<int>(id_to_cp_.size()); }

  bool has_char(char32_t cp) const { return cp_to_id_.count(cp) != 0; }

  // Returns kUnkId for unknown codepoints.
  CharId id_of(char32_t cp) const {
    auto it = cp_to_id_.find(cp);
    return it == cp_to_id_.end() ? kUnkId : it->second;
  }

  // PAD and UNK render as U+FFFD.
  char32_t codepoint(CharId id) const {
    if (id <= kUnkId || id >= vocab_size()) return 0xfffd;
    return id_to_cp_[id];
  }

  // Toneless pinyin key; empty string is the "no pinyin" sentinel, which
  // never matches any key including itself.
  const std::string& pinyin(CharId id) const { return pinyin_[id]; }

  const std::vector<CharId>& confusion(CharId id) const { return confusion_[id]; }

  // All vocabulary characters sharing a pinyin key, ascending by id.
  const std::vector<CharId>& homophones(const std::string& key) const;

  bool has_simp_map() const { return !simp_map_.empty(); }
  char32_t simplify_codepoint(char32_t cp) const {
    auto it = simp_map_.find(cp);
    return it == simp_map_.end() ? cp : it->second;
  }

  // Content hash over vocabulary, pinyin, confusion sets and simp map.
  std::uint64_t fingerprint() const;

  const LexiconStats& stats() const { return stats_; }

 private:
  friend Lexicon load_lexicon(const struct LexiconPaths&, const struct LexiconOptions&);

  std::vector<char32_t> id_to_cp_;
  std::unordered_map<char32_t, CharId> cp_to_id_;
  std::vector<std::string> pinyin_;
  std::vector<std::vector<CharId>> confusion_;
  std::unordered_map<std::string, std::vector<CharId>> pinyin_groups_;
  std::unordered_map<char32_t, char32_t> simp_map_;
  LexiconStats stats_;
};

struct LexiconPaths {
  std::string vocab;
  std::string pinyin;
  std::string confusion;
  std::string simp_map;  // optional; empty = no map
};

struct LexiconOptions {
  bool symmetrize_confusion = false;
  // Polyphonic characters list one reading per line. By default the last
  // listed reading keys the character; set this to keep the first instead.
  bool polyphone_first_reading = false;
};

// File formats:
//   vocab:     one codepoint per line; line n (1-based) gets CharId n+1
//   pinyin:    TSV char<TAB>syllable; tone digits and diacritics stripped
//   confusion: TSV char<TAB>members, members a concatenation of codepoints
//   simp map:  TSV trad<TAB>simp, both single codepoints
// Malformed lines raise DataError naming file and line. Duplicate character
// lines: last one wins, counted in stats.
Lexicon load_lexicon(const LexiconPaths& paths, const LexiconOptions& opts = {});

// True iff both characters carry a pinyin key and the keys are equal.
bool same_pinyin(CharId a, CharId b, const Lexicon& lex);

// True iff other is a member of confusion(anchor). Directional.
bool in_confusion(CharId anchor, CharId other, const Lexicon& lex);

// Per-codepoint traditional-to-simplified mapping; unmapped codepoints pass
// through. Length in codepoints is preserved.
std::string simplify(const std::string& text, const Lexicon& lex);

// Reduces a pinyin syllable to its bare lowercase letter cluster: tone
// digits dropped, tone-marked vowels folded to their base letter, u-umlaut
// to 'v'. Throws DataError if anything outside [a-z] remains.
std::string strip_tone(std::string_view syllable);

// CJK unified ideograph ranges (base block plus extension A and the
// compatibility block). Used to decide which characters require pinyin.
bool is_cjk(char32_t cp);

}  // namespace csc
