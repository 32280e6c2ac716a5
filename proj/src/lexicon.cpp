#include "csc/lexicon.h"

#include <algorithm>
#include <fstream>
#include <set>

#include "csc/errors.h"
#include "csc/utf8.h"

namespace csc {

namespace {

std::string loc(const std::string& file, std::size_t line) {
  return file + ":" + std::to_string(line) + ": ";
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Splits a TSV line into exactly two columns.
std::pair<std::string, std::string> split2(const std::string& file, std::size_t lineno,
                                           const std::string& line) {
  const auto tab = line.find('\t');
  if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
    throw DataError(loc(file, lineno) + "expected exactly two tab-separated columns");
  }
  return {line.substr(0, tab), line.substr(tab + 1)};
}

char32_t single_codepoint(const std::string& file, std::size_t lineno, const std::string& field) {
  const std::u32string cps = utf8_decode(field);
  if (cps.size() != 1) {
    throw DataError(loc(file, lineno) + "character field must be a single codepoint");
  }
  return cps[0];
}

}  // namespace

bool is_cjk(char32_t cp) {
  return (cp >= 0x4e00 && cp <= 0x9fff) ||  // unified ideographs
         (cp >= 0x3400 && cp <= 0x4dbf) ||  // extension A
         (cp >= 0xf900 && cp <= 0xfaff);    // compatibility ideographs
}

std::string strip_tone(std::string_view syllable) {
  const std::u32string cps = utf8_decode(syllable);
  std::string out;
  for (char32_t cp : cps) {
    if (cp >= '0' && cp <= '9') continue;  // tone digit
    if (cp >= 'A' && cp <= 'Z') cp = cp - 'A' + 'a';
    char base = 0;
    switch (cp) {
      case U'ā': case U'á': case U'ǎ': case U'à': base = 'a'; break;
      case U'ē': case U'é': case U'ě': case U'è': base = 'e'; break;
      case U'ī': case U'í': case U'ǐ': case U'ì': base = 'i'; break;
      case U'ō': case U'ó': case U'ǒ': case U'ò': base = 'o'; break;
      case U'ū': case U'ú': case U'ǔ': case U'ù': base = 'u'; break;
      case U'ǖ': case U'ǘ': case U'ǚ': case U'ǜ':
      case U'ü': base = 'v'; break;  // u-umlaut family
      default: break;
    }
    if (base != 0) {
      out.push_back(base);
      continue;
    }
    if (cp < 'a' || cp > 'z') {
      throw DataError("pinyin syllable '" + std::string(syllable) +
                      "' contains a character outside [a-z] after tone stripping");
    }
    out.push_back(static_cast<char>(cp));
  }
  if (out.empty()) {
    throw DataError("pinyin syllable '" + std::string(syllable) + "' is empty after tone stripping");
  }
  return out;
}

const std::vector<CharId>& Lexicon::homophones(const std::string& key) const {
  static const std::vector<CharId> kEmpty;
  if (key.empty()) return kEmpty;
  auto it = pinyin_groups_.find(key);
  return it == pinyin_groups_.end() ? kEmpty : it->second;
}

std::uint64_t Lexicon::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  feed(id_to_cp_.size());
  for (std::size_t id = 0; id < id_to_cp_.size(); ++id) {
    feed(id_to_cp_[id]);
    for (char c : pinyin_[id]) feed(static_cast<unsigned char>(c));
    feed(0x1f);
    for (CharId m : confusion_[id]) feed(static_cast<std::uint64_t>(m));
    feed(0x1e);
  }
  std::vector<std::pair<char32_t, char32_t>> simp(simp_map_.begin(), simp_map_.end());
  std::sort(simp.begin(), simp.end());
  for (auto [t, s] : simp) {
    feed(t);
    feed(s);
  }
  return h;
}

Lexicon load_lexicon(const LexiconPaths& paths, const LexiconOptions& opts) {
  Lexicon lex;
  lex.id_to_cp_.assign(2, 0);  // PAD, UNK

  const auto vocab_lines = read_lines(paths.vocab);
  for (std::size_t i = 0; i < vocab_lines.size(); ++i) {
    const char32_t cp = single_codepoint(paths.vocab, i + 1, vocab_lines[i]);
    const CharId id = static_cast<CharId>(lex.id_to_cp_.size());
    lex.id_to_cp_.push_back(cp);
    auto [it, inserted] = lex.cp_to_id_.emplace(cp, id);
    if (!inserted) {
      it->second = id;  // last wins
      ++lex.stats_.duplicate_vocab_lines;
    }
  }
  const int vocab = lex.vocab_size();
  lex.pinyin_.assign(vocab, std::string());
  lex.confusion_.assign(vocab, {});

  const auto pinyin_lines = read_lines(paths.pinyin);
  for (std::size_t i = 0; i < pinyin_lines.size(); ++i) {
    auto [char_field, syllable] = split2(paths.pinyin, i + 1, pinyin_lines[i]);
    const char32_t cp = single_codepoint(paths.pinyin, i + 1, char_field);
    auto it = lex.cp_to_id_.find(cp);
    if (it == lex.cp_to_id_.end()) {
      throw DataError(loc(paths.pinyin, i + 1) + "character '" + utf8_encode(cp) +
                      "' is not in the vocabulary");
    }
    std::string key;
    try {
      key = strip_tone(syllable);
    } catch (const DataError& e) {
      throw DataError(loc(paths.pinyin, i + 1) + e.what());
    }
    if (!lex.pinyin_[it->second].empty()) {
      ++lex.stats_.duplicate_pinyin_lines;
      if (opts.polyphone_first_reading) continue;
    }
    lex.pinyin_[it->second] = key;
  }
  for (CharId id = 2; id < vocab; ++id) {
    if (!lex.pinyin_[id].empty()) lex.pinyin_groups_[lex.pinyin_[id]].push_back(id);
  }
  for (auto& [key, group] : lex.pinyin_groups_) std::sort(group.begin(), group.end());

  const auto confusion_lines = read_lines(paths.confusion);
  for (std::size_t i = 0; i < confusion_lines.size(); ++i) {
    auto [char_field, members_field] = split2(paths.confusion, i + 1, confusion_lines[i]);
    const char32_t cp = single_codepoint(paths.confusion, i + 1, char_field);
    auto it = lex.cp_to_id_.find(cp);
    if (it == lex.cp_to_id_.end()) {
      throw DataError(loc(paths.confusion, i + 1) + "character '" + utf8_encode(cp) +
                      "' is not in the vocabulary");
    }
    const CharId owner = it->second;
    std::vector<CharId> members;
    std::set<CharId> seen;
    for (char32_t mcp : utf8_decode(members_field)) {
      auto mit = lex.cp_to_id_.find(mcp);
      if (mit == lex.cp_to_id_.end()) {
        throw DataError(loc(paths.confusion, i + 1) + "confusion member '" + utf8_encode(mcp) +
                        "' is not in the vocabulary");
      }
      if (mit->second == owner) {
        ++lex.stats_.self_confusion_dropped;
        continue;
      }
      if (seen.insert(mit->second).second) members.push_back(mit->second);
    }
    if (!lex.confusion_[owner].empty()) ++lex.stats_.duplicate_confusion_lines;
    lex.confusion_[owner] = std::move(members);
  }

  if (opts.symmetrize_confusion) {
    std::vector<std::set<CharId>> closed(vocab);
    for (CharId a = 2; a < vocab; ++a) {
      for (CharId b : lex.confusion_[a]) {
        closed[a].insert(b);
        closed[b].insert(a);
      }
    }
    for (CharId a = 2; a < vocab; ++a) {
      lex.confusion_[a].assign(closed[a].begin(), closed[a].end());
    }
  }

  if (!paths.simp_map.empty()) {
    const auto simp_lines = read_lines(paths.simp_map);
    for (std::size_t i = 0; i < simp_lines.size(); ++i) {
      auto [trad_field, simp_field] = split2(paths.simp_map, i + 1, simp_lines[i]);
      const char32_t trad = single_codepoint(paths.simp_map, i + 1, trad_field);
      const char32_t simp = single_codepoint(paths.simp_map, i + 1, simp_field);
      lex.simp_map_[trad] = simp;
    }
    // A mapped value that is itself a key would make simplify non-idempotent.
    for (const auto& [trad, simp] : lex.simp_map_) {
      if (lex.simp_map_.count(simp)) {
        throw DataError(paths.simp_map + ": simplified form '" + utf8_encode(simp) +
                        "' also appears as a traditional key; map must be idempotent");
      }
    }
  }

  return lex;
}

bool same_pinyin(CharId a, CharId b, const Lexicon& lex) {
  const std::string& ka = lex.pinyin(a);
  const std::string& kb = lex.pinyin(b);
  return !ka.empty() && !kb.empty() && ka == kb;
}

bool in_confusion(CharId anchor, CharId other, const Lexicon& lex) {
  const auto& members = lex.confusion(anchor);
  return std::find(members.begin(), members.end(), other) != members.end();
}

std::string simplify(const std::string& text, const Lexicon& lex) {
  std::u32string cps = utf8_decode(text);
  for (char32_t& cp : cps) cp = lex.simplify_codepoint(cp);
  return utf8_encode(cps);
}

}  // namespace csc
