#include "test_support.h"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "csc/errors.h"
#include "csc/utf8.h"

namespace csc::test {

namespace fs = std::filesystem;

namespace {

std::uint64_t unique_suffix() {
  static std::atomic<std::uint64_t> counter{0};
  return counter.fetch_add(1) + static_cast<std::uint64_t>(
                                    std::chrono::steady_clock::now().time_since_epoch().count());
}

}  // namespace

TempDir::TempDir() {
  path_ = fs::temp_directory_path() / ("csc_test_" + std::to_string(unique_suffix()));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string TempDir::file(const std::string& name, const std::string& content) const {
  const std::string full = (path_ / name).string();
  std::ofstream out(full, std::ios::binary);
  out << content;
  return full;
}

std::string TempDir::join(const std::string& name) const { return (path_ / name).string(); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Lexicon write_lexicon(const TempDir& dir, const LexiconSpec& spec, const LexiconOptions& opts) {
  std::string vocab, pinyin, confusion;
  for (std::size_t i = 0; i < spec.chars.size(); ++i) {
    vocab += utf8_encode(spec.chars[i]);
    vocab += '\n';
    if (i < spec.pinyin.size() && !spec.pinyin[i].empty()) {
      pinyin += utf8_encode(spec.chars[i]);
      pinyin += '\t';
      pinyin += spec.pinyin[i];
      pinyin += '\n';
    }
    if (i < spec.confusion.size() && !spec.confusion[i].empty()) {
      confusion += utf8_encode(spec.chars[i]);
      confusion += '\t';
      for (char32_t m : spec.confusion[i]) confusion += utf8_encode(m);
      confusion += '\n';
    }
  }
  LexiconPaths paths;
  paths.vocab = dir.file("vocab.txt", vocab);
  paths.pinyin = dir.file("pinyin.tsv", pinyin);
  paths.confusion = dir.file("confusion.tsv", confusion);
  return load_lexicon(paths, opts);
}

Lexicon make_fig1_lexicon(const TempDir& dir) {
  LexiconSpec spec;
  spec.chars = {U'喜', U'希', U'舞', U'无', U'欢', U'观', U'欣'};
  spec.pinyin = {"xi", "xi", "wu", "wu", "huan", "guan", "xin"};
  spec.confusion = {{}, {}, {}, {}, {U'观', U'欣'}, {}, {}};
  return write_lexicon(dir, spec);
}

Lexicon make_random_lexicon(const TempDir& dir, int chars, int keys, Rng& rng) {
  static const char* kInitials[] = {"b", "p", "m", "f", "d", "t", "n", "l", "g", "k",
                                    "h", "j", "q", "x", "zh", "ch", "sh", "r", "z", "c"};
  static const char* kFinals[] = {"a", "o", "e", "i", "u", "ai", "ei", "ao", "ou", "an"};

  LexiconSpec spec;
  for (int i = 0; i < chars; ++i) spec.chars.push_back(static_cast<char32_t>(0x4e00 + i));
  // two non-Chinese entries: no pinyin, no confusion
  spec.chars.push_back(U'a');
  spec.chars.push_back(U'!');

  std::vector<std::string> pool;
  for (int k = 0; k < keys; ++k) {
    pool.push_back(std::string(kInitials[k % 20]) + kFinals[(k / 20) % 10]);
  }
  for (int i = 0; i < chars; ++i) spec.pinyin.push_back(pool[rng.below(pool.size())]);
  spec.pinyin.push_back("");
  spec.pinyin.push_back("");

  for (int i = 0; i < chars; ++i) {
    std::vector<char32_t> members;
    const int n = static_cast<int>(rng.below(3));  // 0..2 members
    for (int k = 0; k < n; ++k) {
      const int other = static_cast<int>(rng.below(chars));
      if (other != i) members.push_back(spec.chars[other]);
    }
    spec.confusion.push_back(members);
  }
  return write_lexicon(dir, spec);
}

NegativeSets brute_force_pairs(const Batch& batch, const Lexicon& lex, const RclConfig& cfg) {
  const int k = batch.K();
  NegativeSets sets;
  sets.s.resize(k);
  sets.w.resize(k);
  for (int i = 0; i < k; ++i) {
    const CharId ci = batch.source_char(i);
    if (ci == kPadId || ci == kUnkId) continue;
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      const CharId cj = batch.source_char(j);
      if (cj == kPadId || cj == kUnkId) continue;
      if (cfg.use_pinyin && same_pinyin(ci, cj, lex)) {
        if (!(cfg.exclude_identical && ci == cj)) sets.s[i].push_back(j);
      }
      if (cfg.use_confusion && in_confusion(ci, cj, lex)) sets.w[i].push_back(j);
    }
  }
  return sets;
}

double naive_set_loss(const HiddenStates& h, const std::vector<int>& members, int i, double tau) {
  if (members.empty()) return 0.0;
  auto cosine = [&h](int a, int b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int c = 0; c < h.cols; ++c) {
      dot += h.at(a, c) * h.at(b, c);
      na += h.at(a, c) * h.at(a, c);
      nb += h.at(b, c) * h.at(b, c);
    }
    return dot / (std::sqrt(na) * std::sqrt(nb));
  };
  double denom = 0.0;
  for (int k = 0; k < h.rows; ++k) {
    if (k == i) continue;
    denom += std::exp(cosine(i, k) / tau);
  }
  double acc = 0.0;
  for (int s : members) acc += std::log(std::exp(cosine(i, s) / tau) / denom);
  return -acc / static_cast<double>(members.size());
}

double naive_rcl_total(const HiddenStates& h, const NegativeSets& sets, double tau) {
  double total = 0.0;
  for (int i = 0; i < h.rows; ++i) {
    total += naive_set_loss(h, sets.s[i], i, tau) + naive_set_loss(h, sets.w[i], i, tau);
  }
  return total;
}

double rel_err(double a, double b, double floor) {
  return std::abs(a - b) / std::max({floor, std::abs(a), std::abs(b)});
}

GradCheck check_gradients(Parameters& params, const Parameters& analytic,
                          const std::function<double()>& loss_fn, double step) {
  GradCheck result;
  std::vector<std::pair<std::string, Matrix*>> tensors;
  params.for_each([&tensors](const std::string& name, Matrix& m) {
    tensors.emplace_back(name, &m);
  });
  std::vector<const Matrix*> grads;
  analytic.for_each(
      [&grads](const std::string&, const Matrix& m) { grads.push_back(&m); });

  for (std::size_t t = 0; t < tensors.size(); ++t) {
    Matrix& m = *tensors[t].second;
    const Matrix& g = *grads[t];
    for (std::size_t idx = 0; idx < m.data.size(); ++idx) {
      const double saved = m.data[idx];
      m.data[idx] = saved + step;
      const double up = loss_fn();
      m.data[idx] = saved - step;
      const double down = loss_fn();
      m.data[idx] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double rel = rel_err(fd, g.data[idx]);
      if (rel > result.max_rel) {
        result.max_rel = rel;
        result.worst_tensor = tensors[t].first + "[" + std::to_string(idx) + "]";
      }
    }
  }
  return result;
}

GradCheck check_matrix_gradients(Matrix& x, const Matrix& analytic,
                                 const std::function<double()>& loss_fn, double step) {
  GradCheck result;
  for (std::size_t idx = 0; idx < x.data.size(); ++idx) {
    const double saved = x.data[idx];
    x.data[idx] = saved + step;
    const double up = loss_fn();
    x.data[idx] = saved - step;
    const double down = loss_fn();
    x.data[idx] = saved;
    const double fd = (up - down) / (2.0 * step);
    const double rel = rel_err(fd, analytic.data[idx]);
    if (rel > result.max_rel) {
      result.max_rel = rel;
      result.worst_tensor = "h[" + std::to_string(idx) + "]";
    }
  }
  return result;
}

SyntheticTask make_synthetic_task(const TempDir& dir, int vocab_chars, int keys, int words,
                                  int train_sentences, int dev_sentences, std::uint64_t seed) {
  Rng rng(seed);

  LexiconSpec spec;
  for (int i = 0; i < vocab_chars; ++i) spec.chars.push_back(static_cast<char32_t>(0x4e00 + i));

  // evenly sized homophone groups: char i shares a key with i +- keys
  static const char* kInitials[] = {"b",  "p",  "m",  "f", "d", "t", "n", "l", "g",
                                    "k",  "h",  "j",  "q", "x", "zh", "ch", "sh", "r",
                                    "z",  "c",  "s",  "y", "w", "br", "gr"};
  static const char* kFinals[] = {"a", "o", "e", "i", "u", "ai", "ei", "ao", "ou", "an",
                                  "en", "ang", "eng", "ong", "er"};
  if (keys > 375) throw DataError("synthetic task supports at most 375 pinyin keys");
  for (int i = 0; i < vocab_chars; ++i) {
    const int k = i % keys;
    spec.pinyin.push_back(std::string(kInitials[k % 25]) + kFinals[k / 25]);
  }
  for (int i = 0; i < vocab_chars; ++i) {
    std::vector<char32_t> members;
    for (int k = 0; k < 2; ++k) {
      const int other = static_cast<int>(rng.below(vocab_chars));
      if (other != i) members.push_back(spec.chars[other]);
    }
    spec.confusion.push_back(members);
  }

  SyntheticTask task;
  task.lex = write_lexicon(dir, spec, {});

  // fixed two-character word inventory; sentences are word concatenations
  std::vector<std::array<CharId, 2>> lexicon_words;
  for (int w = 0; w < words; ++w) {
    const CharId a = task.lex.id_of(spec.chars[rng.below(vocab_chars)]);
    const CharId b = task.lex.id_of(spec.chars[rng.below(vocab_chars)]);
    lexicon_words.push_back({a, b});
  }
  auto make_sentences = [&](int count) {
    std::vector<std::vector<CharId>> out;
    for (int s = 0; s < count; ++s) {
      std::vector<CharId> sent;
      const int n_words = 3 + static_cast<int>(rng.below(2));  // 3..4 words
      for (int w = 0; w < n_words; ++w) {
        const auto& word = lexicon_words[rng.below(lexicon_words.size())];
        sent.push_back(word[0]);
        sent.push_back(word[1]);
      }
      out.push_back(std::move(sent));
    }
    return out;
  };
  task.clean_train = make_sentences(train_sentences);
  task.clean_dev = make_sentences(dev_sentences);
  return task;
}

Matrix random_states(int rows, int cols, Rng& rng) {
  Matrix h(rows, cols);
  for (double& v : h.data) v = rng.uniform(-1.0, 1.0);
  for (int i = 0; i < rows; ++i) {
    double norm = 0.0;
    for (double v : h.row(i)) norm += v * v;
    if (std::sqrt(norm) < 0.1) h.at(i, 0) += 1.0;
  }
  return h;
}

}  // namespace csc::test
