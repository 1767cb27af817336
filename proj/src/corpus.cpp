#include "drnn/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "drnn/error.hpp"

namespace drnn {

namespace {

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
      return false;
    }
    i += len;
  }
  return true;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u);
}

bool is_terminal(std::string_view tok) { return tok == "." || tok == "!" || tok == "?"; }

// Apostrophes and hyphens stay inside a word when flanked by word characters.
bool is_joiner(std::string_view chunk, std::size_t i) {
  const char c = chunk[i];
  if (c != '\'' && c != '-') return false;
  if (i == 0 || i + 1 >= chunk.size()) return false;
  return !is_ascii_punct(chunk[i - 1]) && !is_ascii_punct(chunk[i + 1]);
}

void split_chunk(std::string_view chunk, std::vector<std::string>& out) {
  std::string word;
  for (std::size_t i = 0; i < chunk.size(); ++i) {
    const char c = chunk[i];
    if (is_ascii_punct(c) && !is_joiner(chunk, i)) {
      if (!word.empty()) out.push_back(std::move(word));
      word.clear();
      out.emplace_back(1, c);
    } else {
      const auto u = static_cast<unsigned char>(c);
      word.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : c);
    }
  }
  if (!word.empty()) out.push_back(std::move(word));
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(std::move(words)) {
  words_.emplace_back(kSentenceStart);
  words_.emplace_back(kSentenceEnd);
  words_.emplace_back(kUnknown);
  index_of_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_of_.emplace(words_[i], static_cast<TokenId>(i)).second) {
      throw DataError("duplicate vocabulary word: " + words_[i]);
    }
  }
}

bool Vocabulary::contains(std::string_view word) const {
  return index_of_.find(std::string(word)) != index_of_.end();
}

TokenId Vocabulary::encode(std::string_view word) const {
  const auto it = index_of_.find(std::string(word));
  return it == index_of_.end() ? unknown_id() : it->second;
}

TokenSequence Vocabulary::encode(const Sentence& sentence) const {
  TokenSequence ids;
  ids.reserve(sentence.size());
  for (const auto& w : sentence) ids.push_back(encode(w));
  return ids;
}

const std::string& Vocabulary::decode(TokenId id) const {
  if (id >= words_.size()) {
    throw UsageError("token id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(words_.size()));
  }
  return words_[id];
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file " + path.string());
  for (const auto& w : words_) out << w << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vocabulary file " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) words.push_back(line);
  if (words.size() < 4 || words[words.size() - 3] != kSentenceStart ||
      words[words.size() - 2] != kSentenceEnd || words.back() != kUnknown) {
    throw DataError("vocabulary file " + path.string() + " does not end with the special tokens");
  }
  words.resize(words.size() - 3);
  return Vocabulary(std::move(words));
}

std::vector<Sentence> tokenize(std::string_view text) {
  if (!is_valid_utf8(text)) throw DataError("input text is not valid UTF-8");

  std::vector<Sentence> sentences;
  Sentence current;
  bool ended = false;
  std::vector<std::string> tokens;

  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t begin = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (begin == i) break;

    tokens.clear();
    split_chunk(text.substr(begin, i - begin), tokens);
    for (auto& tok : tokens) {
      const bool terminal = is_terminal(tok);
      // A run of terminal marks ("?!") closes a single sentence.
      if (ended && !terminal) {
        sentences.push_back(std::move(current));
        current.clear();
        ended = false;
      }
      current.push_back(std::move(tok));
      if (terminal) ended = true;
    }
  }
  if (!current.empty()) sentences.push_back(std::move(current));
  return sentences;
}

Vocabulary build_vocab(const std::vector<Sentence>& sentences, std::size_t max_words) {
  if (max_words == 0) throw UsageError("empty vocabulary: max_words must be at least 1");

  std::unordered_map<std::string, std::size_t> counts;
  std::vector<std::string> order;
  for (const auto& s : sentences) {
    for (const auto& w : s) {
      auto [it, inserted] = counts.try_emplace(w, 0);
      if (inserted) order.push_back(w);
      ++it->second;
    }
  }

  // `order` is already first-occurrence order, so a stable sort breaks ties.
  std::stable_sort(order.begin(), order.end(), [&](const std::string& a, const std::string& b) {
    return counts.at(a) > counts.at(b);
  });
  // Words that collide with the special tokens are dropped.
  std::erase_if(order, [](const std::string& w) {
    return w == Vocabulary::kSentenceStart || w == Vocabulary::kSentenceEnd ||
           w == Vocabulary::kUnknown;
  });
  if (order.size() > max_words) order.resize(max_words);
  return Vocabulary(std::move(order));
}

TrainingPair make_training_pair(const TokenSequence& encoded, const Vocabulary& vocab) {
  TrainingPair pair;
  pair.input.reserve(encoded.size() + 1);
  pair.label.reserve(encoded.size() + 1);
  pair.input.push_back(vocab.start_id());
  for (TokenId id : encoded) {
    if (id >= vocab.size()) {
      throw UsageError("token id " + std::to_string(id) + " outside vocabulary");
    }
    pair.input.push_back(id);
    pair.label.push_back(id);
  }
  pair.label.push_back(vocab.end_id());
  return pair;
}

std::vector<TrainingPair> make_training_pairs(const std::vector<Sentence>& sentences,
                                              const Vocabulary& vocab) {
  if (vocab.size() < 3) throw UsageError("vocabulary not built");
  std::vector<TrainingPair> pairs;
  pairs.reserve(sentences.size());
  for (const auto& s : sentences) pairs.push_back(make_training_pair(vocab.encode(s), vocab));
  return pairs;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_token_file(const std::vector<TokenSequence>& sentences,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write token file " + path.string());
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out << ' ';
      out << s[i];
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<TokenSequence> load_token_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read token file " + path.string());
  std::vector<TokenSequence> sentences;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    TokenSequence ids;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p >= end) break;
      TokenId id = 0;
      auto [next, ec] = std::from_chars(p, end, id);
      if (ec != std::errc{}) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad token id");
      }
      ids.push_back(id);
      p = next;
    }
    if (!ids.empty()) sentences.push_back(std::move(ids));
  }
  return sentences;
}

}  // namespace drnn
