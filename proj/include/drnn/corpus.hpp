#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace drnn {

using TokenId = std::uint32_t;
using Sentence = std::vector<std::string>;
using TokenSequence = std::vector<TokenId>;

inline constexpr std::size_t kDefaultVocabBudget = 4000;

// Frequency-sorted word index. The three special tokens always occupy the
// highest ids, in the order start, end, unknown.
class Vocabulary {
 public:
  static constexpr std::string_view kSentenceStart = "SENTENCE_START";
  static constexpr std::string_view kSentenceEnd = "SENTENCE_END";
  static constexpr std::string_view kUnknown = "UNKNOWN_TOKEN";

  Vocabulary() = default;
  // `words` are the ordinary words in id order; specials are appended.
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const noexcept { return words_.size(); }
  const std::vector<std::string>& words() const noexcept { return words_; }

  TokenId start_id() const noexcept { return static_cast<TokenId>(words_.size() - 3); }
  TokenId end_id() const noexcept { return static_cast<TokenId>(words_.size() - 2); }
  TokenId unknown_id() const noexcept { return static_cast<TokenId>(words_.size() - 1); }

  bool contains(std::string_view word) const;
  // Out-of-vocabulary words map to the unknown token.
  TokenId encode(std::string_view word) const;
  TokenSequence encode(const Sentence& sentence) const;
  const std::string& decode(TokenId id) const;

  // One word per line; line number is the token id.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_of_;
};

struct TrainingPair {
  TokenSequence input;
  TokenSequence label;
};

// Lowercases, splits sentences on . ! ? and words on whitespace. Terminal
// and other punctuation characters become their own tokens.
std::vector<Sentence> tokenize(std::string_view text);

// Keeps the `max_words` most frequent words; ties go to the word seen first.
Vocabulary build_vocab(const std::vector<Sentence>& sentences,
                       std::size_t max_words = kDefaultVocabBudget);

// input = START + sentence, label = sentence + END.
TrainingPair make_training_pair(const TokenSequence& encoded, const Vocabulary& vocab);
std::vector<TrainingPair> make_training_pairs(const std::vector<Sentence>& sentences,
                                              const Vocabulary& vocab);

std::string read_text_file(const std::filesystem::path& path);

// Encoded corpus: one sentence per line, space separated token ids.
void save_token_file(const std::vector<TokenSequence>& sentences,
                     const std::filesystem::path& path);
std::vector<TokenSequence> load_token_file(const std::filesystem::path& path);

}  // namespace drnn
