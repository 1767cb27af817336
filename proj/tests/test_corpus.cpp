#include <doctest.h>

#include <filesystem>
#include <map>
#include <random>

#include "drnn/corpus.hpp"
#include "drnn/error.hpp"

using namespace drnn;

TEST_CASE("tokenize splits sentences and words") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("   \n\t").empty());

  const auto two = tokenize("The cat sat. The cat ran.");
  REQUIRE(two.size() == 2);
  CHECK(two[0] == Sentence{"the", "cat", "sat", "."});
  CHECK(two[1] == Sentence{"the", "cat", "ran", "."});

  CHECK(tokenize("Hi!") == std::vector<Sentence>{{"hi", "!"}});
}

TEST_CASE("tokenize keeps punctuation as separate words") {
  const auto s = tokenize("Well, I don't know?! Maybe");
  REQUIRE(s.size() == 2);
  CHECK(s[0] == Sentence{"well", ",", "i", "don't", "know", "?", "!"});
  CHECK(s[1] == Sentence{"maybe"});
}

TEST_CASE("tokenize rejects invalid UTF-8 and keeps non-ASCII bytes") {
  CHECK_THROWS_AS(tokenize("bad \xC3\x28 byte"), DataError);
  const auto s = tokenize("Caf\xC3\xA9 ouvert.");
  REQUIRE(s.size() == 1);
  CHECK(s[0][0] == "caf\xC3\xA9");
}

TEST_CASE("build_vocab orders by frequency, ties by first occurrence") {
  const std::vector<Sentence> s = {{"the", "cat", "sat", "on", "the", "mat"}};
  const auto v = build_vocab(s, 2);
  REQUIRE(v.size() == 5);
  CHECK(v.words()[0] == "the");
  CHECK(v.words()[1] == "cat");
  CHECK(v.start_id() == 2);
  CHECK(v.end_id() == 3);
  CHECK(v.unknown_id() == 4);
  CHECK(v.decode(2) == "SENTENCE_START");
  CHECK(v.decode(3) == "SENTENCE_END");
  CHECK(v.decode(4) == "UNKNOWN_TOKEN");
  CHECK(v.encode("mat") == v.unknown_id());
}

TEST_CASE("build_vocab with fewer distinct words than the budget") {
  const std::vector<Sentence> s = {{"a", "a", "a", "a", "a"}};
  CHECK(build_vocab(s, 10).size() == 4);
}

TEST_CASE("build_vocab rejects an empty budget") {
  CHECK_THROWS_WITH_AS(build_vocab({{"a"}}, 0), doctest::Contains("empty vocabulary"), UsageError);
}

TEST_CASE("make_training_pairs shifts labels by one") {
  const auto v = build_vocab({{"hi"}}, 10);
  const auto pairs = make_training_pairs({{"hi"}}, v);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].input == TokenSequence{v.start_id(), v.encode("hi")});
  CHECK(pairs[0].label == TokenSequence{v.encode("hi"), v.end_id()});

  const auto oov = make_training_pairs({{"hi", "zebra"}}, v);
  CHECK(oov[0].input[2] == v.unknown_id());
  CHECK(oov[0].label[1] == v.unknown_id());
}

TEST_CASE("vocabulary and pair invariants on random corpora") {
  std::mt19937_64 rng(7);
  const std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Sentence> sentences(1 + rng() % 6);
    for (auto& s : sentences) {
      s.resize(1 + rng() % 8);
      // skewed draw so frequencies differ
      for (auto& w : s) w = pool[std::min(rng() % pool.size(), rng() % pool.size())];
    }
    const std::size_t budget = 1 + rng() % 8;
    const auto v = build_vocab(sentences, budget);

    std::map<std::string, std::size_t> freq;
    for (const auto& s : sentences) {
      for (const auto& w : s) ++freq[w];
    }
    CHECK(v.size() == std::min(budget, freq.size()) + 3);
    for (std::size_t i = 0; i + 3 < v.size(); ++i) {
      CHECK(v.decode(v.encode(v.words()[i])) == v.words()[i]);
      if (i + 4 < v.size()) CHECK(freq[v.words()[i]] >= freq[v.words()[i + 1]]);
    }

    for (const auto& p : make_training_pairs(sentences, v)) {
      REQUIRE(p.input.size() == p.label.size());
      CHECK(p.input.front() == v.start_id());
      CHECK(p.label.back() == v.end_id());
      for (std::size_t t = 0; t + 1 < p.input.size(); ++t) CHECK(p.label[t] == p.input[t + 1]);
      for (auto id : p.input) CHECK(id < v.size());
    }
  }
}

TEST_CASE("vocabulary and token files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "drnn_corpus_test";
  std::filesystem::create_directories(dir);
  const auto v = build_vocab(tokenize("b a b c. a b!"), 10);
  v.save(dir / "vocab.txt");
  const auto loaded = Vocabulary::load(dir / "vocab.txt");
  CHECK(loaded.words() == v.words());

  const std::vector<TokenSequence> seqs = {{0, 1, 2}, {3}, {1, 1}};
  save_token_file(seqs, dir / "tokens.txt");
  CHECK(load_token_file(dir / "tokens.txt") == seqs);

  CHECK_THROWS_AS(Vocabulary::load(dir / "missing.txt"), DataError);
  std::filesystem::remove_all(dir);
}
