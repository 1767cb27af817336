#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "drnn/corpus.hpp"
#include "drnn/error.hpp"
#include "drnn/training.hpp"
#include "oracles.hpp"

using namespace drnn;

namespace {

TrainingPair pair_of(std::initializer_list<TokenId> input, std::initializer_list<TokenId> label) {
  return {TokenSequence(input), TokenSequence(label)};
}

// Relative error with a floor on the denominator for entries that are
// numerically zero on both sides.
double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-7}); }

const char* kTenSentences =
    "The cat sat on the mat. The dog sat on the mat. A cat ran home. A dog ran home. "
    "The cat saw the dog. The dog saw the cat. My cat likes the mat. My dog likes the park. "
    "The cat ran to the park. The dog ran to the mat.";

}  // namespace

TEST_CASE("cross_entropy") {
  const Vector uniform = Vector::Constant(4000, 1.0 / 4000.0);
  CHECK(cross_entropy(uniform, 17) == doctest::Approx(8.29405).epsilon(1e-6));
  CHECK(std::abs(cross_entropy(uniform, 17) - std::log(4000.0)) < 1e-8);

  Vector sure = Vector::Zero(3);
  sure[1] = 1.0;
  CHECK(std::abs(cross_entropy(sure, 1)) < 1e-11);
  Vector e = Vector::Zero(2);
  e << 1.0 / std::exp(1.0), 1.0 - 1.0 / std::exp(1.0);
  CHECK(cross_entropy(e, 0) == doctest::Approx(1.0).epsilon(1e-10));
  // floor keeps a zero probability finite
  CHECK(std::isfinite(cross_entropy(Vector::Zero(3), 0)));
  CHECK_THROWS_AS(cross_entropy(uniform, 4000), UsageError);
}

TEST_CASE("sequence_loss") {
  const std::size_t k = 10;
  const std::vector<Vector> outs(6, Vector::Constant(k, 0.1));
  CHECK(sequence_loss(outs, {0, 1, 2, 3, 4, 5}) == doctest::Approx(6 * std::log(10.0)).epsilon(1e-10));
  CHECK(sequence_loss({}, {}) == 0.0);
  CHECK(sequence_loss({outs[0]}, {3}) == cross_entropy(outs[0], 3));
  CHECK_THROWS_AS(sequence_loss(outs, {0, 1}), UsageError);
}

TEST_CASE("bptt matches finite differences of the scalar oracle") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto p = oracle::random_params(8, 4, seed, 0.5);
    const auto pair = pair_of({5, 0, 3, 3, 1}, {0, 3, 3, 1, 6});
    const auto [loss, grads] = bptt_gradients(p, pair);
    CHECK(loss == doctest::Approx(oracle::sequence_loss(p, pair)).epsilon(1e-12));

    const auto analytic = oracle::flatten(grads);
    const auto numeric = oracle::finite_difference_gradients(p, pair, 1e-5);
    REQUIRE(analytic.size() == numeric.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) worst = std::max(worst, rel_err(analytic[i], numeric[i]));
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("output projection gradient is the softmax/cross-entropy identity") {
  const auto p = oracle::random_params(6, 3, 8);
  const auto pair = pair_of({4}, {2});
  const auto [loss, grads] = bptt_gradients(p, pair);
  const auto fwd = stack_forward(p, pair.input);
  Vector d = fwd.outputs[0];
  d[2] -= 1.0;
  const Matrix expected = d * fwd.states[0].layers[2].h.transpose();
  CHECK((grads.output - expected).cwiseAbs().maxCoeff() < 1e-10);
  // length-1 pair: loss is that step's cross entropy
  CHECK(loss == cross_entropy(fwd.outputs[0], 2));
  bool finite = true;
  grads.for_each_array([&](const std::string&, const auto& a) { finite = finite && a.allFinite(); });
  CHECK(finite);
}

TEST_CASE("bptt errors") {
  const auto p = oracle::random_params(6, 3, 8);
  CHECK_THROWS_AS(bptt_gradients(p, pair_of({1, 2}, {2})), UsageError);
  CHECK_THROWS_AS(bptt_gradients(p, pair_of({1}, {6})), UsageError);
  CHECK_THROWS_AS(bptt_gradients(p, pair_of({}, {})), UsageError);
}

TEST_CASE("sgd_step") {
  auto p = oracle::random_params(6, 3, 4);
  const auto before = p;
  sgd_step(p, Gradients::zeros_like(p), 0.1);
  CHECK(oracle::flatten(p) == oracle::flatten(before));

  auto one = LstmStackParams::zeros(5, 2);
  one.output.setConstant(1.0);
  auto g = Gradients::zeros_like(one);
  g.output.setConstant(0.5);
  sgd_step(one, g, 0.1);
  CHECK(one.output(0, 0) == doctest::Approx(0.95).epsilon(1e-15));

  g.output(1, 1) = std::nan("");
  const auto snapshot = oracle::flatten(one);
  CHECK_THROWS_WITH_AS(sgd_step(one, g, 0.1), doctest::Contains("diverged"), DivergenceError);
  CHECK(oracle::flatten(one) == snapshot);
  CHECK_THROWS_AS(sgd_step(one, Gradients::zeros_like(one), 0.0), UsageError);
}

TEST_CASE("one sgd step decreases the loss of its pair") {
  auto p = init_params(10, 6, 42);
  const auto pair = pair_of({7, 1, 4, 2}, {1, 4, 2, 8});
  for (int i = 0; i < 5; ++i) {
    const auto [loss, grads] = bptt_gradients(p, pair);
    sgd_step(p, grads, 1e-3);
    const auto after = stack_forward(p, pair.input);
    CHECK(sequence_loss(after.outputs, pair.label) < loss);
  }
}

TEST_CASE("perplexity and sentence scoring") {
  CHECK(perplexity(0.0, 5) == 1.0);
  CHECK(perplexity(10 * std::log(7.0), 10) == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(std::log(3500.0) == doctest::Approx(8.16).epsilon(1e-3));
  CHECK_THROWS_AS(perplexity(1.0, 0), UsageError);

  const auto uniform = LstmStackParams::zeros(40, 4);
  CHECK(score_sentence(uniform, {}) == doctest::Approx(std::log(1.0 / 40)).epsilon(1e-9));
  const std::vector<TrainingPair> pairs = {pair_of({37, 1, 2}, {1, 2, 38}), pair_of({37, 5}, {5, 38})};
  CHECK(evaluate(uniform, pairs).perplexity() == doctest::Approx(40.0).epsilon(1e-9));

  const auto p = oracle::random_params(12, 5, 9);
  const TokenSequence words = {3, 1, 4, 1, 5};
  // Chain-rule log-probability of each prefix, from one forward pass.
  TokenSequence input = {9};
  input.insert(input.end(), words.begin(), words.end());
  const auto full = stack_forward(p, input);
  double prefix_lp = 0.0;
  for (std::size_t t = 0; t < words.size(); ++t) {
    const double next = prefix_lp + std::log(full.outputs[t][words[t]] + kLossFloor);
    CHECK(next <= prefix_lp);
    prefix_lp = next;

    const TokenSequence s(words.begin(), words.begin() + static_cast<long>(t) + 1);
    TrainingPair pair{{9}, s};
    pair.input.insert(pair.input.end(), s.begin(), s.end());
    pair.label.push_back(10);
    const auto fwd = stack_forward(p, pair.input);
    CHECK(score_sentence(p, s) == -sequence_loss(fwd.outputs, pair.label));
    CHECK(score_sentence(p, s) <= 0.0);
  }
}

TEST_CASE("init_params follows the fan-in rule") {
  const auto p = init_params(30, 8, 1);
  CHECK(p.layers[0].input[0].cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(30.0));
  CHECK(p.layers[1].recurrent[2].cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
  CHECK(p.output.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
  CHECK(p.layers[2].bias[3].isZero());
  CHECK(oracle::flatten(init_params(30, 8, 1)) == oracle::flatten(p));
  CHECK(oracle::flatten(init_params(30, 8, 2)) != oracle::flatten(p));
}

TEST_CASE("train") {
  const auto sentences = tokenize(kTenSentences);
  REQUIRE(sentences.size() == 10);
  const auto vocab = build_vocab(sentences, 50);
  const auto pairs = make_training_pairs(sentences, vocab);

  SUBCASE("one epoch on one pair is one bptt plus one sgd step") {
    auto a = init_params(vocab.size(), 5, 3);
    auto b = a;
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.learning_rate = 0.01;
    const auto log = train(a, {pairs[0]}, cfg);
    const auto [loss, grads] = bptt_gradients(b, pairs[0]);
    sgd_step(b, grads, 0.01);
    CHECK(oracle::flatten(a) == oracle::flatten(b));
    REQUIRE(log.epochs.size() == 1);
    CHECK(log.epochs[0].mean_loss == loss / pairs[0].label.size());
  }

  SUBCASE("loss decreases over 50 epochs and the log is consistent") {
    auto p = init_params(vocab.size(), 16, 7);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.learning_rate = 0.02;
    cfg.eval_interval = 25;
    cfg.rng_seed = 7;
    const auto log = train(p, pairs, cfg);
    REQUIRE(log.epochs.size() == 50);
    CHECK(log.epochs.back().mean_loss < log.epochs.front().mean_loss);
    CHECK(log.intervals.front().step == 0);
    CHECK(log.intervals.front().perplexity == doctest::Approx(double(vocab.size())).epsilon(0.05));
    CHECK(log.intervals.back().perplexity < log.intervals.front().perplexity);
    CHECK(log.intervals.size() == 1 + 500 / 25);
    for (const auto* records : {&log.epochs, &log.intervals}) {
      for (const auto& r : *records) CHECK(std::abs(r.perplexity - std::exp(r.mean_loss)) <= 1e-9 * r.perplexity);
    }

    auto q = init_params(vocab.size(), 16, 7);
    const auto again = train(q, pairs, cfg);
    std::ostringstream a, b;
    TrainingLog::write_csv(a, log.epochs);
    TrainingLog::write_csv(b, again.epochs);
    CHECK(a.str() == b.str());
    CHECK(oracle::flatten(p) == oracle::flatten(q));
  }

  SUBCASE("divergence reports the step") {
    auto p = init_params(vocab.size(), 4, 1);
    p.output(0, 0) = std::numeric_limits<double>::infinity();
    TrainConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train(p, pairs, cfg), UsageError);  // rejected up front as non-finite

    // Finite parameters whose logits overflow: saturated top-layer gates give
    // h > 0.76 everywhere, so a row of V near the double maximum reaches inf.
    auto q = init_params(vocab.size(), 4, 1);
    for (auto g : {kForget, kInput, kOutput, kCandidate}) q.layers[2].bias[g].setConstant(10.0);
    q.output.row(0).setConstant(1e308);
    try {
      train(q, pairs, cfg);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(e.step() < pairs.size());
      CHECK(std::string(e.what()).find("diverged") != std::string::npos);
    }
  }

  SUBCASE("config validation") {
    auto p = init_params(vocab.size(), 4, 1);
    TrainConfig cfg;
    cfg.epochs = 0;
    CHECK_THROWS_AS(train(p, pairs, cfg), UsageError);
    cfg.epochs = 1;
    CHECK_THROWS_AS(train(p, {}, cfg), UsageError);
  }
}

TEST_CASE("generate") {
  const auto p = init_params(20, 6, 5);
  GenerateOptions opt;
  opt.max_len = 1;
  CHECK(generate(p, opt).size() == 1);
  opt.max_len = 30;
  opt.seed = 12;
  const auto a = generate(p, opt);
  CHECK(a == generate(p, opt));
  CHECK(!a.empty());
  for (auto id : a) {
    CHECK(id < 20);
    CHECK(id != 17);  // start token is never emitted
  }
  if (a.size() < 30) CHECK(a.back() == 18);
  opt.greedy = true;
  CHECK(generate(p, opt) == generate(p, opt));
}
