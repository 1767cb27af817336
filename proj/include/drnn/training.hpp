#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "drnn/corpus.hpp"
#include "drnn/lm.hpp"

namespace drnn {

// Floor added to the target probability before taking the log.
inline constexpr double kLossFloor = 1e-12;

// Same layout as the parameters, one gradient array per parameter array.
struct Gradients : LstmStackParams {
  Gradients() = default;
  explicit Gradients(LstmStackParams p) : LstmStackParams(std::move(p)) {}
  static Gradients zeros_like(const LstmStackParams& params) {
    return Gradients(LstmStackParams::zeros(params.vocab(), params.hidden()));
  }
};

double cross_entropy(const Vector& prediction, TokenId target);
double sequence_loss(const std::vector<Vector>& outputs, const TokenSequence& labels);

struct BpttResult {
  double loss = 0.0;
  Gradients grads;
};

// Exact gradients of the summed sequence loss, unrolled over every time step
// and all layers.
BpttResult bptt_gradients(const LstmStackParams& params, const TrainingPair& pair);

// theta -= learning_rate * grad for every array. Throws DivergenceError
// (step 0) if any gradient entry is non-finite; params are untouched then.
void sgd_step(LstmStackParams& params, const Gradients& grads, double learning_rate);

double perplexity(double total_loss, std::size_t token_count);

// Log-probability (nats) of a sentence under the START-prefixed chain rule.
// `sentence` excludes the START/END markers; the vocabulary convention puts
// them at ids vocab-3 and vocab-2.
double score_sentence(const LstmStackParams& params, const TokenSequence& sentence);

struct TrainConfig {
  double learning_rate = 0.005;
  std::size_t epochs = 245;
  std::size_t eval_interval = 100;
  std::uint64_t rng_seed = 0;
  bool shuffle = true;

  void validate() const;
};

struct LogRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double mean_loss = 0.0;  // nats per token
  double perplexity = 0.0;
};

struct TrainingLog {
  std::vector<LogRecord> epochs;     // one per completed epoch
  std::vector<LogRecord> intervals;  // step 0, then every eval_interval steps

  static void write_csv(std::ostream& out, const std::vector<LogRecord>& records);
};

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per matrix, biases zero.
LstmStackParams init_params(std::size_t vocab, std::size_t hidden, std::uint64_t seed);

struct EvalResult {
  double total_loss = 0.0;
  std::size_t tokens = 0;
  double mean_loss() const { return total_loss / static_cast<double>(tokens); }
  double perplexity() const;
};

EvalResult evaluate(const LstmStackParams& params, const std::vector<TrainingPair>& pairs);

// Per-sentence SGD over `pairs` for config.epochs epochs, updating params in
// place. Throws DivergenceError carrying the global step index.
TrainingLog train(LstmStackParams& params, const std::vector<TrainingPair>& pairs,
                  const TrainConfig& config);

struct GenerateOptions {
  std::size_t max_len = 20;
  std::uint64_t seed = 0;
  bool greedy = false;
};

// Samples token ids from SENTENCE_START until SENTENCE_END (included) or max_len.
TokenSequence generate(const LstmStackParams& params, const GenerateOptions& options);

}  // namespace drnn
