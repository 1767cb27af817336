#include "drnn/training.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <utility>

#include "drnn/error.hpp"

namespace drnn {

namespace {

// Portable across standard libraries, unlike std::uniform_real_distribution.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename Derived>
void fill_uniform(Eigen::DenseBase<Derived>& m, double limit, std::mt19937_64& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
  }
}

// Calls fn(param_array, grad_array) for every parameter array.
template <typename Params, typename Fn>
void zip_arrays(Params& p, const LstmStackParams& g, Fn&& fn) {
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    for (std::size_t k = 0; k < kNumGates; ++k) {
      fn(p.layers[l].recurrent[k], g.layers[l].recurrent[k]);
      fn(p.layers[l].input[k], g.layers[l].input[k]);
      fn(p.layers[l].bias[k], g.layers[l].bias[k]);
    }
  }
  fn(p.output, g.output);
}

TokenId start_token(const LstmStackParams& p) { return static_cast<TokenId>(p.vocab() - 3); }
TokenId end_token(const LstmStackParams& p) { return static_cast<TokenId>(p.vocab() - 2); }

}  // namespace

double cross_entropy(const Vector& prediction, TokenId target) {
  if (static_cast<Eigen::Index>(target) >= prediction.size()) {
    throw UsageError("cross_entropy: target id " + std::to_string(target) +
                     " outside prediction of size " + std::to_string(prediction.size()));
  }
  return -std::log(prediction[target] + kLossFloor);
}

double sequence_loss(const std::vector<Vector>& outputs, const TokenSequence& labels) {
  if (outputs.size() != labels.size()) {
    throw UsageError("sequence_loss: " + std::to_string(outputs.size()) + " outputs vs " +
                     std::to_string(labels.size()) + " labels");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < outputs.size(); ++t) total += cross_entropy(outputs[t], labels[t]);
  return total;
}

BpttResult bptt_gradients(const LstmStackParams& params, const TrainingPair& pair) {
  params.validate();
  if (pair.input.size() != pair.label.size() || pair.input.empty()) {
    throw UsageError("bptt: input and label must be non-empty and of equal length");
  }
  const auto vocab = static_cast<Eigen::Index>(params.vocab());
  for (TokenId id : pair.label) {
    if (static_cast<Eigen::Index>(id) >= vocab) throw UsageError("bptt: label id outside vocabulary");
  }
  const std::size_t steps = pair.input.size();
  const auto hidden = static_cast<Eigen::Index>(params.hidden());
  constexpr std::size_t top = kNumLayers - 1;

  // Forward pass, keeping every cell trace.
  std::vector<std::array<CellTrace, kNumLayers>> trace(steps);
  std::vector<Vector> probs(steps);
  const Vector zero = Vector::Zero(hidden);
  BpttResult result;
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t l = 0; l < kNumLayers; ++l) {
      const Vector& h_prev = t ? trace[t - 1][l].h : zero;
      const Vector& c_prev = t ? trace[t - 1][l].c : zero;
      trace[t][l] = l == 0 ? lstm_cell_trace(params.layers[0], pair.input[t], h_prev, c_prev)
                           : lstm_cell_trace(params.layers[l], trace[t][l - 1].h, h_prev, c_prev);
    }
    probs[t] = softmax(params.output * trace[t][top].h);
    result.loss += cross_entropy(probs[t], pair.label[t]);
  }

  // Backward pass. dh_next/dc_next carry gradients from step t+1 to step t.
  Gradients& g = result.grads = Gradients::zeros_like(params);
  std::array<Vector, kNumLayers> dh_next;
  std::array<Vector, kNumLayers> dc_next;
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    dh_next[l] = Vector::Zero(hidden);
    dc_next[l] = Vector::Zero(hidden);
  }
  std::array<Vector, kNumGates> da;

  for (std::size_t t = steps; t-- > 0;) {
    // d/dz of -ln(p_y + eps) = p_y / (p_y + eps) * (p - onehot(y)).
    const TokenId y = pair.label[t];
    const double p_y = probs[t][y];
    Vector dz = probs[t];
    dz[y] -= 1.0;
    dz *= p_y / (p_y + kLossFloor);
    g.output.noalias() += dz * trace[t][top].h.transpose();

    Vector dh = params.output.transpose() * dz;
    for (std::size_t l = kNumLayers; l-- > 0;) {
      const CellTrace& cell = trace[t][l];
      const LstmLayerParams& layer = params.layers[l];
      dh += dh_next[l];
      const Vector& c_prev = t ? trace[t - 1][l].c : zero;
      const Vector& h_prev = t ? trace[t - 1][l].h : zero;

      const Vector dc = dh.cwiseProduct(cell.activation[kOutput])
                            .cwiseProduct((1.0 - cell.tanh_c.array().square()).matrix()) +
                        dc_next[l];
      const auto hs_grad = [](double v) { return hard_sigmoid_grad(v); };
      da[kOutput] = dh.cwiseProduct(cell.tanh_c)
                        .cwiseProduct(cell.preactivation[kOutput].unaryExpr(hs_grad));
      da[kForget] = dc.cwiseProduct(c_prev).cwiseProduct(cell.preactivation[kForget].unaryExpr(hs_grad));
      da[kInput] = dc.cwiseProduct(cell.activation[kCandidate])
                       .cwiseProduct(cell.preactivation[kInput].unaryExpr(hs_grad));
      da[kCandidate] = dc.cwiseProduct(cell.activation[kInput])
                           .cwiseProduct((1.0 - cell.activation[kCandidate].array().square()).matrix());
      dc_next[l] = dc.cwiseProduct(cell.activation[kForget]);

      LstmLayerParams& gl = g.layers[l];
      Vector dh_prev = Vector::Zero(hidden);
      Vector dx;
      if (l > 0) dx = Vector::Zero(hidden);
      for (std::size_t k = 0; k < kNumGates; ++k) {
        gl.recurrent[k].noalias() += da[k] * h_prev.transpose();
        gl.bias[k] += da[k];
        dh_prev.noalias() += layer.recurrent[k].transpose() * da[k];
        if (l == 0) {
          gl.input[k].col(pair.input[t]) += da[k];
        } else {
          gl.input[k].noalias() += da[k] * trace[t][l - 1].h.transpose();
          dx.noalias() += layer.input[k].transpose() * da[k];
        }
      }
      dh_next[l] = std::move(dh_prev);
      // The layer below sees this layer's input gradient at the same step.
      if (l > 0) dh = std::move(dx);
    }
  }
  return result;
}

void sgd_step(LstmStackParams& params, const Gradients& grads, double learning_rate) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw UsageError("sgd_step: learning rate must be positive and finite");
  }
  if (grads.vocab() != params.vocab() || grads.hidden() != params.hidden()) {
    throw UsageError("sgd_step: gradient shapes do not match parameters");
  }
  bool finite = true;
  grads.for_each_array([&](const std::string&, const auto& a) { finite = finite && a.allFinite(); });
  if (!finite) throw DivergenceError("diverged: non-finite gradient", 0);

  bool shapes_ok = true;
  zip_arrays(std::as_const(params), grads, [&](const auto& a, const auto& d) {
    shapes_ok = shapes_ok && a.rows() == d.rows() && a.cols() == d.cols();
  });
  if (!shapes_ok) throw UsageError("sgd_step: gradient shapes do not match parameters");
  zip_arrays(params, grads, [&](auto& a, const auto& d) { a -= learning_rate * d; });
}

double perplexity(double total_loss, std::size_t token_count) {
  if (token_count == 0) throw UsageError("perplexity: token count must be at least 1");
  return std::exp(total_loss / static_cast<double>(token_count));
}

double score_sentence(const LstmStackParams& params, const TokenSequence& sentence) {
  TrainingPair pair;
  pair.input.push_back(start_token(params));
  for (TokenId id : sentence) {
    pair.input.push_back(id);
    pair.label.push_back(id);
  }
  pair.label.push_back(end_token(params));
  const auto fwd = stack_forward(params, pair.input);
  return -sequence_loss(fwd.outputs, pair.label);
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw UsageError("learning rate must be positive");
  }
  if (epochs < 1) throw UsageError("epochs must be at least 1");
  if (eval_interval < 1) throw UsageError("eval interval must be at least 1");
}

void TrainingLog::write_csv(std::ostream& out, const std::vector<LogRecord>& records) {
  out << "epoch,step,mean_loss,perplexity\n";
  const auto old_precision = out.precision(17);
  for (const auto& r : records) {
    out << r.epoch << ',' << r.step << ',' << r.mean_loss << ',' << r.perplexity << '\n';
  }
  out.precision(old_precision);
}

LstmStackParams init_params(std::size_t vocab, std::size_t hidden, std::uint64_t seed) {
  if (vocab < 4) throw UsageError("init: vocabulary needs at least one word plus 3 specials");
  if (hidden < 1) throw UsageError("init: hidden size must be at least 1");
  auto p = LstmStackParams::zeros(vocab, hidden);
  std::mt19937_64 rng(seed);
  p.for_each_array([&](const std::string&, auto& a) {
    if constexpr (std::is_same_v<std::decay_t<decltype(a)>, Matrix>) {
      fill_uniform(a, 1.0 / std::sqrt(static_cast<double>(a.cols())), rng);
    }
  });
  return p;
}

double EvalResult::perplexity() const { return drnn::perplexity(total_loss, tokens); }

EvalResult evaluate(const LstmStackParams& params, const std::vector<TrainingPair>& pairs) {
  if (pairs.empty()) throw UsageError("evaluate: empty evaluation set");
  EvalResult r;
  for (const auto& pair : pairs) {
    const auto fwd = stack_forward(params, pair.input);
    r.total_loss += sequence_loss(fwd.outputs, pair.label);
    r.tokens += pair.label.size();
  }
  return r;
}

TrainingLog train(LstmStackParams& params, const std::vector<TrainingPair>& pairs,
                  const TrainConfig& config) {
  config.validate();
  if (pairs.empty()) throw UsageError("train: no training pairs");
  params.validate();

  TrainingLog log;
  const auto initial = evaluate(params, pairs);
  log.intervals.push_back({0, 0, initial.mean_loss(), std::exp(initial.mean_loss())});

  std::mt19937_64 rng(config.rng_seed);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::size_t step = 0;
  double window_loss = 0.0;
  std::size_t window_tokens = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) {
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    }
    double epoch_loss = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t idx : order) {
      const auto& pair = pairs[idx];
      auto [loss, grads] = bptt_gradients(params, pair);
      if (!std::isfinite(loss)) {
        throw DivergenceError("diverged: non-finite loss at step " + std::to_string(step), step);
      }
      try {
        sgd_step(params, grads, config.learning_rate);
      } catch (const DivergenceError&) {
        throw DivergenceError("diverged: non-finite gradient at step " + std::to_string(step), step);
      }
      bool finite = true;
      params.for_each_array([&](const std::string&, const auto& a) { finite = finite && a.allFinite(); });
      if (!finite) {
        throw DivergenceError("diverged: non-finite parameters after step " + std::to_string(step), step);
      }
      ++step;
      epoch_loss += loss;
      epoch_tokens += pair.label.size();
      window_loss += loss;
      window_tokens += pair.label.size();
      if (step % config.eval_interval == 0) {
        const double mean = window_loss / static_cast<double>(window_tokens);
        log.intervals.push_back({epoch, step, mean, std::exp(mean)});
        window_loss = 0.0;
        window_tokens = 0;
      }
    }
    const double mean = epoch_loss / static_cast<double>(epoch_tokens);
    log.epochs.push_back({epoch, step, mean, std::exp(mean)});
  }
  return log;
}

TokenSequence generate(const LstmStackParams& params, const GenerateOptions& options) {
  params.validate();
  if (options.max_len < 1) throw UsageError("generate: max_len must be at least 1");
  std::mt19937_64 rng(options.seed);
  const TokenId start = start_token(params);
  const TokenId end = end_token(params);

  TokenSequence out;
  LstmState state = LstmState::zeros(params.hidden());
  TokenId current = start;
  while (out.size() < options.max_len) {
    auto step = stack_forward(params, {current}, state);
    state = std::move(step.states.back());
    Vector p = std::move(step.outputs.back());
    p[start] = 0.0;
    TokenId next = 0;
    if (options.greedy) {
      Eigen::Index best = 0;
      p.maxCoeff(&best);
      next = static_cast<TokenId>(best);
    } else {
      const double u = uniform01(rng) * p.sum();
      double acc = 0.0;
      next = static_cast<TokenId>(p.size() - 1);
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) {
          next = static_cast<TokenId>(i);
          break;
        }
      }
      if (next == start) next = end;
    }
    out.push_back(next);
    if (next == end) break;
    current = next;
  }
  return out;
}

}  // namespace drnn
