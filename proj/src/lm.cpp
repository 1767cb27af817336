#include "drnn/lm.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "drnn/error.hpp"

namespace drnn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

void check_token(TokenId id, Eigen::Index vocab) {
  if (static_cast<Eigen::Index>(id) >= vocab) {
    throw UsageError("token id " + std::to_string(id) + " outside vocabulary of size " +
                     std::to_string(vocab));
  }
}

template <typename Input>
CellTrace cell_trace(const LstmLayerParams& layer, const Input& x, const Vector& h_prev,
                     const Vector& c_prev) {
  const auto hidden = static_cast<Eigen::Index>(layer.hidden());
  require(h_prev.size() == hidden && c_prev.size() == hidden,
          "lstm cell: state length does not match hidden size");

  CellTrace t;
  for (std::size_t g = 0; g < kNumGates; ++g) {
    Vector a = layer.recurrent[g] * h_prev + layer.bias[g];
    if constexpr (std::is_same_v<Input, TokenId>) {
      a += layer.input[g].col(x);
    } else {
      a.noalias() += layer.input[g] * x;
    }
    t.activation[g] = g == kCandidate ? Vector(a.array().tanh())
                                      : Vector(a.unaryExpr([](double v) { return hard_sigmoid(v); }));
    t.preactivation[g] = std::move(a);
  }
  t.c = t.activation[kForget].cwiseProduct(c_prev) +
        t.activation[kInput].cwiseProduct(t.activation[kCandidate]);
  t.tanh_c = t.c.array().tanh();
  t.h = t.activation[kOutput].cwiseProduct(t.tanh_c);
  return t;
}

}  // namespace

const char* gate_name(Gate g) {
  switch (g) {
    case kForget: return "forget";
    case kInput: return "input";
    case kOutput: return "output";
    case kCandidate: return "candidate";
  }
  return "?";
}

double hard_sigmoid(double x) { return std::clamp(0.2 * x + 0.5, 0.0, 1.0); }

double hard_sigmoid_grad(double x) { return (x > -2.5 && x < 2.5) ? 0.2 : 0.0; }

Vector softmax(const Vector& z) {
  require(z.size() > 0, "softmax of an empty vector");
  const double m = z.maxCoeff();
  Vector e = (z.array() - m).exp();
  return e / e.sum();
}

Vector one_hot(TokenId id, std::size_t size) {
  check_token(id, static_cast<Eigen::Index>(size));
  Vector v = Vector::Zero(static_cast<Eigen::Index>(size));
  v[id] = 1.0;
  return v;
}

LstmLayerParams LstmLayerParams::zeros(std::size_t hidden, std::size_t input_dim) {
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto d = static_cast<Eigen::Index>(input_dim);
  LstmLayerParams p;
  for (std::size_t g = 0; g < kNumGates; ++g) {
    p.recurrent[g] = Matrix::Zero(h, h);
    p.input[g] = Matrix::Zero(h, d);
    p.bias[g] = Vector::Zero(h);
  }
  return p;
}

void LstmLayerParams::validate() const {
  const auto h = bias[0].size();
  const auto d = input[0].cols();
  require(h > 0 && d > 0, "lstm layer: empty dimensions");
  for (std::size_t g = 0; g < kNumGates; ++g) {
    require(recurrent[g].rows() == h && recurrent[g].cols() == h,
            std::string("lstm layer: recurrent weight shape mismatch (") + gate_name(Gate(g)) + ")");
    require(input[g].rows() == h && input[g].cols() == d,
            std::string("lstm layer: input weight shape mismatch (") + gate_name(Gate(g)) + ")");
    require(bias[g].size() == h,
            std::string("lstm layer: bias length mismatch (") + gate_name(Gate(g)) + ")");
    require(recurrent[g].allFinite() && input[g].allFinite() && bias[g].allFinite(),
            "lstm layer: non-finite parameter");
  }
}

LstmStackParams LstmStackParams::zeros(std::size_t vocab, std::size_t hidden) {
  LstmStackParams p;
  p.layers[0] = LstmLayerParams::zeros(hidden, vocab);
  for (std::size_t l = 1; l < kNumLayers; ++l) p.layers[l] = LstmLayerParams::zeros(hidden, hidden);
  p.output = Matrix::Zero(static_cast<Eigen::Index>(vocab), static_cast<Eigen::Index>(hidden));
  return p;
}

void LstmStackParams::validate() const {
  const auto v = output.rows();
  const auto h = output.cols();
  require(v > 0 && h > 0, "lstm stack: empty output projection");
  require(output.allFinite(), "lstm stack: non-finite output projection");
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    layers[l].validate();
    require(static_cast<Eigen::Index>(layers[l].hidden()) == h,
            "lstm stack: layer " + std::to_string(l) + " hidden size mismatch");
    const auto want_in = l == 0 ? v : h;
    require(static_cast<Eigen::Index>(layers[l].input_dim()) == want_in,
            "lstm stack: layer " + std::to_string(l) + " input size mismatch");
  }
}

LstmState LstmState::zeros(std::size_t hidden) {
  LstmState s;
  for (auto& l : s.layers) {
    l.h = Vector::Zero(static_cast<Eigen::Index>(hidden));
    l.c = Vector::Zero(static_cast<Eigen::Index>(hidden));
  }
  return s;
}

CellTrace lstm_cell_trace(const LstmLayerParams& layer, const Vector& x, const Vector& h_prev,
                          const Vector& c_prev) {
  require(x.size() == static_cast<Eigen::Index>(layer.input_dim()),
          "lstm cell: input length does not match layer input size");
  return cell_trace(layer, x, h_prev, c_prev);
}

CellTrace lstm_cell_trace(const LstmLayerParams& layer, TokenId x, const Vector& h_prev,
                          const Vector& c_prev) {
  check_token(x, static_cast<Eigen::Index>(layer.input_dim()));
  return cell_trace(layer, x, h_prev, c_prev);
}

CellOutput lstm_cell_forward(const LstmLayerParams& layer, const Vector& x, const Vector& h_prev,
                             const Vector& c_prev) {
  auto t = lstm_cell_trace(layer, x, h_prev, c_prev);
  return {std::move(t.h), std::move(t.c)};
}

CellOutput lstm_cell_forward(const LstmLayerParams& layer, TokenId x, const Vector& h_prev,
                             const Vector& c_prev) {
  auto t = lstm_cell_trace(layer, x, h_prev, c_prev);
  return {std::move(t.h), std::move(t.c)};
}

StackForward stack_forward(const LstmStackParams& params, const TokenSequence& input,
                           const LstmState& state0) {
  require(!input.empty(), "stack_forward: empty input sequence");
  for (TokenId id : input) check_token(id, static_cast<Eigen::Index>(params.vocab()));

  StackForward out;
  out.outputs.reserve(input.size());
  out.states.reserve(input.size());
  LstmState state = state0;
  for (TokenId id : input) {
    auto cell = lstm_cell_forward(params.layers[0], id, state.layers[0].h, state.layers[0].c);
    state.layers[0] = {std::move(cell.h), std::move(cell.c)};
    for (std::size_t l = 1; l < kNumLayers; ++l) {
      cell = lstm_cell_forward(params.layers[l], state.layers[l - 1].h, state.layers[l].h,
                               state.layers[l].c);
      state.layers[l] = {std::move(cell.h), std::move(cell.c)};
    }
    out.outputs.push_back(softmax(params.output * state.layers[kNumLayers - 1].h));
    out.states.push_back(state);
  }
  return out;
}

StackForward stack_forward(const LstmStackParams& params, const TokenSequence& input) {
  return stack_forward(params, input, LstmState::zeros(params.hidden()));
}

void RnnParams::validate() const {
  const auto h = recurrent.rows();
  const auto v = output.rows();
  require(h > 0 && v > 0, "rnn: empty dimensions");
  require(recurrent.cols() == h, "rnn: recurrent weights must be square");
  require(input.rows() == h && input.cols() == v, "rnn: input weight shape mismatch");
  require(output.cols() == h, "rnn: output weight shape mismatch");
  require(input.allFinite() && recurrent.allFinite() && output.allFinite(),
          "rnn: non-finite parameter");
}

RnnStep rnn_step(const RnnParams& params, TokenId x, const Vector& s_prev) {
  params.validate();
  check_token(x, params.input.cols());
  require(s_prev.size() == params.recurrent.rows(), "rnn: state length mismatch");
  RnnStep step;
  step.s = (params.input.col(x) + params.recurrent * s_prev).array().tanh();
  step.o = softmax(params.output * step.s);
  return step;
}

}  // namespace drnn
