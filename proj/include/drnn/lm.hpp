#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "drnn/corpus.hpp"

namespace drnn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline constexpr std::size_t kNumLayers = 3;
inline constexpr std::size_t kDefaultHidden = 50;

enum Gate : std::size_t { kForget = 0, kInput = 1, kOutput = 2, kCandidate = 3 };
inline constexpr std::size_t kNumGates = 4;

const char* gate_name(Gate g);

// Piecewise-linear sigmoid: clamp(0.2 x + 0.5, 0, 1).
double hard_sigmoid(double x);
// Derivative of hard_sigmoid; zero on the saturated pieces.
double hard_sigmoid_grad(double x);

// Numerically stable (max-subtracted) softmax.
Vector softmax(const Vector& z);

Vector one_hot(TokenId id, std::size_t size);

// Weights of one LSTM layer, indexed by Gate.
struct LstmLayerParams {
  std::array<Matrix, kNumGates> recurrent;  // hidden x hidden
  std::array<Matrix, kNumGates> input;      // hidden x input_dim
  std::array<Vector, kNumGates> bias;       // hidden

  static LstmLayerParams zeros(std::size_t hidden, std::size_t input_dim);

  std::size_t hidden() const { return static_cast<std::size_t>(bias[0].size()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(input[0].cols()); }
  // Throws UsageError on inconsistent shapes or non-finite entries.
  void validate() const;
};

// Three stacked LSTM layers and a softmax output projection. Layer 0 reads a
// one-hot token, layers 1 and 2 read the hidden state of the layer below.
struct LstmStackParams {
  std::array<LstmLayerParams, kNumLayers> layers;
  Matrix output;  // vocab x hidden

  static LstmStackParams zeros(std::size_t vocab, std::size_t hidden);

  std::size_t vocab() const { return static_cast<std::size_t>(output.rows()); }
  std::size_t hidden() const { return static_cast<std::size_t>(output.cols()); }
  void validate() const;

  // Visits every parameter array in a fixed order with its container name.
  template <typename Fn>
  void for_each_array(Fn&& fn);
  template <typename Fn>
  void for_each_array(Fn&& fn) const;
};

struct LayerState {
  Vector h;
  Vector c;
};

struct LstmState {
  std::array<LayerState, kNumLayers> layers;
  static LstmState zeros(std::size_t hidden);
};

struct CellOutput {
  Vector h;
  Vector c;
};

// Everything the backward pass needs from one cell evaluation.
struct CellTrace {
  std::array<Vector, kNumGates> preactivation;
  std::array<Vector, kNumGates> activation;
  Vector c;
  Vector tanh_c;
  Vector h;
};

CellTrace lstm_cell_trace(const LstmLayerParams& layer, const Vector& x, const Vector& h_prev,
                          const Vector& c_prev);
// Layer-0 form: the one-hot product is a column selection.
CellTrace lstm_cell_trace(const LstmLayerParams& layer, TokenId x, const Vector& h_prev,
                          const Vector& c_prev);

CellOutput lstm_cell_forward(const LstmLayerParams& layer, const Vector& x, const Vector& h_prev,
                             const Vector& c_prev);
CellOutput lstm_cell_forward(const LstmLayerParams& layer, TokenId x, const Vector& h_prev,
                             const Vector& c_prev);

struct StackForward {
  std::vector<Vector> outputs;   // softmax distribution per step
  std::vector<LstmState> states;  // state after each step
};

StackForward stack_forward(const LstmStackParams& params, const TokenSequence& input,
                           const LstmState& state0);
StackForward stack_forward(const LstmStackParams& params, const TokenSequence& input);

// Single-layer Elman network: s = tanh(U x + W s_prev), o = softmax(V s).
struct RnnParams {
  Matrix input;      // hidden x vocab
  Matrix recurrent;  // hidden x hidden
  Matrix output;     // vocab x hidden
  void validate() const;
};

struct RnnStep {
  Vector s;
  Vector o;
};

RnnStep rnn_step(const RnnParams& params, TokenId x, const Vector& s_prev);

// --- template definitions ---

template <typename Fn>
void LstmStackParams::for_each_array(Fn&& fn) {
  static constexpr const char* kSuffix[kNumGates] = {"f", "i", "o", "g"};
  for (std::size_t l = 0; l < kNumLayers; ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    for (std::size_t g = 0; g < kNumGates; ++g) fn(prefix + "W" + kSuffix[g], layers[l].recurrent[g]);
    for (std::size_t g = 0; g < kNumGates; ++g) fn(prefix + "U" + kSuffix[g], layers[l].input[g]);
    for (std::size_t g = 0; g < kNumGates; ++g) fn(prefix + "b" + kSuffix[g], layers[l].bias[g]);
  }
  fn(std::string("V"), output);
}

template <typename Fn>
void LstmStackParams::for_each_array(Fn&& fn) const {
  const_cast<LstmStackParams*>(this)->for_each_array(
      [&](const std::string& name, auto& array) { fn(name, std::as_const(array)); });
}

}  // namespace drnn
