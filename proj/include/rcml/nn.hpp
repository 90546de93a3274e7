#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rcml/linalg.hpp"

namespace rcml {

struct MlpConfig {
  // layer_widths[0] is the input dim, layer_widths.back() the logit dim.
  std::vector<Index> layer_widths;
  // Index into the activation sequence where the comparison tap sits;
  // must name a hidden activation: 1 <= tap_layer < layer_widths.size() - 1.
  Index tap_layer = 1;
  double init_scale = 1.0;
  // Base seed; callers derive the two per-network init seeds from it.
  std::uint64_t seed = 0;

  void validate() const;

  static MlpConfig with_hidden(Index input_dim, std::vector<Index> hidden, Index output_dim,
                               Index tap_layer, double init_scale = 1.0);
};

struct Network {
  MlpConfig config;
  std::uint64_t init_seed = 0;
  std::vector<Matrix> weights;  // weights[l] is layer_widths[l] x layer_widths[l+1]
  std::vector<Vector> biases;
};

struct NetworkPair {
  Network f;
  Network g;
};

struct SgdConfig {
  double initial_lr = 1e-3;
  double decay = 0.9;  // lr at epoch e is initial_lr * decay^e
  std::size_t batch_size = 64;
  std::size_t epochs = 30;

  void validate() const;
};

// Two same-shape networks that differ only by init randomness.
NetworkPair init_pair(const MlpConfig& config, std::uint64_t seed_f, std::uint64_t seed_g);
Network init_network(const MlpConfig& config, std::uint64_t seed);

struct ForwardResult {
  Matrix tap;     // activation at config.tap_layer, post-ReLU
  Matrix logits;  // final layer output, no sigmoid
};

ForwardResult forward(const Network& net, const Matrix& inputs);

// Forward pass keeping everything backprop needs.
struct ForwardTrace {
  std::vector<Matrix> activations;  // activations[0] = inputs; size L+1
  std::vector<Matrix> preacts;      // preacts[l] = activations[l] * W[l] + b[l]; size L
};

ForwardTrace forward_trace(const Network& net, const Matrix& inputs);

Matrix sigmoid(const Matrix& logits);

struct BceResult {
  double loss = 0.0;
  Matrix grad_logits;  // same shape as logits; zero outside the selected rows
};

// Mean binary cross-entropy over the selected rows (all rows when empty
// selection is disallowed: passing an empty selection throws). Probabilities
// are clamped to [1e-7, 1 - 1e-7] before the log.
BceResult bce_loss(const Matrix& logits, const Matrix& targets, const std::vector<std::size_t>& selected);

struct ParamGrads {
  std::vector<Matrix> dW;
  std::vector<Vector> db;
};

// Backpropagates grad_logits (and, when given, an extra gradient injected at
// the tap activation) to parameter space.
ParamGrads backprop(const Network& net, const ForwardTrace& trace, const Matrix& grad_logits,
                    const Matrix* grad_tap = nullptr);

ParamGrads& accumulate(ParamGrads& into, const ParamGrads& other, double scale = 1.0);
ParamGrads zero_grads_like(const Network& net);

// Returns the updated network; lr = initial_lr * decay^epoch.
Network sgd_step(const Network& net, const ParamGrads& grads, std::size_t epoch, const SgdConfig& cfg);

std::string checkpoint_to_json(const Network& net);
Network checkpoint_from_json(const std::string& text);

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rcml
