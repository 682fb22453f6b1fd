#pragma once

// Single-hidden-layer feed-forward spiking network with a leaky readout.
// The hidden layer is LIF or ALIF, the trainable blocks are the input
// weights W [n_hidden x n_inputs] and readout weights W_out
// [n_classes x n_hidden]. The loss is softmax cross-entropy on the readout
// membrane summed over all time steps.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sparseprop/neurons.hpp"

namespace sparseprop {

enum class Precision { f32, f64 };

const char* precision_name(Precision p) noexcept;
Precision parse_precision(const std::string& s);

struct NetworkSpec {
  NeuronParams neuron = NeuronParams::make_lif();
  std::size_t n_hidden = 64;
  std::size_t n_inputs = 140;
  std::size_t n_classes = 3;
  double kappa = 0.95;
  Precision precision = Precision::f64;
  std::uint64_t seed = 0;

  void validate() const;
};

template <typename T>
struct Network {
  NeuronParams neuron;
  std::size_t n_hidden = 0;
  std::size_t n_inputs = 0;
  std::size_t n_classes = 0;
  double kappa = 0.95;
  Buffer<T> w;      // n_hidden x n_inputs
  Buffer<T> w_out;  // n_classes x n_hidden

  ReadoutParams<T> readout() const { return {w_out, n_classes, n_hidden, kappa}; }
  std::size_t state_width() const noexcept { return neuron.state_width(); }
};

/// Uniform in +-1/sqrt(fan_in) from a seeded generator; bit-identical per seed.
template <typename T>
Network<T> init_network(const NetworkSpec& spec);

/// One input sequence: steps x channels real-valued input (spike counts).
template <typename T>
struct Sample {
  std::size_t steps = 0;
  std::size_t channels = 0;
  std::vector<T> inputs;  // row-major, steps x channels
  std::size_t label = 0;

  std::span<const T> at(std::size_t t) const { return {inputs.data() + t * channels, channels}; }
};

template <typename T>
struct LossGrad {
  T loss{};
  std::vector<T> grad;  // dL/dV = softmax(V) - onehot(label)
};

/// Softmax cross-entropy on the time-summed readout. Throws LabelOutOfRange.
template <typename T>
LossGrad<T> loss_and_grad(std::span<const T> readout_sum, std::size_t label);

/// Total downstream weight r_t = sum_{tau=t..T} kappa^(tau-t) with which
/// the readout at step t (1-based) enters the time-summed readout.
double readout_weight(double kappa, std::size_t t, std::size_t steps);

/// Forward pass only. Used by the finite-difference oracle and evaluation.
template <typename T>
struct ForwardResult {
  std::vector<T> readout_sum;
  T loss{};
  std::size_t prediction = 0;
  std::vector<T> spike_args;  // u - A per (step, neuron), for spike-flip detection
};

template <typename T>
ForwardResult<T> forward(const Network<T>& net, const Sample<T>& sample, const EvalOptions& opt = {},
                         bool record_spike_args = false);

/// Index of the largest entry (first on ties).
template <typename T>
std::size_t argmax(std::span<const T> v);

}  // namespace sparseprop
