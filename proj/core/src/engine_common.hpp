#pragma once

// Helpers shared by the gradient engines. Not installed.

#include <string>

#include "sparseprop/gradients.hpp"

namespace sparseprop::detail {

template <typename T>
void check_sample(const Network<T>& net, const Sample<T>& sample) {
  if (sample.channels != net.n_inputs)
    throw ShapeMismatch("sample has " + std::to_string(sample.channels) + " channels, network expects " +
                        std::to_string(net.n_inputs));
  if (sample.inputs.size() != sample.steps * sample.channels) throw ShapeMismatch("sample input buffer size");
  if (net.w.size() != net.n_hidden * net.n_inputs || net.w_out.size() != net.n_classes * net.n_hidden)
    throw ShapeMismatch("network weight sizes");
}

// Per-state-component learning signal with a unit readout: r_t sigma'_t for u
// and -beta r_t sigma'_t for a.
template <typename T>
void local_signal(const Network<T>& net, const NeuronState<T>& state, T r, std::span<T> out) {
  const bool alif = net.neuron.kind == NeuronKind::alif;
  const T slope = static_cast<T>(net.neuron.lif.slope);
  for (std::size_t i = 0; i < net.n_hidden; ++i) {
    const T sg = surrogate_grad(spike_argument(net.neuron, state.u[i], alif ? state.a[i] : T{0}), slope);
    if (alif) {
      out[2 * i] = r * sg;
      out[2 * i + 1] = -static_cast<T>(net.neuron.beta) * r * sg;
    } else {
      out[i] = r * sg;
    }
  }
}

template <typename T>
GradAccumulator<T> empty_accumulator(const Network<T>& net) {
  GradAccumulator<T> out;
  out.n_hidden = net.n_hidden;
  out.n_inputs = net.n_inputs;
  out.n_classes = net.n_classes;
  return out;
}

}  // namespace sparseprop::detail
