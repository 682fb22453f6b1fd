#include "sparseprop/gradients.hpp"

#include "engine_common.hpp"

namespace sparseprop {

// Reverse sweep over a tape of forward states. The tape holds, per step, the
// hidden state, the emitted spikes and the input current; it grows linearly
// with the sequence length. H_{t+1} is re-derived from h_t with the
// current-input step graph, and the weight gradient uses the matvec VJP
// c_t x_{t-1}^T directly.
template <typename T>
GradAccumulator<T> bptt_gradient(const Network<T>& net, const Sample<T>& sample, const GradientOptions& options) {
  using namespace detail;
  check_sample(net, sample);
  const std::size_t n = net.n_hidden, k = net.n_inputs, m = net.n_classes, steps = sample.steps;
  const bool alif = net.neuron.kind == NeuronKind::alif;
  const std::size_t width = net.state_width();
  const T slope = static_cast<T>(net.neuron.lif.slope);
  const T beta = static_cast<T>(net.neuron.beta);

  // tape_u/a hold h_0..h_T, tape_z and tape_i hold steps 1..T.
  Buffer<T> tape_u((steps + 1) * n, T{0});
  Buffer<T> tape_a(alif ? (steps + 1) * n : 0, T{0});
  Buffer<T> tape_z(steps * n, T{0});
  Buffer<T> tape_i(steps * n, T{0});

  Buffer<T> v(m, T{0}), v_sum(m, T{0});
  {
    auto state = NeuronState<T>::zero(n, net.neuron.kind);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto x = sample.at(t);
      T* current = tape_i.data() + t * n;
      for (std::size_t i = 0; i < n; ++i) {
        T acc{0};
        const T* row = net.w.data() + i * k;
        for (std::size_t j = 0; j < k; ++j) acc += row[j] * x[j];
        current[i] = acc;
      }
      state = neuron_step(state, std::span<const T>(current, n), net.neuron, options.eval);
      std::copy(state.u.begin(), state.u.end(), tape_u.begin() + (t + 1) * n);
      if (alif) std::copy(state.a.begin(), state.a.end(), tape_a.begin() + (t + 1) * n);
      std::copy(state.z.begin(), state.z.end(), tape_z.begin() + t * n);
      v = readout_step(std::span<const T>(v), std::span<const T>(state.z), net.readout());
      for (std::size_t c = 0; c < m; ++c) v_sum[c] += v[c];
      if (options.on_step) options.on_step(t);
    }
  }

  auto out = empty_accumulator(net);
  const auto lg = loss_and_grad(std::span<const T>(v_sum), sample.label);
  out.loss = lg.loss;
  out.readout_sum.assign(v_sum.begin(), v_sum.end());
  out.dw.assign(n * k, T{0});
  out.dw_out.assign(m * n, T{0});

  const StepModel<T> state_model(net.neuron, n, k, /*weight_input=*/false);
  const T kappa = static_cast<T>(net.kappa);
  Buffer<T> lambda_v(m, T{0});
  Buffer<T> c_next;  // dL/dh_{t+1}, empty at t = T
  Buffer<T> surrogate(n);
  auto state_at = [&](std::size_t t) {
    NeuronState<T> s;
    s.u.assign(tape_u.begin() + t * n, tape_u.begin() + (t + 1) * n);
    if (alif) s.a.assign(tape_a.begin() + t * n, tape_a.begin() + (t + 1) * n);
    s.z.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      s.z[i] = emit_spike(net.neuron, s.u[i], alif ? s.a[i] : T{0}, options.eval);
    return s;
  };

  for (std::size_t t = steps; t >= 1; --t) {
    for (std::size_t c = 0; c < m; ++c) lambda_v[c] = lg.grad[c] + kappa * lambda_v[c];
    const T* z = tape_z.data() + (t - 1) * n;
    for (std::size_t c = 0; c < m; ++c)
      for (std::size_t i = 0; i < n; ++i) out.dw_out[c * n + i] += lambda_v[c] * z[i];

    // d_t: direct dependence of the loss on h_t through z_t.
    for (std::size_t i = 0; i < n; ++i) {
      const T a = alif ? tape_a[t * n + i] : T{0};
      surrogate[i] = surrogate_grad(spike_argument(net.neuron, tape_u[t * n + i], a), slope);
    }
    const Buffer<T> dz = learning_signal(std::span<const T>(lambda_v), net.readout(), std::span<const T>(surrogate));
    Buffer<T> c_t(n * width);
    for (std::size_t i = 0; i < n; ++i) {
      if (alif) {
        c_t[2 * i] = dz[i];
        c_t[2 * i + 1] = -beta * dz[i];
      } else {
        c_t[i] = dz[i];
      }
    }
    if (!c_next.empty()) {
      // c_t += c_{t+1} H_{t+1}, with H_{t+1} evaluated at h_t.
      const auto step = state_model.step(state_at(t), {}, std::span<const T>(tape_i.data() + t * n, n), options.eval);
      const SparseTensor<T> row(StructureDescriptor::dense({}, step.H.structure().out_dims), std::move(c_next));
      const SparseTensor<T> back = contract(row, step.H);
      for (std::size_t i = 0; i < c_t.size(); ++i) c_t[i] += back.values()[i];
    }
    const auto x = sample.at(t - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const T cu = c_t[i * width];
      T* row = out.dw.data() + i * k;
      for (std::size_t j = 0; j < k; ++j) row[j] += cu * x[j];
    }
    c_next = std::move(c_t);
  }
  return out;
}

template GradAccumulator<float> bptt_gradient<float>(const Network<float>&, const Sample<float>&,
                                                     const GradientOptions&);
template GradAccumulator<double> bptt_gradient<double>(const Network<double>&, const Sample<double>&,
                                                       const GradientOptions&);

}  // namespace sparseprop
