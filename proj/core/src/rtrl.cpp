#include "sparseprop/gradients.hpp"

#include "engine_common.hpp"

namespace sparseprop {

// Forward-mode over the full network state s = (h, v) with respect to all
// parameters p = (W, W_out). Every tensor is dense:
//   G^h_{t+1} = H_{t+1} G^h_t + F_{t+1}
//   G^v_{t+1} = kappa G^v_t + W_out Jz_{t+1} G^h_{t+1} + E_{t+1}
// with Jz = dz/dh and E[c, W_out(c,i)] = z_i. dL/dp = dL/dV sum_t G^v_t.
template <typename T>
GradAccumulator<T> rtrl_gradient_dense(const Network<T>& net, const Sample<T>& sample, const GradientOptions& options) {
  using namespace detail;
  check_sample(net, sample);
  const std::size_t n = net.n_hidden, k = net.n_inputs, m = net.n_classes;
  const bool alif = net.neuron.kind == NeuronKind::alif;
  const std::size_t width = net.state_width();
  const std::size_t hs = n * width;
  const std::size_t wk = n * k;
  const std::size_t params = wk + m * n;
  if ((hs + 2 * m) * params > options.max_dense_elements)
    throw ResourceLimit("dense RTRL trace of " + std::to_string((hs + 2 * m) * params) +
                        " elements exceeds cap " + std::to_string(options.max_dense_elements));

  const StepModel<T> model(net.neuron, n, k);
  const T kappa = static_cast<T>(net.kappa);
  const T slope = static_cast<T>(net.neuron.lif.slope);
  const T beta = static_cast<T>(net.neuron.beta);

  SparseTensor<T> g_h = zeros<T>(StructureDescriptor::dense({hs}, {params}));
  SparseTensor<T> g_v = zeros<T>(StructureDescriptor::dense({m}, {params}));
  Buffer<T> g_v_sum(m * params, T{0});
  const SparseTensor<T> w_out = dense<T>({m}, {n}, net.w_out);

  auto state = NeuronState<T>::zero(n, net.neuron.kind);
  Buffer<T> v(m, T{0}), v_sum(m, T{0});
  for (std::size_t t = 0; t < sample.steps; ++t) {
    {
      auto step = model.step(state, net.w, sample.at(t), options.eval);
      const SparseTensor<T> h_dense = densify(step.H);
      const SparseTensor<T> h_flat(StructureDescriptor::dense({hs}, {hs}),
                                   Buffer<T>(h_dense.values().begin(), h_dense.values().end()));
      const SparseTensor<T> f_dense = densify(step.F);
      Buffer<T> f_pad(hs * params, T{0});
      for (std::size_t r = 0; r < hs; ++r)
        std::copy_n(f_dense.values().begin() + r * wk, wk, f_pad.begin() + r * params);
      g_h = add(contract(h_flat, g_h), SparseTensor<T>(g_h.structure(), std::move(f_pad)));
      state = std::move(step.next);

      Buffer<T> jz(n * hs, T{0});
      for (std::size_t i = 0; i < n; ++i) {
        const T sg = surrogate_grad(spike_argument(net.neuron, state.u[i], alif ? state.a[i] : T{0}), slope);
        jz[i * hs + i * width] = sg;
        if (alif) jz[i * hs + i * width + 1] = -beta * sg;
      }
      const SparseTensor<T> jz_t(StructureDescriptor::dense({n}, {hs}), std::move(jz));
      SparseTensor<T> through = contract(contract(w_out, jz_t), g_h);
      auto tv = through.mutable_values();
      const auto old = g_v.values();
      for (std::size_t i = 0; i < tv.size(); ++i) tv[i] += kappa * old[i];
      for (std::size_t c = 0; c < m; ++c)
        for (std::size_t i = 0; i < n; ++i) tv[c * params + wk + c * n + i] += state.z[i];
      g_v = std::move(through);
    }
    const auto gv = g_v.values();
    for (std::size_t i = 0; i < g_v_sum.size(); ++i) g_v_sum[i] += gv[i];
    v = readout_step(std::span<const T>(v), std::span<const T>(state.z), net.readout());
    for (std::size_t c = 0; c < m; ++c) v_sum[c] += v[c];
    if (options.on_step) options.on_step(t);
  }

  auto out = empty_accumulator(net);
  const auto lg = loss_and_grad(std::span<const T>(v_sum), sample.label);
  out.loss = lg.loss;
  out.readout_sum.assign(v_sum.begin(), v_sum.end());
  Buffer<T> grad(params, T{0});
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t p = 0; p < params; ++p) grad[p] += lg.grad[c] * g_v_sum[c * params + p];
  out.dw.assign(grad.begin(), grad.begin() + wk);
  out.dw_out.assign(grad.begin() + wk, grad.end());
  out.structure_intact = false;
  return out;
}

template GradAccumulator<float> rtrl_gradient_dense<float>(const Network<float>&, const Sample<float>&,
                                                           const GradientOptions&);
template GradAccumulator<double> rtrl_gradient_dense<double>(const Network<double>&, const Sample<double>&,
                                                             const GradientOptions&);

}  // namespace sparseprop
