#include <stdexcept>

#include "sparseprop/gradients.hpp"

#include "engine_common.hpp"

namespace sparseprop {

const char* method_name(Method m) noexcept {
  switch (m) {
    case Method::eprop_sparse: return "eprop-sparse";
    case Method::eprop_naive: return "eprop-naive";
    case Method::rtrl: return "rtrl";
    case Method::bptt: return "bptt";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  for (Method m : {Method::eprop_sparse, Method::eprop_naive, Method::rtrl, Method::bptt})
    if (s == method_name(m)) return m;
  throw std::invalid_argument("unknown method '" + s + "'");
}

template <typename T>
std::vector<T> GradAccumulator<T>::flat() const {
  std::vector<T> out(dw.begin(), dw.end());
  out.insert(out.end(), dw_out.begin(), dw_out.end());
  return out;
}

template <typename T>
TraceState<T> initial_trace(const NeuronParams& p, std::size_t n, std::size_t k) {
  if (p.kind == NeuronKind::alif) return {zeros<T>(StructureDescriptor{{n, 2}, {n, k}, {{0, 0}}, {1}}), true};
  return {zeros<T>(StructureDescriptor{{n}, {n, k}, {{0, 0}}, {}}), true};
}

template <typename T>
TraceState<T> eprop_trace_update(const TraceState<T>& previous, const SparseTensor<T>& H, const SparseTensor<T>& F) {
  if (H.structure().is_dense() || F.structure().is_dense() || previous.G.structure().is_dense())
    throw StructureFallback("sparse trace update received a dense operand");
  TraceState<T> next{add(contract(H, previous.G), F), previous.structure_intact};
  if (next.G.fallback() || next.G.structure().is_dense())
    throw StructureFallback("trace update densified: " + next.G.structure().tag());
  return next;
}

template <typename T>
Buffer<T> learning_signal(std::span<const T> dL_dv, const ReadoutParams<T>& readout,
                          std::span<const T> surrogate_grads) {
  if (dL_dv.size() != readout.n_classes || surrogate_grads.size() != readout.n_hidden ||
      readout.w_out.size() != readout.n_classes * readout.n_hidden)
    throw ShapeMismatch("learning_signal: dL/dv, W_out and surrogate gradients disagree");
  Buffer<T> c(readout.n_hidden, T{0});
  for (std::size_t m = 0; m < readout.n_classes; ++m) {
    const T g = dL_dv[m];
    const T* row = readout.w_out.data() + m * readout.n_hidden;
    for (std::size_t i = 0; i < readout.n_hidden; ++i) c[i] += g * row[i];
  }
  for (std::size_t i = 0; i < readout.n_hidden; ++i) c[i] *= surrogate_grads[i];
  return c;
}

template <typename T>
void accumulate_param_grad(std::span<T> acc, std::span<const T> signal, const TraceState<T>& trace) {
  const auto& s = trace.G.structure();
  std::size_t state_size = 1;
  for (auto d : s.out_dims) state_size *= d;
  if (signal.size() != state_size) throw ShapeMismatch("learning signal does not match trace state dims");
  const SparseTensor<T> row(StructureDescriptor::dense({}, s.out_dims), Buffer<T>(signal.begin(), signal.end()));
  const SparseTensor<T> contribution = contract(row, trace.G);
  const auto values = contribution.values();
  if (values.size() != acc.size()) throw ShapeMismatch("gradient accumulator does not match trace parameter dims");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += values[i];
}

namespace {
using namespace detail;

// Shared tail of the e-prop engines: readout bookkeeping per step and the
// final application of dL/dV.
template <typename T>
struct ReadoutTracker {
  explicit ReadoutTracker(const Network<T>& net)
      : net_(net), v(net.n_classes, T{0}), v_sum(net.n_classes, T{0}), z_weighted(net.n_hidden, T{0}) {}

  void step(const NeuronState<T>& state, T r) {
    v = readout_step(std::span<const T>(v), std::span<const T>(state.z), net_.readout());
    for (std::size_t m = 0; m < v.size(); ++m) v_sum[m] += v[m];
    for (std::size_t i = 0; i < z_weighted.size(); ++i) z_weighted[i] += r * state.z[i];
  }

  void finish(std::span<const T> eligibility, GradAccumulator<T>& out) const {
    const auto lg = loss_and_grad(std::span<const T>(v_sum), label);
    out.loss = lg.loss;
    out.readout_sum.assign(v_sum.begin(), v_sum.end());
    const Buffer<T> ones(net_.n_hidden, T{1});
    const Buffer<T> per_neuron = learning_signal(std::span<const T>(lg.grad), net_.readout(), std::span<const T>(ones));
    out.dw.assign(eligibility.begin(), eligibility.end());
    for (std::size_t i = 0; i < net_.n_hidden; ++i)
      for (std::size_t j = 0; j < net_.n_inputs; ++j) out.dw[i * net_.n_inputs + j] *= per_neuron[i];
    out.dw_out.assign(net_.n_classes * net_.n_hidden, T{0});
    for (std::size_t m = 0; m < net_.n_classes; ++m)
      for (std::size_t i = 0; i < net_.n_hidden; ++i) out.dw_out[m * net_.n_hidden + i] = lg.grad[m] * z_weighted[i];
  }

  const Network<T>& net_;
  Buffer<T> v;
  Buffer<T> v_sum;
  Buffer<T> z_weighted;
  std::size_t label = 0;
};

}  // namespace

template <typename T>
GradAccumulator<T> eprop_sparse_gradient(const Network<T>& net, const Sample<T>& sample, const GradientOptions& options) {
  check_sample(net, sample);
  const std::size_t n = net.n_hidden, k = net.n_inputs, width = net.state_width();
  const StepModel<T> model(net.neuron, n, k);
  auto state = NeuronState<T>::zero(n, net.neuron.kind);
  auto trace = initial_trace<T>(net.neuron, n, k);
  Buffer<T> eligibility(n * k, T{0});
  Buffer<T> signal(n * width);
  ReadoutTracker<T> readout(net);
  readout.label = sample.label;

  for (std::size_t t = 0; t < sample.steps; ++t) {
    {
      auto step = model.step(state, net.w, sample.at(t), options.eval);
      trace = eprop_trace_update(trace, step.H, step.F);
      state = std::move(step.next);
    }
    const T r = static_cast<T>(readout_weight(net.kappa, t + 1, sample.steps));
    local_signal(net, state, r, std::span<T>(signal));
    accumulate_param_grad(std::span<T>(eligibility), std::span<const T>(signal), trace);
    readout.step(state, r);
    if (options.on_step) options.on_step(t);
  }
  auto out = empty_accumulator(net);
  readout.finish(eligibility, out);
  out.structure_intact = trace.structure_intact && !trace.G.structure().is_dense();
  return out;
}

template <typename T>
GradAccumulator<T> naive_eprop_gradient(const Network<T>& net, const Sample<T>& sample, const GradientOptions& options) {
  check_sample(net, sample);
  const std::size_t n = net.n_hidden, k = net.n_inputs, width = net.state_width();
  if (n * width * n * k > options.max_dense_elements)
    throw ResourceLimit("dense trace of " + std::to_string(n * width * n * k) + " elements exceeds cap " +
                        std::to_string(options.max_dense_elements));
  const StepModel<T> model(net.neuron, n, k);
  auto state = NeuronState<T>::zero(n, net.neuron.kind);
  TraceState<T> trace{densify(initial_trace<T>(net.neuron, n, k).G), false};
  Buffer<T> eligibility(n * k, T{0});
  Buffer<T> signal(n * width);
  ReadoutTracker<T> readout(net);
  readout.label = sample.label;

  for (std::size_t t = 0; t < sample.steps; ++t) {
    {
      auto step = model.step(state, net.w, sample.at(t), options.eval);
      const SparseTensor<T> H = densify(step.H);
      const SparseTensor<T> F = densify(step.F);
      trace.G = add(contract(H, trace.G), F);
      state = std::move(step.next);
    }
    const T r = static_cast<T>(readout_weight(net.kappa, t + 1, sample.steps));
    local_signal(net, state, r, std::span<T>(signal));
    accumulate_param_grad(std::span<T>(eligibility), std::span<const T>(signal), trace);
    readout.step(state, r);
    if (options.on_step) options.on_step(t);
  }
  auto out = empty_accumulator(net);
  readout.finish(eligibility, out);
  out.structure_intact = false;
  return out;
}

template <typename T>
GradAccumulator<T> compute_gradient(Method method, const Network<T>& net, const Sample<T>& sample,
                                    const GradientOptions& options) {
  switch (method) {
    case Method::eprop_sparse: return eprop_sparse_gradient(net, sample, options);
    case Method::eprop_naive: return naive_eprop_gradient(net, sample, options);
    case Method::rtrl: return rtrl_gradient_dense(net, sample, options);
    case Method::bptt: return bptt_gradient(net, sample, options);
  }
  throw std::invalid_argument("unknown method");
}

#define SPARSEPROP_INSTANTIATE(T)                                                                               \
  template struct GradAccumulator<T>;                                                                           \
  template TraceState<T> initial_trace<T>(const NeuronParams&, std::size_t, std::size_t);                       \
  template TraceState<T> eprop_trace_update<T>(const TraceState<T>&, const SparseTensor<T>&,                    \
                                               const SparseTensor<T>&);                                         \
  template Buffer<T> learning_signal<T>(std::span<const T>, const ReadoutParams<T>&, std::span<const T>);       \
  template void accumulate_param_grad<T>(std::span<T>, std::span<const T>, const TraceState<T>&);               \
  template GradAccumulator<T> eprop_sparse_gradient<T>(const Network<T>&, const Sample<T>&,                     \
                                                       const GradientOptions&);                                 \
  template GradAccumulator<T> naive_eprop_gradient<T>(const Network<T>&, const Sample<T>&,                      \
                                                      const GradientOptions&);                                  \
  template GradAccumulator<T> compute_gradient<T>(Method, const Network<T>&, const Sample<T>&,                  \
                                                  const GradientOptions&);

SPARSEPROP_INSTANTIATE(float)
SPARSEPROP_INSTANTIATE(double)

#undef SPARSEPROP_INSTANTIATE

}  // namespace sparseprop
