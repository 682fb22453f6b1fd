#include "sparseprop/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace sparseprop {

const char* precision_name(Precision p) noexcept { return p == Precision::f32 ? "f32" : "f64"; }

Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw std::invalid_argument("unknown precision '" + s + "'");
}

void NetworkSpec::validate() const {
  if (n_hidden < 1 || n_inputs < 1 || n_classes < 1) throw std::invalid_argument("network sizes must be >= 1");
  if (!(kappa >= 0.0 && kappa < 1.0)) throw std::invalid_argument("kappa must lie in [0,1)");
  neuron.validate();
}

template <typename T>
Network<T> init_network(const NetworkSpec& spec) {
  spec.validate();
  Network<T> net;
  net.neuron = spec.neuron;
  net.n_hidden = spec.n_hidden;
  net.n_inputs = spec.n_inputs;
  net.n_classes = spec.n_classes;
  net.kappa = spec.kappa;
  std::mt19937_64 rng(spec.seed);
  auto fill = [&](Buffer<T>& buf, std::size_t count, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    buf.resize(count);
    for (auto& x : buf) x = static_cast<T>(dist(rng));
  };
  fill(net.w, spec.n_hidden * spec.n_inputs, spec.n_inputs);
  fill(net.w_out, spec.n_classes * spec.n_hidden, spec.n_hidden);
  return net;
}

template <typename T>
LossGrad<T> loss_and_grad(std::span<const T> v, std::size_t label) {
  if (label >= v.size())
    throw LabelOutOfRange("label " + std::to_string(label) + " with " + std::to_string(v.size()) + " classes");
  const T vmax = *std::max_element(v.begin(), v.end());
  LossGrad<T> out;
  out.grad.resize(v.size());
  T denom{0};
  for (std::size_t m = 0; m < v.size(); ++m) {
    out.grad[m] = std::exp(v[m] - vmax);
    denom += out.grad[m];
  }
  for (auto& g : out.grad) g /= denom;
  out.loss = std::log(denom) + vmax - v[label];
  out.grad[label] -= T{1};
  return out;
}

double readout_weight(double kappa, std::size_t t, std::size_t steps) {
  if (t == 0 || t > steps) return 0.0;
  const double terms = static_cast<double>(steps - t + 1);
  if (kappa == 0.0) return 1.0;
  return (1.0 - std::pow(kappa, terms)) / (1.0 - kappa);
}

template <typename T>
std::size_t argmax(std::span<const T> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

template <typename T>
ForwardResult<T> forward(const Network<T>& net, const Sample<T>& sample, const EvalOptions& opt,
                         bool record_spike_args) {
  if (sample.channels != net.n_inputs) throw ShapeMismatch("sample channels differ from network inputs");
  const std::size_t n = net.n_hidden;
  auto state = NeuronState<T>::zero(n, net.neuron.kind);
  Buffer<T> v(net.n_classes, T{0});
  ForwardResult<T> out;
  out.readout_sum.assign(net.n_classes, T{0});
  if (record_spike_args) out.spike_args.reserve(sample.steps * n);
  Buffer<T> current(n);
  for (std::size_t t = 0; t < sample.steps; ++t) {
    const auto x = sample.at(t);
    for (std::size_t i = 0; i < n; ++i) {
      T acc{0};
      const T* row = net.w.data() + i * net.n_inputs;
      for (std::size_t j = 0; j < net.n_inputs; ++j) acc += row[j] * x[j];
      current[i] = acc;
    }
    state = neuron_step(state, std::span<const T>(current), net.neuron, opt);
    if (record_spike_args)
      for (std::size_t i = 0; i < n; ++i)
        out.spike_args.push_back(spike_argument(net.neuron, state.u[i], state.a.empty() ? T{0} : state.a[i]));
    v = readout_step(std::span<const T>(v), std::span<const T>(state.z), net.readout());
    for (std::size_t m = 0; m < net.n_classes; ++m) out.readout_sum[m] += v[m];
  }
  const auto lg = loss_and_grad(std::span<const T>(out.readout_sum), sample.label);
  out.loss = lg.loss;
  out.prediction = argmax(std::span<const T>(out.readout_sum));
  return out;
}

#define SPARSEPROP_INSTANTIATE(T)                                                                  \
  template Network<T> init_network<T>(const NetworkSpec&);                                         \
  template LossGrad<T> loss_and_grad<T>(std::span<const T>, std::size_t);                          \
  template std::size_t argmax<T>(std::span<const T>);                                              \
  template ForwardResult<T> forward<T>(const Network<T>&, const Sample<T>&, const EvalOptions&, bool);

SPARSEPROP_INSTANTIATE(float)
SPARSEPROP_INSTANTIATE(double)

#undef SPARSEPROP_INSTANTIATE

}  // namespace sparseprop
