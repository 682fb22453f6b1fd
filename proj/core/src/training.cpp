#include "sparseprop/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

namespace sparseprop {

template <typename T>
void sgd_update(std::span<T> params, std::span<const T> grads, double lr) {
  if (params.size() != grads.size()) throw ShapeMismatch("sgd_update: parameter and gradient sizes differ");
  const T step = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= step * grads[i];
}

template <typename T>
void adam_update(std::span<T> params, std::span<const T> grads, double lr, AdamState& state, double beta1,
                 double beta2, double eps) {
  if (params.size() != grads.size()) throw ShapeMismatch("adam_update: parameter and gradient sizes differ");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw ShapeMismatch("adam_update: optimizer state does not match parameters");
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grads[i]);
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] = static_cast<T>(static_cast<double>(params[i]) - lr * m_hat / (std::sqrt(v_hat) + eps));
  }
}

const char* optimizer_name(OptimizerKind k) noexcept { return k == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("unknown optimizer '" + s + "'");
}

template <typename T>
EvalMetrics evaluate_network(const Network<T>& net, std::span<const Sample<T>> samples, const EvalOptions& eval) {
  EvalMetrics m;
  if (samples.empty()) return m;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    const auto r = forward(net, s, eval);
    m.loss += static_cast<double>(r.loss);
    if (r.prediction == s.label) ++correct;
  }
  m.loss /= static_cast<double>(samples.size());
  m.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return m;
}

template <typename T>
TrainResult<T> train(const NetworkSpec& spec, std::span<const Sample<T>> samples, const TrainConfig& config,
                     const UpdateCallback& on_update) {
  spec.validate();
  if (samples.empty()) throw std::invalid_argument("train: empty dataset");
  if (config.batch == 0) throw std::invalid_argument("train: batch must be >= 1");
  for (const auto& s : samples)
    if (s.channels != spec.n_inputs)
      throw ShapeMismatch("dataset has " + std::to_string(s.channels) + " channels, network expects " +
                          std::to_string(spec.n_inputs));

  TrainResult<T> result{init_network<T>(spec), {}, 0};
  auto& net = result.net;
  const auto initial = evaluate_network<T>(net, samples, config.gradient.eval);
  result.log.push_back({0, 0, initial.loss, initial.accuracy});

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  AdamState adam_w, adam_out;
  Buffer<T> dw(net.w.size()), dw_out(net.w_out.size());

  bool done = false;
  for (std::size_t epoch = 1; epoch <= config.epochs && !done; ++epoch) {
    if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size() && !done; begin += config.batch) {
      const std::size_t end = std::min(begin + config.batch, order.size());
      std::fill(dw.begin(), dw.end(), T{0});
      std::fill(dw_out.begin(), dw_out.end(), T{0});
      double batch_loss = 0.0;
      for (std::size_t b = begin; b < end; ++b) {
        const auto g = compute_gradient(config.method, net, samples[order[b]], config.gradient);
        for (std::size_t i = 0; i < dw.size(); ++i) dw[i] += g.dw[i];
        for (std::size_t i = 0; i < dw_out.size(); ++i) dw_out[i] += g.dw_out[i];
        batch_loss += static_cast<double>(g.loss);
      }
      const T inv = T{1} / static_cast<T>(end - begin);
      for (auto& v : dw) v *= inv;
      for (auto& v : dw_out) v *= inv;
      const auto& o = config.optimizer;
      if (o.kind == OptimizerKind::sgd) {
        sgd_update(std::span<T>(net.w), std::span<const T>(dw), o.lr);
        sgd_update(std::span<T>(net.w_out), std::span<const T>(dw_out), o.lr);
      } else {
        adam_update(std::span<T>(net.w), std::span<const T>(dw), o.lr, adam_w, o.beta1, o.beta2, o.eps);
        adam_update(std::span<T>(net.w_out), std::span<const T>(dw_out), o.lr, adam_out, o.beta1, o.beta2, o.eps);
      }
      ++result.updates;
      if (on_update) on_update(result.updates, batch_loss / static_cast<double>(end - begin));
      if (config.max_updates != 0 && result.updates >= config.max_updates) done = true;
    }
    const auto m = evaluate_network<T>(net, samples, config.gradient.eval);
    result.log.push_back({epoch, result.updates, m.loss, m.accuracy});
  }
  return result;
}

std::vector<MetricsRow> train_dataset(const NetworkSpec& spec, const SpikeDataset& ds, const TrainConfig& config,
                                      const UpdateCallback& on_update) {
  if (spec.precision == Precision::f32) {
    const auto samples = to_samples<float>(ds);
    return train<float>(spec, samples, config, on_update).log;
  }
  const auto samples = to_samples<double>(ds);
  return train<double>(spec, samples, config, on_update).log;
}

void write_metrics_csv(std::span<const MetricsRow> rows, std::ostream& out) {
  out << "epoch,step,loss,accuracy\n";
  const auto flags = out.flags();
  const auto precision = out.precision();
  out.precision(10);
  for (const auto& r : rows) out << r.epoch << ',' << r.step << ',' << r.loss << ',' << r.accuracy << '\n';
  out.flags(flags);
  out.precision(precision);
}

#define SPARSEPROP_INSTANTIATE(T)                                                                             \
  template void sgd_update<T>(std::span<T>, std::span<const T>, double);                                      \
  template void adam_update<T>(std::span<T>, std::span<const T>, double, AdamState&, double, double, double); \
  template EvalMetrics evaluate_network<T>(const Network<T>&, std::span<const Sample<T>>, const EvalOptions&); \
  template TrainResult<T> train<T>(const NetworkSpec&, std::span<const Sample<T>>, const TrainConfig&,        \
                                   const UpdateCallback&);

SPARSEPROP_INSTANTIATE(float)
SPARSEPROP_INSTANTIATE(double)

#undef SPARSEPROP_INSTANTIATE

}  // namespace sparseprop
