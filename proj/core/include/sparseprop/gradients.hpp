#pragma once

// Gradient engines for the single-hidden-layer network.
//
//   eprop-sparse  step Jacobians from reverse vertex elimination, trace
//                 recursion G_t = H_I G_{t-1} + F_t kept in compressed form
//   eprop-naive   same recursion on densified H_I, F and G
//   rtrl          forward-mode over the whole network state (hidden and
//                 readout) with respect to every parameter, all dense
//   bptt          reverse sweep c_t = c_{t+1} H_{t+1} + d_t over a tape of
//                 forward states
//
// For feed-forward networks H_E vanishes, so all four produce the same
// gradient up to rounding.
//
// The loss only sees the readout summed over time, so dL/dV arrives at the
// end of the sequence. The e-prop engines stay online by accumulating the
// readout-weighted eligibility sum_t r_t sigma'_t G_t, which is linear in
// dL/dV, and applying the learning signal (dL/dV W_out) once at the end.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sparseprop/network.hpp"

namespace sparseprop {

enum class Method { eprop_sparse, eprop_naive, rtrl, bptt };

const char* method_name(Method m) noexcept;
Method parse_method(const std::string& s);

template <typename T>
struct TraceState {
  SparseTensor<T> G;
  bool structure_intact = true;
};

/// G_0 = 0 with the compressed structure of the model's F.
template <typename T>
TraceState<T> initial_trace(const NeuronParams& p, std::size_t n, std::size_t k);

/// G_t = contract(H_I, G_{t-1}) + F_t on compressed operands.
/// Throws StructureFallback if any operand or intermediate is dense.
template <typename T>
TraceState<T> eprop_trace_update(const TraceState<T>& previous, const SparseTensor<T>& H,
                                 const SparseTensor<T>& F);

/// c[i] = (dL_dv . W_out)[i] * sigma'[i]. Throws ShapeMismatch.
template <typename T>
Buffer<T> learning_signal(std::span<const T> dL_dv, const ReadoutParams<T>& readout,
                          std::span<const T> surrogate_grads);

/// acc[i,j] += sum_c signal[i,c] G[i,c,j]; signal holds one entry per state
/// component (n for LIF, n x 2 for ALIF). Throws ShapeMismatch.
template <typename T>
void accumulate_param_grad(std::span<T> acc, std::span<const T> signal, const TraceState<T>& trace);

template <typename T>
struct GradAccumulator {
  std::size_t n_hidden = 0;
  std::size_t n_inputs = 0;
  std::size_t n_classes = 0;
  Buffer<T> dw;      // n_hidden x n_inputs
  Buffer<T> dw_out;  // n_classes x n_hidden
  T loss{};
  std::vector<T> readout_sum;
  bool structure_intact = true;

  /// dw followed by dw_out.
  std::vector<T> flat() const;
};

struct GradientOptions {
  EvalOptions eval;
  // Dense engines refuse traces with more elements than this.
  std::size_t max_dense_elements = std::size_t{1} << 27;
  // Called after every time step once per-step temporaries are released.
  std::function<void(std::size_t step)> on_step;
};

template <typename T>
GradAccumulator<T> eprop_sparse_gradient(const Network<T>& net, const Sample<T>& sample,
                                         const GradientOptions& options = {});

template <typename T>
GradAccumulator<T> naive_eprop_gradient(const Network<T>& net, const Sample<T>& sample,
                                        const GradientOptions& options = {});

template <typename T>
GradAccumulator<T> rtrl_gradient_dense(const Network<T>& net, const Sample<T>& sample,
                                       const GradientOptions& options = {});

template <typename T>
GradAccumulator<T> bptt_gradient(const Network<T>& net, const Sample<T>& sample,
                                 const GradientOptions& options = {});

template <typename T>
GradAccumulator<T> compute_gradient(Method method, const Network<T>& net, const Sample<T>& sample,
                                    const GradientOptions& options = {});

/// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h for every coordinate.
std::vector<double> central_differences(const std::function<double(std::span<const double>)>& f,
                                        std::span<const double> x, double h);

/// Central differences of the loss for every parameter (dw then dw_out).
/// With a hard threshold this is only meaningful where no spike decision
/// sits within h of threshold: throws SpikeFlipDetected if any spike of a
/// perturbed run differs from the unperturbed run.
template <typename T>
GradAccumulator<T> finite_difference_gradient(const Network<T>& net, const Sample<T>& sample, double h,
                                              const EvalOptions& eval = {});

struct DeviationStats {
  double median = 0.0;
  double q_low = 0.0;   // 2.5 %
  double q_high = 0.0;  // 97.5 %
  double max = 0.0;
};

/// Quantile of sorted data by linear interpolation at position q (n - 1).
double quantile_sorted(std::span<const double> sorted, double q);

/// Statistics of |g1 - g2|. Throws ShapeMismatch.
DeviationStats gradient_deviation_stats(std::span<const double> g1, std::span<const double> g2);

template <typename T>
DeviationStats gradient_deviation_stats(const GradAccumulator<T>& g1, const GradAccumulator<T>& g2);

}  // namespace sparseprop
