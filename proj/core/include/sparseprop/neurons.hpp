#pragma once

// LIF / ALIF hidden neurons and the leaky readout.
//
// State update conventions (h = membrane u, plus adaptation a for ALIF):
//
//   LIF   u' = alpha u + I  [- theta z   with soft reset]
//         z' = H(u' - theta)
//   ALIF  a' = rho a + z
//         u' = alpha u + I  [- theta z]
//         z' = H(u' - theta - beta a')
//   readout v' = kappa v + W_out z'
//
// z is always a function of the state it was emitted from, so the step
// graphs recompute it from (u, a) and differentiate through it with the
// surrogate.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sparseprop/elimination.hpp"

namespace sparseprop {

enum class NeuronKind { lif, alif };

const char* neuron_name(NeuronKind kind) noexcept;
NeuronKind parse_neuron(const std::string& s);

struct LIFParams {
  double alpha = 0.95;
  double theta = 1.0;
  double slope = kDefaultSurrogateSlope;
  bool soft_reset = false;
};

struct ALIFParams {
  LIFParams lif;
  double beta = 0.8;
  double rho = 0.96;
};

/// Model choice plus its constants; the trainable weights live in Network.
struct NeuronParams {
  NeuronKind kind = NeuronKind::lif;
  LIFParams lif;
  double beta = 0.8;
  double rho = 0.96;

  static NeuronParams make_lif(LIFParams p = {}) { return {NeuronKind::lif, p, 0.0, 0.96}; }
  static NeuronParams make_alif(ALIFParams p = {}) { return {NeuronKind::alif, p.lif, p.beta, p.rho}; }

  /// Number of state components per neuron (1 for LIF, 2 for ALIF).
  std::size_t state_width() const noexcept { return kind == NeuronKind::alif ? 2 : 1; }

  /// Throws std::invalid_argument when a constant is out of its range.
  void validate() const;
};

template <typename T>
struct NeuronState {
  Buffer<T> u;
  Buffer<T> z;
  Buffer<T> a;  // empty for LIF

  static NeuronState zero(std::size_t n, NeuronKind kind);
};

/// Effective threshold input: u - theta for LIF, u - theta - beta a for ALIF.
template <typename T>
T spike_argument(const NeuronParams& p, T u, T a) noexcept {
  T x = u - static_cast<T>(p.lif.theta);
  if (p.kind == NeuronKind::alif) x -= static_cast<T>(p.beta) * a;
  return x;
}

template <typename T>
T emit_spike(const NeuronParams& p, T u, T a, const EvalOptions& opt) noexcept {
  const T x = spike_argument(p, u, a);
  return opt.smooth_forward ? smooth_step(x, static_cast<T>(p.lif.slope)) : heaviside(x);
}

/// Throws ShapeMismatch.
template <typename T>
NeuronState<T> lif_step(const NeuronState<T>& state, std::span<const T> input_current, const LIFParams& p,
                        const EvalOptions& opt = {});

template <typename T>
NeuronState<T> alif_step(const NeuronState<T>& state, std::span<const T> input_current, const ALIFParams& p,
                         const EvalOptions& opt = {});

template <typename T>
NeuronState<T> neuron_step(const NeuronState<T>& state, std::span<const T> input_current, const NeuronParams& p,
                           const EvalOptions& opt = {});

template <typename T>
struct ReadoutParams {
  std::span<const T> w_out;  // n_classes x n_hidden, row-major
  std::size_t n_classes = 0;
  std::size_t n_hidden = 0;
  double kappa = 0.95;
};

/// v' = kappa v + W_out z. Throws ShapeMismatch.
template <typename T>
Buffer<T> readout_step(std::span<const T> v, std::span<const T> z, const ReadoutParams<T>& p);

// --- step graphs ----------------------------------------------------------------

struct StepProgramOptions {
  // Weights enter as W [n,k] and x [k] through matvec. Without them the
  // program takes the input current I [n] as data and only yields H_I.
  bool weight_input = true;
  // Also export the emitted spike z' as an output.
  bool export_spikes = false;
};

/// Graph program of one neuron time step. Inputs in order: u, [a], W, x or I,
/// theta (vector). Outputs: u' [, a'] [, z'].
Program neuron_step_program(const NeuronParams& p, std::size_t n, std::size_t k,
                            const StepProgramOptions& options = {});

/// The literal LIF graph: u' = alpha u + W z, z' = H(u' - theta) with alpha,
/// theta, z, W and u all graph inputs and both u' and z' exported.
Program lif_figure_program(std::size_t n, std::size_t k, double slope = kDefaultSurrogateSlope);

/// Per-step Jacobians in compressed form.
///   LIF:  H [n|n] delta(0,0), F [n|n,k] delta(0,0)
///   ALIF: H [n,2|n,2] delta(0,0) with 2x2 neuron blocks,
///         F [n,2|n,k] delta(0,0); state axis order is (u, a).
template <typename T>
struct StepJacobians {
  SparseTensor<T> H;
  SparseTensor<T> F;  // absent structure (empty) when built without weights
  NeuronState<T> next;
};

/// Cached step graph for one (model, n, k). step() evaluates it, linearizes
/// it, eliminates in reverse order and packs H_I and F. H_E is never formed.
template <typename T>
class StepModel {
 public:
  StepModel(const NeuronParams& p, std::size_t n, std::size_t k, bool weight_input = true);

  const CompGraph<T>& graph() const noexcept { return graph_; }
  const NeuronParams& params() const noexcept { return params_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return k_; }

  /// With weight input: data = x [k], weights = W [n*k].
  /// Without: data = I [n], weights ignored.
  StepJacobians<T> step(const NeuronState<T>& state, std::span<const T> weights, std::span<const T> data,
                        const EvalOptions& opt = {}) const;

 private:
  NeuronParams params_;
  std::size_t n_;
  std::size_t k_;
  bool weight_input_;
  CompGraph<T> graph_;
  VertexId u_in_, a_in_, w_in_, u_out_, a_out_;
  Buffer<T> theta_;
};

/// Convenience wrapper returning (H_I, F) for one step with weights.
template <typename T>
StepJacobians<T> step_jacobians(const NeuronParams& p, const NeuronState<T>& state, std::span<const T> w,
                                std::span<const T> x, std::size_t n, std::size_t k);

}  // namespace sparseprop
