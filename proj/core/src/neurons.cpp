#include "sparseprop/neurons.hpp"

#include <stdexcept>

namespace sparseprop {

const char* neuron_name(NeuronKind kind) noexcept { return kind == NeuronKind::alif ? "alif" : "lif"; }

NeuronKind parse_neuron(const std::string& s) {
  if (s == "lif") return NeuronKind::lif;
  if (s == "alif") return NeuronKind::alif;
  throw std::invalid_argument("unknown neuron model '" + s + "'");
}

void NeuronParams::validate() const {
  if (!(lif.alpha > 0.0 && lif.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  if (!(lif.theta > 0.0)) throw std::invalid_argument("theta must be positive");
  if (!(lif.slope > 0.0)) throw std::invalid_argument("surrogate slope must be positive");
  if (kind == NeuronKind::alif) {
    if (!(beta >= 0.0)) throw std::invalid_argument("beta must be non-negative");
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0,1)");
  }
}

template <typename T>
NeuronState<T> NeuronState<T>::zero(std::size_t n, NeuronKind kind) {
  NeuronState s;
  s.u.assign(n, T{0});
  s.z.assign(n, T{0});
  if (kind == NeuronKind::alif) s.a.assign(n, T{0});
  return s;
}

namespace {

template <typename T>
void check_state(const NeuronState<T>& s, std::size_t n_current, bool alif) {
  if (s.u.size() != n_current || s.z.size() != n_current)
    throw ShapeMismatch("state has " + std::to_string(s.u.size()) + " neurons, input current has " +
                        std::to_string(n_current));
  if (alif && s.a.size() != n_current) throw ShapeMismatch("ALIF state is missing its adaptation vector");
}

}  // namespace

template <typename T>
NeuronState<T> lif_step(const NeuronState<T>& state, std::span<const T> current, const LIFParams& p,
                        const EvalOptions& opt) {
  return neuron_step(state, current, NeuronParams::make_lif(p), opt);
}

template <typename T>
NeuronState<T> alif_step(const NeuronState<T>& state, std::span<const T> current, const ALIFParams& p,
                         const EvalOptions& opt) {
  return neuron_step(state, current, NeuronParams::make_alif(p), opt);
}

template <typename T>
NeuronState<T> neuron_step(const NeuronState<T>& state, std::span<const T> current, const NeuronParams& p,
                           const EvalOptions& opt) {
  const bool alif = p.kind == NeuronKind::alif;
  const std::size_t n = current.size();
  check_state(state, n, alif);
  const T alpha = static_cast<T>(p.lif.alpha);
  const T theta = static_cast<T>(p.lif.theta);
  NeuronState<T> next;
  next.u.resize(n);
  next.z.resize(n);
  if (alif) next.a.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    // The smooth oracle mode treats z as a function of (u, a) even at h_0.
    const T z = opt.smooth_forward ? emit_spike(p, state.u[i], alif ? state.a[i] : T{0}, opt) : state.z[i];
    T u = alpha * state.u[i] + current[i];
    if (p.lif.soft_reset) u -= theta * z;
    T a{0};
    if (alif) a = static_cast<T>(p.rho) * state.a[i] + z;
    next.u[i] = u;
    if (alif) next.a[i] = a;
    next.z[i] = emit_spike(p, u, a, opt);
  }
  return next;
}

template <typename T>
Buffer<T> readout_step(std::span<const T> v, std::span<const T> z, const ReadoutParams<T>& p) {
  if (v.size() != p.n_classes || z.size() != p.n_hidden || p.w_out.size() != p.n_classes * p.n_hidden)
    throw ShapeMismatch("readout_step: v[" + std::to_string(v.size()) + "], z[" + std::to_string(z.size()) +
                        "] do not fit W_out " + std::to_string(p.n_classes) + "x" + std::to_string(p.n_hidden));
  Buffer<T> out(p.n_classes);
  const T kappa = static_cast<T>(p.kappa);
  for (std::size_t m = 0; m < p.n_classes; ++m) {
    T acc = kappa * v[m];
    const T* row = p.w_out.data() + m * p.n_hidden;
    for (std::size_t i = 0; i < p.n_hidden; ++i) acc += row[i] * z[i];
    out[m] = acc;
  }
  return out;
}

Program neuron_step_program(const NeuronParams& p, std::size_t n, std::size_t k, const StepProgramOptions& options) {
  p.validate();
  const bool alif = p.kind == NeuronKind::alif;
  const double slope = p.lif.slope;
  Program prog;
  prog.inputs.push_back({"u", {n}});
  if (alif) prog.inputs.push_back({"a", {n}});
  if (options.weight_input) {
    prog.inputs.push_back({"W", {n, k}});
    prog.inputs.push_back({"x", {k}, false});
  } else {
    prog.inputs.push_back({"I", {n}, false});
  }
  prog.inputs.push_back({"theta", {n}, false});

  auto& body = prog.body;
  const std::string current = options.weight_input ? "cur" : "I";
  if (options.weight_input) body.push_back({"cur", OpKind::matvec, {"W", "x"}});
  body.push_back({"au", OpKind::scalar_mul, {"u"}, p.lif.alpha});
  if (alif) {
    body.push_back({"ba", OpKind::scalar_mul, {"a"}, p.beta});
    body.push_back({"A", OpKind::add, {"theta", "ba"}});
    body.push_back({"z", OpKind::surrogate_threshold, {"u", "A"}, slope});
    body.push_back({"ra", OpKind::scalar_mul, {"a"}, p.rho});
    body.push_back({"a1", OpKind::add, {"ra", "z"}});
  } else if (p.lif.soft_reset) {
    body.push_back({"z", OpKind::surrogate_threshold, {"u", "theta"}, slope});
  }
  if (p.lif.soft_reset) {
    body.push_back({"s", OpKind::add, {"au", current}});
    body.push_back({"rz", OpKind::scalar_mul, {"z"}, p.lif.theta});
    body.push_back({"u1", OpKind::subtract, {"s", "rz"}});
  } else {
    body.push_back({"u1", OpKind::add, {"au", current}});
  }
  prog.outputs.push_back("u1");
  if (alif) prog.outputs.push_back("a1");
  if (options.export_spikes) {
    if (alif) {
      body.push_back({"ba1", OpKind::scalar_mul, {"a1"}, p.beta});
      body.push_back({"A1", OpKind::add, {"theta", "ba1"}});
      body.push_back({"z1", OpKind::surrogate_threshold, {"u1", "A1"}, slope});
    } else {
      body.push_back({"z1", OpKind::surrogate_threshold, {"u1", "theta"}, slope});
    }
    prog.outputs.push_back("z1");
  }
  return prog;
}

Program lif_figure_program(std::size_t n, std::size_t k, double slope) {
  Program prog;
  prog.inputs = {{"alpha", {}}, {"u", {n}}, {"W", {n, k}}, {"z", {k}}, {"theta", {n}}};
  prog.body = {
      {"au", OpKind::scalar_mul, {"alpha", "u"}},
      {"Wz", OpKind::matvec, {"W", "z"}},
      {"u1", OpKind::add, {"au", "Wz"}},
      {"d", OpKind::subtract, {"u1", "theta"}},
      {"z1", OpKind::surrogate_threshold, {"d"}, slope},
  };
  prog.outputs = {"u1", "z1"};
  return prog;
}

// --- StepModel ------------------------------------------------------------------

template <typename T>
StepModel<T>::StepModel(const NeuronParams& p, std::size_t n, std::size_t k, bool weight_input)
    : params_(p),
      n_(n),
      k_(k),
      weight_input_(weight_input),
      graph_(build_graph<T>(neuron_step_program(p, n, k, {weight_input, false}))),
      theta_(n, static_cast<T>(p.lif.theta)) {
  u_in_ = graph_.id_of("u");
  u_out_ = graph_.id_of("u1");
  a_in_ = a_out_ = w_in_ = static_cast<VertexId>(-1);
  if (p.kind == NeuronKind::alif) {
    a_in_ = graph_.id_of("a");
    a_out_ = graph_.id_of("a1");
  }
  if (weight_input) w_in_ = graph_.id_of("W");
}

namespace {

template <typename T>
std::span<const T> diag_values(const JacobianSet<T>& jac, VertexId in, VertexId out, const char* what) {
  auto it = jac.find({in, out});
  if (it == jac.end()) return {};
  const auto& s = it->second.structure();
  if (s.delta_pairs.size() != 1 || s.out_dims.size() != 1 || s.in_dims.size() != 1)
    throw StructureFallback(std::string(what) + " lost its diagonal structure: " + s.tag());
  return it->second.values();
}

template <typename T>
std::span<const T> delta_rows(const JacobianSet<T>& jac, VertexId in, VertexId out, const char* what) {
  auto it = jac.find({in, out});
  if (it == jac.end()) return {};
  const auto& s = it->second.structure();
  if (s.delta_pairs.size() != 1 || s.delta_pairs[0] != DeltaPair{0, 0})
    throw StructureFallback(std::string(what) + " lost its delta structure: " + s.tag());
  return it->second.values();
}

}  // namespace

template <typename T>
StepJacobians<T> StepModel<T>::step(const NeuronState<T>& state, std::span<const T> weights,
                                    std::span<const T> data, const EvalOptions& opt) const {
  const bool alif = params_.kind == NeuronKind::alif;
  check_state(state, n_, alif);
  std::vector<std::span<const T>> inputs;
  inputs.emplace_back(state.u);
  if (alif) inputs.emplace_back(state.a);
  if (weight_input_) inputs.push_back(weights);
  inputs.push_back(data);
  inputs.emplace_back(theta_);

  StepJacobians<T> out;
  JacobianSet<T> jac;
  {
    const auto values = evaluate(graph_, std::span<const std::span<const T>>(inputs), opt);
    jac = accumulate_jacobian(linearize(graph_, values), EliminationOrder::reverse());
    out.next.u.assign(values[u_out_].begin(), values[u_out_].end());
    if (alif) out.next.a.assign(values[a_out_].begin(), values[a_out_].end());
  }
  out.next.z.resize(n_);
  for (std::size_t i = 0; i < n_; ++i)
    out.next.z[i] = emit_spike(params_, out.next.u[i], alif ? out.next.a[i] : T{0}, opt);

  if (!alif) {
    auto it = jac.find({u_in_, u_out_});
    if (it == jac.end()) throw StructureFallback("missing u -> u' Jacobian");
    diag_values(jac, u_in_, u_out_, "H_I");
    out.H = std::move(it->second);
    if (weight_input_) {
      auto f = jac.find({w_in_, u_out_});
      delta_rows(jac, w_in_, u_out_, "F");
      out.F = std::move(f->second);
    }
    return out;
  }

  // Pack the four diagonal state Jacobians into per-neuron 2x2 blocks,
  // compressed layout [neuron, out component, in component].
  const VertexId ins[2] = {u_in_, a_in_};
  const VertexId outs[2] = {u_out_, a_out_};
  Buffer<T> blocks(n_ * 4, T{0});
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 2; ++c) {
      const auto d = diag_values(jac, ins[c], outs[r], "H_I block");
      for (std::size_t i = 0; i < d.size(); ++i) blocks[i * 4 + r * 2 + c] = d[i];
    }
  out.H = SparseTensor<T>(StructureDescriptor{{n_, 2}, {n_, 2}, {{0, 0}}, {1, 3}}, std::move(blocks));
  if (weight_input_) {
    Buffer<T> f(n_ * 2 * k_, T{0});
    for (std::size_t r = 0; r < 2; ++r) {
      const auto rows = delta_rows(jac, w_in_, outs[r], "F");
      for (std::size_t i = 0; i < n_ && !rows.empty(); ++i)
        std::copy(rows.begin() + i * k_, rows.begin() + (i + 1) * k_, f.begin() + (i * 2 + r) * k_);
    }
    out.F = SparseTensor<T>(StructureDescriptor{{n_, 2}, {n_, k_}, {{0, 0}}, {1}}, std::move(f));
  }
  return out;
}

template <typename T>
StepJacobians<T> step_jacobians(const NeuronParams& p, const NeuronState<T>& state, std::span<const T> w,
                                std::span<const T> x, std::size_t n, std::size_t k) {
  return StepModel<T>(p, n, k).step(state, w, x);
}

#define SPARSEPROP_INSTANTIATE(T)                                                                              \
  template struct NeuronState<T>;                                                                              \
  template NeuronState<T> lif_step<T>(const NeuronState<T>&, std::span<const T>, const LIFParams&,             \
                                      const EvalOptions&);                                                     \
  template NeuronState<T> alif_step<T>(const NeuronState<T>&, std::span<const T>, const ALIFParams&,           \
                                       const EvalOptions&);                                                    \
  template NeuronState<T> neuron_step<T>(const NeuronState<T>&, std::span<const T>, const NeuronParams&,       \
                                         const EvalOptions&);                                                  \
  template Buffer<T> readout_step<T>(std::span<const T>, std::span<const T>, const ReadoutParams<T>&);         \
  template class StepModel<T>;                                                                                 \
  template StepJacobians<T> step_jacobians<T>(const NeuronParams&, const NeuronState<T>&, std::span<const T>, \
                                              std::span<const T>, std::size_t, std::size_t);

SPARSEPROP_INSTANTIATE(float)
SPARSEPROP_INSTANTIATE(double)

#undef SPARSEPROP_INSTANTIATE

}  // namespace sparseprop
