#pragma once

// Computational graph of one model time step.
//
// Vertices are elemental operations over scalars, vectors and (for weight
// inputs) matrices. After linearize() every differentiable edge (i, j)
// carries the partial Jacobian d v_j / d v_i with logical shape
// shape(j) ++ shape(i) and the sparsest structure the operation allows.

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sparseprop/sparse_tensor.hpp"

namespace sparseprop {

enum class OpKind {
  constant,  // graph input or fixed value, no arguments
  add,
  subtract,
  elementwise_mul,
  scalar_mul,           // (s, x) or (x) with the scalar held in attr
  matvec,               // (W, x) with W [n,k], x [k]
  surrogate_threshold,  // (x) or (x, threshold); attr is the surrogate slope
};

const char* op_name(OpKind kind) noexcept;

using VertexId = std::size_t;

struct Vertex {
  VertexId id = 0;
  OpKind kind = OpKind::constant;
  std::string name;
  Dims shape;
  std::vector<VertexId> args;
  double attr = 0.0;
};

// Spike nonlinearity and its surrogate derivative.
inline constexpr double kDefaultSurrogateSlope = 10.0;

template <typename T>
T heaviside(T x) noexcept {
  return x >= T{0} ? T{1} : T{0};
}

/// sigma'(x) = 1 / (1 + s|x|)^2, peak 1 at x = 0.
template <typename T>
T surrogate_grad(T x, T slope) noexcept {
  const T d = T{1} + slope * std::abs(x);
  return T{1} / (d * d);
}

/// Smooth step whose exact derivative is surrogate_grad. Only used by the
/// finite-difference oracle mode; regular runs spike with heaviside.
template <typename T>
T smooth_step(T x, T slope) noexcept {
  return T{0.5} + x / (T{1} + slope * std::abs(x));
}

struct EvalOptions {
  bool smooth_forward = false;
};

template <typename T>
class CompGraph {
 public:
  using EdgeKey = std::pair<VertexId, VertexId>;

  VertexId add_vertex(OpKind kind, Dims shape, std::vector<VertexId> args = {},
                      std::string name = {}, double attr = 0.0);

  /// Adds or replaces an edge. Throws ShapeMismatch if the partial's logical
  /// shape is not shape(dst) ++ shape(src).
  void set_edge(VertexId src, VertexId dst, std::optional<SparseTensor<T>> partial = std::nullopt);
  void remove_edge(VertexId src, VertexId dst);
  bool has_edge(VertexId src, VertexId dst) const { return edges_.count({src, dst}) != 0; }
  const std::optional<SparseTensor<T>>& partial(VertexId src, VertexId dst) const;

  void mark_input(VertexId v);
  void mark_output(VertexId v);
  bool is_input(VertexId v) const { return inputs_.count(v) != 0; }
  bool is_output(VertexId v) const { return outputs_.count(v) != 0; }
  bool is_intermediate(VertexId v) const { return !is_input(v) && !is_output(v); }

  const std::vector<Vertex>& vertices() const noexcept { return vertices_; }
  const Vertex& vertex(VertexId v) const { return vertices_.at(v); }
  std::optional<VertexId> find(const std::string& name) const;
  VertexId id_of(const std::string& name) const;

  const std::map<EdgeKey, std::optional<SparseTensor<T>>>& edges() const noexcept { return edges_; }
  const std::set<VertexId>& preds(VertexId v) const { return preds_.at(v); }
  const std::set<VertexId>& succs(VertexId v) const { return succs_.at(v); }
  std::vector<VertexId> inputs() const { return {inputs_.begin(), inputs_.end()}; }
  std::vector<VertexId> outputs() const { return {outputs_.begin(), outputs_.end()}; }

  /// One line per vertex ("vertex <id> <kind> <name> [shape]") then one per
  /// edge ("edge <src> -> <dst> <structure tag>").
  std::string dump() const;

 private:
  std::vector<Vertex> vertices_;
  std::map<EdgeKey, std::optional<SparseTensor<T>>> edges_;
  std::vector<std::set<VertexId>> preds_;
  std::vector<std::set<VertexId>> succs_;
  std::set<VertexId> inputs_;
  std::set<VertexId> outputs_;
};

// --- programs ---------------------------------------------------------------

struct ProgramInput {
  std::string name;
  Dims shape;
  // Non-differentiable inputs (data, fixed constants) get no outbound edges,
  // so no Jacobian is ever accumulated for them.
  bool differentiable = true;
};

struct Statement {
  std::string result;
  OpKind op;
  std::vector<std::string> args;
  double attr = 0.0;
};

struct Program {
  std::vector<ProgramInput> inputs;
  std::vector<Statement> body;
  std::vector<std::string> outputs;
};

/// Throws UndefinedValue, ShapeMismatch.
template <typename T>
CompGraph<T> build_graph(const Program& program);

/// Vertices ordered so every edge points forward; ties broken by smallest id.
/// Throws CycleDetected.
template <typename T>
std::vector<VertexId> topo_order(const CompGraph<T>& g);

/// Forward evaluation. input_values follows g.inputs() (ascending id) order.
template <typename T>
std::vector<Buffer<T>> evaluate(const CompGraph<T>& g, std::span<const std::span<const T>> input_values,
                                const EvalOptions& options = {});

/// Partial Jacobians of v with respect to each of its arguments, in argument
/// order. Throws ShapeMismatch.
template <typename T>
std::vector<SparseTensor<T>> local_partials(const Vertex& v,
                                            std::span<const std::span<const T>> arg_values);

/// Copy of g with every edge's partial set from the given vertex values.
template <typename T>
CompGraph<T> linearize(const CompGraph<T>& g, const std::vector<Buffer<T>>& values);

}  // namespace sparseprop
