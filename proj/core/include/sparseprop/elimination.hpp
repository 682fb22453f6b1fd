#pragma once

// Cross-country vertex elimination.
//
// Eliminating j applies c_ik += c_jk * c_ij for every predecessor i and
// successor k of j, then drops j's edges. Once every intermediate is gone the
// remaining input -> output edges are the Jacobian blocks.

#include <map>
#include <utility>
#include <variant>
#include <vector>

#include "sparseprop/graph.hpp"

namespace sparseprop {

enum class EliminationMode { forward, reverse };

/// Forward (topological), reverse, or an explicit permutation of the
/// intermediate vertices.
struct EliminationOrder {
  std::variant<EliminationMode, std::vector<VertexId>> order = EliminationMode::reverse;

  static EliminationOrder forward() { return {EliminationMode::forward}; }
  static EliminationOrder reverse() { return {EliminationMode::reverse}; }
  static EliminationOrder explicit_list(std::vector<VertexId> ids) { return {std::move(ids)}; }
};

/// (input id, output id) -> d output / d input.
template <typename T>
using JacobianSet = std::map<std::pair<VertexId, VertexId>, SparseTensor<T>>;

/// Returns a copy of g with j eliminated. j stays in the vertex list,
/// isolated. Throws NotIntermediate for inputs and outputs.
template <typename T>
CompGraph<T> eliminate_vertex(const CompGraph<T>& g, VertexId j);

/// In-place variant used by accumulate_jacobian.
template <typename T>
void eliminate_vertex_in_place(CompGraph<T>& g, VertexId j);

/// Intermediate vertices in the order the given mode eliminates them.
/// Throws BadStructure if an explicit list is not a permutation of them.
template <typename T>
std::vector<VertexId> resolve_order(const CompGraph<T>& g, const EliminationOrder& order);

/// Eliminates all intermediates of a linearized graph and returns the
/// Jacobians between connected input/output pairs. Outputs that feed other
/// outputs are folded through after elimination, so each output's Jacobian
/// is total.
template <typename T>
JacobianSet<T> accumulate_jacobian(const CompGraph<T>& g, const EliminationOrder& order);

}  // namespace sparseprop
