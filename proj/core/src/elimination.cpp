#include "sparseprop/elimination.hpp"

#include <algorithm>
#include <set>

namespace sparseprop {

namespace {

template <typename T>
const SparseTensor<T>& require_partial(const CompGraph<T>& g, VertexId src, VertexId dst) {
  const auto& p = g.partial(src, dst);
  if (!p)
    throw UndefinedValue("edge " + std::to_string(src) + "->" + std::to_string(dst) +
                         " has no partial; linearize the graph first");
  return *p;
}

// c_ik += c_jk * c_ij for all i in preds(j), k in succs(j).
template <typename T>
void fuse_through(CompGraph<T>& g, VertexId j, bool drop_in_edges) {
  const std::vector<VertexId> preds(g.preds(j).begin(), g.preds(j).end());
  const std::vector<VertexId> succs(g.succs(j).begin(), g.succs(j).end());
  for (VertexId k : succs) {
    const SparseTensor<T> c_jk = require_partial(g, j, k);
    for (VertexId i : preds) {
      SparseTensor<T> path = contract(c_jk, require_partial(g, i, j));
      if (g.has_edge(i, k)) {
        const SparseTensor<T> old = require_partial(g, i, k);
        g.set_edge(i, k, add(old, path));
      } else {
        g.set_edge(i, k, std::move(path));
      }
    }
    g.remove_edge(j, k);
  }
  if (drop_in_edges)
    for (VertexId i : preds) g.remove_edge(i, j);
}

}  // namespace

template <typename T>
void eliminate_vertex_in_place(CompGraph<T>& g, VertexId j) {
  if (j >= g.vertices().size()) throw UndefinedValue("vertex " + std::to_string(j) + " does not exist");
  if (!g.is_intermediate(j))
    throw NotIntermediate("vertex " + std::to_string(j) + " is a graph " + (g.is_input(j) ? "input" : "output"));
  fuse_through(g, j, /*drop_in_edges=*/true);
}

template <typename T>
CompGraph<T> eliminate_vertex(const CompGraph<T>& g, VertexId j) {
  CompGraph<T> out = g;
  eliminate_vertex_in_place(out, j);
  return out;
}

template <typename T>
std::vector<VertexId> resolve_order(const CompGraph<T>& g, const EliminationOrder& order) {
  std::vector<VertexId> intermediates;
  for (VertexId v : topo_order(g))
    if (g.is_intermediate(v)) intermediates.push_back(v);

  if (const auto* mode = std::get_if<EliminationMode>(&order.order)) {
    if (*mode == EliminationMode::reverse) std::reverse(intermediates.begin(), intermediates.end());
    return intermediates;
  }
  const auto& list = std::get<std::vector<VertexId>>(order.order);
  std::vector<VertexId> a = list, b = intermediates;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a != b) throw BadStructure("explicit elimination order must list each intermediate vertex exactly once");
  return list;
}

template <typename T>
JacobianSet<T> accumulate_jacobian(const CompGraph<T>& g, const EliminationOrder& order) {
  CompGraph<T> work = g;
  for (VertexId j : resolve_order(g, order)) eliminate_vertex_in_place(work, j);

  // Outputs consumed by later outputs: push their input Jacobians forward,
  // keeping their own in-edges.
  for (VertexId o : topo_order(work))
    if (work.is_output(o) && !work.succs(o).empty()) fuse_through(work, o, /*drop_in_edges=*/false);

  JacobianSet<T> jac;
  for (const auto& [key, partial] : work.edges()) {
    if (!work.is_input(key.first) || !work.is_output(key.second))
      throw BadStructure("elimination left a non input->output edge");
    jac.emplace(key, require_partial(work, key.first, key.second));
  }
  return jac;
}

#define SPARSEPROP_INSTANTIATE(T)                                                           \
  template CompGraph<T> eliminate_vertex<T>(const CompGraph<T>&, VertexId);                 \
  template void eliminate_vertex_in_place<T>(CompGraph<T>&, VertexId);                      \
  template std::vector<VertexId> resolve_order<T>(const CompGraph<T>&, const EliminationOrder&); \
  template JacobianSet<T> accumulate_jacobian<T>(const CompGraph<T>&, const EliminationOrder&);

SPARSEPROP_INSTANTIATE(float)
SPARSEPROP_INSTANTIATE(double)

#undef SPARSEPROP_INSTANTIATE

}  // namespace sparseprop
