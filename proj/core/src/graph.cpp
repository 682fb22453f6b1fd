#include "sparseprop/graph.hpp"

#include <functional>
#include <queue>
#include <sstream>
#include <unordered_map>

namespace sparseprop {

const char* op_name(OpKind kind) noexcept {
  switch (kind) {
    case OpKind::constant: return "constant";
    case OpKind::add: return "add";
    case OpKind::subtract: return "subtract";
    case OpKind::elementwise_mul: return "elementwise_mul";
    case OpKind::scalar_mul: return "scalar_mul";
    case OpKind::matvec: return "matvec";
    case OpKind::surrogate_threshold: return "surrogate_threshold";
  }
  return "?";
}

namespace {

std::string shape_string(const Dims& d) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < d.size(); ++i) os << (i ? "," : "") << d[i];
  os << "]";
  return os.str();
}

std::size_t numel(const Dims& d) {
  std::size_t n = 1;
  for (auto x : d) n *= x;
  return n;
}

Dims concat(const Dims& a, const Dims& b) {
  Dims r = a;
  r.insert(r.end(), b.begin(), b.end());
  return r;
}

// Result shape of an op given argument shapes; throws ShapeMismatch.
Dims infer_shape(OpKind op, const std::vector<Dims>& args, const std::string& where) {
  auto fail = [&](const std::string& msg) -> Dims { throw ShapeMismatch(where + ": " + msg); };
  auto arity = [&](std::size_t lo, std::size_t hi) {
    if (args.size() < lo || args.size() > hi)
      fail(std::string(op_name(op)) + " takes " + std::to_string(lo) + (lo == hi ? "" : "-" + std::to_string(hi)) +
           " arguments, got " + std::to_string(args.size()));
  };
  switch (op) {
    case OpKind::constant:
      arity(0, 0);
      return fail("constant cannot appear in a program body");
    case OpKind::add:
    case OpKind::subtract:
    case OpKind::elementwise_mul:
      arity(2, 2);
      if (args[0] != args[1] || args[0].size() != 1) fail("operands must be equal-length vectors");
      return args[0];
    case OpKind::scalar_mul:
      arity(1, 2);
      if (args.size() == 1) {
        if (args[0].size() != 1) fail("scalar_mul operand must be a vector");
        return args[0];
      }
      if (!args[0].empty()) fail("scalar_mul first operand must be a scalar");
      if (args[1].size() != 1) fail("scalar_mul second operand must be a vector");
      return args[1];
    case OpKind::matvec:
      arity(2, 2);
      if (args[0].size() != 2 || args[1].size() != 1 || args[0][1] != args[1][0])
        fail("matvec needs W [n,k] and x [k], got " + shape_string(args[0]) + " and " + shape_string(args[1]));
      return {args[0][0]};
    case OpKind::surrogate_threshold:
      arity(1, 2);
      if (args[0].size() != 1) fail("threshold operand must be a vector");
      if (args.size() == 2 && args[1] != args[0]) fail("threshold operands must match");
      return args[0];
  }
  return fail("unknown op");
}

}  // namespace

// --- CompGraph ---------------------------------------------------------------

template <typename T>
VertexId CompGraph<T>::add_vertex(OpKind kind, Dims shape, std::vector<VertexId> args, std::string name,
                                  double attr) {
  const VertexId id = vertices_.size();
  for (VertexId a : args)
    if (a >= id) throw UndefinedValue("argument " + std::to_string(a) + " of vertex " + std::to_string(id));
  vertices_.push_back({id, kind, std::move(name), std::move(shape), std::move(args), attr});
  preds_.emplace_back();
  succs_.emplace_back();
  return id;
}

template <typename T>
void CompGraph<T>::set_edge(VertexId src, VertexId dst, std::optional<SparseTensor<T>> partial) {
  if (src >= vertices_.size() || dst >= vertices_.size()) throw UndefinedValue("edge endpoint out of range");
  if (partial) {
    const Dims expect = concat(vertices_[dst].shape, vertices_[src].shape);
    if (partial->logical_shape() != expect || partial->out_dims() != vertices_[dst].shape)
      throw ShapeMismatch("edge " + std::to_string(src) + "->" + std::to_string(dst) + " partial is " +
                          partial->structure().tag() + ", expected " + shape_string(expect));
  }
  edges_[{src, dst}] = std::move(partial);
  succs_[src].insert(dst);
  preds_[dst].insert(src);
}

template <typename T>
void CompGraph<T>::remove_edge(VertexId src, VertexId dst) {
  edges_.erase({src, dst});
  succs_[src].erase(dst);
  preds_[dst].erase(src);
}

template <typename T>
const std::optional<SparseTensor<T>>& CompGraph<T>::partial(VertexId src, VertexId dst) const {
  auto it = edges_.find({src, dst});
  if (it == edges_.end())
    throw UndefinedValue("no edge " + std::to_string(src) + "->" + std::to_string(dst));
  return it->second;
}

template <typename T>
void CompGraph<T>::mark_input(VertexId v) {
  if (v >= vertices_.size()) throw UndefinedValue("input vertex out of range");
  inputs_.insert(v);
}

template <typename T>
void CompGraph<T>::mark_output(VertexId v) {
  if (v >= vertices_.size()) throw UndefinedValue("output vertex out of range");
  outputs_.insert(v);
}

template <typename T>
std::optional<VertexId> CompGraph<T>::find(const std::string& name) const {
  for (const auto& v : vertices_)
    if (v.name == name) return v.id;
  return std::nullopt;
}

template <typename T>
VertexId CompGraph<T>::id_of(const std::string& name) const {
  if (auto id = find(name)) return *id;
  throw UndefinedValue("no vertex named '" + name + "'");
}

template <typename T>
std::string CompGraph<T>::dump() const {
  std::ostringstream os;
  for (const auto& v : vertices_) {
    os << "vertex " << v.id << " " << op_name(v.kind) << " " << (v.name.empty() ? "_" : v.name) << " "
       << shape_string(v.shape);
    if (is_input(v.id)) os << " input";
    if (is_output(v.id)) os << " output";
    os << "\n";
  }
  for (const auto& [key, partial] : edges_)
    os << "edge " << key.first << " -> " << key.second << " " << (partial ? partial->structure().tag() : "none")
       << "\n";
  return os.str();
}

// --- build / order ------------------------------------------------------------

template <typename T>
CompGraph<T> build_graph(const Program& program) {
  CompGraph<T> g;
  std::unordered_map<std::string, VertexId> ids;
  std::vector<bool> differentiable;

  for (const auto& in : program.inputs) {
    if (ids.count(in.name)) throw ShapeMismatch("input '" + in.name + "' defined twice");
    if (in.shape.size() > 2) throw ShapeMismatch("input '" + in.name + "' has rank above 2");
    const VertexId id = g.add_vertex(OpKind::constant, in.shape, {}, in.name);
    g.mark_input(id);
    ids[in.name] = id;
    differentiable.push_back(in.differentiable);
  }
  for (const auto& st : program.body) {
    if (ids.count(st.result)) throw ShapeMismatch("value '" + st.result + "' defined twice");
    std::vector<VertexId> args;
    std::vector<Dims> shapes;
    for (const auto& name : st.args) {
      auto it = ids.find(name);
      if (it == ids.end()) throw UndefinedValue("'" + name + "' used before definition in '" + st.result + "'");
      args.push_back(it->second);
      shapes.push_back(g.vertex(it->second).shape);
    }
    Dims shape = infer_shape(st.op, shapes, st.result);
    double attr = st.attr;
    if (st.op == OpKind::surrogate_threshold && attr <= 0.0) attr = kDefaultSurrogateSlope;
    const VertexId id = g.add_vertex(st.op, std::move(shape), args, st.result, attr);
    ids[st.result] = id;
    differentiable.push_back(true);
    for (VertexId a : args)
      if (differentiable[a]) g.set_edge(a, id);
  }
  for (const auto& name : program.outputs) {
    auto it = ids.find(name);
    if (it == ids.end()) throw UndefinedValue("output '" + name + "' is not defined");
    g.mark_output(it->second);
  }
  return g;
}

template <typename T>
std::vector<VertexId> topo_order(const CompGraph<T>& g) {
  const std::size_t n = g.vertices().size();
  std::vector<std::set<VertexId>> deps(n), users(n);
  for (const auto& v : g.vertices())
    for (VertexId a : v.args) {
      deps[v.id].insert(a);
      users[a].insert(v.id);
    }
  for (const auto& [key, partial] : g.edges()) {
    deps[key.second].insert(key.first);
    users[key.first].insert(key.second);
  }
  std::vector<std::size_t> indegree(n);
  std::priority_queue<VertexId, std::vector<VertexId>, std::greater<>> ready;
  for (VertexId v = 0; v < n; ++v) {
    indegree[v] = deps[v].size();
    if (indegree[v] == 0) ready.push(v);
  }
  std::vector<VertexId> order;
  order.reserve(n);
  while (!ready.empty()) {
    const VertexId v = ready.top();
    ready.pop();
    order.push_back(v);
    for (VertexId u : users[v])
      if (--indegree[u] == 0) ready.push(u);
  }
  if (order.size() != n) throw CycleDetected("graph has a directed cycle");
  return order;
}

// --- evaluation / linearization -----------------------------------------------

template <typename T>
std::vector<Buffer<T>> evaluate(const CompGraph<T>& g, std::span<const std::span<const T>> input_values,
                                const EvalOptions& options) {
  const auto inputs = g.inputs();
  if (input_values.size() != inputs.size())
    throw ShapeMismatch("expected " + std::to_string(inputs.size()) + " input values, got " +
                        std::to_string(input_values.size()));
  std::vector<Buffer<T>> values(g.vertices().size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto& v = g.vertex(inputs[i]);
    if (input_values[i].size() != numel(v.shape))
      throw ShapeMismatch("input '" + v.name + "' expects " + std::to_string(numel(v.shape)) + " values");
    values[v.id].assign(input_values[i].begin(), input_values[i].end());
  }
  for (VertexId id : topo_order(g)) {
    const Vertex& v = g.vertex(id);
    if (v.kind == OpKind::constant) {
      if (!g.is_input(id)) throw UndefinedValue("constant vertex " + std::to_string(id) + " has no value");
      continue;
    }
    auto arg = [&](std::size_t i) -> const Buffer<T>& { return values[v.args[i]]; };
    Buffer<T>& out = values[id];
    out.resize(numel(v.shape));
    const std::size_t n = out.size();
    switch (v.kind) {
      case OpKind::add:
        for (std::size_t i = 0; i < n; ++i) out[i] = arg(0)[i] + arg(1)[i];
        break;
      case OpKind::subtract:
        for (std::size_t i = 0; i < n; ++i) out[i] = arg(0)[i] - arg(1)[i];
        break;
      case OpKind::elementwise_mul:
        for (std::size_t i = 0; i < n; ++i) out[i] = arg(0)[i] * arg(1)[i];
        break;
      case OpKind::scalar_mul: {
        const bool unary = v.args.size() == 1;
        const T s = unary ? static_cast<T>(v.attr) : arg(0)[0];
        const auto& x = unary ? arg(0) : arg(1);
        for (std::size_t i = 0; i < n; ++i) out[i] = s * x[i];
        break;
      }
      case OpKind::matvec: {
        const auto& w = arg(0);
        const auto& x = arg(1);
        const std::size_t k = x.size();
        for (std::size_t i = 0; i < n; ++i) {
          T acc{0};
          const T* row = w.data() + i * k;
          for (std::size_t j = 0; j < k; ++j) acc += row[j] * x[j];
          out[i] = acc;
        }
        break;
      }
      case OpKind::surrogate_threshold: {
        const T slope = static_cast<T>(v.attr);
        for (std::size_t i = 0; i < n; ++i) {
          const T x = v.args.size() == 2 ? arg(0)[i] - arg(1)[i] : arg(0)[i];
          out[i] = options.smooth_forward ? smooth_step(x, slope) : heaviside(x);
        }
        break;
      }
      case OpKind::constant:
        break;
    }
  }
  return values;
}

template <typename T>
std::vector<SparseTensor<T>> local_partials(const Vertex& v, std::span<const std::span<const T>> args) {
  if (args.size() != v.args.size())
    throw ShapeMismatch(std::string(op_name(v.kind)) + ": wrong number of argument values");
  const std::size_t n = numel(v.shape);
  auto expect = [&](std::size_t i, std::size_t size) {
    if (args[i].size() != size)
      throw ShapeMismatch(std::string(op_name(v.kind)) + " argument " + std::to_string(i) + " has " +
                          std::to_string(args[i].size()) + " values, expected " + std::to_string(size));
  };
  auto filled_diag = [&](T value) { return diagonal<T>(Buffer<T>(n, value)); };

  std::vector<SparseTensor<T>> out;
  switch (v.kind) {
    case OpKind::constant:
      break;
    case OpKind::add:
    case OpKind::subtract:
      expect(0, n);
      expect(1, n);
      out.push_back(filled_diag(T{1}));
      out.push_back(filled_diag(v.kind == OpKind::add ? T{1} : T{-1}));
      break;
    case OpKind::elementwise_mul:
      expect(0, n);
      expect(1, n);
      out.push_back(diagonal<T>(args[1]));
      out.push_back(diagonal<T>(args[0]));
      break;
    case OpKind::scalar_mul:
      if (args.size() == 1) {
        expect(0, n);
        out.push_back(filled_diag(static_cast<T>(v.attr)));
      } else {
        expect(0, 1);
        expect(1, n);
        out.push_back(dense<T>({n}, {}, args[1]));
        out.push_back(filled_diag(args[0][0]));
      }
      break;
    case OpKind::matvec: {
      expect(1, args[0].size() / std::max<std::size_t>(n, 1));
      expect(0, n * args[1].size());
      const std::size_t k = args[1].size();
      // d(Wx)_i / dW_ab = delta_ia x_b, stored as n rows of x.
      Buffer<T> rows(n * k);
      for (std::size_t i = 0; i < n; ++i) std::copy(args[1].begin(), args[1].end(), rows.begin() + i * k);
      out.emplace_back(StructureDescriptor{{n}, {n, k}, {{0, 0}}, {}}, std::move(rows));
      out.push_back(dense<T>({n}, {k}, args[0]));
      break;
    }
    case OpKind::surrogate_threshold: {
      expect(0, n);
      if (args.size() == 2) expect(1, n);
      const T slope = static_cast<T>(v.attr > 0 ? v.attr : kDefaultSurrogateSlope);
      Buffer<T> grad(n);
      for (std::size_t i = 0; i < n; ++i)
        grad[i] = surrogate_grad(args.size() == 2 ? args[0][i] - args[1][i] : args[0][i], slope);
      if (args.size() == 2) {
        Buffer<T> neg(grad.begin(), grad.end());
        for (auto& x : neg) x = -x;
        out.push_back(diagonal<T>(grad));
        out.push_back(diagonal<T>(neg));
      } else {
        out.push_back(diagonal<T>(grad));
      }
      break;
    }
  }
  return out;
}

template <typename T>
CompGraph<T> linearize(const CompGraph<T>& g, const std::vector<Buffer<T>>& values) {
  CompGraph<T> out = g;
  for (const auto& v : g.vertices()) {
    if (v.args.empty() || g.preds(v.id).empty()) continue;
    std::vector<std::span<const T>> args;
    for (VertexId a : v.args) args.emplace_back(values.at(a));
    auto partials = local_partials<T>(v, args);
    // Repeated arguments (e.g. x*x) share one edge holding the summed partial.
    std::map<VertexId, SparseTensor<T>> per_src;
    for (std::size_t i = 0; i < v.args.size(); ++i) {
      const VertexId src = v.args[i];
      if (!g.has_edge(src, v.id)) continue;
      auto it = per_src.find(src);
      if (it == per_src.end())
        per_src.emplace(src, std::move(partials[i]));
      else
        it->second = add(it->second, partials[i]);
    }
    for (auto& [src, p] : per_src) out.set_edge(src, v.id, std::move(p));
  }
  return out;
}

#define SPARSEPROP_INSTANTIATE(T)                                                                       \
  template class CompGraph<T>;                                                                          \
  template CompGraph<T> build_graph<T>(const Program&);                                                 \
  template std::vector<VertexId> topo_order<T>(const CompGraph<T>&);                                    \
  template std::vector<Buffer<T>> evaluate<T>(const CompGraph<T>&, std::span<const std::span<const T>>, \
                                              const EvalOptions&);                                      \
  template std::vector<SparseTensor<T>> local_partials<T>(const Vertex&,                                \
                                                          std::span<const std::span<const T>>);         \
  template CompGraph<T> linearize<T>(const CompGraph<T>&, const std::vector<Buffer<T>>&);

SPARSEPROP_INSTANTIATE(float)
SPARSEPROP_INSTANTIATE(double)

#undef SPARSEPROP_INSTANTIATE

}  // namespace sparseprop
