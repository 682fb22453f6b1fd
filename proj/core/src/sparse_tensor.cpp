#include "sparseprop/sparse_tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace sparseprop {

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

std::size_t product(const Dims& d) {
  return std::accumulate(d.begin(), d.end(), std::size_t{1}, std::multiplies<>());
}

std::string dims_string(const Dims& d) {
  std::ostringstream os;
  for (std::size_t i = 0; i < d.size(); ++i) os << (i ? "," : "") << d[i];
  return os.str();
}

// Logical axis ids (out axes first, then in axes) kept in compressed storage.
std::vector<std::size_t> compressed_axes(const StructureDescriptor& s) {
  std::vector<bool> dropped(s.in_dims.size(), false);
  for (const auto& p : s.delta_pairs) dropped[p.in_axis] = true;
  std::vector<std::size_t> axes;
  for (std::size_t i = 0; i < s.out_dims.size(); ++i) axes.push_back(i);
  for (std::size_t i = 0; i < s.in_dims.size(); ++i)
    if (!dropped[i]) axes.push_back(s.out_dims.size() + i);
  return axes;
}

std::vector<std::size_t> row_major_strides(const Dims& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

}  // namespace

Dims StructureDescriptor::logical_shape() const {
  Dims shape = out_dims;
  shape.insert(shape.end(), in_dims.begin(), in_dims.end());
  return shape;
}

Dims StructureDescriptor::compressed_shape() const {
  const Dims logical = logical_shape();
  Dims shape;
  for (std::size_t axis : compressed_axes(*this)) shape.push_back(logical[axis]);
  return shape;
}

std::size_t StructureDescriptor::compressed_size() const { return product(compressed_shape()); }

std::size_t StructureDescriptor::logical_size() const { return product(logical_shape()); }

void StructureDescriptor::validate() const {
  if (rank() > kMaxRank)
    throw BadStructure("rank " + std::to_string(rank()) + " exceeds " + std::to_string(kMaxRank));
  if (delta_pairs.size() > kMaxDeltaPairs) throw BadStructure("too many delta pairs");
  std::vector<bool> out_used(out_dims.size(), false), in_used(in_dims.size(), false);
  for (const auto& p : delta_pairs) {
    if (p.out_axis >= out_dims.size() || p.in_axis >= in_dims.size())
      throw BadStructure("delta pair axis out of range");
    if (out_used[p.out_axis] || in_used[p.in_axis])
      throw BadStructure("axis appears in more than one delta pair");
    out_used[p.out_axis] = in_used[p.in_axis] = true;
    if (out_dims[p.out_axis] != in_dims[p.in_axis])
      throw BadStructure("paired axes have different sizes");
  }
  const Dims logical = logical_shape();
  for (std::size_t axis : block_dims) {
    if (axis >= logical.size()) throw BadStructure("block axis out of range");
    const bool paired = axis < out_dims.size() ? out_used[axis] : in_used[axis - out_dims.size()];
    if (paired) throw BadStructure("block axis is delta paired");
    if (logical[axis] > kMaxBlockSize) throw BadStructure("block axis wider than 4");
  }
}

std::string StructureDescriptor::tag() const {
  std::ostringstream os;
  if (delta_pairs.empty()) {
    os << "dense";
  } else {
    os << "delta";
    for (const auto& p : delta_pairs) os << "(" << p.out_axis << "," << p.in_axis << ")";
  }
  os << "[" << dims_string(out_dims) << "|" << dims_string(in_dims) << "]";
  return os.str();
}

StructureDescriptor StructureDescriptor::dense(Dims out_dims, Dims in_dims) {
  return {std::move(out_dims), std::move(in_dims), {}, {}};
}

StructureDescriptor StructureDescriptor::diagonal(std::size_t n) {
  return {{n}, {n}, {{0, 0}}, {}};
}

template <typename T>
SparseTensor<T>::SparseTensor(StructureDescriptor structure, Buffer<T> values)
    : structure_(std::move(structure)), values_(std::move(values)) {}

template <typename T>
T SparseTensor<T>::at(std::span<const std::size_t> index) const {
  const std::size_t n_out = structure_.out_dims.size();
  if (index.size() != structure_.rank()) throw ShapeMismatch("index rank differs from tensor rank");
  for (const auto& p : structure_.delta_pairs)
    if (index[p.out_axis] != index[n_out + p.in_axis]) return T{0};
  const Dims logical = structure_.logical_shape();
  std::size_t offset = 0;
  for (std::size_t axis : compressed_axes(structure_)) offset = offset * logical[axis] + index[axis];
  return values_[offset];
}

template <typename T>
SparseTensor<T> make_tensor(const Dims& logical_shape, StructureDescriptor structure,
                            std::span<const T> values) {
  structure.validate();
  if (structure.logical_shape() != logical_shape)
    throw ShapeMismatch("logical shape does not match structure dims");
  if (values.size() != structure.compressed_size())
    throw ShapeMismatch("buffer has " + std::to_string(values.size()) + " values, structure needs " +
                        std::to_string(structure.compressed_size()));
  return SparseTensor<T>(std::move(structure), Buffer<T>(values.begin(), values.end()));
}

template <typename T>
SparseTensor<T> make_tensor(StructureDescriptor structure, std::span<const T> values) {
  const Dims shape = structure.logical_shape();
  return make_tensor<T>(shape, std::move(structure), values);
}

template <typename T>
SparseTensor<T> zeros(StructureDescriptor structure) {
  structure.validate();
  const std::size_t size = structure.compressed_size();
  return SparseTensor<T>(std::move(structure), Buffer<T>(size, T{0}));
}

template <typename T>
SparseTensor<T> diagonal(std::span<const T> diag) {
  return SparseTensor<T>(StructureDescriptor::diagonal(diag.size()),
                         Buffer<T>(diag.begin(), diag.end()));
}

template <typename T>
SparseTensor<T> dense(Dims out_dims, Dims in_dims, std::span<const T> values) {
  return make_tensor<T>(StructureDescriptor::dense(std::move(out_dims), std::move(in_dims)), values);
}

template <typename T>
SparseTensor<T> densify(const SparseTensor<T>& t) {
  const auto& s = t.structure();
  StructureDescriptor ds = StructureDescriptor::dense(s.out_dims, s.in_dims);
  Buffer<T> out(ds.logical_size(), T{0});
  if (s.is_dense()) {
    std::copy(t.values().begin(), t.values().end(), out.begin());
    return SparseTensor<T>(std::move(ds), std::move(out));
  }

  // Scatter each compressed entry to its logical offset. A paired in-axis
  // shares the index of its out-axis.
  const Dims logical = s.logical_shape();
  const auto lstrides = row_major_strides(logical);
  const auto axes = compressed_axes(s);
  const std::size_t n_out = s.out_dims.size();
  std::vector<std::size_t> step(axes.size());
  for (std::size_t c = 0; c < axes.size(); ++c) {
    step[c] = lstrides[axes[c]];
    if (axes[c] < n_out)
      for (const auto& p : s.delta_pairs)
        if (p.out_axis == axes[c]) step[c] += lstrides[n_out + p.in_axis];
  }
  std::vector<std::size_t> idx(axes.size(), 0);
  std::size_t offset = 0;
  const auto values = t.values();
  for (std::size_t flat = 0; flat < values.size(); ++flat) {
    out[offset] = values[flat];
    for (std::size_t c = axes.size(); c-- > 0;) {
      offset += step[c];
      if (++idx[c] < logical[axes[c]]) break;
      offset -= step[c] * idx[c];
      idx[c] = 0;
    }
  }
  return SparseTensor<T>(std::move(ds), std::move(out));
}

namespace {

template <typename T>
void gemm_accumulate(std::span<const T> a, std::span<const T> b, std::span<T> r, std::size_t m,
                     std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* row = r.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a[i * k + p];
      const T* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += aip * brow[j];
    }
  }
}

struct LoopVar {
  std::size_t size = 1;
  std::size_t stride_a = 0;
  std::size_t stride_b = 0;
  std::size_t stride_r = 0;
};

}  // namespace

template <typename T>
SparseTensor<T> contract(const SparseTensor<T>& a, const SparseTensor<T>& b) {
  const auto& sa = a.structure();
  const auto& sb = b.structure();
  if (sa.in_dims != sb.out_dims)
    throw ShapeMismatch("contract: lhs in_dims [" + dims_string(sa.in_dims) + "] vs rhs out_dims [" +
                        dims_string(sb.out_dims) + "]");

  if (sa.is_dense() && sb.is_dense()) {
    StructureDescriptor rs = StructureDescriptor::dense(sa.out_dims, sb.in_dims);
    Buffer<T> values(rs.compressed_size(), T{0});
    gemm_accumulate<T>(a.values(), b.values(), values, product(sa.out_dims), product(sa.in_dims),
                       product(sb.in_dims));
    return SparseTensor<T>(std::move(rs), std::move(values));
  }

  const std::size_t n_ao = sa.out_dims.size();
  const std::size_t n_c = sa.in_dims.size();
  const std::size_t n_bi = sb.in_dims.size();

  std::vector<std::size_t> pair_a(n_c, kNone), pair_b(n_c, kNone);
  for (const auto& p : sa.delta_pairs) pair_a[p.in_axis] = p.out_axis;
  for (const auto& p : sb.delta_pairs) pair_b[p.out_axis] = p.in_axis;

  // Loop variables: one per lhs out axis, one per summed contracted axis,
  // one per rhs in axis unless a shared delta aliases it to an lhs out axis.
  std::vector<LoopVar> vars;
  std::vector<std::size_t> var_of_a(n_ao), var_of_b(n_bi, kNone), var_of_s(n_c, kNone);
  for (std::size_t p = 0; p < n_ao; ++p) {
    var_of_a[p] = vars.size();
    vars.push_back({sa.out_dims[p]});
  }
  StructureDescriptor rs = StructureDescriptor::dense(sa.out_dims, sb.in_dims);
  for (std::size_t q = 0; q < n_c; ++q) {
    if (pair_a[q] != kNone && pair_b[q] != kNone) {
      var_of_b[pair_b[q]] = var_of_a[pair_a[q]];
      rs.delta_pairs.push_back({pair_a[q], pair_b[q]});
    } else if (pair_a[q] == kNone && pair_b[q] == kNone) {
      var_of_s[q] = vars.size();
      vars.push_back({sa.in_dims[q]});
    }
  }
  for (std::size_t d = 0; d < n_bi; ++d) {
    if (var_of_b[d] == kNone) {
      var_of_b[d] = vars.size();
      vars.push_back({sb.in_dims[d]});
    }
  }
  std::sort(rs.delta_pairs.begin(), rs.delta_pairs.end(),
            [](const DeltaPair& x, const DeltaPair& y) { return x.out_axis < y.out_axis; });
  for (const auto& axis : sa.block_dims)
    if (axis < n_ao) rs.block_dims.push_back(axis);
  for (const auto& axis : sb.block_dims)
    if (axis >= sb.out_dims.size()) rs.block_dims.push_back(axis - sb.out_dims.size() + n_ao);
  rs.validate();

  auto var_of_contracted = [&](std::size_t q) {
    if (pair_a[q] != kNone) return var_of_a[pair_a[q]];
    if (pair_b[q] != kNone) return var_of_b[pair_b[q]];
    return var_of_s[q];
  };

  {
    const auto axes = compressed_axes(sa);
    const auto shape = sa.compressed_shape();
    const auto strides = row_major_strides(shape);
    for (std::size_t c = 0; c < axes.size(); ++c) {
      const std::size_t v =
          axes[c] < n_ao ? var_of_a[axes[c]] : var_of_contracted(axes[c] - n_ao);
      vars[v].stride_a += strides[c];
    }
  }
  {
    const auto axes = compressed_axes(sb);
    const auto shape = sb.compressed_shape();
    const auto strides = row_major_strides(shape);
    for (std::size_t c = 0; c < axes.size(); ++c) {
      const std::size_t v =
          axes[c] < n_c ? var_of_contracted(axes[c]) : var_of_b[axes[c] - n_c];
      vars[v].stride_b += strides[c];
    }
  }
  {
    const auto axes = compressed_axes(rs);
    const auto shape = rs.compressed_shape();
    const auto strides = row_major_strides(shape);
    for (std::size_t c = 0; c < axes.size(); ++c) {
      const std::size_t v = axes[c] < n_ao ? var_of_a[axes[c]] : var_of_b[axes[c] - n_ao];
      vars[v].stride_r += strides[c];
    }
  }

  Buffer<T> out(rs.compressed_size(), T{0});
  if (vars.empty()) vars.push_back({});
  for (const auto& v : vars)
    if (v.size == 0) return SparseTensor<T>(std::move(rs), std::move(out));

  const T* pa = a.values().data();
  const T* pb = b.values().data();
  T* pr = out.data();
  const LoopVar inner = vars.back();
  const std::size_t n_outer = vars.size() - 1;
  std::vector<std::size_t> idx(n_outer, 0);
  std::size_t off_a = 0, off_b = 0, off_r = 0;
  for (;;) {
    const T* xa = pa + off_a;
    const T* xb = pb + off_b;
    T* xr = pr + off_r;
    if (inner.stride_a == 0 && inner.stride_b == 1 && inner.stride_r == 1) {
      const T s = *xa;
      for (std::size_t i = 0; i < inner.size; ++i) xr[i] += s * xb[i];
    } else if (inner.stride_a == 1 && inner.stride_b == 1 && inner.stride_r == 1) {
      for (std::size_t i = 0; i < inner.size; ++i) xr[i] += xa[i] * xb[i];
    } else {
      for (std::size_t i = 0; i < inner.size; ++i)
        xr[i * inner.stride_r] += xa[i * inner.stride_a] * xb[i * inner.stride_b];
    }
    std::size_t v = n_outer;
    while (v-- > 0) {
      off_a += vars[v].stride_a;
      off_b += vars[v].stride_b;
      off_r += vars[v].stride_r;
      if (++idx[v] < vars[v].size) break;
      off_a -= vars[v].stride_a * vars[v].size;
      off_b -= vars[v].stride_b * vars[v].size;
      off_r -= vars[v].stride_r * vars[v].size;
      idx[v] = 0;
    }
    if (v == static_cast<std::size_t>(-1)) break;
  }
  return SparseTensor<T>(std::move(rs), std::move(out));
}

template <typename T>
SparseTensor<T> add(const SparseTensor<T>& a, const SparseTensor<T>& b) {
  if (a.logical_shape() != b.logical_shape() || a.out_dims() != b.out_dims())
    throw ShapeMismatch("add: logical shapes differ");
  if (a.structure().delta_pairs == b.structure().delta_pairs) {
    Buffer<T> values(a.values().begin(), a.values().end());
    const auto bv = b.values();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += bv[i];
    SparseTensor<T> r(a.structure(), std::move(values));
    r.set_fallback(a.fallback() || b.fallback());
    return r;
  }
  SparseTensor<T> da = densify(a);
  const SparseTensor<T> db = densify(b);
  auto values = da.mutable_values();
  const auto bv = db.values();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] += bv[i];
  da.set_fallback(true);
  return da;
}

template <typename T>
SparseTensor<T> scale(const SparseTensor<T>& a, T s) {
  Buffer<T> values(a.values().begin(), a.values().end());
  for (auto& v : values) v *= s;
  SparseTensor<T> r(a.structure(), std::move(values));
  r.set_fallback(a.fallback());
  return r;
}

#define SPARSEPROP_INSTANTIATE(T)                                                              \
  template class SparseTensor<T>;                                                              \
  template SparseTensor<T> make_tensor<T>(const Dims&, StructureDescriptor, std::span<const T>); \
  template SparseTensor<T> make_tensor<T>(StructureDescriptor, std::span<const T>);            \
  template SparseTensor<T> zeros<T>(StructureDescriptor);                                      \
  template SparseTensor<T> diagonal<T>(std::span<const T>);                                    \
  template SparseTensor<T> dense<T>(Dims, Dims, std::span<const T>);                           \
  template SparseTensor<T> densify<T>(const SparseTensor<T>&);                                 \
  template SparseTensor<T> contract<T>(const SparseTensor<T>&, const SparseTensor<T>&);        \
  template SparseTensor<T> add<T>(const SparseTensor<T>&, const SparseTensor<T>&);             \
  template SparseTensor<T> scale<T>(const SparseTensor<T>&, T);

SPARSEPROP_INSTANTIATE(float)
SPARSEPROP_INSTANTIATE(double)

#undef SPARSEPROP_INSTANTIATE

}  // namespace sparseprop
