#pragma once

// Jacobian-shaped tensors with Kronecker-delta structure.
//
// A tensor has logical shape out_dims ++ in_dims. A delta pair (p, q) ties
// out axis p to in axis q: the tensor is zero unless both indices agree.
// Only the compressed factor is stored. Its axes are the logical axes in
// order with the in-axis of every pair dropped, laid out row-major. So a
// diagonal n x n matrix stores an n-vector, and T[i,a,b] = delta(i,a) M[i,b]
// stores the n x k matrix M.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sparseprop/arena.hpp"
#include "sparseprop/errors.hpp"

namespace sparseprop {

using Dims = std::vector<std::size_t>;

/// Largest logical rank the algebra supports.
inline constexpr std::size_t kMaxRank = 4;
inline constexpr std::size_t kMaxDeltaPairs = 2;
inline constexpr std::size_t kMaxBlockSize = 4;

struct DeltaPair {
  std::size_t out_axis;
  std::size_t in_axis;
  friend bool operator==(const DeltaPair&, const DeltaPair&) = default;
};

struct StructureDescriptor {
  Dims out_dims;
  Dims in_dims;
  std::vector<DeltaPair> delta_pairs;
  // Logical axes that stay dense inside a delta-paired neuron index
  // (e.g. the 2-wide state axis of per-neuron 2x2 blocks). Informational:
  // validated to be unpaired and small, not used by the algebra.
  Dims block_dims;

  friend bool operator==(const StructureDescriptor&, const StructureDescriptor&) = default;

  std::size_t rank() const noexcept { return out_dims.size() + in_dims.size(); }
  Dims logical_shape() const;
  Dims compressed_shape() const;
  std::size_t compressed_size() const;
  std::size_t logical_size() const;
  bool is_dense() const noexcept { return delta_pairs.empty(); }

  /// Throws BadStructure if an axis repeats, sizes differ, or limits are exceeded.
  void validate() const;

  /// Short tag used in graph dumps, e.g. "dense[3|2]" or "delta(0,0)[3|3,2]".
  std::string tag() const;

  static StructureDescriptor dense(Dims out_dims, Dims in_dims);
  static StructureDescriptor diagonal(std::size_t n);
};

template <typename T>
class SparseTensor {
 public:
  using value_type = T;

  SparseTensor() = default;
  SparseTensor(StructureDescriptor structure, Buffer<T> values);

  const StructureDescriptor& structure() const noexcept { return structure_; }
  const Dims& out_dims() const noexcept { return structure_.out_dims; }
  const Dims& in_dims() const noexcept { return structure_.in_dims; }
  Dims logical_shape() const { return structure_.logical_shape(); }

  std::span<const T> values() const noexcept { return values_; }
  std::span<T> mutable_values() noexcept { return values_; }

  /// Set when add() had to densify mismatched structures.
  bool fallback() const noexcept { return fallback_; }
  void set_fallback(bool f) noexcept { fallback_ = f; }

  /// Logical element lookup; returns 0 off the delta pattern.
  T at(std::span<const std::size_t> index) const;

  std::size_t value_bytes() const noexcept { return values_.size() * sizeof(T); }

 private:
  StructureDescriptor structure_;
  Buffer<T> values_;
  bool fallback_ = false;
};

/// Validates structure and length. Throws BadStructure or ShapeMismatch.
template <typename T>
SparseTensor<T> make_tensor(const Dims& logical_shape, StructureDescriptor structure,
                            std::span<const T> values);

template <typename T>
SparseTensor<T> make_tensor(StructureDescriptor structure, std::span<const T> values);

template <typename T>
SparseTensor<T> zeros(StructureDescriptor structure);

template <typename T>
SparseTensor<T> diagonal(std::span<const T> diag);

template <typename T>
SparseTensor<T> dense(Dims out_dims, Dims in_dims, std::span<const T> values);

/// Uncompressed copy with no delta pairs.
template <typename T>
SparseTensor<T> densify(const SparseTensor<T>& t);

/// Chain product: contracts A's in_dims against B's out_dims. Aligned delta
/// pairs survive into the result and collapse the contraction to products
/// over compressed entries.
template <typename T>
SparseTensor<T> contract(const SparseTensor<T>& a, const SparseTensor<T>& b);

/// Sum of equal-shaped tensors. Identical structures add compressed values;
/// otherwise both sides are densified and the result's fallback flag is set.
template <typename T>
SparseTensor<T> add(const SparseTensor<T>& a, const SparseTensor<T>& b);

/// Multiply every stored value by s.
template <typename T>
SparseTensor<T> scale(const SparseTensor<T>& a, T s);

/// Convert precision, keeping structure.
template <typename To, typename From>
SparseTensor<To> cast(const SparseTensor<From>& t) {
  Buffer<To> v(t.values().begin(), t.values().end());
  return SparseTensor<To>(t.structure(), std::move(v));
}

}  // namespace sparseprop
