#pragma once

// Byte accounting for tensor value buffers.
//
// An ArenaScope activates a fresh accounting context on the current thread.
// Every Buffer allocated while a scope is active reports its bytes to that
// context for the buffer's whole lifetime, even if the buffer outlives the
// scope. The high-water mark is the peak of live bytes, which is what the
// memory benchmarks report.

#include <cstddef>
#include <memory>
#include <vector>

#include "sparseprop/errors.hpp"

namespace sparseprop {

struct ArenaStats {
  std::size_t live_bytes = 0;
  std::size_t high_water_bytes = 0;
};

namespace detail {

class ArenaCounter {
 public:
  void acquire(std::size_t bytes) noexcept {
    live_ += bytes;
    if (live_ > high_water_) high_water_ = live_;
  }
  void release(std::size_t bytes) noexcept { live_ -= bytes; }
  ArenaStats stats() const noexcept { return {live_, high_water_}; }

 private:
  std::size_t live_ = 0;
  std::size_t high_water_ = 0;
};

std::shared_ptr<ArenaCounter> active_counter() noexcept;

}  // namespace detail

/// RAII activation of a per-run accounting context. Scopes nest; the
/// previous context is restored on destruction. Not movable.
class ArenaScope {
 public:
  ArenaScope();
  ~ArenaScope();
  ArenaScope(const ArenaScope&) = delete;
  ArenaScope& operator=(const ArenaScope&) = delete;

  ArenaStats stats() const noexcept { return counter_->stats(); }

 private:
  std::shared_ptr<detail::ArenaCounter> counter_;
  std::shared_ptr<detail::ArenaCounter> previous_;
};

/// Stats of the innermost active scope on this thread. Throws NoActiveArena.
ArenaStats arena_stats();

/// Allocator that binds to the active arena at construction time.
template <typename T>
class TrackedAllocator {
 public:
  using value_type = T;

  TrackedAllocator() noexcept : counter_(detail::active_counter()) {}
  template <typename U>
  TrackedAllocator(const TrackedAllocator<U>& other) noexcept : counter_(other.counter()) {}

  T* allocate(std::size_t n) {
    T* p = std::allocator<T>{}.allocate(n);
    if (counter_) counter_->acquire(n * sizeof(T));
    return p;
  }
  void deallocate(T* p, std::size_t n) noexcept {
    if (counter_) counter_->release(n * sizeof(T));
    std::allocator<T>{}.deallocate(p, n);
  }

  // Copies account to whatever arena is active where the copy is made.
  TrackedAllocator select_on_container_copy_construction() const { return TrackedAllocator{}; }

  using propagate_on_container_move_assignment = std::true_type;
  using propagate_on_container_copy_assignment = std::false_type;
  using propagate_on_container_swap = std::true_type;

  const std::shared_ptr<detail::ArenaCounter>& counter() const noexcept { return counter_; }

  template <typename U>
  bool operator==(const TrackedAllocator<U>& other) const noexcept {
    return counter_ == other.counter();
  }

 private:
  std::shared_ptr<detail::ArenaCounter> counter_;
};

/// Numeric storage whose bytes count toward the active arena.
template <typename T>
using Buffer = std::vector<T, TrackedAllocator<T>>;

}  // namespace sparseprop
