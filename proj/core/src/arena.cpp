#include "sparseprop/arena.hpp"

namespace sparseprop {

namespace {
thread_local std::shared_ptr<detail::ArenaCounter> t_active;
}

namespace detail {
std::shared_ptr<ArenaCounter> active_counter() noexcept { return t_active; }
}  // namespace detail

ArenaScope::ArenaScope()
    : counter_(std::make_shared<detail::ArenaCounter>()), previous_(t_active) {
  t_active = counter_;
}

ArenaScope::~ArenaScope() { t_active = previous_; }

ArenaStats arena_stats() {
  if (!t_active) throw NoActiveArena("no ArenaScope is active on this thread");
  return t_active->stats();
}

}  // namespace sparseprop
