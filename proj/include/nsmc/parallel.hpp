#pragma once

#include <cstddef>
#include <exception>
#include <memory>
#include <mutex>
#include <type_traits>

namespace nsmc {

/// Number of worker threads used by parallel loops. Defaults to the
/// NSMC_THREADS environment variable, else the number of logical cores.
int thread_count();

/// Overrides the worker count for subsequent parallel loops (n >= 1).
void set_thread_count(int n);

namespace detail {
void parallel_for_impl(std::size_t n, void (*body)(void*, std::size_t), void* ctx);
}

/// Runs body(i) for i in [0, n) on the worker pool. Each index must write
/// only its own output slot; callers reduce afterwards in index order so
/// results do not depend on the worker count. The first exception thrown
/// by any index is rethrown on the calling thread.
template <class F>
void parallel_for(std::size_t n, F&& body) {
  using Body = std::remove_reference_t<F>;
  auto trampoline = [](void* ctx, std::size_t i) { (*static_cast<Body*>(ctx))(i); };
  detail::parallel_for_impl(n, trampoline, const_cast<void*>(static_cast<const void*>(std::addressof(body))));
}

}  // namespace nsmc
