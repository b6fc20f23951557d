#pragma once

#include <exception>
#include <vector>

namespace mstopo::detail {

/// Runs fn(k) for k in [0, n) across OpenMP threads. Each index must write to
/// its own output slot. The exception of the lowest failing index is rethrown.
template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  std::vector<std::exception_ptr> errors(static_cast<size_t>(n));
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int k = 0; k < n; ++k) {
    try {
      fn(k);
    } catch (...) {
      errors[static_cast<size_t>(k)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

}  // namespace mstopo::detail
