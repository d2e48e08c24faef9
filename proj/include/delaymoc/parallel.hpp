#pragma once

// Index-parallel execution with a serial reference path.  Every batch kernel
// in the library takes an Exec so tests can check the OpenMP path against the
// serial one bit for bit.

#include <cstddef>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace delaymoc {

enum class Exec { Serial, Parallel };

/// Threads available to Exec::Parallel (1 without OpenMP).
int max_workers();
/// Sets the OpenMP thread count; n <= 0 leaves the default.
void set_workers(int n);

/// Calls f(i) for i in [0, n).  The first exception thrown by any f(i) is
/// rethrown after all indices finish.
template <class F>
void for_each_index(std::size_t n, F&& f, Exec exec = Exec::Parallel) {
  if (exec == Exec::Serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace delaymoc
