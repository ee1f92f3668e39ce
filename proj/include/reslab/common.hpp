#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <stdexcept>

namespace reslab {

using Complex = std::complex<double>;

// Unusable input: unreadable files, malformed documents, invalid parameters.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numerical procedure failed to converge or produced inconsistent results.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The request violates an evaluation policy (e.g. a rectangle touching the
// origin without the explicit opt-in).
struct PolicyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Hardware concurrency with a floor of 1.
int default_thread_count();

// Runs fn(i) for every i in [0, n), using up to `threads` workers.
// Indices are dealt in contiguous blocks and callers write only to their own
// output slot, so results never depend on the worker count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace reslab
