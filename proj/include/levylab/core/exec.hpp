#pragma once

#include <cstddef>
#include <span>

namespace levylab {

/// Execution policy for the data-parallel kernels. `serial` is the reference
/// path kept for testing; `parallel` distributes the outer loop with OpenMP.
enum class Exec { serial, parallel };

/// Pairwise (tree) summation. The result depends only on the input order, never
/// on how the terms were produced, so Monte Carlo reductions stay reproducible.
double pairwise_sum(std::span<const double> values);

/// Sets the OpenMP thread count (no-op for n == 0).
void set_thread_count(int n);
int thread_count();

} // namespace levylab
