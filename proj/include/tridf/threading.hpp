// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace tridf {

// Process-wide worker count (CLI --threads / TRIDF_THREADS). Default 1 keeps
// every code path deterministic.
void set_num_threads(std::size_t n);
std::size_t num_threads();

// Runs fn(i) for i in [0, n). Work items must write to disjoint locations;
// the result is then independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace tridf
