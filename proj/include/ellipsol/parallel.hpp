#pragma once

#include <cstddef>
#include <functional>

namespace ellipsol {

/// Worker count for data-parallel node loops; 1 runs inline.
void set_num_threads(int n);
int num_threads();

/// Calls fn(i) for i in [0, n) split into contiguous chunks. fn must only write per-index state.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ellipsol
