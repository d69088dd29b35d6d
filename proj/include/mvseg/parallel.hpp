#pragma once

#include <cstddef>
#include <functional>

namespace mvseg {

/// Number of worker threads used by the data-parallel kernels (default 1).
int num_jobs();
void set_num_jobs(int jobs);

/// Runs body(begin, end) over [0, n) split into fixed-size chunks.
///
/// Chunk boundaries depend only on n and chunk, never on the worker count,
/// so any per-chunk computation is bitwise identical for every --jobs value.
void parallel_for(std::size_t n, std::size_t chunk,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace mvseg
