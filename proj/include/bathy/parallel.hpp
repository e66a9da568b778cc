#pragma once

#include <cstddef>
#include <functional>

namespace bathy {

// Caps the number of workers used by parallel_for. 0 means hardware concurrency.
void set_max_threads(unsigned threads);
unsigned max_threads();

// Runs body(i) for i in [0, count). Iterations must be independent; callers
// derive per-index RNG streams so the result does not depend on scheduling.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace bathy
