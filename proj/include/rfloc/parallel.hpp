#pragma once

#include <cstddef>
#include <functional>

namespace rfloc {

/// Runs fn(0..count-1), fanning out over up to `threads` workers. Results
/// must go into caller-owned slots indexed by i so the reduction order never
/// depends on scheduling.
void run_indexed(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

} // namespace rfloc
