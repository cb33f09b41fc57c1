#pragma once

#include <cstdint>
#include <functional>

namespace voxfuse {

/// Number of worker threads used by parallel_chunks (including the caller).
int worker_count();
void set_worker_count(int n);

/// Splits [begin, end) into fixed-size chunks of `grain` elements and runs
/// fn(chunk_index, chunk_begin, chunk_end) across the worker pool.
///
/// Chunk boundaries depend only on the range and the grain, never on thread
/// count or scheduling, so per-chunk partial results reduced in chunk order
/// are reproducible run to run. Nested calls degrade to inline execution.
void parallel_chunks(std::int64_t begin, std::int64_t end, std::int64_t grain,
                     const std::function<void(int, std::int64_t, std::int64_t)>& fn);

/// Convenience per-index loop without reduction guarantees beyond the above.
void parallel_for(std::int64_t begin, std::int64_t end,
                  const std::function<void(std::int64_t)>& fn);

inline int chunk_count(std::int64_t begin, std::int64_t end, std::int64_t grain) {
  if (end <= begin) return 0;
  return static_cast<int>((end - begin + grain - 1) / grain);
}

}  // namespace voxfuse
