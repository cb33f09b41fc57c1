#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <vector>

#include "voxfuse/core/parallel.hpp"
#include "voxfuse/engine/allocation.hpp"
#include "voxfuse/engine/block_store.hpp"
#include "voxfuse/volume/hash_volume.hpp"
#include "voxfuse/voxel/voxel.hpp"
#include "voxfuse/volume/scene_params.hpp"

namespace voxfuse {

/// Per-entry paging state. needs_swap_in is only ever set for entries whose
/// block lives on the host (block_state == -1); resident entries are active
/// or queued for eviction.
enum class SwapState : std::uint8_t {
  inactive = 0,
  needs_swap_in,
  in_transfer,
  active,
  needs_swap_out
};

struct SwapMetrics {
  int swapped_in = 0;
  int swapped_out = 0;
  std::uint64_t bytes_in = 0;
  std::uint64_t bytes_out = 0;

  void accumulate(const SwapMetrics& o) {
    swapped_in += o.swapped_in;
    swapped_out += o.swapped_out;
    bytes_in += o.bytes_in;
    bytes_out += o.bytes_out;
  }
};

/// Host block store plus transfer bookkeeping. The host side holds one slot
/// per hash entry, so a hash table index is all that has to travel between
/// the active volume and the store.
template <typename TVoxel>
class GlobalCache {
 public:
  GlobalCache(int entry_count, int buffer_capacity, std::unique_ptr<BlockStore> store)
      : states_(static_cast<std::size_t>(entry_count), SwapState::inactive),
        buffer_capacity_(buffer_capacity),
        store_(std::move(store)) {}

  static GlobalCache in_memory(int entry_count, int buffer_capacity) {
    return GlobalCache(entry_count, buffer_capacity,
                       make_memory_block_store(entry_count, VoxelCodec<TVoxel>::bytes * kBlockVolume));
  }

  int entry_count() const { return static_cast<int>(states_.size()); }
  int buffer_capacity() const { return buffer_capacity_; }

  SwapState state(int idx) const { return states_[static_cast<std::size_t>(idx)]; }
  void set_state(int idx, SwapState s) { states_[static_cast<std::size_t>(idx)] = s; }

  bool has_stored_data(int idx) const { return store_->has(idx); }

  BlockStore& store() { return *store_; }
  const BlockStore& store() const { return *store_; }

  void read_block(int idx, TVoxel* out) const {
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(store_->payload_bytes()));
    store_->read(idx, buf.data());
    for (int i = 0; i < kBlockVolume; ++i) {
      VoxelCodec<TVoxel>::decode(buf.data() + static_cast<std::size_t>(i) * VoxelCodec<TVoxel>::bytes,
                                 out[i]);
    }
  }

  void write_block(int idx, const TVoxel* in) {
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(store_->payload_bytes()));
    for (int i = 0; i < kBlockVolume; ++i) {
      VoxelCodec<TVoxel>::encode(in[i],
                                 buf.data() + static_cast<std::size_t>(i) * VoxelCodec<TVoxel>::bytes);
    }
    store_->write(idx, buf.data());
  }

 private:
  std::vector<SwapState> states_;
  int buffer_capacity_;
  std::unique_ptr<BlockStore> store_;
};

/// Weighted fusion of a host voxel with the freshly integrated active voxel.
/// A zero-weight side passes the other through verbatim, which keeps
/// untouched swap roundtrips bit-identical.
template <typename TVoxel>
inline TVoxel fuse_voxels(const TVoxel& host, const TVoxel& active, int max_weight) {
  TVoxel out = active;
  const int wh = host.w_depth, wa = active.w_depth;
  if (wh + wa > 0) {
    if (wa == 0) {
      out.sdf = host.sdf;
      out.w_depth = host.w_depth;
    } else if (wh == 0) {
      // keep active
    } else {
      const float f = (TVoxel::sdf_to_float(host.sdf) * wh + TVoxel::sdf_to_float(active.sdf) * wa) /
                      static_cast<float>(wh + wa);
      out.sdf = TVoxel::sdf_from_float(f);
      out.w_depth = static_cast<std::uint8_t>(std::min(wh + wa, max_weight));
    }
  }
  if constexpr (TVoxel::has_color) {
    const int ch = host.w_color, ca = active.w_color;
    if (ca == 0) {
      out.clr = host.clr;
      out.w_color = host.w_color;
    } else if (ch == 0) {
      out.clr = active.clr;
      out.w_color = active.w_color;
    } else {
      const Vec3f c = (host.clr.template cast<float>() * static_cast<float>(ch) +
                       active.clr.template cast<float>() * static_cast<float>(ca)) /
                      static_cast<float>(ch + ca);
      out.clr = Vec3u8(static_cast<std::uint8_t>(c.x()), static_cast<std::uint8_t>(c.y()),
                       static_cast<std::uint8_t>(c.z()));
      out.w_color = static_cast<std::uint8_t>(std::min(ch + ca, max_weight));
    }
  }
  return out;
}

/// Marks host-resident blocks that entered the enlarged view frustum for
/// paging in. Requests are re-derived from the current frustum every frame;
/// stale ones are dropped.
template <typename TVoxel>
void request_swap_ins(HashVolume<TVoxel>& volume, const AllocationScratch& scratch,
                      GlobalCache<TVoxel>& cache) {
  const int n = volume.entry_count();
  for (int i = 0; i < n; ++i) {
    const bool visible = scratch.swap_visibility[static_cast<std::size_t>(i)] != 0;
    if (cache.state(i) == SwapState::needs_swap_in && !visible) {
      cache.set_state(i, SwapState::inactive);
    }
    if (volume.entry(i).block_state == kEntrySwappedOut && cache.has_stored_data(i) && visible) {
      cache.set_state(i, SwapState::needs_swap_in);
    }
  }
}

/// Services up to buffer_capacity swap-in requests (ascending entry order):
/// allocates a fresh block, then fuses the host data with whatever the
/// device integrated meanwhile. On block-array exhaustion the request stays
/// queued for a later frame.
template <typename TVoxel>
SwapMetrics execute_swap_in(HashVolume<TVoxel>& volume, GlobalCache<TVoxel>& cache,
                            const SceneParams& params) {
  SwapMetrics metrics;
  const int n = volume.entry_count();
  struct Staged {
    int entry;
    int slot;
  };
  std::vector<Staged> staged;
  staged.reserve(static_cast<std::size_t>(cache.buffer_capacity()));
  for (int i = 0; i < n && static_cast<int>(staged.size()) < cache.buffer_capacity(); ++i) {
    if (cache.state(i) != SwapState::needs_swap_in) continue;
    HashEntry& entry = volume.entry(i);
    int slot = entry.block_state;
    if (slot < 0) {
      slot = volume.vba_free().pop();
      if (slot < 0) break;  // deferred, request stays queued
      entry.block_state = slot;
    }
    cache.set_state(i, SwapState::in_transfer);
    staged.push_back({i, slot});
  }

  // Secondary integration over the staged transfer buffer.
  parallel_chunks(0, static_cast<std::int64_t>(staged.size()), 8,
                  [&](int, std::int64_t b, std::int64_t e) {
    std::vector<TVoxel> host_block(kBlockVolume);
    for (std::int64_t s = b; s < e; ++s) {
      const Staged& st = staged[static_cast<std::size_t>(s)];
      cache.read_block(st.entry, host_block.data());
      TVoxel* active = volume.block(st.slot);
      for (int v = 0; v < kBlockVolume; ++v) {
        active[v] = fuse_voxels(host_block[v], active[v], params.max_weight);
      }
    }
  });

  for (const Staged& st : staged) {
    cache.store().clear(st.entry);
    cache.set_state(st.entry, SwapState::active);
    ++metrics.swapped_in;
    metrics.bytes_in += static_cast<std::uint64_t>(cache.store().payload_bytes()) + 4;
  }
  return metrics;
}

/// Marks resident blocks that left the enlarged frustum for eviction and
/// cancels evictions for blocks that became visible again. Also normalizes
/// freshly allocated entries to the active state.
template <typename TVoxel>
void request_swap_outs(HashVolume<TVoxel>& volume, const AllocationScratch& scratch,
                       GlobalCache<TVoxel>& cache) {
  const int n = volume.entry_count();
  for (int i = 0; i < n; ++i) {
    const HashEntry& entry = volume.entry(i);
    if (entry.block_state < 0) continue;
    const bool visible = scratch.swap_visibility[static_cast<std::size_t>(i)] != 0;
    switch (cache.state(i)) {
      case SwapState::inactive:
        cache.set_state(i, visible ? SwapState::active : SwapState::needs_swap_out);
        break;
      case SwapState::active:
        if (!visible) cache.set_state(i, SwapState::needs_swap_out);
        break;
      case SwapState::needs_swap_out:
        if (visible) cache.set_state(i, SwapState::active);
        break;
      default:
        break;
    }
  }
}

/// Copies up to buffer_capacity marked blocks to their host slots (the entry
/// index is the slot address), returns the device blocks to the free stack
/// reset to default voxels, and marks the entries swapped out. Their position
/// stays in the table so visibility checks keep working.
template <typename TVoxel>
SwapMetrics execute_swap_out(HashVolume<TVoxel>& volume, GlobalCache<TVoxel>& cache) {
  SwapMetrics metrics;
  const int n = volume.entry_count();
  int processed = 0;
  for (int i = 0; i < n && processed < cache.buffer_capacity(); ++i) {
    if (cache.state(i) != SwapState::needs_swap_out) continue;
    HashEntry& entry = volume.entry(i);
    cache.write_block(i, volume.block(entry.block_state));
    TVoxel* block = volume.block(entry.block_state);
    for (int v = 0; v < kBlockVolume; ++v) block[v] = TVoxel{};
    volume.vba_free().push(entry.block_state);
    entry.block_state = kEntrySwappedOut;
    cache.set_state(i, SwapState::inactive);
    ++processed;
    ++metrics.swapped_out;
    metrics.bytes_out += static_cast<std::uint64_t>(cache.store().payload_bytes()) + 4;
  }
  cache.store().flush();
  return metrics;
}

}  // namespace voxfuse
