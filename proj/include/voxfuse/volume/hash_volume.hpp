#pragma once

#include <atomic>
#include <cassert>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "voxfuse/core/types.hpp"

namespace voxfuse {

inline constexpr int kBlockSide = 8;
inline constexpr int kBlockVolume = kBlockSide * kBlockSide * kBlockSide;

inline constexpr std::int32_t kEntrySwappedOut = -1;
inline constexpr std::int32_t kEntryUnallocated = -2;

/// One slot of the hash table. `offset` links into the excess list: the
/// stored value minus one is the next excess index, values <= 0 terminate.
/// `block_state` >= 0 addresses a voxel block array slot, -1 marks an entry
/// whose data lives only in the host store, < -1 is unallocated.
struct HashEntry {
  Vec3s pos = Vec3s::Zero();
  std::int32_t offset = 0;
  std::int32_t block_state = kEntryUnallocated;
};

/// Spatial hash of a block position. Coordinates pass through two's-complement
/// reinterpretation and the multiplies wrap in unsigned 32-bit arithmetic.
inline std::uint32_t hash_block_pos(const Vec3i& p, std::uint32_t mask) {
  const std::uint32_t x = static_cast<std::uint32_t>(p.x());
  const std::uint32_t y = static_cast<std::uint32_t>(p.y());
  const std::uint32_t z = static_cast<std::uint32_t>(p.z());
  return ((x * 73856093u) ^ (y * 19349669u) ^ (z * 83492791u)) & mask;
}

/// Splits a voxel coordinate into its block position (floor division by the
/// block side, so negatives map consistently) and the linear index inside
/// the block.
inline Vec3i voxel_to_block(const Vec3i& p, int& linear_idx) {
  const Vec3i block(p.x() >> 3, p.y() >> 3, p.z() >> 3);
  const int lx = p.x() & 7, ly = p.y() & 7, lz = p.z() & 7;
  linear_idx = lx + ly * kBlockSide + lz * kBlockSide * kBlockSide;
  return block;
}

struct HashConfig {
  int bucket_count = 1 << 20;  // must be a power of two
  int bucket_size = 2;
  int excess_count = 1 << 17;
  int block_count = 1 << 18;

  int ordered_count() const { return bucket_count * bucket_size; }
  int entry_count() const { return ordered_count() + excess_count; }
  std::uint32_t hash_mask() const { return static_cast<std::uint32_t>(bucket_count - 1); }
};

/// Prepopulated allocation list with an atomic top-of-stack counter, as used
/// for both the voxel block array and the excess list.
class FreeStack {
 public:
  explicit FreeStack(int n) : slots_(static_cast<std::size_t>(n)), top_(n) {
    std::iota(slots_.begin(), slots_.end(), 0);
  }

  FreeStack(const FreeStack& o) : slots_(o.slots_), top_(o.top_.load()) {}

  /// Single atomic decrement; returns -1 when exhausted.
  int pop() {
    const int t = top_.fetch_sub(1, std::memory_order_relaxed) - 1;
    if (t < 0) {
      top_.fetch_add(1, std::memory_order_relaxed);
      return -1;
    }
    return slots_[static_cast<std::size_t>(t)];
  }

  void push(int slot) {
    const int t = top_.fetch_add(1, std::memory_order_relaxed);
    assert(t < static_cast<int>(slots_.size()));
    slots_[static_cast<std::size_t>(t)] = slot;
  }

  /// Sequential bulk reservation used by the allocation stage. Returns the
  /// number of slots reserved; take(i) yields them in the same order a
  /// sequence of pops would have.
  int reserve(int k) {
    const int avail = top_.load(std::memory_order_relaxed);
    const int take = k < avail ? k : avail;
    top_.store(avail - take, std::memory_order_relaxed);
    reserve_base_ = avail - take;
    reserve_count_ = take;
    return take;
  }
  int take(int i) const {
    assert(i >= 0 && i < reserve_count_);
    return slots_[static_cast<std::size_t>(reserve_base_ + reserve_count_ - 1 - i)];
  }

  int free_count() const { return top_.load(std::memory_order_relaxed); }
  int capacity() const { return static_cast<int>(slots_.size()); }

 private:
  std::vector<int> slots_;
  std::atomic<int> top_;
  int reserve_base_ = 0;
  int reserve_count_ = 0;
};

enum class InsertStatus : std::uint8_t { inserted, existing, reattached, vba_full, excess_full };

struct InsertOutcome {
  InsertStatus status = InsertStatus::vba_full;
  int entry_index = -1;
  int block_slot = -1;
  bool ok() const {
    return status == InsertStatus::inserted || status == InsertStatus::existing ||
           status == InsertStatus::reattached;
  }
};

/// Voxel block hash: ordered buckets plus an unordered excess list, backed by
/// a contiguous voxel block array. Entry removal is not supported; swapped
/// out entries keep their position so visibility checks still work.
template <typename TVoxel>
class HashVolume {
 public:
  using VoxelType = TVoxel;
  static constexpr bool is_dense = false;

  explicit HashVolume(HashConfig cfg = HashConfig{})
      : cfg_(cfg),
        entries_(static_cast<std::size_t>(cfg.entry_count())),
        excess_free_(cfg.excess_count),
        vba_free_(cfg.block_count),
        voxels_(static_cast<std::size_t>(cfg.block_count) * kBlockVolume) {
    assert((cfg.bucket_count & (cfg.bucket_count - 1)) == 0);
  }

  const HashConfig& config() const { return cfg_; }
  int entry_count() const { return cfg_.entry_count(); }

  HashEntry& entry(int idx) { return entries_[static_cast<std::size_t>(idx)]; }
  const HashEntry& entry(int idx) const { return entries_[static_cast<std::size_t>(idx)]; }

  TVoxel* block(int slot) { return voxels_.data() + static_cast<std::size_t>(slot) * kBlockVolume; }
  const TVoxel* block(int slot) const {
    return voxels_.data() + static_cast<std::size_t>(slot) * kBlockVolume;
  }

  FreeStack& vba_free() { return vba_free_; }
  const FreeStack& vba_free() const { return vba_free_; }
  FreeStack& excess_free() { return excess_free_; }

  int allocated_block_count() const { return cfg_.block_count - vba_free_.free_count(); }

  /// Index of the entry holding this block position (allocated or swapped
  /// out), or -1 when the table has no such entry.
  int find_entry(const Vec3i& block_pos) const {
    const int h = static_cast<int>(hash_block_pos(block_pos, cfg_.hash_mask())) * cfg_.bucket_size;
    int offset_excess = 0;
    for (int b = 0; b < cfg_.bucket_size; ++b) {
      const HashEntry& e = entries_[static_cast<std::size_t>(h + b)];
      offset_excess = e.offset - 1;
      if (same_coords(e.pos, block_pos) && e.block_state >= kEntrySwappedOut) return h + b;
    }
    while (offset_excess >= 0) {
      const int idx = cfg_.ordered_count() + offset_excess;
      const HashEntry& e = entries_[static_cast<std::size_t>(idx)];
      if (same_coords(e.pos, block_pos) && e.block_state >= kEntrySwappedOut) return idx;
      offset_excess = e.offset - 1;
    }
    return -1;
  }

  /// Voxel retrieval following the bucket scan and excess chain. A miss
  /// returns an empty voxel, which is a normal outcome.
  std::pair<TVoxel, bool> read(const Vec3i& point) const {
    int linear = 0;
    const Vec3i block_pos = voxel_to_block(point, linear);
    const int h = static_cast<int>(hash_block_pos(block_pos, cfg_.hash_mask())) * cfg_.bucket_size;
    int offset_excess = 0;
    for (int b = 0; b < cfg_.bucket_size; ++b) {
      const HashEntry& e = entries_[static_cast<std::size_t>(h + b)];
      offset_excess = e.offset - 1;
      if (same_coords(e.pos, block_pos) && e.block_state >= 0) {
        return {voxels_[static_cast<std::size_t>(e.block_state) * kBlockVolume + linear], true};
      }
    }
    while (offset_excess >= 0) {
      const HashEntry& e = entries_[static_cast<std::size_t>(cfg_.ordered_count() + offset_excess)];
      if (same_coords(e.pos, block_pos) && e.block_state >= 0) {
        return {voxels_[static_cast<std::size_t>(e.block_state) * kBlockVolume + linear], true};
      }
      offset_excess = e.offset - 1;
    }
    return {TVoxel{}, false};
  }

  TVoxel* voxel_ptr(const Vec3i& point) {
    int linear = 0;
    const Vec3i block_pos = voxel_to_block(point, linear);
    const int idx = find_entry(block_pos);
    if (idx < 0) return nullptr;
    const HashEntry& e = entries_[static_cast<std::size_t>(idx)];
    if (e.block_state < 0) return nullptr;
    return &voxels_[static_cast<std::size_t>(e.block_state) * kBlockVolume + linear];
  }

  /// Idempotent insertion. Claims a bucket slot or appends to the excess
  /// chain, reserving the voxel block through the free stack. Freshly
  /// reserved blocks always hold default voxels.
  InsertOutcome insert_block(const Vec3i& block_pos) {
    const int existing = find_entry(block_pos);
    if (existing >= 0) {
      HashEntry& e = entries_[static_cast<std::size_t>(existing)];
      if (e.block_state >= 0) return {InsertStatus::existing, existing, e.block_state};
      // Swapped out: reattach a fresh block, host data stays authoritative
      // until the swap engine fuses it back.
      const int slot = vba_free_.pop();
      if (slot < 0) return {InsertStatus::vba_full, existing, -1};
      e.block_state = slot;
      return {InsertStatus::reattached, existing, slot};
    }
    const int h = static_cast<int>(hash_block_pos(block_pos, cfg_.hash_mask())) * cfg_.bucket_size;
    for (int b = 0; b < cfg_.bucket_size; ++b) {
      HashEntry& e = entries_[static_cast<std::size_t>(h + b)];
      if (e.block_state == kEntryUnallocated) {
        const int slot = vba_free_.pop();
        if (slot < 0) return {InsertStatus::vba_full, -1, -1};
        e.pos = to_short3(block_pos);
        e.block_state = slot;
        return {InsertStatus::inserted, h + b, slot};
      }
    }
    // Bucket full: append to the excess chain, which always hangs off the
    // last ordered entry of the bucket.
    int last = h + cfg_.bucket_size - 1;
    while (entries_[static_cast<std::size_t>(last)].offset > 0) {
      last = cfg_.ordered_count() + entries_[static_cast<std::size_t>(last)].offset - 1;
    }
    const int excess_idx = excess_free_.pop();
    if (excess_idx < 0) return {InsertStatus::excess_full, -1, -1};
    const int slot = vba_free_.pop();
    if (slot < 0) {
      excess_free_.push(excess_idx);
      return {InsertStatus::vba_full, -1, -1};
    }
    const int idx = cfg_.ordered_count() + excess_idx;
    HashEntry& e = entries_[static_cast<std::size_t>(idx)];
    e.pos = to_short3(block_pos);
    e.offset = 0;
    e.block_state = slot;
    entries_[static_cast<std::size_t>(last)].offset = excess_idx + 1;
    return {InsertStatus::inserted, idx, slot};
  }

  template <typename Fn>
  void for_each_allocated_entry(Fn&& fn) const {
    for (int i = 0; i < entry_count(); ++i) {
      const HashEntry& e = entries_[static_cast<std::size_t>(i)];
      if (e.block_state >= 0) fn(i, e);
    }
  }

 private:
  HashConfig cfg_;
  std::vector<HashEntry> entries_;
  FreeStack excess_free_;
  FreeStack vba_free_;
  std::vector<TVoxel> voxels_;
};

}  // namespace voxfuse
