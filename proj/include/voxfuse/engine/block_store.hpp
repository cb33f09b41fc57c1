#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace voxfuse {

/// Host-side voxel block storage with one logical slot per hash entry. The
/// backing medium is deliberately opaque: RAM for tests, a file for runs
/// where the host store may be a disk.
///
/// On-disk format (little-endian): a 16-byte header
///   magic 'VXBS' (u32), version (u16), voxel type tag (u16),
///   entry count (u32), record payload bytes (u32)
/// followed by fixed-size records of (entry_index: u32, payload bytes).
class BlockStore {
 public:
  virtual ~BlockStore() = default;

  virtual int entry_count() const = 0;
  virtual int payload_bytes() const = 0;

  virtual bool has(int idx) const = 0;
  virtual void read(int idx, std::uint8_t* out) const = 0;
  virtual void write(int idx, const std::uint8_t* data) = 0;
  /// Marks a slot as no longer holding authoritative data (after its content
  /// has been fused back into the active volume).
  virtual void clear(int idx) = 0;
  virtual void flush() {}

  int stored_count() const {
    int n = 0;
    for (int i = 0; i < entry_count(); ++i) n += has(i) ? 1 : 0;
    return n;
  }
};

inline constexpr std::uint32_t kBlockStoreMagic = 0x53425856;  // 'VXBS'
inline constexpr std::uint16_t kBlockStoreVersion = 1;

std::unique_ptr<BlockStore> make_memory_block_store(int entry_count, int payload_bytes);

/// File-backed store. Creates (truncates) the file and writes the header;
/// records are appended on first write of a slot and rewritten in place
/// afterwards, so one sequential stream per frame reaches the medium.
std::unique_ptr<BlockStore> make_file_block_store(const std::string& path, int entry_count,
                                                  int payload_bytes, std::uint16_t voxel_tag);

/// Reads every record of a store file into a fresh in-memory store.
std::unique_ptr<BlockStore> load_block_store_file(const std::string& path,
                                                  std::uint16_t expected_voxel_tag);

}  // namespace voxfuse
