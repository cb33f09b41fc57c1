#include "voxfuse/engine/block_store.hpp"

#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <unordered_map>

namespace voxfuse {
namespace {

void put_u16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v & 0xFF);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}
void put_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF);
}
std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

constexpr int kHeaderBytes = 16;

class MemoryBlockStore final : public BlockStore {
 public:
  MemoryBlockStore(int entry_count, int payload_bytes)
      : entry_count_(entry_count), payload_bytes_(payload_bytes) {}

  int entry_count() const override { return entry_count_; }
  int payload_bytes() const override { return payload_bytes_; }

  bool has(int idx) const override { return blocks_.count(idx) != 0; }

  void read(int idx, std::uint8_t* out) const override {
    const auto it = blocks_.find(idx);
    if (it == blocks_.end()) throw std::logic_error("block store read of empty slot");
    std::memcpy(out, it->second.data(), static_cast<std::size_t>(payload_bytes_));
  }

  void write(int idx, const std::uint8_t* data) override {
    auto& blk = blocks_[idx];
    blk.assign(data, data + payload_bytes_);
  }

  void clear(int idx) override { blocks_.erase(idx); }

 private:
  int entry_count_;
  int payload_bytes_;
  std::unordered_map<int, std::vector<std::uint8_t>> blocks_;
};

class FileBlockStore final : public BlockStore {
 public:
  FileBlockStore(const std::string& path, int entry_count, int payload_bytes,
                 std::uint16_t voxel_tag)
      : entry_count_(entry_count), payload_bytes_(payload_bytes) {
    file_ = std::fopen(path.c_str(), "wb+");
    if (!file_) throw std::runtime_error("cannot create block store file: " + path);
    std::uint8_t header[kHeaderBytes] = {};
    put_u32(header + 0, kBlockStoreMagic);
    put_u16(header + 4, kBlockStoreVersion);
    put_u16(header + 6, voxel_tag);
    put_u32(header + 8, static_cast<std::uint32_t>(entry_count));
    put_u32(header + 12, static_cast<std::uint32_t>(payload_bytes));
    if (std::fwrite(header, 1, kHeaderBytes, file_) != kHeaderBytes) {
      throw std::runtime_error("cannot write block store header: " + path);
    }
    record_offset_.assign(static_cast<std::size_t>(entry_count), -1);
    stored_.assign(static_cast<std::size_t>(entry_count), false);
  }

  ~FileBlockStore() override {
    if (file_) std::fclose(file_);
  }

  int entry_count() const override { return entry_count_; }
  int payload_bytes() const override { return payload_bytes_; }

  bool has(int idx) const override {
    return stored_.size() > static_cast<std::size_t>(idx) && stored_[static_cast<std::size_t>(idx)];
  }

  void read(int idx, std::uint8_t* out) const override {
    if (!has(idx)) throw std::logic_error("block store read of empty slot");
    const long off = record_offset_[static_cast<std::size_t>(idx)];
    std::fseek(file_, off + 4, SEEK_SET);  // skip the stored entry index
    if (std::fread(out, 1, static_cast<std::size_t>(payload_bytes_), file_) !=
        static_cast<std::size_t>(payload_bytes_)) {
      throw std::runtime_error("short read from block store file");
    }
  }

  void write(int idx, const std::uint8_t* data) override {
    long off = record_offset_[static_cast<std::size_t>(idx)];
    if (off < 0) {
      std::fseek(file_, 0, SEEK_END);
      off = std::ftell(file_);
      record_offset_[static_cast<std::size_t>(idx)] = off;
    } else {
      std::fseek(file_, off, SEEK_SET);
    }
    std::uint8_t index_le[4];
    put_u32(index_le, static_cast<std::uint32_t>(idx));
    if (std::fwrite(index_le, 1, 4, file_) != 4 ||
        std::fwrite(data, 1, static_cast<std::size_t>(payload_bytes_), file_) !=
            static_cast<std::size_t>(payload_bytes_)) {
      throw std::runtime_error("short write to block store file");
    }
    stored_[static_cast<std::size_t>(idx)] = true;
  }

  void clear(int idx) override {
    if (static_cast<std::size_t>(idx) < stored_.size()) {
      stored_[static_cast<std::size_t>(idx)] = false;
    }
  }

  void flush() override { std::fflush(file_); }

 private:
  int entry_count_;
  int payload_bytes_;
  std::FILE* file_ = nullptr;
  std::vector<long> record_offset_;
  std::vector<bool> stored_;
};

}  // namespace

std::unique_ptr<BlockStore> make_memory_block_store(int entry_count, int payload_bytes) {
  return std::make_unique<MemoryBlockStore>(entry_count, payload_bytes);
}

std::unique_ptr<BlockStore> make_file_block_store(const std::string& path, int entry_count,
                                                  int payload_bytes, std::uint16_t voxel_tag) {
  return std::make_unique<FileBlockStore>(path, entry_count, payload_bytes, voxel_tag);
}

std::unique_ptr<BlockStore> load_block_store_file(const std::string& path,
                                                  std::uint16_t expected_voxel_tag) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open block store file: " + path);
  std::uint8_t header[kHeaderBytes];
  if (std::fread(header, 1, kHeaderBytes, f) != kHeaderBytes) {
    std::fclose(f);
    throw std::runtime_error("short block store header: " + path);
  }
  if (get_u32(header + 0) != kBlockStoreMagic || get_u16(header + 4) != kBlockStoreVersion) {
    std::fclose(f);
    throw std::runtime_error("not a block store file: " + path);
  }
  if (get_u16(header + 6) != expected_voxel_tag) {
    std::fclose(f);
    throw std::runtime_error("block store voxel type mismatch: " + path);
  }
  const int entry_count = static_cast<int>(get_u32(header + 8));
  const int payload_bytes = static_cast<int>(get_u32(header + 12));
  auto store = make_memory_block_store(entry_count, payload_bytes);
  std::vector<std::uint8_t> record(static_cast<std::size_t>(payload_bytes) + 4);
  for (;;) {
    const std::size_t got = std::fread(record.data(), 1, record.size(), f);
    if (got == 0) break;
    if (got != record.size()) {
      std::fclose(f);
      throw std::runtime_error("truncated block store record: " + path);
    }
    const int idx = static_cast<int>(get_u32(record.data()));
    if (idx < 0 || idx >= entry_count) {
      std::fclose(f);
      throw std::runtime_error("block store record index out of range: " + path);
    }
    store->write(idx, record.data() + 4);
  }
  std::fclose(f);
  return store;
}

}  // namespace voxfuse
