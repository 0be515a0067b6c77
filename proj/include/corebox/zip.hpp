#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace corebox {

// Minimal ZIP archive builder (stored entries, no compression). Timestamps
// are pinned to 1980-01-01 00:00 so identical inputs give identical bytes.
class ZipWriter {
 public:
  void add(const std::string& name, std::span<const std::uint8_t> bytes);
  void add(const std::string& name, const std::string& text);

  /// Appends the central directory and returns the archive.
  std::vector<std::uint8_t> finish();

 private:
  struct Entry {
    std::string name;
    std::uint32_t crc = 0;
    std::uint32_t size = 0;
    std::uint32_t offset = 0;
  };

  std::vector<std::uint8_t> buffer_;
  std::vector<Entry> entries_;
  bool finished_ = false;
};

}  // namespace corebox
