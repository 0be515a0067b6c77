#include "corebox/zip.hpp"

#include <limits>

#include <zlib.h>

#include "corebox/error.hpp"

namespace corebox {

namespace {

constexpr std::uint16_t kDosTime = 0;
constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;  // 1980-01-01

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

void ZipWriter::add(const std::string& name, std::span<const std::uint8_t> bytes) {
  if (finished_) throw Error(ErrorCode::InvalidArgument, "archive already finished");
  if (bytes.size() > std::numeric_limits<std::uint32_t>::max() ||
      buffer_.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::IoError, "archive exceeds the 4 GiB limit of non-zip64 archives");
  }
  Entry e;
  e.name = name;
  e.size = static_cast<std::uint32_t>(bytes.size());
  e.crc = static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
  e.offset = static_cast<std::uint32_t>(buffer_.size());

  put32(buffer_, 0x04034b50);
  put16(buffer_, 20);  // version needed
  put16(buffer_, 0);   // flags
  put16(buffer_, 0);   // stored
  put16(buffer_, kDosTime);
  put16(buffer_, kDosDate);
  put32(buffer_, e.crc);
  put32(buffer_, e.size);
  put32(buffer_, e.size);
  put16(buffer_, static_cast<std::uint16_t>(name.size()));
  put16(buffer_, 0);
  buffer_.insert(buffer_.end(), name.begin(), name.end());
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
  entries_.push_back(std::move(e));
}

void ZipWriter::add(const std::string& name, const std::string& text) {
  add(name, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> ZipWriter::finish() {
  if (finished_) throw Error(ErrorCode::InvalidArgument, "archive already finished");
  finished_ = true;
  const auto directory_offset = static_cast<std::uint32_t>(buffer_.size());
  for (const auto& e : entries_) {
    put32(buffer_, 0x02014b50);
    put16(buffer_, 20);  // version made by
    put16(buffer_, 20);  // version needed
    put16(buffer_, 0);
    put16(buffer_, 0);
    put16(buffer_, kDosTime);
    put16(buffer_, kDosDate);
    put32(buffer_, e.crc);
    put32(buffer_, e.size);
    put32(buffer_, e.size);
    put16(buffer_, static_cast<std::uint16_t>(e.name.size()));
    put16(buffer_, 0);  // extra
    put16(buffer_, 0);  // comment
    put16(buffer_, 0);  // disk
    put16(buffer_, 0);  // internal attrs
    put32(buffer_, 0);  // external attrs
    put32(buffer_, e.offset);
    buffer_.insert(buffer_.end(), e.name.begin(), e.name.end());
  }
  const auto directory_size = static_cast<std::uint32_t>(buffer_.size()) - directory_offset;
  put32(buffer_, 0x06054b50);
  put16(buffer_, 0);
  put16(buffer_, 0);
  put16(buffer_, static_cast<std::uint16_t>(entries_.size()));
  put16(buffer_, static_cast<std::uint16_t>(entries_.size()));
  put32(buffer_, directory_size);
  put32(buffer_, directory_offset);
  put16(buffer_, 0);
  return std::move(buffer_);
}

}  // namespace corebox
