#pragma once

// Test-only helpers: scratch directories, a ZIP reader for exported
// archives, and a subprocess runner for the CLI.

#include <sys/wait.h>

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <unistd.h>
#include <vector>

namespace testing_support {

namespace fs = std::filesystem;

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag = "corebox") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  fs::path path_;
};

inline std::uint32_t le32(const std::uint8_t* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

// Walks the central directory of a stored (uncompressed) archive.
inline std::map<std::string, std::vector<std::uint8_t>> read_zip(const std::vector<std::uint8_t>& zip) {
  if (zip.size() < 22) throw std::runtime_error("archive too short");
  std::size_t eocd = zip.size() - 22;
  while (le32(&zip[eocd]) != 0x06054b50) {
    if (eocd == 0) throw std::runtime_error("no end of central directory");
    --eocd;
  }
  const std::uint16_t count = le16(&zip[eocd + 10]);
  std::size_t cd = le32(&zip[eocd + 16]);
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (int i = 0; i < count; ++i) {
    if (le32(&zip[cd]) != 0x02014b50) throw std::runtime_error("bad central header");
    const std::uint16_t method = le16(&zip[cd + 10]);
    const std::uint32_t size = le32(&zip[cd + 24]);
    const std::uint16_t name_len = le16(&zip[cd + 28]);
    const std::uint16_t extra_len = le16(&zip[cd + 30]);
    const std::uint16_t comment_len = le16(&zip[cd + 32]);
    const std::uint32_t local = le32(&zip[cd + 42]);
    if (method != 0) throw std::runtime_error("compressed entry");
    std::string name(reinterpret_cast<const char*>(&zip[cd + 46]), name_len);
    if (le32(&zip[local]) != 0x04034b50) throw std::runtime_error("bad local header");
    const std::size_t data = local + 30 + le16(&zip[local + 26]) + le16(&zip[local + 28]);
    files[name] = std::vector<std::uint8_t>(zip.begin() + data, zip.begin() + data + size);
    cd += 46 + name_len + extra_len + comment_len;
  }
  return files;
}

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

inline RunResult run(const std::vector<std::string>& argv) {
  std::string cmd;
  for (const auto& a : argv) cmd += shell_quote(a) + " ";
  cmd += "2>&1";
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// Byte-for-byte listing of every regular file under `root`, keyed by relative path.
inline std::map<std::string, std::vector<std::uint8_t>> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::vector<std::uint8_t>> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    FILE* f = std::fopen(e.path().c_str(), "rb");
    std::vector<std::uint8_t> bytes(fs::file_size(e.path()));
    if (!bytes.empty() && std::fread(bytes.data(), 1, bytes.size(), f) != bytes.size()) {
      std::fclose(f);
      throw std::runtime_error("short read");
    }
    std::fclose(f);
    files[e.path().lexically_relative(root).generic_string()] = std::move(bytes);
  }
  return files;
}

}  // namespace testing_support
