#pragma once

// Session-oriented HTTP API around the extraction pipeline:
//
//   GET    /healthz
//   POST   /sessions                 multipart: image, [mask], [labels]   -> 201 {"id": ...}
//   GET    /sessions/{id}            session summary
//   GET    /sessions/{id}/image      PNG
//   GET    /sessions/{id}/mask       PNG (bytes as last uploaded)
//   PUT    /sessions/{id}/mask       multipart "mask" or raw image body
//   POST   /sessions/{id}/extract    FilterConfig JSON (may be empty)
//   PUT    /sessions/{id}/depths     DepthSpec JSON, {"spec": ...} or {"edits": [...]}
//   GET    /sessions/{id}/export     ZIP: column_NNN.png, depths.csv, report.json, mask.png
//   DELETE /sessions/{id}
//
// A session is a single-writer state machine guarded by its own mutex; the
// workspace map is shared and LRU-bounded.

#include <chrono>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "corebox/depthref.hpp"
#include "corebox/extraction.hpp"
#include "corebox/imagery.hpp"

namespace httplib {
class Server;
}

namespace corebox::service {

struct Session {
  Session(std::string id_, RasterImage image_, GrayMask mask_, std::vector<std::uint8_t> mask_png_, LabelMap labels_);

  std::string id;
  RasterImage image;
  GrayMask mask;
  std::vector<std::uint8_t> mask_png;
  LabelMap labels;
  extraction::FilterConfig filter;
  std::optional<extraction::ExtractionReport> report;
  std::optional<depthref::DepthSpec> depth_spec;
  std::vector<depthref::DepthInterval> intervals;
  std::vector<std::string> depth_warnings;
  std::chrono::system_clock::time_point created;
  std::chrono::system_clock::time_point modified;

  std::mutex mutex;

  /// Replaces the mask and drops everything derived from the old one.
  void replace_mask(GrayMask new_mask, std::vector<std::uint8_t> png);
  void extract(const extraction::FilterConfig& config);
  /// Requires a report. Throws DegenerateSpec / EmptyInput from depthref.
  void assign_depths(const depthref::DepthSpec& spec);
  void edit_depths(const std::vector<depthref::DepthEdit>& edits);
  std::vector<std::uint8_t> export_archive() const;
  nlohmann::json summary() const;
};

class Workspace {
 public:
  explicit Workspace(std::size_t capacity = 64, fs::path spool_dir = {});

  std::shared_ptr<Session> create(RasterImage image, GrayMask mask, std::vector<std::uint8_t> mask_png,
                                  LabelMap labels);
  /// Looks the session up in memory, then in the spool directory.
  std::shared_ptr<Session> find(const std::string& id);
  bool erase(const std::string& id);
  std::size_t size() const;

 private:
  using Lru = std::list<std::string>;

  void touch_locked(const std::string& id);
  void insert_locked(std::shared_ptr<Session> session);
  void spool(Session& session) const;
  std::shared_ptr<Session> restore(const std::string& id) const;

  std::size_t capacity_;
  fs::path spool_dir_;
  mutable std::mutex mutex_;
  Lru lru_;
  std::unordered_map<std::string, std::pair<std::shared_ptr<Session>, Lru::iterator>> sessions_;
};

struct ServiceOptions {
  std::size_t capacity = 64;
  fs::path spool_dir;
  std::size_t max_upload_bytes = 64u * 1024u * 1024u;
  fs::path webui_dir;
};

class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Returns false when the port cannot be bound.
  bool bind(const std::string& host, int port);
  /// Binds an ephemeral port and returns it, or -1.
  int bind_any(const std::string& host);
  /// Blocks serving requests until stop().
  bool run();
  void stop();

  Workspace& workspace() { return workspace_; }
  httplib::Server& server() { return *server_; }

 private:
  void install_routes();

  ServiceOptions options_;
  Workspace workspace_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace corebox::service
