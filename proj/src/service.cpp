#include "corebox/service.hpp"

#include <cstdio>
#include <random>

#include <httplib.h>

#include "corebox/zip.hpp"

namespace corebox::service {

namespace {

const char* const kDefaultLabels = R"({"labels": {"core_column": 255}})";

std::string new_session_id() {
  static std::mutex mutex;
  static std::random_device device;
  static std::mt19937_64 engine(
      (static_cast<std::uint64_t>(device()) << 32) ^ device() ^
      static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count()));
  std::lock_guard lock(mutex);
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(engine()),
                static_cast<unsigned long long>(engine()));
  return buf;
}

bool is_png(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::equal(kMagic, kMagic + 8, bytes.begin());
}

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(2), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound: return 404;
    case ErrorCode::IoError: return 500;
    default: return 400;
  }
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

std::vector<std::uint8_t> mask_bytes_for_storage(std::span<const std::uint8_t> uploaded, const GrayMask& mask) {
  if (is_png(uploaded)) return {uploaded.begin(), uploaded.end()};
  return encode_png(mask);
}

nlohmann::json intervals_json(const std::vector<depthref::DepthInterval>& intervals) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& d : intervals) a.push_back(depthref::to_json(d));
  return a;
}

}  // namespace

// ---------------------------------------------------------------------------
// Session

Session::Session(std::string id_, RasterImage image_, GrayMask mask_, std::vector<std::uint8_t> mask_png_,
                 LabelMap labels_)
    : id(std::move(id_)),
      image(std::move(image_)),
      mask(std::move(mask_)),
      mask_png(std::move(mask_png_)),
      labels(std::move(labels_)),
      created(std::chrono::system_clock::now()),
      modified(created) {
  if (image.width() != mask.width() || image.height() != mask.height()) {
    throw Error(ErrorCode::DimensionMismatch, "mask dimensions do not match the image");
  }
}

void Session::replace_mask(GrayMask new_mask, std::vector<std::uint8_t> png) {
  if (new_mask.width() != image.width() || new_mask.height() != image.height()) {
    throw Error(ErrorCode::DimensionMismatch,
                "mask is " + std::to_string(new_mask.width()) + "x" + std::to_string(new_mask.height()) +
                    ", image is " + std::to_string(image.width()) + "x" + std::to_string(image.height()));
  }
  mask = std::move(new_mask);
  mask_png = std::move(png);
  report.reset();
  intervals.clear();
  depth_warnings.clear();
  modified = std::chrono::system_clock::now();
}

void Session::extract(const extraction::FilterConfig& config) {
  report = extraction::analyse(image.width(), image.height(), mask, labels, config);
  filter = config;
  intervals.clear();
  depth_warnings.clear();
  modified = std::chrono::system_clock::now();
  // A stored spec is re-applied to the new column set.
  if (depth_spec && !report->kept.empty()) {
    auto result = depthref::reference_columns(report->kept, *depth_spec);
    intervals = std::move(result.intervals);
    depth_warnings = std::move(result.warnings);
  }
}

void Session::assign_depths(const depthref::DepthSpec& spec) {
  spec.validate();
  if (!report) throw Error(ErrorCode::InvalidArgument, "run extraction first");
  auto result = depthref::reference_columns(report->kept, spec);
  depth_spec = spec;
  intervals = std::move(result.intervals);
  depth_warnings = std::move(result.warnings);
  modified = std::chrono::system_clock::now();
}

void Session::edit_depths(const std::vector<depthref::DepthEdit>& edits) {
  auto result = depthref::adjust_depths(intervals, edits);
  intervals = std::move(result.intervals);
  depth_warnings = std::move(result.warnings);
  modified = std::chrono::system_clock::now();
}

std::vector<std::uint8_t> Session::export_archive() const {
  if (!report) throw Error(ErrorCode::InvalidArgument, "run extraction first");
  ZipWriter zip;
  const auto columns = extraction::extract_columns(image, report->kept);
  for (const auto& column : columns) {
    char name[32];
    std::snprintf(name, sizeof name, "column_%03d.png", column.index);
    zip.add(name, encode_png(column.image));
  }
  zip.add("depths.csv", depthref::to_csv(report->kept, intervals));
  zip.add("report.json", report->to_json().dump(2) + "\n");
  zip.add("mask.png", mask_png);
  return zip.finish();
}

nlohmann::json Session::summary() const {
  return {{"id", id},
          {"width", image.width()},
          {"height", image.height()},
          {"labels", nlohmann::json::parse(labels.to_json())["labels"]},
          {"extracted", report.has_value()},
          {"report", report ? report->to_json() : nlohmann::json(nullptr)},
          {"depth_spec", depth_spec ? depth_spec->to_json() : nlohmann::json(nullptr)},
          {"intervals", intervals_json(intervals)},
          {"depth_warnings", depth_warnings}};
}

// ---------------------------------------------------------------------------
// Workspace

Workspace::Workspace(std::size_t capacity, fs::path spool_dir)
    : capacity_(std::max<std::size_t>(capacity, 1)), spool_dir_(std::move(spool_dir)) {
  if (!spool_dir_.empty()) {
    std::error_code ec;
    fs::create_directories(spool_dir_, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create spool directory " + spool_dir_.string());
  }
}

std::shared_ptr<Session> Workspace::create(RasterImage image, GrayMask mask, std::vector<std::uint8_t> mask_png,
                                           LabelMap labels) {
  auto session = std::make_shared<Session>(new_session_id(), std::move(image), std::move(mask), std::move(mask_png),
                                           std::move(labels));
  std::lock_guard lock(mutex_);
  insert_locked(session);
  return session;
}

void Workspace::insert_locked(std::shared_ptr<Session> session) {
  const auto id = session->id;
  lru_.push_front(id);
  sessions_[id] = {std::move(session), lru_.begin()};
  while (sessions_.size() > capacity_) {
    const auto victim_id = lru_.back();
    lru_.pop_back();
    auto victim = std::move(sessions_[victim_id].first);
    sessions_.erase(victim_id);
    if (!spool_dir_.empty()) {
      std::lock_guard session_lock(victim->mutex);
      spool(*victim);
    }
  }
}

void Workspace::touch_locked(const std::string& id) {
  auto& entry = sessions_.at(id);
  lru_.erase(entry.second);
  lru_.push_front(id);
  entry.second = lru_.begin();
}

std::shared_ptr<Session> Workspace::find(const std::string& id) {
  std::lock_guard lock(mutex_);
  if (const auto it = sessions_.find(id); it != sessions_.end()) {
    touch_locked(id);
    return it->second.first;
  }
  if (spool_dir_.empty()) return nullptr;
  auto restored = restore(id);
  if (restored) insert_locked(restored);
  return restored;
}

bool Workspace::erase(const std::string& id) {
  std::lock_guard lock(mutex_);
  bool removed = false;
  if (const auto it = sessions_.find(id); it != sessions_.end()) {
    lru_.erase(it->second.second);
    sessions_.erase(it);
    removed = true;
  }
  if (!spool_dir_.empty() && id.find_first_not_of("0123456789abcdef") == std::string::npos && !id.empty()) {
    std::error_code ec;
    removed = fs::remove_all(spool_dir_ / id, ec) > 0 || removed;
  }
  return removed;
}

std::size_t Workspace::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

void Workspace::spool(Session& session) const {
  const auto dir = spool_dir_ / session.id;
  fs::create_directories(dir);
  write_file(dir / "image.png", encode_png(session.image));
  write_file(dir / "mask.png", session.mask_png);
  write_file(dir / "labels.json", session.labels.to_json());
  nlohmann::json state = {
      {"filter", session.filter.to_json()},
      {"extracted", session.report.has_value()},
      {"depth_spec", session.depth_spec ? session.depth_spec->to_json() : nlohmann::json(nullptr)},
      {"intervals", intervals_json(session.intervals)},
      {"depth_warnings", session.depth_warnings},
  };
  write_file(dir / "state.json", state.dump(2));
}

std::shared_ptr<Session> Workspace::restore(const std::string& id) const {
  if (id.empty() || id.find_first_not_of("0123456789abcdef") != std::string::npos) return nullptr;
  const auto dir = spool_dir_ / id;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return nullptr;
  try {
    auto labels = load_label_map(dir / "labels.json");
    auto mask_png = read_file(dir / "mask.png");
    auto mask = decode_mask(mask_png, labels);
    auto session = std::make_shared<Session>(id, load_image(dir / "image.png"), std::move(mask), std::move(mask_png),
                                             std::move(labels));
    const auto bytes = read_file(dir / "state.json");
    const auto state = nlohmann::json::parse(bytes.begin(), bytes.end());
    if (!state.at("depth_spec").is_null()) session->depth_spec = depthref::DepthSpec::from_json(state.at("depth_spec"));
    if (state.at("extracted").get<bool>()) {
      session->extract(extraction::FilterConfig::from_json(state.at("filter")));
      session->intervals.clear();
      for (const auto& d : state.at("intervals")) {
        session->intervals.push_back({d.at("index").get<int>(), d.at("from").get<double>(), d.at("to").get<double>()});
      }
      session->depth_warnings = state.at("depth_warnings").get<std::vector<std::string>>();
    }
    return session;
  } catch (const std::exception&) {
    return nullptr;
  }
}

// ---------------------------------------------------------------------------
// HTTP

Service::Service(ServiceOptions options)
    : options_(std::move(options)),
      workspace_(options_.capacity, options_.spool_dir),
      server_(std::make_unique<httplib::Server>()) {
  server_->set_payload_max_length(options_.max_upload_bytes);
  // httplib defaults to SO_REUSEPORT, which lets a second instance share the
  // port silently; a busy port must fail to bind instead.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  install_routes();
}

Service::~Service() { stop(); }

bool Service::bind(const std::string& host, int port) { return server_->bind_to_port(host, port); }

int Service::bind_any(const std::string& host) { return server_->bind_to_any_port(host); }

bool Service::run() { return server_->listen_after_bind(); }

void Service::stop() {
  if (server_) server_->stop();
}

void Service::install_routes() {
  auto& srv = *server_;

  // Wraps a per-session handler: 404 for unknown ids, per-session locking,
  // library errors mapped to HTTP statuses.
  auto with_session = [this](auto handler) {
    return [this, handler](const httplib::Request& req, httplib::Response& res) {
      auto session = workspace_.find(req.matches[1]);
      if (!session) return send_error(res, 404, "unknown session");
      std::lock_guard lock(session->mutex);
      try {
        handler(*session, req, res);
      } catch (const Error& e) {
        send_error(res, status_for(e.code()), e.what());
      } catch (const nlohmann::json::exception& e) {
        send_error(res, 400, e.what());
      }
    };
  };

  srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"status", "ok"}}); });

  srv.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    if (!req.is_multipart_form_data() || !req.has_file("image")) {
      return send_error(res, 400, "expected multipart/form-data with an 'image' part");
    }
    try {
      const auto labels = LabelMap::parse(req.has_file("labels") ? req.get_file_value("labels").content : kDefaultLabels);
      auto image = decode_image(as_bytes(req.get_file_value("image").content));
      std::optional<GrayMask> mask;
      std::vector<std::uint8_t> mask_png;
      // get_file_value returns a copy; keep it alive while its bytes are in use.
      const std::string mask_part = req.has_file("mask") ? req.get_file_value("mask").content : std::string();
      if (!mask_part.empty()) {
        const auto bytes = as_bytes(mask_part);
        mask = decode_mask(bytes, labels);
        if (mask->width() != image.width() || mask->height() != image.height()) {
          return send_error(res, 400, "mask dimensions do not match the image");
        }
        mask_png = mask_bytes_for_storage(bytes, *mask);
      } else {
        mask.emplace(image.width(), image.height());
        mask_png = encode_png(*mask);
      }
      auto session = workspace_.create(std::move(image), std::move(*mask), std::move(mask_png), labels);
      send_json(res, 201, {{"id", session->id}, {"width", session->image.width()}, {"height", session->image.height()}});
    } catch (const Error& e) {
      send_error(res, status_for(e.code()), e.what());
    }
  });

  srv.Get(R"(/sessions/([0-9a-f]+))", with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, s.summary());
          }));

  srv.Delete(R"(/sessions/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
    if (!workspace_.erase(req.matches[1])) return send_error(res, 404, "unknown session");
    send_json(res, 200, {{"deleted", std::string(req.matches[1])}});
  });

  srv.Get(R"(/sessions/([0-9a-f]+)/image)", with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
            const auto png = encode_png(s.image);
            res.set_content(std::string(png.begin(), png.end()), "image/png");
          }));

  srv.Get(R"(/sessions/([0-9a-f]+)/mask)", with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
            res.set_content(std::string(s.mask_png.begin(), s.mask_png.end()), "image/png");
          }));

  srv.Put(R"(/sessions/([0-9a-f]+)/mask)", with_session([](Session& s, const httplib::Request& req, httplib::Response& res) {
            const std::string& body =
                req.is_multipart_form_data() && req.has_file("mask") ? req.get_file_value("mask").content : req.body;
            const auto bytes = as_bytes(body);
            auto mask = decode_mask(bytes, s.labels);
            auto png = mask_bytes_for_storage(bytes, mask);
            s.replace_mask(std::move(mask), std::move(png));
            send_json(res, 200, {{"ok", true}});
          }));

  srv.Post(R"(/sessions/([0-9a-f]+)/extract)",
           with_session([](Session& s, const httplib::Request& req, httplib::Response& res) {
             const auto doc = parse_body(req);
             s.extract(doc.empty() ? extraction::FilterConfig{} : extraction::FilterConfig::from_json(doc));
             auto body = s.report->to_json();
             body["boxes"] = body["kept"];
             body["intervals"] = intervals_json(s.intervals);
             send_json(res, 200, body);
           }));

  srv.Put(R"(/sessions/([0-9a-f]+)/depths)",
          with_session([](Session& s, const httplib::Request& req, httplib::Response& res) {
            if (!s.report) return send_error(res, 409, "run extraction first");
            const auto doc = parse_body(req);
            if (doc.contains("edits")) {
              if (s.intervals.empty()) return send_error(res, 409, "assign depths before editing them");
              std::vector<depthref::DepthEdit> edits;
              for (const auto& e : doc.at("edits")) {
                edits.push_back({e.at("index").get<int>(), e.at("from").get<double>(), e.at("to").get<double>()});
              }
              s.edit_depths(edits);
            } else {
              s.assign_depths(depthref::DepthSpec::from_json(doc.contains("spec") ? doc.at("spec") : doc));
            }
            send_json(res, 200, {{"intervals", intervals_json(s.intervals)}, {"warnings", s.depth_warnings}});
          }));

  srv.Get(R"(/sessions/([0-9a-f]+)/export)", with_session([](Session& s, const httplib::Request&, httplib::Response& res) {
            if (!s.report) return send_error(res, 409, "run extraction first");
            const auto archive = s.export_archive();
            res.set_header("Content-Disposition", "attachment; filename=\"" + s.id + ".zip\"");
            res.set_content(std::string(archive.begin(), archive.end()), "application/zip");
          }));

  std::error_code ec;
  if (!options_.webui_dir.empty() && fs::is_directory(options_.webui_dir, ec)) {
    srv.set_mount_point("/", options_.webui_dir.string());
  } else {
    srv.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("<!doctype html><title>corebox</title><p>corebox service is running. "
                      "No web UI bundle configured (--webui-dir).</p>",
                      "text/html");
    });
  }
}

}  // namespace corebox::service
