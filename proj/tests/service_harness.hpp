#pragma once

#include <httplib.h>

#include <memory>
#include <stdexcept>
#include <string>
#include <thread>

#include "corebox/service.hpp"

namespace testing_support {

// Runs a Service on an ephemeral loopback port for the lifetime of the object.
class LiveService {
 public:
  explicit LiveService(corebox::service::ServiceOptions options = {})
      : service_(std::make_unique<corebox::service::Service>(std::move(options))) {
    port_ = service_->bind_any("127.0.0.1");
    if (port_ <= 0) throw std::runtime_error("cannot bind loopback port");
    thread_ = std::thread([this] { service_->run(); });
    service_->server().wait_until_ready();
  }
  ~LiveService() {
    service_->stop();
    if (thread_.joinable()) thread_.join();
  }
  LiveService(const LiveService&) = delete;
  LiveService& operator=(const LiveService&) = delete;

  int port() const { return port_; }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(60, 0);
    return c;
  }
  corebox::service::Service& service() { return *service_; }

 private:
  std::unique_ptr<corebox::service::Service> service_;
  int port_ = -1;
  std::thread thread_;
};

inline httplib::MultipartFormDataItems upload(const std::vector<std::uint8_t>& image,
                                              const std::vector<std::uint8_t>* mask = nullptr,
                                              const std::string* labels = nullptr) {
  httplib::MultipartFormDataItems items;
  items.push_back({"image", std::string(image.begin(), image.end()), "image.png", "image/png"});
  if (mask) items.push_back({"mask", std::string(mask->begin(), mask->end()), "mask.png", "image/png"});
  if (labels) items.push_back({"labels", *labels, "labels.json", "application/json"});
  return items;
}

}  // namespace testing_support
