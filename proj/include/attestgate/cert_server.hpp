#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "attestgate/cert_store.hpp"

namespace httplib {
class Server;
}

namespace attestgate {

/// HTTP front end for a CertificateStore:
///   PUT /v1/certificates            201 stored | 200 duplicate | 422 rejected
///   GET /v1/certificates/{hex}      200 {"certificates": [...]}
///   GET /v1/healthz                 200 {"status": "ok"}
class CertServer {
 public:
  /// Binds immediately; port 0 picks an ephemeral port.
  /// Throws Errc::BindFailure.
  CertServer(CertificateStore& store, const std::string& host, int port);
  ~CertServer();

  CertServer(const CertServer&) = delete;
  CertServer& operator=(const CertServer&) = delete;

  int port() const { return port_; }

  /// Serves on a background thread.
  void start();
  /// Serves on the calling thread until stop().
  void run();
  /// Stops accepting, joins the background thread and flushes the store.
  void stop();

 private:
  CertificateStore& store_;
  std::unique_ptr<httplib::Server> http_;
  std::thread worker_;
  int port_ = 0;
};

struct UploadResult {
  int http_status = 0;
  bool stored = false;
  bool duplicate = false;
  std::string error;
  std::string detail;
};

class CertServerClient {
 public:
  explicit CertServerClient(std::string base_url,
                            std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));

  /// Throws Errc::Io when the server cannot be reached.
  UploadResult put(const SignedCertificate& cert) const;
  /// Throws Errc::Io when the server cannot be reached or answers non-200.
  std::vector<SignedCertificate> get(const Digest& aggregate) const;
  bool healthy() const;

  const std::string& base_url() const { return base_url_; }

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

}  // namespace attestgate
