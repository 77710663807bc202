#include "attestgate/cert_server.hpp"

#include <sys/socket.h>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "attestgate/error.hpp"

namespace attestgate {

namespace {

constexpr const char* kJson = "application/json";

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

std::string rejection_code(Errc code) {
  switch (code) {
    case Errc::UnknownSigner: return "UnknownSigner";
    case Errc::DigestMismatch:
    case Errc::BadSignature: return "InvalidSignature";
    default: return std::string(to_string(code));
  }
}

}  // namespace

CertServer::CertServer(CertificateStore& store, const std::string& host, int port)
    : store_(store), http_(std::make_unique<httplib::Server>()) {
  // Plain SO_REUSEADDR: httplib's default SO_REUSEPORT would let a second
  // server share an occupied port.
  http_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });

  http_->Put("/v1/certificates", [this](const httplib::Request& req, httplib::Response& res) {
    SignedCertificate cert;
    try {
      cert = parse_certificate(req.body);
    } catch (const Error& e) {
      reply(res, 400, {{"error", "ParseError"}, {"detail", e.what()}});
      return;
    }
    try {
      auto status = store_.put(cert);
      auto digest = to_hex(cert.body_digest);
      spdlog::info("PUT certificate {} for {} -> {}", digest, to_hex(cert.body.software_digest.aggregate),
                   status == PutStatus::Stored ? "stored" : "duplicate");
      reply(res, status == PutStatus::Stored ? 201 : 200,
            {{"status", status == PutStatus::Stored ? "stored" : "duplicate"}, {"body_digest", digest}});
    } catch (const Error& e) {
      if (e.code() == Errc::StorageFailure) {
        spdlog::error("storage failure: {}", e.what());
        reply(res, 500, {{"error", "StorageFailure"}, {"detail", e.what()}});
        return;
      }
      spdlog::warn("rejected certificate upload: {}", e.what());
      reply(res, 422, {{"error", rejection_code(e.code())}, {"detail", e.what()}});
    }
  });

  http_->Get(R"(/v1/certificates/([0-9a-fA-F]*))", [this](const httplib::Request& req, httplib::Response& res) {
    Digest aggregate;
    try {
      aggregate = digest_from_hex(req.matches[1].str());
    } catch (const Error& e) {
      reply(res, 400, {{"error", "ParseError"}, {"detail", e.what()}});
      return;
    }
    auto certs = store_.get(aggregate);
    spdlog::debug("GET {} -> {} certificate(s)", req.matches[1].str(), certs.size());
    reply(res, 200, {{"certificates", certs}});
  });

  http_->Get("/v1/healthz", [](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}});
  });

  if (port == 0) {
    port_ = http_->bind_to_any_port(host);
  } else {
    port_ = http_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ <= 0) {
    throw Error(Errc::BindFailure, "cannot bind " + host + ":" + std::to_string(port));
  }
}

CertServer::~CertServer() { stop(); }

void CertServer::start() {
  worker_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
}

void CertServer::run() { http_->listen_after_bind(); }

void CertServer::stop() {
  if (http_) http_->stop();
  if (worker_.joinable()) worker_.join();
  try {
    store_.flush();
  } catch (const Error& e) {
    spdlog::error("flush on shutdown failed: {}", e.what());
  }
}

// --- client -------------------------------------------------------------------------

CertServerClient::CertServerClient(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

namespace {

httplib::Client make_client(const std::string& url, std::chrono::milliseconds timeout) {
  httplib::Client cli(url);
  cli.set_connection_timeout(timeout);
  cli.set_read_timeout(timeout);
  cli.set_write_timeout(timeout);
  return cli;
}

}  // namespace

UploadResult CertServerClient::put(const SignedCertificate& cert) const {
  auto cli = make_client(base_url_, timeout_);
  auto res = cli.Put("/v1/certificates", Json(cert).dump(), kJson);
  if (!res) throw Error(Errc::Io, "certificate server unreachable: " + httplib::to_string(res.error()));
  UploadResult out;
  out.http_status = res->status;
  out.stored = res->status == 201;
  out.duplicate = res->status == 200;
  if (res->status != 200 && res->status != 201) {
    auto body = Json::parse(res->body, nullptr, false);
    if (body.is_object()) {
      out.error = body.value("error", "");
      out.detail = body.value("detail", "");
    }
  }
  return out;
}

std::vector<SignedCertificate> CertServerClient::get(const Digest& aggregate) const {
  auto cli = make_client(base_url_, timeout_);
  auto res = cli.Get("/v1/certificates/" + to_hex(aggregate));
  if (!res) throw Error(Errc::Io, "certificate server unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error(Errc::Io, "certificate server answered " + std::to_string(res->status));
  auto body = Json::parse(res->body, nullptr, false);
  if (!body.is_object() || !body.contains("certificates")) {
    throw Error(Errc::Io, "certificate server returned a malformed response");
  }
  std::vector<SignedCertificate> certs;
  for (const auto& c : body["certificates"]) {
    // A record that does not parse is skipped; selection re-verifies the rest.
    try {
      certs.push_back(parse_as<SignedCertificate>(c));
    } catch (const Error& e) {
      spdlog::warn("ignoring malformed certificate from server: {}", e.what());
    }
  }
  return certs;
}

bool CertServerClient::healthy() const {
  auto cli = make_client(base_url_, timeout_);
  auto res = cli.Get("/v1/healthz");
  return res && res->status == 200;
}

}  // namespace attestgate
