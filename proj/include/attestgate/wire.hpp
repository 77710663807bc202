#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <utility>

#include "attestgate/attestation.hpp"
#include "attestgate/canonical.hpp"

namespace attestgate {

/// Owning TCP socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void set_timeout(std::chrono::milliseconds timeout);
  void shutdown();

 private:
  int fd_ = -1;
};

/// Splits "host:port". Throws Errc::ParseError.
std::pair<std::string, int> parse_host_port(std::string_view address);

/// Throws Errc::Io.
Socket connect_tcp(const std::string& host, int port,
                   std::chrono::milliseconds timeout = std::chrono::milliseconds(5000));

class Listener {
 public:
  /// Port 0 picks an ephemeral port. Throws Errc::BindFailure.
  Listener(const std::string& host, int port);

  int port() const { return port_; }
  /// Blocks; returns an invalid socket once close() has been called.
  Socket accept();
  void close();

 private:
  Socket sock_;
  int port_ = 0;
};

inline constexpr std::size_t kMaxFrameBytes = 1 << 20;

/// Frame = 4-byte big-endian length followed by that many bytes of JSON.
void write_frame(Socket& sock, const Json& message);
/// Throws Errc::Io on EOF/timeouts and Errc::Protocol on oversize frames or
/// invalid JSON.
Json read_frame(Socket& sock);

Json challenge_message(const Digest& nonce);
/// Throws Errc::MalformedChallenge.
Digest parse_challenge(const Json& message);

Json quote_message(const AttestationQuote& quote);
/// Throws Errc::Protocol.
AttestationQuote parse_quote_message(const Json& message);

Json error_message(std::string_view code, std::string_view detail);

}  // namespace attestgate
