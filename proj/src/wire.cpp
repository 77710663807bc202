#include "attestgate/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "attestgate/error.hpp"

namespace attestgate {

Socket::~Socket() {
  if (fd_ >= 0) ::close(fd_);
}

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(other.fd_, -1);
  }
  return *this;
}

void Socket::set_timeout(std::chrono::milliseconds timeout) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
}

void Socket::shutdown() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

std::pair<std::string, int> parse_host_port(std::string_view address) {
  auto colon = address.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw Error(Errc::ParseError, "expected host:port, got '" + std::string(address) + "'");
  }
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(std::string(address.substr(colon + 1)), &used);
    if (used != address.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw Error(Errc::ParseError, "invalid port in '" + std::string(address) + "'");
  }
  if (port < 0 || port > 65535) throw Error(Errc::ParseError, "port out of range");
  return {std::string(address.substr(0, colon)), port};
}

Socket connect_tcp(const std::string& host, int port, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) {
    throw Error(Errc::Io, "cannot resolve " + host);
  }
  std::string last_error = "no address";
  for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
    Socket sock(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!sock.valid()) continue;
    sock.set_timeout(timeout);
    if (::connect(sock.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
      ::freeaddrinfo(res);
      int one = 1;
      ::setsockopt(sock.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return sock;
    }
    last_error = std::strerror(errno);
  }
  ::freeaddrinfo(res);
  throw Error(Errc::Io, "cannot connect to " + host + ":" + std::to_string(port) + ": " + last_error);
}

Listener::Listener(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) {
    throw Error(Errc::BindFailure, "cannot resolve " + host);
  }
  for (auto* ai = res; ai != nullptr && !sock_.valid(); ai = ai->ai_next) {
    Socket sock(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!sock.valid()) continue;
    int yes = 1;
    ::setsockopt(sock.fd(), SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    if (::bind(sock.fd(), ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(sock.fd(), 64) == 0) {
      sock_ = std::move(sock);
    }
  }
  ::freeaddrinfo(res);
  if (!sock_.valid()) {
    throw Error(Errc::BindFailure, "cannot listen on " + host + ":" + std::to_string(port));
  }
  sockaddr_storage addr{};
  socklen_t len = sizeof(addr);
  ::getsockname(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = addr.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                                     : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
}

Socket Listener::accept() {
  while (sock_.valid()) {
    int fd = ::accept(sock_.fd(), nullptr, nullptr);
    if (fd >= 0) return Socket(fd);
    if (errno != EINTR && errno != ECONNABORTED) break;
  }
  return Socket();
}

void Listener::close() { sock_.shutdown(); }

namespace {

void send_all(Socket& sock, const std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    auto n = ::send(sock.fd(), data, size, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(Errc::Io, "connection lost while sending");
    data += n;
    size -= static_cast<std::size_t>(n);
  }
}

void recv_all(Socket& sock, std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    auto n = ::recv(sock.fd(), data, size, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n == 0) throw Error(Errc::Io, "connection closed by peer");
    if (n < 0) throw Error(Errc::Io, "receive failed: " + std::string(std::strerror(errno)));
    data += n;
    size -= static_cast<std::size_t>(n);
  }
}

}  // namespace

void write_frame(Socket& sock, const Json& message) {
  auto payload = canonical_encode(message);
  if (payload.size() > kMaxFrameBytes) throw Error(Errc::Protocol, "frame too large");
  std::uint32_t len = htonl(static_cast<std::uint32_t>(payload.size()));
  std::uint8_t header[4];
  std::memcpy(header, &len, 4);
  send_all(sock, header, 4);
  send_all(sock, reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size());
}

Json read_frame(Socket& sock) {
  std::uint8_t header[4];
  recv_all(sock, header, 4);
  std::uint32_t len = 0;
  std::memcpy(&len, header, 4);
  len = ntohl(len);
  if (len > kMaxFrameBytes) throw Error(Errc::Protocol, "frame of " + std::to_string(len) + " bytes exceeds limit");
  std::string payload(len, '\0');
  recv_all(sock, reinterpret_cast<std::uint8_t*>(payload.data()), len);
  auto j = Json::parse(payload, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::Protocol, "frame is not a JSON object");
  return j;
}

Json challenge_message(const Digest& nonce) { return {{"type", "challenge"}, {"nonce", to_hex(nonce)}}; }

Digest parse_challenge(const Json& message) {
  try {
    if (message.at("type").get<std::string>() != "challenge") {
      throw Error(Errc::MalformedChallenge, "expected a challenge message");
    }
    return digest_from_hex(message.at("nonce").get<std::string>());
  } catch (const Json::exception& e) {
    throw Error(Errc::MalformedChallenge, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::MalformedChallenge) throw;
    throw Error(Errc::MalformedChallenge, e.what());
  }
}

Json quote_message(const AttestationQuote& quote) {
  return {{"type", "quote"},
          {"pcr", to_hex(quote.pcr)},
          {"nonce", to_hex(quote.nonce)},
          {"log", quote.log},
          {"device_id", quote.device_id},
          {"signature", to_hex(quote.signature)}};
}

AttestationQuote parse_quote_message(const Json& message) {
  try {
    auto type = message.at("type").get<std::string>();
    if (type == "error") {
      throw Error(Errc::Protocol, "prover error " + message.value("code", std::string("?")) + ": " +
                                      message.value("detail", std::string()));
    }
    if (type != "quote") throw Error(Errc::Protocol, "expected a quote message, got '" + type + "'");
    AttestationQuote quote;
    quote.pcr = digest_from_hex(message.at("pcr").get<std::string>());
    quote.nonce = digest_from_hex(message.at("nonce").get<std::string>());
    quote.log = message.at("log").get<MeasurementLog>();
    quote.device_id = message.at("device_id").get<std::string>();
    quote.signature = signature_from_hex(message.at("signature").get<std::string>());
    return quote;
  } catch (const Json::exception& e) {
    throw Error(Errc::Protocol, std::string("malformed quote: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::Protocol) throw;
    throw Error(Errc::Protocol, std::string("malformed quote: ") + e.what());
  }
}

Json error_message(std::string_view code, std::string_view detail) {
  return {{"type", "error"}, {"code", code}, {"detail", detail}};
}

}  // namespace attestgate
