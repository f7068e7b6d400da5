#include "fedrf/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "fedrf/error.hpp"

namespace fedrf::net {

namespace {

std::string errno_text() { return std::strerror(errno); }

int remaining_ms(std::optional<Clock::time_point> deadline) {
  if (!deadline) return -1;
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - Clock::now()).count();
  return left <= 0 ? 0 : static_cast<int>(std::min<long long>(left, 1 << 30));
}

}  // namespace

Address parse_address(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 == text.size()) {
    throw Error(ErrorCode::InvalidArgument, "address '" + text + "' is not host:port");
  }
  Address a;
  a.host = text.substr(0, colon);
  if (a.host.empty()) a.host = "0.0.0.0";
  unsigned long port = 0;
  for (char c : text.substr(colon + 1)) {
    if (c < '0' || c > '9') throw Error(ErrorCode::InvalidArgument, "bad port in '" + text + "'");
    port = port * 10 + static_cast<unsigned long>(c - '0');
    if (port > 65535) throw Error(ErrorCode::InvalidArgument, "port out of range in '" + text + "'");
  }
  a.port = static_cast<std::uint16_t>(port);
  return a;
}

Fd& Fd::operator=(Fd&& o) noexcept {
  if (this != &o) {
    reset();
    fd_ = std::exchange(o.fd_, -1);
  }
  return *this;
}

void Fd::reset() noexcept {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Fd::shutdown() noexcept {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void SocketStream::write_all(std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const auto n = ::send(fd_.get(), bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::ConnectionClosed, "send failed: " + errno_text());
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::size_t SocketStream::read_some(std::span<std::uint8_t> buffer) {
  for (;;) {
    pollfd p{fd_.get(), POLLIN, 0};
    const int ready = ::poll(&p, 1, remaining_ms(deadline_));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::ConnectionClosed, "poll failed: " + errno_text());
    }
    if (ready == 0) throw Error(ErrorCode::Timeout, "deadline passed while waiting for the peer");
    const auto n = ::recv(fd_.get(), buffer.data(), buffer.size(), 0);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      if (errno == ECONNRESET || errno == ENOTCONN) return 0;
      throw Error(ErrorCode::ConnectionClosed, "recv failed: " + errno_text());
    }
    return static_cast<std::size_t>(n);
  }
}

SocketStream connect_tcp(const Address& address, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto port = std::to_string(address.port);
  if (::getaddrinfo(address.host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) {
    throw Error(ErrorCode::ConnectionClosed, "cannot resolve " + address.to_string());
  }
  Fd fd(::socket(res->ai_family, res->ai_socktype | SOCK_CLOEXEC, res->ai_protocol));
  if (!fd.valid()) {
    ::freeaddrinfo(res);
    throw Error(ErrorCode::ConnectionClosed, "socket failed: " + errno_text());
  }
  const int flags = ::fcntl(fd.get(), F_GETFL);
  ::fcntl(fd.get(), F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(fd.get(), res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc < 0 && errno == EINPROGRESS) {
    pollfd p{fd.get(), POLLOUT, 0};
    rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    int err = 0;
    socklen_t len = sizeof(err);
    if (rc <= 0 || ::getsockopt(fd.get(), SOL_SOCKET, SO_ERROR, &err, &len) < 0 || err != 0) {
      throw Error(ErrorCode::ConnectionClosed, "cannot connect to " + address.to_string() + ": " +
                                                   (rc == 0 ? "timeout" : std::strerror(err)));
    }
  } else if (rc < 0) {
    throw Error(ErrorCode::ConnectionClosed, "cannot connect to " + address.to_string() + ": " + errno_text());
  }
  ::fcntl(fd.get(), F_SETFL, flags);
  int one = 1;
  ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return SocketStream(std::move(fd));
}

SocketStream connect_unix(const std::string& path) {
  Fd fd(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof(addr.sun_path)) throw Error(ErrorCode::InvalidArgument, "socket path too long");
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  if (::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    throw Error(ErrorCode::ConnectionClosed, "cannot connect to " + path + ": " + errno_text());
  }
  return SocketStream(std::move(fd));
}

Listener Listener::tcp(const Address& address) {
  Listener l;
  l.fd_ = Fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  int one = 1;
  ::setsockopt(l.fd_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(address.port);
  const auto host = address.host == "localhost" ? std::string("127.0.0.1") : address.host;
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw Error(ErrorCode::InvalidArgument, "listen host must be an IPv4 literal: " + address.host);
  }
  if (::bind(l.fd_.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(l.fd_.get(), 64) < 0) {
    throw Error(ErrorCode::PortUnavailable, "cannot listen on " + address.to_string() + ": " + errno_text());
  }
  socklen_t len = sizeof(addr);
  ::getsockname(l.fd_.get(), reinterpret_cast<sockaddr*>(&addr), &len);
  l.port_ = ntohs(addr.sin_port);
  return l;
}

Listener Listener::unix_socket(const std::string& path) {
  Listener l;
  l.fd_ = Fd(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof(addr.sun_path)) throw Error(ErrorCode::InvalidArgument, "socket path too long");
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  ::unlink(path.c_str());
  if (::bind(l.fd_.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(l.fd_.get(), 16) < 0) {
    throw Error(ErrorCode::PortUnavailable, "cannot listen on " + path + ": " + errno_text());
  }
  l.path_ = path;
  return l;
}

std::optional<SocketStream> Listener::accept() {
  for (;;) {
    if (!fd_.valid()) return std::nullopt;
    const int fd = ::accept4(fd_.get(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) {
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return SocketStream(Fd(fd));
    }
    if (errno == EINTR || errno == ECONNABORTED) continue;
    return std::nullopt;
  }
}

void Listener::close() noexcept {
  fd_.shutdown();
  if (!path_.empty()) ::unlink(path_.c_str());
}

Listener::Listener(Listener&& o) noexcept
    : fd_(std::move(o.fd_)), port_(o.port_), path_(std::exchange(o.path_, {})) {}

Listener& Listener::operator=(Listener&& o) noexcept {
  fd_ = std::move(o.fd_);
  port_ = o.port_;
  path_ = std::exchange(o.path_, {});
  return *this;
}

Listener::~Listener() {
  close();
}

std::optional<std::string> read_line(wire::ByteStream& stream) {
  std::string line;
  std::uint8_t c = 0;
  for (;;) {
    if (stream.read_some(std::span<std::uint8_t>(&c, 1)) == 0) {
      if (line.empty()) return std::nullopt;
      return line;
    }
    if (c == '\n') return line;
    line.push_back(static_cast<char>(c));
    if (line.size() > 4096) throw Error(ErrorCode::MalformedHeader, "line too long");
  }
}

}  // namespace fedrf::net
