#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "fedrf/wire/envelope.hpp"

namespace fedrf::net {

struct Address {
  std::string host;
  std::uint16_t port = 0;

  std::string to_string() const { return host + ":" + std::to_string(port); }
};

/// Parses "host:port" (port may be 0 for listeners).
Address parse_address(const std::string& text);

/// Owning file descriptor.
class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept;
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }

  int get() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  void reset() noexcept;
  /// shutdown(2) both directions without closing; unblocks readers.
  void shutdown() noexcept;

 private:
  int fd_ = -1;
};

using Clock = std::chrono::steady_clock;

/// Stream over a connected socket. Reads honour an optional deadline and
/// throw Error(Timeout) when it passes.
class SocketStream final : public wire::ByteStream {
 public:
  explicit SocketStream(Fd fd) : fd_(std::move(fd)) {}

  void write_all(std::span<const std::uint8_t> bytes) override;
  std::size_t read_some(std::span<std::uint8_t> buffer) override;

  void set_deadline(std::optional<Clock::time_point> deadline) { deadline_ = deadline; }
  void shutdown() noexcept { fd_.shutdown(); }
  int fd() const noexcept { return fd_.get(); }

 private:
  Fd fd_;
  std::optional<Clock::time_point> deadline_;
};

/// TCP connect; throws ConnectionClosed when the peer is unreachable.
SocketStream connect_tcp(const Address& address, std::chrono::milliseconds timeout = std::chrono::seconds(10));

class Listener {
 public:
  /// Binds and listens; port 0 picks a free port. Throws PortUnavailable.
  static Listener tcp(const Address& address);
  static Listener unix_socket(const std::string& path);

  /// Blocks until a client connects; returns nullopt once close() was called.
  std::optional<SocketStream> accept();
  void close() noexcept;

  std::uint16_t port() const noexcept { return port_; }
  const std::string& path() const noexcept { return path_; }

  Listener(Listener&&) noexcept;
  Listener& operator=(Listener&&) noexcept;
  ~Listener();

 private:
  Listener() = default;
  Fd fd_;
  std::uint16_t port_ = 0;
  std::string path_;
};

SocketStream connect_unix(const std::string& path);

/// Reads one '\n'-terminated line (without the newline); nullopt at EOF.
std::optional<std::string> read_line(wire::ByteStream& stream);

}  // namespace fedrf::net
