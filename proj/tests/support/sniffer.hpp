#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "fedrf/net.hpp"

namespace fedrf::testing {

/// Transparent TCP proxy that records every byte in both directions.
class Sniffer {
 public:
  explicit Sniffer(net::Address upstream);
  ~Sniffer();

  std::uint16_t port() const noexcept { return listener_.port(); }
  std::string address() const { return "127.0.0.1:" + std::to_string(port()); }
  std::vector<std::uint8_t> captured() const;
  void stop();

 private:
  struct Link;
  void accept_loop();

  net::Address upstream_;
  net::Listener listener_;
  std::atomic<bool> stopping_{false};
  mutable std::mutex mutex_;
  std::vector<std::uint8_t> bytes_;
  std::vector<std::shared_ptr<Link>> links_;
  std::vector<std::thread> pumps_;
  std::thread acceptor_;
};

}  // namespace fedrf::testing
