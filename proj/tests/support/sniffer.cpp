#include "sniffer.hpp"

#include "fedrf/error.hpp"

namespace fedrf::testing {

struct Sniffer::Link {
  Link(net::SocketStream c, net::SocketStream u) : client(std::move(c)), upstream(std::move(u)) {}
  net::SocketStream client;
  net::SocketStream upstream;
};

Sniffer::Sniffer(net::Address upstream)
    : upstream_(std::move(upstream)), listener_(net::Listener::tcp({"127.0.0.1", 0})) {
  acceptor_ = std::thread([this] { accept_loop(); });
}

Sniffer::~Sniffer() { stop(); }

void Sniffer::accept_loop() {
  while (!stopping_) {
    auto client = listener_.accept();
    if (!client) return;
    auto link = std::make_shared<Link>(std::move(*client), net::connect_tcp(upstream_));
    auto pump = [this, link](net::SocketStream& from, net::SocketStream& to) {
      std::uint8_t buf[4096];
      try {
        for (;;) {
          const auto n = from.read_some(buf);
          if (n == 0) break;
          {
            std::lock_guard lock(mutex_);
            bytes_.insert(bytes_.end(), buf, buf + n);
          }
          to.write_all(std::span(buf, n));
        }
      } catch (const Error&) {
      }
      from.shutdown();
      to.shutdown();
    };
    std::lock_guard lock(mutex_);
    links_.push_back(link);
    pumps_.emplace_back([=] { pump(link->client, link->upstream); });
    pumps_.emplace_back([=] { pump(link->upstream, link->client); });
  }
}

std::vector<std::uint8_t> Sniffer::captured() const {
  std::lock_guard lock(mutex_);
  return bytes_;
}

void Sniffer::stop() {
  if (stopping_.exchange(true)) return;
  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> pumps;
  {
    std::lock_guard lock(mutex_);
    for (auto& l : links_) {
      l->client.shutdown();
      l->upstream.shutdown();
    }
    pumps.swap(pumps_);
  }
  for (auto& t : pumps) t.join();
}

}  // namespace fedrf::testing
