#include <condition_variable>
#include <deque>
#include <mutex>

#include "fedrf/coordinator.hpp"
#include "fedrf/error.hpp"
#include "fedrf/net.hpp"

namespace fedrf::coordinator {

namespace {

class TcpClient final : public SiloClient {
 public:
  TcpClient(net::SocketStream stream, std::chrono::milliseconds timeout)
      : stream_(std::move(stream)), timeout_(timeout) {}

  wire::Envelope exchange(const wire::Envelope& request) override {
    stream_.set_deadline(net::Clock::now() + timeout_);
    wire::frame_write(stream_, request);
    for (;;) {
      auto reply = wire::frame_read(stream_);
      if (reply.correlation_id != request.correlation_id) continue;
      if (reply.kind == wire::MessageKind::ApprovalPending) continue;
      stream_.set_deadline(std::nullopt);
      return reply;
    }
  }

 private:
  net::SocketStream stream_;
  std::chrono::milliseconds timeout_;
};

class InProcessClient final : public SiloClient {
 public:
  explicit InProcessClient(datasite::Datasite& site) : site_(site), inbox_(std::make_shared<Inbox>()) {}

  wire::Envelope exchange(const wire::Envelope& request) override {
    wire::MemoryStream down(wire::encode_frame(request));
    const auto received = wire::frame_read(down);
    site_.submit(received, [inbox = inbox_](wire::Envelope reply) {
      {
        std::lock_guard lock(inbox->mutex);
        inbox->frames.push_back(wire::encode_frame(reply));
      }
      inbox->cv.notify_all();
    });
    std::unique_lock lock(inbox_->mutex);
    for (;;) {
      inbox_->cv.wait(lock, [&] { return !inbox_->frames.empty(); });
      wire::MemoryStream up(std::move(inbox_->frames.front()));
      inbox_->frames.pop_front();
      auto reply = wire::frame_read(up);
      if (reply.kind != wire::MessageKind::ApprovalPending) return reply;
    }
  }

 private:
  struct Inbox {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<std::vector<std::uint8_t>> frames;
  };

  datasite::Datasite& site_;
  std::shared_ptr<Inbox> inbox_;
};

}  // namespace

std::unique_ptr<SiloClient> connect_tcp_client(const std::string& address, std::chrono::milliseconds timeout) {
  auto connect_timeout = std::min<std::chrono::milliseconds>(timeout, std::chrono::seconds(10));
  return std::make_unique<TcpClient>(net::connect_tcp(net::parse_address(address), connect_timeout), timeout);
}

ClientFactory tcp_factory(std::chrono::milliseconds timeout) {
  return [timeout](const SiloSpec& spec) { return connect_tcp_client(spec.address, timeout); };
}

std::unique_ptr<SiloClient> in_process_client(datasite::Datasite& site) {
  return std::make_unique<InProcessClient>(site);
}

}  // namespace fedrf::coordinator
