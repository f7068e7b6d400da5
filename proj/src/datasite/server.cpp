#include <sstream>

#include "fedrf/datasite.hpp"
#include "fedrf/error.hpp"

namespace fedrf::datasite {

struct DatasiteServer::Connection {
  explicit Connection(net::SocketStream s) : stream(std::move(s)) {}
  net::SocketStream stream;
  std::mutex write_mutex;
};

DatasiteServer::DatasiteServer(Datasite& site, const net::Address& listen, std::optional<std::string> admin_path)
    : site_(site), listener_(net::Listener::tcp(listen)) {
  port_ = listener_.port();
  if (admin_path) admin_.emplace(net::Listener::unix_socket(*admin_path));
  acceptor_ = std::thread([this] { accept_loop(); });
  if (admin_) admin_thread_ = std::thread([this] { admin_loop(); });
}

DatasiteServer::~DatasiteServer() { stop(); }

void DatasiteServer::stop() {
  if (stopping_.exchange(true)) {
    if (acceptor_.joinable() && acceptor_.get_id() != std::this_thread::get_id()) acceptor_.join();
    return;
  }
  listener_.close();
  if (admin_) admin_->close();
  if (acceptor_.joinable()) acceptor_.join();
  if (admin_thread_.joinable()) admin_thread_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(conn_mutex_);
    for (auto& c : connections_) c->stream.shutdown();
    workers.swap(workers_);
  }
  for (auto& w : workers) w.join();
  {
    std::lock_guard lock(stop_mutex_);
    stopped_ = true;
  }
  stopped_cv_.notify_all();
}

void DatasiteServer::wait() {
  std::unique_lock lock(stop_mutex_);
  stopped_cv_.wait(lock, [this] { return stopped_; });
}

void DatasiteServer::accept_loop() {
  while (!stopping_) {
    auto stream = listener_.accept();
    if (!stream) break;
    auto conn = std::make_shared<Connection>(std::move(*stream));
    std::lock_guard lock(conn_mutex_);
    if (stopping_) {
      conn->stream.shutdown();
      break;
    }
    connections_.push_back(conn);
    workers_.emplace_back([this, conn] { serve(conn); });
  }
}

void DatasiteServer::serve(std::shared_ptr<Connection> conn) {
  auto reply = [conn](wire::Envelope e) {
    std::lock_guard lock(conn->write_mutex);
    try {
      wire::frame_write(conn->stream, e);
    } catch (const Error&) {
      // peer went away; the request still counted as executed
    }
  };
  while (!stopping_) {
    wire::Envelope request;
    try {
      request = wire::frame_read(conn->stream);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::MalformedHeader) {
        reply(wire::make_error(e.code(), e.detail(), 0));
        continue;
      }
      break;
    }
    site_.submit(request, reply);
  }
  conn->stream.shutdown();
}

void DatasiteServer::admin_loop() {
  while (!stopping_) {
    auto stream = admin_->accept();
    if (!stream) break;
    try {
      while (auto line = net::read_line(*stream)) {
        auto out = admin_command(*line);
        stream->write_all(std::span(reinterpret_cast<const std::uint8_t*>(out.data()), out.size()));
      }
    } catch (const Error&) {
    }
  }
}

std::string DatasiteServer::admin_command(const std::string& line) {
  std::istringstream in(line);
  std::string cmd;
  in >> cmd;
  std::ostringstream out;
  try {
    if (cmd == "list") {
      for (const auto& p : site_.pending()) out << "pending " << p.id << ' ' << p.summary << '\n';
    } else if (cmd == "approve" || cmd == "reject") {
      std::uint64_t id = 0;
      if (!(in >> id)) throw Error(ErrorCode::InvalidArgument, cmd + " needs a numeric request id");
      if (cmd == "approve") {
        site_.approve(id);
      } else {
        site_.reject(id);
      }
      out << "ok\n";
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown command '" + cmd + "'");
    }
  } catch (const Error& e) {
    out << "error " << to_string(e.code()) << ' ' << e.detail() << '\n';
  }
  out << "end\n";
  return out.str();
}

std::vector<std::string> admin_request(const std::string& admin_path, const std::string& command) {
  auto stream = net::connect_unix(admin_path);
  const std::string line = command + "\n";
  stream.write_all(std::span(reinterpret_cast<const std::uint8_t*>(line.data()), line.size()));
  std::vector<std::string> lines;
  while (auto l = net::read_line(stream)) {
    if (*l == "end") break;
    lines.push_back(*l);
  }
  return lines;
}

}  // namespace fedrf::datasite
