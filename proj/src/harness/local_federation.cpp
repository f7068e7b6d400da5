#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "fedrf/error.hpp"
#include "fedrf/harness.hpp"
#include "fedrf/net.hpp"

namespace fedrf::harness {

struct LocalFederation::Child {
  std::string silo;
  pid_t pid = -1;
  std::uint16_t port = 0;
  net::Fd stdout_pipe;
  std::filesystem::path log_path;

  bool running() const { return pid > 0; }

  void terminate(int sig) {
    if (pid <= 0) return;
    ::kill(pid, sig);
    if (sig != SIGKILL) {
      for (int i = 0; i < 100; ++i) {
        if (::waitpid(pid, nullptr, WNOHANG) == pid) {
          pid = -1;
          return;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
      }
      ::kill(pid, SIGKILL);
    }
    ::waitpid(pid, nullptr, 0);
    pid = -1;
  }
};

struct LocalFederation::InProcessSite {
  explicit InProcessSite(datasite::DatasiteConfig config) : site(std::move(config), datasite::LogSink{}) {}
  datasite::Datasite site;
  std::shared_ptr<std::atomic<bool>> killed = std::make_shared<std::atomic<bool>>(false);
};

namespace {

class KillableClient final : public coordinator::SiloClient {
 public:
  KillableClient(std::unique_ptr<coordinator::SiloClient> inner, std::shared_ptr<std::atomic<bool>> killed)
      : inner_(std::move(inner)), killed_(std::move(killed)) {}

  wire::Envelope exchange(const wire::Envelope& request) override {
    if (*killed_) throw Error(ErrorCode::ConnectionClosed, "datasite was stopped");
    return inner_->exchange(request);
  }

 private:
  std::unique_ptr<coordinator::SiloClient> inner_;
  std::shared_ptr<std::atomic<bool>> killed_;
};

std::string read_file_tail(const std::filesystem::path& path, std::size_t max_bytes = 4000) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  auto s = buf.str();
  return s.size() > max_bytes ? s.substr(s.size() - max_bytes) : s;
}

// Reads the child's first stdout line, {"event":"listening","port":N,...}.
std::uint16_t await_port(int fd, std::chrono::milliseconds timeout) {
  std::string line;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw Error(ErrorCode::ChildProcessFailure, "datasite did not report its port in time");
    pollfd pfd{fd, POLLIN, 0};
    if (::poll(&pfd, 1, static_cast<int>(left.count())) <= 0) continue;
    char c = 0;
    const auto n = ::read(fd, &c, 1);
    if (n <= 0) throw Error(ErrorCode::ChildProcessFailure, "datasite exited before listening");
    if (c == '\n') break;
    line.push_back(c);
  }
  try {
    auto j = nlohmann::json::parse(line);
    return j.at("port").get<std::uint16_t>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::ChildProcessFailure, "unexpected datasite output: " + line);
  }
}

}  // namespace

std::unique_ptr<LocalFederation> LocalFederation::start(const LocalFederationConfig& config) {
  std::unique_ptr<LocalFederation> fed(new LocalFederation());
  fed->multi_process_ = config.multi_process;
  const auto& target = config.data_params.target_column;

  std::vector<std::pair<coordinator::SiloSpec, const Dataset*>> members;
  for (std::size_t i = 0; i < config.parts.size(); ++i) {
    members.push_back({{"silo-" + std::to_string(i + 1), "", std::nullopt, coordinator::SiloRole::Train},
                       &config.parts[i]});
  }
  members.push_back({{"eval", "", std::nullopt, coordinator::SiloRole::Eval}, &config.test});

  if (!config.multi_process) {
    for (auto& [spec, data] : members) {
      datasite::DatasiteConfig dc;
      dc.name = spec.id;
      dc.table = to_table(*data, target);
      dc.target_column = target;
      dc.positive_label = config.data_params.positive_label;
      dc.threads = config.threads;
      fed->sites_.emplace(spec.id, std::make_unique<InProcessSite>(std::move(dc)));
      fed->silos_.push_back(spec);
    }
    return fed;
  }

  if (!std::filesystem::exists(config.datasite_binary)) {
    throw Error(ErrorCode::ChildProcessFailure, "datasite binary not found: " + config.datasite_binary.string());
  }
  std::filesystem::create_directories(config.work_dir);
  for (auto& [spec, data] : members) {
    const auto csv_path = config.work_dir / (spec.id + ".csv");
    csv::write_dataset(csv_path, *data, target);

    auto child = std::make_unique<Child>();
    child->silo = spec.id;
    child->log_path = config.work_dir / (spec.id + ".log");

    std::vector<std::string> args = {config.datasite_binary.string(),
                                     "--listen",
                                     "127.0.0.1:0",
                                     "--data",
                                     csv_path.string(),
                                     "--target",
                                     target,
                                     "--positive-label",
                                     config.data_params.positive_label,
                                     "--approval",
                                     "auto",
                                     "--name",
                                     spec.id,
                                     "--threads",
                                     std::to_string(config.threads)};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);

    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) throw Error(ErrorCode::ChildProcessFailure, "pipe failed");
    net::Fd read_end(fds[0]);
    net::Fd write_end(fds[1]);
    const int log_fd = ::open(child->log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (log_fd < 0) throw Error(ErrorCode::Io, "cannot create " + child->log_path.string());
    net::Fd log(log_fd);

    const pid_t pid = ::fork();
    if (pid < 0) throw Error(ErrorCode::ChildProcessFailure, "fork failed");
    if (pid == 0) {
      ::dup2(write_end.get(), STDOUT_FILENO);
      ::dup2(log.get(), STDERR_FILENO);
      ::execv(argv[0], argv.data());
      ::_exit(127);
    }
    child->pid = pid;
    write_end.reset();
    child->stdout_pipe = std::move(read_end);
    try {
      child->port = await_port(child->stdout_pipe.get(), std::chrono::seconds(30));
    } catch (const Error& e) {
      child->terminate(SIGKILL);
      throw Error(ErrorCode::ChildProcessFailure,
                  spec.id + ": " + e.detail() + "\n--- datasite log ---\n" + read_file_tail(child->log_path));
    }
    spec.address = "127.0.0.1:" + std::to_string(child->port);
    fed->silos_.push_back(spec);
    fed->children_.push_back(std::move(child));
  }
  return fed;
}

LocalFederation::~LocalFederation() { shutdown(); }

void LocalFederation::shutdown() {
  for (auto& c : children_) c->terminate(SIGTERM);
  for (auto& [id, s] : sites_) *s->killed = true;
}

void LocalFederation::kill(const std::string& silo_id) {
  for (auto& c : children_) {
    if (c->silo == silo_id) {
      c->terminate(SIGKILL);
      return;
    }
  }
  auto it = sites_.find(silo_id);
  if (it == sites_.end()) throw Error(ErrorCode::InvalidArgument, "no silo '" + silo_id + "'");
  *it->second->killed = true;
}

std::vector<std::uint16_t> LocalFederation::ports() const {
  std::vector<std::uint16_t> out;
  for (const auto& c : children_) out.push_back(c->port);
  return out;
}

coordinator::ClientFactory LocalFederation::factory(std::chrono::milliseconds timeout) {
  if (multi_process_) return coordinator::tcp_factory(timeout);
  return [this](const coordinator::SiloSpec& spec) -> std::unique_ptr<coordinator::SiloClient> {
    auto it = sites_.find(spec.id);
    if (it == sites_.end()) throw Error(ErrorCode::ConnectionClosed, "no silo '" + spec.id + "'");
    if (*it->second->killed) throw Error(ErrorCode::ConnectionClosed, "datasite '" + spec.id + "' is stopped");
    return std::make_unique<KillableClient>(coordinator::in_process_client(it->second->site), it->second->killed);
  };
}

coordinator::FederationPlan make_plan(const std::vector<coordinator::SiloSpec>& silos,
                                      const wire::ModelParams& params, const wire::DataParams& data_params,
                                      aggregation::Strategy strategy) {
  coordinator::FederationPlan plan;
  plan.silos = silos;
  plan.model_params = params;
  plan.data_params = data_params;
  plan.strategy = strategy;
  plan.validate();
  return plan;
}

bool port_open(std::uint16_t port) {
  try {
    net::connect_tcp(net::Address{"127.0.0.1", port}, std::chrono::milliseconds(500));
    return true;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace fedrf::harness
