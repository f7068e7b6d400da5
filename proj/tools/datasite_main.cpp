#include <signal.h>

#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedrf/datasite.hpp"
#include "fedrf/error.hpp"

namespace {

std::string default_admin_path(const std::string& name) { return "/tmp/fedrf-datasite-" + name + ".sock"; }

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int admin(const std::string& path, const std::string& command) {
  auto lines = fedrf::datasite::admin_request(path, command);
  int rc = 0;
  for (const auto& l : lines) {
    std::cout << l << '\n';
    if (l.rfind("error ", 0) == 0) rc = 1;
  }
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Datasite: serves federated random forest training on one private CSV"};
  app.require_subcommand(0, 1);

  std::string listen = "127.0.0.1:7700";
  std::string data_path;
  std::string target;
  std::string ignore;
  std::string positive;
  std::string approval = "auto";
  std::string name = "datasite";
  std::string admin_path;
  unsigned threads = 0;
  app.add_option("--listen", listen, "host:port to listen on (port 0 picks a free one)");
  app.add_option("--data", data_path, "CSV file with the local data");
  app.add_option("--target", target, "label column");
  app.add_option("--ignore", ignore, "comma-separated columns to drop");
  app.add_option("--positive-label", positive, "label value counted as positive");
  app.add_option("--approval", approval, "auto or manual")->check(CLI::IsMember({"auto", "manual"}));
  app.add_option("--name", name, "silo name used in logs and the default admin socket");
  app.add_option("--admin", admin_path, "admin socket path");
  app.add_option("--threads", threads, "training threads (0 = all cores)");

  std::uint64_t request_id = 0;
  auto* approve = app.add_subcommand("approve", "approve a pending request");
  auto* reject = app.add_subcommand("reject", "reject a pending request");
  auto* list = app.add_subcommand("list", "list pending requests");
  for (auto* sub : {approve, reject}) sub->add_option("id", request_id, "request id")->required();
  for (auto* sub : {approve, reject, list}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  if (admin_path.empty()) admin_path = default_admin_path(name);

  try {
    if (approve->parsed()) return admin(admin_path, "approve " + std::to_string(request_id));
    if (reject->parsed()) return admin(admin_path, "reject " + std::to_string(request_id));
    if (list->parsed()) return admin(admin_path, "list");

    if (data_path.empty() || target.empty()) {
      std::cerr << "--data and --target are required to serve\n";
      return 2;
    }

    // Signals go to a dedicated thread; block them before any other starts.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGTERM);
    sigaddset(&signals, SIGINT);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    fedrf::datasite::DatasiteConfig config;
    config.name = name;
    config.table = fedrf::csv::read_table(data_path);
    config.target_column = target;
    if (!ignore.empty()) config.ignored_columns = split_list(ignore);
    if (!positive.empty()) config.positive_label = positive;
    config.policy = fedrf::datasite::parse_policy(approval);
    config.threads = threads;
    const auto& header = config.table.header;
    if (std::find(header.begin(), header.end(), target) == header.end()) {
      throw fedrf::Error(fedrf::ErrorCode::MissingColumn, "target column '" + target + "' not in " + data_path);
    }

    fedrf::datasite::Datasite site(std::move(config));
    const bool with_admin = approval == "manual" || app.count("--admin") > 0;
    fedrf::datasite::DatasiteServer server(site, fedrf::net::parse_address(listen),
                                           with_admin ? std::optional(admin_path) : std::nullopt);

    nlohmann::json ready = {{"event", "listening"}, {"name", name}, {"port", server.port()}};
    if (with_admin) ready["admin"] = admin_path;
    std::cout << ready.dump() << std::endl;

    std::thread waiter([&] {
      int sig = 0;
      sigwait(&signals, &sig);
      server.stop();
    });
    server.wait();
    waiter.join();
    return 0;
  } catch (const fedrf::Error& e) {
    std::cerr << nlohmann::json{{"event", "fatal"}, {"code", fedrf::to_string(e.code())}, {"error", e.detail()}}.dump()
              << '\n';
    return 1;
  }
}
