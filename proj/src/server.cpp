#include <httplib.h>

#include <spdlog/spdlog.h>

#include "aclear/api.hpp"
#include "aclear/error.hpp"

namespace aclear {

BundleServer::BundleServer(std::shared_ptr<const EvaluationBundle> bundle,
                           std::optional<std::filesystem::path> static_dir)
    : api_(std::move(bundle)), server_(std::make_unique<httplib::Server>()) {
  server_->Get(R"(/api(/.*)?)", [this](const httplib::Request& req, httplib::Response& res) {
    std::multimap<std::string, std::string> query(req.params.begin(), req.params.end());
    ApiResponse out = api_.handle(req.path, query);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  });
  if (static_dir) {
    if (!server_->set_mount_point("/", static_dir->string()))
      throw Error(ErrorCode::IoError, "static directory '" + static_dir->string() + "' does not exist");
  }
  // httplib defaults to SO_REUSEPORT, which lets a second server share a busy
  // port silently. SO_REUSEADDR alone still allows quick restarts.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  server_->set_logger([](const httplib::Request& req, const httplib::Response& res) {
    spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
  });
}

BundleServer::~BundleServer() { stop(); }

int BundleServer::bind(const std::string& address, int port) {
  int bound = port == 0 ? server_->bind_to_any_port(address) : (server_->bind_to_port(address, port) ? port : -1);
  if (bound < 0)
    throw Error(ErrorCode::BindError, "cannot bind " + address + ":" + std::to_string(port));
  return bound;
}

void BundleServer::listen() { server_->listen_after_bind(); }

void BundleServer::start() {
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void BundleServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace aclear
