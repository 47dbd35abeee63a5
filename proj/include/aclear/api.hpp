#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "aclear/bundle.hpp"

namespace httplib {
class Server;
}

namespace aclear {

struct ApiResponse {
  int status = 200;
  Json body;
};

inline constexpr std::size_t kDefaultPageSize = 50;
inline constexpr std::size_t kMaxPageSize = 1000;

/// The read-only REST surface over a loaded bundle, independent of any
/// transport. Every body carries "format_version"; errors are
/// {"error": {"code", "message"}}.
///
///   GET /api/meta
///   GET /api/system
///   GET /api/nodes
///   GET /api/nodes/{id}   min_score, max_score, insight, limit, offset
///   GET /api/traces       search, limit, offset
///   GET /api/traces/{id}
class BundleApi {
 public:
  explicit BundleApi(std::shared_ptr<const EvaluationBundle> bundle);

  /// `path` is already percent-decoded.
  ApiResponse handle(std::string_view path, const std::multimap<std::string, std::string>& query) const;

  const EvaluationBundle& bundle() const noexcept { return *bundle_; }

 private:
  ApiResponse meta() const;
  ApiResponse system() const;
  ApiResponse nodes() const;
  ApiResponse node(const std::string& node_id, const std::multimap<std::string, std::string>& query) const;
  ApiResponse traces(const std::multimap<std::string, std::string>& query) const;
  ApiResponse trace(const std::string& trace_id) const;

  std::shared_ptr<const EvaluationBundle> bundle_;
  std::map<std::string, const TraceEvaluationRecord*> records_;
};

/// HTTP front end: /api/* through BundleApi, everything else from the
/// optional static directory.
class BundleServer {
 public:
  BundleServer(std::shared_ptr<const EvaluationBundle> bundle, std::optional<std::filesystem::path> static_dir = {});
  ~BundleServer();

  BundleServer(const BundleServer&) = delete;
  BundleServer& operator=(const BundleServer&) = delete;

  /// Port 0 picks a free port. Returns the bound port; throws Error(BindError).
  int bind(const std::string& address, int port);
  /// Blocks until stop().
  void listen();
  /// listen() on a background thread.
  void start();
  void stop();

 private:
  BundleApi api_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace aclear
