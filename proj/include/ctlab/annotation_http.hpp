#pragma once

#include "ctlab/annotation.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <string>

namespace httplib {
class Server;
}

namespace ctlab {

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Transport-free router over the store; the HTTP server is a thin adapter.
ApiResponse handle_api(AnnotationStore& store, const ApiRequest& request);

class AnnotationServer {
 public:
  /// `ui_dir` (optional) is served as static files at "/".
  AnnotationServer(AnnotationStore& store, std::filesystem::path ui_dir = {});
  ~AnnotationServer();

  /// Binds and returns the port (0 picks a free one).
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void serve();
  void stop();

 private:
  AnnotationStore& store_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace ctlab
