#pragma once

// HTTP/JSON front end for the engine. Every response body carries
// "schema_version"; failures use {"error": {"code", "message", "field"}}.

#include <memory>
#include <string>

#include "nof1/engine.hpp"

namespace nof1 {

class HttpServer {
 public:
  explicit HttpServer(Engine& engine);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and serves until stop(). port 0 picks a free port.
  bool listen(const std::string& host, int port);
  // Binds without serving; returns the bound port or -1.
  int bind(const std::string& host, int port);
  bool serve();  // after bind()
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace nof1
