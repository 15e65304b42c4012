#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "legws/api.hpp"

namespace legws {

struct ServerConfig {
  std::string address = "127.0.0.1";
  /// 0 picks a free port.
  std::uint16_t port = 8080;
  std::filesystem::path scenario_dir;
  std::chrono::seconds idle_timeout{300};
  std::size_t threads = 2;
};

/// HTTP + WebSocket front end: REST endpoints under /api and the inference
/// stream at /api/inference.
class Server {
 public:
  explicit Server(ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts the worker threads; returns the bound port. Throws
  /// Error when the address cannot be bound.
  std::uint16_t start();
  /// Stops accepting, closes connections and joins the workers.
  void stop();
  /// Blocks until SIGINT or SIGTERM, then stops.
  void run_until_signal();

  ScenarioStore& scenarios();
  RunRegistry& runs();
  /// Problems met while loading the scenario directory.
  const std::vector<std::string>& load_problems() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace legws
