#pragma once

#include "semisteer/bridge/session.hpp"

#include <memory>
#include <string>

namespace semisteer::bridge {

struct ServerOptions {
  std::string host = "127.0.0.1";
  unsigned short port = 8765;  ///< 0 picks a free port
  std::string static_dir;      ///< served for plain GET requests when set
  bool handle_signals = false; ///< stop on SIGINT/SIGTERM
};

/// WebSocket endpoint (any path) plus GET /health on the same port. Runs a
/// single-threaded event loop; each session is ticked by its own timer.
class Server {
public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Port actually bound (useful with port 0).
  unsigned short port() const;
  SessionManager& sessions();

  /// Blocks until stop() is called.
  void run();
  /// Safe to call from any thread.
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

void run_server(const ServerOptions& options);

}  // namespace semisteer::bridge
