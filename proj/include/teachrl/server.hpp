#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <thread>
#include <variant>

#include "teachrl/session.hpp"
#include "teachrl/session_host.hpp"

namespace teachrl::service {

struct TextMessage {
  std::string text;
};
struct SubscribeMessage {};
using ClientMessage = std::variant<TextMessage, ControlCommand, SubscribeMessage>;

/// One line from a stream client:
///   {"type":"text","body":"go left"}      ("text" is accepted in place of "body")
///   {"type":"control","command":"set_rate","rate":4}
///   {"type":"subscribe"}
/// Throws SessionError for anything else.
ClientMessage parse_client_message(const std::string& line);

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  std::string static_dir;      // served for GET requests outside the API, when set
  std::string trace_dir;       // one <session_id>.jsonl trace per session, when set
};

/// HTTP + WebSocket front end over a SessionRegistry.
///
///   POST   /sessions               body: session params JSON -> {"session_id": ...}
///   GET    /sessions               -> {"sessions": [...]}
///   DELETE /sessions/{id}
///   GET    /sessions/{id}/stream   WebSocket upgrade; JSON lines both ways
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts serving on a background thread. Returns the bound port.
  unsigned short start();
  /// Blocks until stop() is called or SIGINT/SIGTERM arrives.
  void wait();
  void stop();

  SessionRegistry& registry() { return registry_; }

 private:
  struct Impl;
  ServerOptions options_;
  SessionRegistry registry_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace teachrl::service
