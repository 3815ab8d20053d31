#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>

#include "gazeswipe/service.hpp"

namespace gazeswipe {

/// HTTP control API plus a WebSocket event stream on one port.
///
///   POST   /sessions                 create (body: session request)
///   GET    /sessions                 list ids
///   DELETE /sessions/{id}            close
///   GET    /sessions/{id}/metrics    metrics snapshot
///   POST   /sessions/{id}/messages   batch: JSON array of messages -> array of responses
///   GET    /sessions/{id}/stream     WebSocket upgrade; one JSON message per frame
class Server {
 public:
  /// Binds 127.0.0.1:`port` (0 picks a free port).
  Server(std::shared_ptr<SessionManager> sessions, std::uint16_t port);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  std::uint16_t port() const;

  /// Serves until stop(); one thread per connection. stop() closes open
  /// connections and joins their threads.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Request routing without a socket; used by the server and by tests.
struct HttpReply {
  int status = 200;
  std::string body;
};

HttpReply route_http(SessionManager& sessions, const std::string& method, const std::string& target,
                     const std::string& body);

}  // namespace gazeswipe
