#include "gazeswipe/server.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <sys/socket.h>

#include <list>
#include <mutex>
#include <vector>

namespace gazeswipe {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

std::vector<std::string> split_path(const std::string& target) {
  std::string path = target.substr(0, target.find('?'));
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start < path.size()) {
    const auto end = path.find('/', start);
    const auto piece = path.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!piece.empty()) parts.push_back(piece);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return parts;
}

HttpReply json_reply(int status, const nlohmann::json& j) { return {status, j.dump()}; }

HttpReply error_reply(int status, const char* code, const std::string& message) {
  return json_reply(status, {{"type", "error"}, {"code", code}, {"message", message}});
}

}  // namespace

HttpReply route_http(SessionManager& sessions, const std::string& method, const std::string& target,
                     const std::string& body) {
  const auto parts = split_path(target);
  if (parts.empty() || parts[0] != "sessions") return error_reply(404, "not_found", "no such resource");

  if (parts.size() == 1) {
    if (method == "GET") return json_reply(200, sessions.list());
    if (method != "POST") return error_reply(405, "method", "use GET or POST");
    nlohmann::json request = nlohmann::json::object();
    if (!body.empty()) {
      try {
        request = nlohmann::json::parse(body);
      } catch (const nlohmann::json::parse_error& e) {
        return error_reply(400, error_code::kMalformed, e.what());
      }
    }
    try {
      return json_reply(201, sessions.create(request));
    } catch (const Error& e) {
      return error_reply(400, error_code::kInvalid, e.what());
    }
  }

  const std::string& id = parts[1];
  if (parts.size() == 2) {
    if (method != "DELETE") return error_reply(405, "method", "use DELETE");
    if (!sessions.close(id)) return error_reply(404, "not_found", "no session " + id);
    return {204, ""};
  }
  if (parts.size() != 3) return error_reply(404, "not_found", "no such resource");

  HttpReply reply;
  bool found = false;
  if (parts[2] == "metrics" && method == "GET") {
    found = sessions.with_session(id, [&](Session& s) { reply = json_reply(200, s.metrics_snapshot()); });
  } else if (parts[2] == "messages" && method == "POST") {
    nlohmann::json batch;
    try {
      batch = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      return error_reply(400, error_code::kMalformed, e.what());
    }
    if (!batch.is_array()) batch = nlohmann::json::array({batch});
    found = sessions.with_session(id, [&](Session& s) {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& msg : batch) {
        for (auto& r : s.handle_message(msg)) out.push_back(std::move(r));
      }
      reply = json_reply(200, out);
    });
  } else {
    return error_reply(404, "not_found", "no such resource");
  }
  if (!found) return error_reply(404, "not_found", "no session " + id);
  return reply;
}

namespace {

void serve_websocket(tcp::socket& socket, http::request<http::string_body> req,
                     const std::shared_ptr<SessionManager>& sessions, const std::string& id) {
  websocket::stream<tcp::socket&> ws(socket);
  ws.accept(req);
  ws.text(true);
  beast::flat_buffer buffer;
  for (;;) {
    beast::error_code ec;
    ws.read(buffer, ec);
    if (ec) return;
    const std::string text = beast::buffers_to_string(buffer.data());
    buffer.consume(buffer.size());
    std::vector<nlohmann::json> out;
    const bool found = sessions->with_session(id, [&](Session& s) { out = s.handle_text(text); });
    if (!found) {
      ws.close(websocket::close_reason(websocket::close_code::going_away, "session closed"), ec);
      return;
    }
    for (const auto& msg : out) {
      ws.write(net::buffer(msg.dump()), ec);
      if (ec) return;
    }
  }
}

void serve_connection(tcp::socket& socket, const std::shared_ptr<SessionManager>& sessions) {
  beast::flat_buffer buffer;
  beast::error_code ec;
  for (;;) {
    http::request<http::string_body> req;
    http::read(socket, buffer, req, ec);
    if (ec) return;

    if (websocket::is_upgrade(req)) {
      const auto parts = split_path(std::string(req.target()));
      if (parts.size() == 3 && parts[0] == "sessions" && parts[2] == "stream") {
        bool exists = sessions->with_session(parts[1], [](Session&) {});
        if (exists) {
          try {
            serve_websocket(socket, std::move(req), sessions, parts[1]);
          } catch (const std::exception&) {
          }
          return;
        }
      }
    }

    HttpReply reply;
    if (req.method() == http::verb::options) {
      reply = {204, ""};
    } else {
      reply = route_http(*sessions, std::string(req.method_string()), std::string(req.target()), req.body());
    }
    http::response<http::string_body> res{static_cast<http::status>(reply.status), req.version()};
    res.set(http::field::server, "gazeswipe");
    res.set(http::field::access_control_allow_origin, "*");
    res.set(http::field::access_control_allow_methods, "GET, POST, DELETE, OPTIONS");
    res.set(http::field::access_control_allow_headers, "Content-Type");
    if (!reply.body.empty()) res.set(http::field::content_type, "application/json");
    res.keep_alive(req.keep_alive());
    res.body() = std::move(reply.body);
    res.prepare_payload();
    http::write(socket, res, ec);
    if (ec || !res.keep_alive()) break;
  }
  socket.shutdown(tcp::socket::shutdown_send, ec);
}

}  // namespace

struct Server::Impl {
  struct Connection {
    tcp::socket socket;
    std::thread thread;
    bool open = true;
  };

  std::shared_ptr<SessionManager> sessions;
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::mutex mutex;
  std::list<Connection> connections;

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::lock_guard lock(mutex);
      // Reap finished connections; their threads are past the last lock.
      for (auto it = connections.begin(); it != connections.end();) {
        if (it->open) {
          ++it;
          continue;
        }
        it->thread.join();
        it = connections.erase(it);
      }
      Connection& c = connections.emplace_back(Connection{std::move(socket), {}});
      c.thread = std::thread([this, &c] {
        serve_connection(c.socket, sessions);
        std::lock_guard inner(mutex);
        beast::error_code ignored;
        c.socket.close(ignored);
        c.open = false;
      });
      accept();
    });
  }

  // Unblocks every connection thread and waits for it.
  void close_connections() {
    std::list<Connection> done;
    {
      std::lock_guard lock(mutex);
      for (auto& c : connections) {
        if (c.open) ::shutdown(c.socket.native_handle(), SHUT_RDWR);
      }
      done.splice(done.end(), connections);
    }
    for (auto& c : done) {
      if (c.thread.joinable()) c.thread.join();
    }
  }
};

Server::Server(std::shared_ptr<SessionManager> sessions, std::uint16_t port) : impl_(std::make_unique<Impl>()) {
  impl_->sessions = std::move(sessions);
  const tcp::endpoint endpoint(net::ip::make_address("127.0.0.1"), port);
  impl_->acceptor.open(endpoint.protocol());
  impl_->acceptor.set_option(net::socket_base::reuse_address(true));
  impl_->acceptor.bind(endpoint);
  impl_->acceptor.listen();
}

Server::~Server() { stop(); }

std::uint16_t Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::run() {
  impl_->accept();
  impl_->ioc.run();
}

void Server::stop() {
  impl_->ioc.stop();
  impl_->close_connections();
}

}  // namespace gazeswipe
