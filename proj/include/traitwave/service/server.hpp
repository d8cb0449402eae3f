#pragma once

// HTTP and WebSocket front end for SessionManager, served on one port:
//
//   POST /sessions                  create, body SessionOptions
//   GET  /sessions/{id}             state snapshot
//   POST /sessions/{id}/advance     next phase
//   GET  /sessions/{id}/predictions the 14 predictions
//   POST /sessions/{id}/ratings     {"ratings": [...14], "satisfaction": x}
//   GET  /reports/summary           aggregate over rated sessions
//   WS   /sessions/{id}/stream      {"t_ms", "bands", "phase"} per row
//
// Errors are {"code", "message"} with a 4xx status. One thread serves each
// connection.

#include <atomic>
#include <memory>
#include <mutex>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "traitwave/service/session.hpp"

namespace traitwave::service {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;

inline http::status status_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::BadRequest:
    case ErrorCode::SchemaError: return http::status::bad_request;
    case ErrorCode::UnknownSession: return http::status::not_found;
    case ErrorCode::WrongPhase:
    case ErrorCode::InvalidTransition:
    case ErrorCode::EmptyPhaseBuffer: return http::status::conflict;
    default: return http::status::unprocessable_entity;
  }
}

inline std::string error_body(std::string_view code, const std::string& message) {
  return json{{"code", code}, {"message", message}}.dump();
}

struct ApiResponse {
  http::status status = http::status::ok;
  std::string body;
};

/// Routes one request. Independent of the transport so it can be tested
/// directly.
inline ApiResponse handle_request(SessionManager& mgr, http::verb method, const std::string& target,
                                  const std::string& body) {
  static const std::regex session_re(R"(^/sessions/([A-Za-z0-9_-]+)(/(advance|predictions|ratings))?$)");
  const std::string path = target.substr(0, target.find('?'));
  auto parse_body = [&]() -> nlohmann::json {
    if (body.empty()) return nlohmann::json::object();
    try {
      return nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& ex) {
      throw Error(ErrorCode::BadRequest, std::string("body is not valid JSON: ") + ex.what());
    }
  };
  try {
    std::smatch m;
    if (path == "/sessions") {
      if (method != http::verb::post) return {http::status::method_not_allowed, error_body("MethodNotAllowed", "use POST")};
      const auto id = mgr.create(parse_body());
      return {http::status::created, mgr.snapshot(id).dump()};
    }
    if (path == "/reports/summary") {
      if (method != http::verb::get) return {http::status::method_not_allowed, error_body("MethodNotAllowed", "use GET")};
      return {http::status::ok, mgr.summary().dump()};
    }
    if (std::regex_match(path, m, session_re)) {
      const std::string id = m[1];
      const std::string action = m[3];
      const auto want = action.empty() || action == "predictions" ? http::verb::get : http::verb::post;
      if (method != want)
        return {http::status::method_not_allowed,
                error_body("MethodNotAllowed", "use " + std::string(http::to_string(want)))};
      if (action.empty()) return {http::status::ok, mgr.snapshot(id).dump()};
      if (action == "advance") {
        mgr.advance(id);
        return {http::status::ok, mgr.snapshot(id).dump()};
      }
      if (action == "predictions") return {http::status::ok, mgr.predictions(id).dump()};
      return {http::status::ok, report_to_json(mgr.submit_ratings(id, parse_body())).dump()};
    }
    return {http::status::not_found, error_body("NotFound", "no route for " + path)};
  } catch (const Error& e) {
    return {status_for(e.code()), error_body(traitwave::name_of(e.code()), e.detail())};
  } catch (const std::exception& e) {
    return {http::status::internal_server_error, error_body("Internal", e.what())};
  }
}

class Server {
 public:
  Server(SessionManager& mgr, const std::string& address, unsigned short port)
      : mgr_(mgr), acceptor_(io_, tcp::endpoint(asio::ip::make_address(address), port)) {
    port_ = acceptor_.local_endpoint().port();
  }

  ~Server() { stop(); }

  unsigned short port() const { return port_; }

  void start() {
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  void stop() {
    if (stopping_.exchange(true)) return;
    beast::error_code ec;
    if (accept_thread_.joinable()) {
      // Wake the blocking accept with a throwaway connection.
      auto addr = acceptor_.local_endpoint(ec).address();
      if (addr.is_unspecified()) addr = asio::ip::make_address("127.0.0.1");
      tcp::socket poke(io_);
      poke.connect(tcp::endpoint(addr, port_), ec);
      accept_thread_.join();
    }
    acceptor_.close(ec);
    std::vector<Worker> workers;
    {
      std::lock_guard lock(mutex_);
      for (auto& w : workers_) w.socket->shutdown(tcp::socket::shutdown_both, ec);
      workers.swap(workers_);
    }
    for (auto& w : workers) w.thread.join();
  }

 private:
  void accept_loop() {
    while (!stopping_) {
      auto socket = std::make_shared<tcp::socket>(io_);
      beast::error_code ec;
      acceptor_.accept(*socket, ec);
      if (ec) {
        if (stopping_) return;
        continue;
      }
      if (stopping_) return;
      std::lock_guard lock(mutex_);
      std::erase_if(workers_, [](Worker& w) {
        if (!*w.done) return false;
        w.thread.join();
        return true;
      });
      auto done = std::make_shared<std::atomic<bool>>(false);
      workers_.push_back({socket, done, std::thread([this, socket, done] {
                            serve(socket);
                            *done = true;
                          })});
    }
  }

  struct Worker {
    std::shared_ptr<tcp::socket> socket;
    std::shared_ptr<std::atomic<bool>> done;
    std::thread thread;
  };

  void serve(std::shared_ptr<tcp::socket> socket) {
    beast::flat_buffer buffer;
    beast::error_code ec;
    while (!stopping_) {
      http::request<http::string_body> req;
      http::read(*socket, buffer, req, ec);
      if (ec) break;
      if (websocket::is_upgrade(req)) {
        stream(*socket, req);
        return;
      }
      http::response<http::string_body> res;
      res.version(req.version());
      res.set(http::field::content_type, "application/json");
      res.set(http::field::access_control_allow_origin, "*");
      if (req.method() == http::verb::options) {
        res.result(http::status::no_content);
        res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
        res.set(http::field::access_control_allow_headers, "Content-Type");
      } else {
        const auto out = handle_request(mgr_, req.method(), std::string(req.target()), req.body());
        res.result(out.status);
        res.body() = out.body;
      }
      res.keep_alive(req.keep_alive());
      res.prepare_payload();
      http::write(*socket, res, ec);
      if (ec || !req.keep_alive()) break;
    }
    socket->shutdown(tcp::socket::shutdown_both, ec);
  }

  /// Sends every row buffered after the subscription opened, then a close
  /// frame when the session ends, or a `dropped` notice when the client
  /// fell behind.
  void stream(tcp::socket& socket, const http::request<http::string_body>& req) {
    static const std::regex stream_re(R"(^/sessions/([A-Za-z0-9_-]+)/stream$)");
    const std::string target(req.target());
    std::smatch m;
    beast::error_code ec;
    std::shared_ptr<Subscription> sub;
    std::string refusal;
    http::status status = http::status::ok;
    if (!std::regex_match(target, m, stream_re)) {
      status = http::status::not_found;
      refusal = error_body("NotFound", "no stream at " + target);
    } else {
      try {
        sub = mgr_.subscribe(m[1]);
      } catch (const Error& e) {
        status = status_for(e.code());
        refusal = error_body(traitwave::name_of(e.code()), e.detail());
      }
    }
    if (!sub) {
      http::response<http::string_body> res{status, req.version()};
      res.set(http::field::content_type, "application/json");
      res.body() = refusal;
      res.prepare_payload();
      http::write(socket, res, ec);
      return;
    }

    websocket::stream<tcp::socket&> ws(socket);
    ws.accept(req, ec);
    if (ec) return;
    ws.text(true);
    std::string msg;
    while (!stopping_) {
      const auto st = sub->pop(msg, std::chrono::milliseconds(200));
      if (st == Subscription::Status::Timeout) continue;
      if (st == Subscription::Status::Message) {
        ws.write(asio::buffer(msg), ec);
        if (ec) return;
        continue;
      }
      if (st == Subscription::Status::Dropped) {
        const auto notice = json{{"type", "dropped"}, {"message", "subscriber fell behind the stream"}}.dump();
        ws.write(asio::buffer(notice), ec);
        ws.close(websocket::close_code::policy_error, ec);
      } else {
        ws.close(websocket::close_code::normal, ec);
      }
      return;
    }
    ws.close(websocket::close_code::going_away, ec);
  }

  SessionManager& mgr_;
  asio::io_context io_;
  tcp::acceptor acceptor_;
  unsigned short port_ = 0;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex mutex_;
  std::vector<Worker> workers_;
};

}  // namespace traitwave::service
