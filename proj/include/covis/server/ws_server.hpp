// Copyright 2026 The covis Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "covis/server/registry.hpp"
#include "covis/server/room.hpp"
#include "covis/volume/io.hpp"

namespace covis::server {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

struct ServerConfig {
  std::string bind_host{"127.0.0.1"};
  unsigned short port{8080};  // 0 picks a free port
  RoomConfig room{};
  std::filesystem::path datasets_dir;
  // A client whose unsent backlog grows past this is dropped as a slow consumer.
  std::size_t max_outbound_queue{1024};
};

struct ServerStats {
  std::uint64_t connections_opened{0};
  std::uint64_t connections_closed{0};
  std::uint64_t slow_consumer_drops{0};
  std::size_t max_outbound_queue{0};
};

using HttpRequest = http::request<http::string_body>;
using HttpResponse = http::response<http::string_body>;

/// Room id addressed by a "/session/<room_id>" target, if valid.
inline std::optional<std::string> session_room(std::string_view target) {
  constexpr std::string_view prefix = "/session/";
  if (const auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
  if (!target.starts_with(prefix)) return std::nullopt;
  const auto room = target.substr(prefix.size());
  if (!valid_room_id(room)) return std::nullopt;
  return std::string(room);
}

namespace http_detail {

inline HttpResponse respond(const HttpRequest& req, http::status status, std::string body,
                            std::string_view content_type) {
  HttpResponse res{status, req.version()};
  res.set(http::field::server, "covis");
  res.set(http::field::content_type, std::string(content_type));
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

inline HttpResponse error(const HttpRequest& req, http::status status, std::string_view message) {
  return respond(req, status, json{{"error", message}}.dump(), "application/json");
}

inline std::vector<std::string_view> split_path(std::string_view target) {
  if (const auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
  std::vector<std::string_view> parts;
  while (!target.empty()) {
    if (target.front() == '/') {
      target.remove_prefix(1);
      continue;
    }
    const auto slash = target.find('/');
    parts.push_back(target.substr(0, slash));
    if (slash == std::string_view::npos) break;
    target.remove_prefix(slash);
  }
  return parts;
}

inline std::string read_file(const std::filesystem::path& p) {
  const auto bytes = covis::detail::read_all(p);
  return std::string(bytes.begin(), bytes.end());
}

inline HttpResponse dataset_file(const HttpRequest& req, const std::filesystem::path& dir, std::string_view id,
                                 std::string_view file) {
  if (dir.empty() || !valid_dataset_id(id)) return error(req, http::status::not_found, "unknown dataset");
  const auto header_path = dir / std::string(id) / "header.json";
  if (!std::filesystem::exists(header_path)) return error(req, http::status::not_found, "unknown dataset");
  try {
    const std::string header = read_file(header_path);
    if (file == "header.json") return respond(req, http::status::ok, header, "application/json");
    const VolumeHeader h = parse_volume_header(header);
    // Only raw files next to the header are served.
    if (!valid_dataset_id(h.raw)) return error(req, http::status::not_found, "raw file is not servable");
    const auto raw_path = header_path.parent_path() / h.raw;
    if (!std::filesystem::exists(raw_path)) return error(req, http::status::not_found, "raw file missing");
    return respond(req, http::status::ok, read_file(raw_path), "application/octet-stream");
  } catch (const std::exception& e) {
    return error(req, http::status::internal_server_error, e.what());
  }
}

}  // namespace http_detail

/// Plain HTTP routes: dataset files, admin views and a health check.
inline HttpResponse handle_http(const HttpRequest& req, const ServerConfig& config, RoomRegistry& rooms) {
  using http_detail::error;
  using http_detail::respond;
  if (req.method() != http::verb::get && req.method() != http::verb::head)
    return error(req, http::status::method_not_allowed, "only GET is supported");
  const auto parts = http_detail::split_path(std::string_view(req.target().data(), req.target().size()));
  HttpResponse res = [&] {
    if (parts.size() == 1 && parts[0] == "healthz") return respond(req, http::status::ok, "ok\n", "text/plain");
    if (parts.size() == 3 && parts[0] == "datasets" && (parts[2] == "header.json" || parts[2] == "raw"))
      return http_detail::dataset_file(req, config.datasets_dir, parts[1], parts[2]);
    if (parts.size() == 2 && parts[0] == "admin" && parts[1] == "rooms")
      return respond(req, http::status::ok, rooms.list_rooms().dump(), "application/json");
    if (parts.size() == 4 && parts[0] == "admin" && parts[1] == "rooms" && parts[3] == "hash") {
      const std::string id(parts[2]);
      const auto h = rooms.room_hash(id);
      if (!h) return error(req, http::status::not_found, "unknown room");
      return respond(req, http::status::ok, json{{"room_id", id}, {"hash", protocol::hash_hex(*h)}}.dump(),
                     "application/json");
    }
    return error(req, http::status::not_found, "not found");
  }();
  if (req.method() == http::verb::head) {
    const auto length = res.body().size();
    res.body().clear();
    res.content_length(length);
  }
  return res;
}

class Server;

namespace ws_detail {

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, Server& server, ConnId id, std::string room)
      : ws_(std::move(socket)), server_(server), id_(id), room_(std::move(room)) {}

  ConnId id() const { return id_; }
  const std::string& room() const { return room_; }
  std::size_t queued() const { return queue_.size(); }

  void accept(HttpRequest req);
  void enqueue(std::shared_ptr<const std::string> frame);
  void close_after_drain();
  void abort();

 private:
  void read();
  void write_next();
  void finish();

  websocket::stream<beast::tcp_stream> ws_;
  Server& server_;
  ConnId id_;
  std::string room_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool writing_{false};
  bool close_pending_{false};
  bool finished_{false};
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, Server& server) : stream_(std::move(socket)), server_(server) {}
  void run() { read(); }

 private:
  void read();
  void on_read(beast::error_code ec);

  beast::tcp_stream stream_;
  Server& server_;
  beast::flat_buffer buffer_;
  HttpRequest req_;
};

}  // namespace ws_detail

/// WebSocket session server plus the HTTP side routes. Everything runs on one
/// io_context thread, so each room sees a single total order of messages.
class Server {
 public:
  using Logger = std::function<void(const std::string&)>;

  explicit Server(ServerConfig config, Logger logger = {})
      : config_(std::move(config)),
        logger_(std::move(logger)),
        rooms_(config_.room, config_.datasets_dir.empty() ? DatasetResolver{} : directory_resolver(config_.datasets_dir)),
        acceptor_(ioc_),
        timer_(ioc_),
        start_(std::chrono::steady_clock::now()) {}

  /// Binds and starts accepting. Throws boost::system::system_error when the
  /// address cannot be bound.
  tcp::endpoint start() {
    const tcp::endpoint ep{net::ip::make_address(config_.bind_host), config_.port};
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen(net::socket_base::max_listen_connections);
    accept();
    schedule_tick();
    return acceptor_.local_endpoint();
  }

  void run() { ioc_.run(); }

  /// Safe to call from any thread.
  void stop() {
    net::post(ioc_, [this] {
      stopping_ = true;
      beast::error_code ec;
      acceptor_.close(ec);
      timer_.cancel();
      // abort() reports back through closed(), which edits sessions_.
      std::vector<std::shared_ptr<ws_detail::WsSession>> live;
      for (auto& [id, weak] : sessions_)
        if (auto s = weak.lock()) live.push_back(std::move(s));
      for (auto& s : live) s->abort();
      ioc_.stop();
    });
  }

  net::io_context& context() { return ioc_; }
  const ServerConfig& config() const { return config_; }
  RoomRegistry& rooms() { return rooms_; }
  const ServerStats& stats() const { return stats_; }

  TimeMs now() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
  }

  // ---- session callbacks (io_context thread only) ----

  HttpResponse http(const HttpRequest& req) { return handle_http(req, config_, rooms_); }

  void opened(const std::shared_ptr<ws_detail::WsSession>& s) {
    ++stats_.connections_opened;
    sessions_[s->id()] = s;
    rooms_.get_or_create(s->room()).connect(s->id(), now());
  }

  void message(ConnId conn, const std::string& room_id, std::string_view frame) {
    Room* room = rooms_.find(room_id);
    if (!room) return;
    const bool was_joined = room->user_of(conn).has_value();
    room->receive(conn, frame, now());
    if (!was_joined)
      if (const auto user = room->user_of(conn)) {
        users_[conn] = *user;
        log("join room=" + room_id + " user=" + *user);
      }
    dispatch(*room);
  }

  void closed(ConnId conn, const std::string& room_id) {
    ++stats_.connections_closed;
    sessions_.erase(conn);
    if (Room* room = rooms_.find(room_id)) {
      room->disconnect(conn, now());
      dispatch(*room);
    }
    if (const auto it = users_.find(conn); it != users_.end()) {
      log("leave room=" + room_id + " user=" + it->second);
      users_.erase(it);
    }
  }

  void note_queue(std::size_t depth) { stats_.max_outbound_queue = std::max(stats_.max_outbound_queue, depth); }

  bool over_limit(std::size_t depth) const { return depth > config_.max_outbound_queue; }

  void slow_consumer() { ++stats_.slow_consumer_drops; }

  ConnId next_conn() { return next_conn_++; }

  void log(const std::string& line) {
    if (logger_) logger_(line);
  }

 private:
  void accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        if (!stopping_) accept();
        return;
      }
      std::make_shared<ws_detail::HttpSession>(std::move(socket), *this)->run();
      accept();
    });
  }

  void schedule_tick() {
    timer_.expires_after(std::chrono::milliseconds(config_.room.tick_ms));
    timer_.async_wait([this](beast::error_code ec) {
      if (ec || stopping_) return;
      const TimeMs t = now();
      rooms_.for_each([&](Room& room) {
        room.tick(t);
        dispatch(room);
      });
      rooms_.collect_garbage(t);
      schedule_tick();
    });
  }

  void dispatch(Room& room) {
    for (auto& out : room.take_outbox()) {
      const auto it = sessions_.find(out.conn);
      if (it == sessions_.end()) continue;
      auto s = it->second.lock();
      if (!s) continue;
      if (out.frame) s->enqueue(out.frame);
      if (out.close) s->close_after_drain();
    }
  }

  ServerConfig config_;
  Logger logger_;
  net::io_context ioc_{1};
  RoomRegistry rooms_;
  tcp::acceptor acceptor_;
  net::steady_timer timer_;
  std::chrono::steady_clock::time_point start_;
  std::map<ConnId, std::weak_ptr<ws_detail::WsSession>> sessions_;
  std::map<ConnId, std::string> users_;
  ConnId next_conn_{1};
  ServerStats stats_;
  bool stopping_{false};
};

namespace ws_detail {

inline void WsSession::accept(HttpRequest req) {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  ws_.text(true);
  ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
    if (ec) return;
    self->server_.opened(self);
    self->read();
  });
}

inline void WsSession::read() {
  ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->finish();
      return;
    }
    const auto data = self->buffer_.cdata();
    const std::string frame(static_cast<const char*>(data.data()), data.size());
    self->buffer_.consume(self->buffer_.size());
    if (!self->finished_) self->server_.message(self->id_, self->room_, frame);
    self->read();
  });
}

inline void WsSession::enqueue(std::shared_ptr<const std::string> frame) {
  if (finished_ || close_pending_) return;
  queue_.push_back(std::move(frame));
  server_.note_queue(queue_.size());
  if (server_.over_limit(queue_.size())) {
    server_.slow_consumer();
    abort();
    return;
  }
  if (!writing_) write_next();
}

inline void WsSession::write_next() {
  if (queue_.empty()) {
    writing_ = false;
    if (close_pending_ && !finished_) {
      ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
    }
    return;
  }
  writing_ = true;
  ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
    if (ec) {
      self->abort();
      return;
    }
    self->queue_.pop_front();
    self->write_next();
  });
}

inline void WsSession::close_after_drain() {
  if (close_pending_ || finished_) return;
  close_pending_ = true;
  if (!writing_) write_next();
}

inline void WsSession::abort() {
  if (finished_) return;
  beast::error_code ec;
  beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
  beast::get_lowest_layer(ws_).socket().close(ec);
  finish();
}

inline void WsSession::finish() {
  if (finished_) return;
  finished_ = true;
  queue_.clear();
  server_.closed(id_, room_);
}

inline void HttpSession::read() {
  req_ = {};
  stream_.expires_after(std::chrono::seconds(30));
  http::async_read(stream_, buffer_, req_,
                   [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
}

inline void HttpSession::on_read(beast::error_code ec) {
  if (ec) {
    stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
    return;
  }
  if (websocket::is_upgrade(req_)) {
    if (const auto room = session_room(std::string_view(req_.target().data(), req_.target().size()))) {
      stream_.expires_never();
      auto ws = std::make_shared<WsSession>(stream_.release_socket(), server_, server_.next_conn(), *room);
      ws->accept(std::move(req_));
      return;
    }
  }
  auto res = std::make_shared<HttpResponse>(server_.http(req_));
  http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code wec, std::size_t) {
    if (wec || !res->keep_alive()) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
      return;
    }
    self->read();
  });
}

}  // namespace ws_detail
}  // namespace covis::server
