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
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "covis/sim/bot.hpp"

namespace covis::sim {

struct WsUrl {
  std::string host;
  std::string port{"80"};
  std::string path;  // anything after the authority, without a trailing slash
};

/// Parses "ws://host[:port][/path]". Returns nullopt on anything else.
inline std::optional<WsUrl> parse_ws_url(std::string_view url) {
  constexpr std::string_view scheme = "ws://";
  if (!url.starts_with(scheme)) return std::nullopt;
  url.remove_prefix(scheme.size());
  WsUrl out;
  const auto slash = url.find('/');
  std::string_view authority = url.substr(0, slash);
  if (slash != std::string_view::npos) out.path = std::string(url.substr(slash));
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  const auto colon = authority.rfind(':');
  if (colon != std::string_view::npos) {
    const auto port = authority.substr(colon + 1);
    if (port.empty() || port.size() > 5 || port.find_first_not_of("0123456789") != std::string_view::npos)
      return std::nullopt;
    out.port = std::string(port);
    authority = authority.substr(0, colon);
  }
  if (authority.empty()) return std::nullopt;
  out.host = std::string(authority);
  return out;
}

struct LiveOptions {
  // How long to stay connected after the last scripted step.
  TimeMs linger_ms{500};
  TimeMs timeout_ms{120000};
};

struct LiveResult {
  bool ok{false};
  std::string error;
  std::string user_id;
  std::uint64_t hash{0};
  int connections{0};
  BotStats stats;
};

namespace live_detail {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

class LiveBot {
 public:
  LiveBot(net::io_context& ioc, WsUrl url, std::string room, BotScript script, LiveOptions opt)
      : ioc_(ioc),
        url_(std::move(url)),
        room_(std::move(room)),
        bot_(std::move(script)),
        opt_(opt),
        resolver_(ioc),
        step_timer_(ioc),
        deadline_(ioc),
        start_(std::chrono::steady_clock::now()) {}

  void start() {
    deadline_.expires_after(std::chrono::milliseconds(opt_.timeout_ms));
    deadline_.async_wait([this](beast::error_code ec) {
      if (!ec) fail("timed out");
    });
    pump();
  }

  LiveResult result() const {
    LiveResult r;
    r.ok = done_ && error_.empty() && bot_.stats().errors == 0;
    r.error = !error_.empty() ? error_ : bot_.last_error();
    r.user_id = bot_.user_id();
    r.hash = bot_.replica_hash();
    r.connections = connections_;
    r.stats = bot_.stats();
    return r;
  }

 private:
  using Ws = websocket::stream<beast::tcp_stream>;

  TimeMs now() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
  }

  void pump() {
    if (done_) return;
    BotOutput out = bot_.poll(now());
    if (out.want_connect && !ws_) open();
    for (auto& f : out.frames) send(std::move(f));
    if (out.disconnect_for) {
      drop();
      step_timer_.expires_after(std::chrono::milliseconds(*out.disconnect_for));
      step_timer_.async_wait([this](beast::error_code ec) {
        if (!ec && !done_) open();
      });
      return;
    }
    arm();
  }

  void arm() {
    if (bot_.script_done()) {
      if (!ws_ || bot_.left()) {
        if (!ws_) finish();
        return;  // a leave is answered by the server closing the socket
      }
      if (lingering_) return;
      lingering_ = true;
      step_timer_.expires_after(std::chrono::milliseconds(opt_.linger_ms));
      step_timer_.async_wait([this](beast::error_code ec) {
        if (ec || done_) return;
        close_then_finish();
      });
      return;
    }
    if (!bot_.can_progress()) return;  // inbound frames or a reconnect will pump again
    const TimeMs wait = std::max<TimeMs>(0, *bot_.next_due() - now());
    step_timer_.expires_after(std::chrono::milliseconds(wait));
    step_timer_.async_wait([this](beast::error_code ec) {
      if (!ec) pump();
    });
  }

  void open() {
    const int gen = ++generation_;
    ws_ = std::make_unique<Ws>(ioc_);
    resolver_.async_resolve(url_.host, url_.port, [this, gen](beast::error_code ec, tcp::resolver::results_type r) {
      if (gen != generation_) return;
      if (ec) return fail("resolve failed: " + ec.message());
      beast::get_lowest_layer(*ws_).expires_after(std::chrono::seconds(10));
      beast::get_lowest_layer(*ws_).async_connect(r, [this, gen](beast::error_code cec, const tcp::endpoint&) {
        if (gen != generation_) return;
        if (cec) return fail("connect failed: " + cec.message());
        beast::get_lowest_layer(*ws_).expires_never();
        ws_->set_option(websocket::stream_base::timeout::suggested(beast::role_type::client));
        ws_->text(true);
        ws_->async_handshake(url_.host + ":" + url_.port, url_.path + "/session/" + room_,
                             [this, gen](beast::error_code hec) {
                               if (gen != generation_) return;
                               if (hec) return fail("handshake failed: " + hec.message());
                               ++connections_;
                               open_ = true;
                               send(bot_.connect());
                               read(gen);
                             });
      });
    });
  }

  void read(int gen) {
    ws_->async_read(buffer_, [this, gen](beast::error_code ec, std::size_t) {
      if (gen != generation_) return;
      if (ec) {
        lost();
        return;
      }
      const auto data = buffer_.cdata();
      const std::string frame(static_cast<const char*>(data.data()), data.size());
      buffer_.consume(buffer_.size());
      for (auto& reply : bot_.on_frame(frame)) send(std::move(reply));
      read(gen);
      pump();
    });
  }

  void send(std::string frame) {
    if (!ws_ || !open_) {
      pending_.push_back(std::move(frame));
      return;
    }
    queue_.push_back(std::move(frame));
    if (!writing_) write_next(generation_);
  }

  void write_next(int gen) {
    if (!pending_.empty()) {
      for (auto& f : pending_) queue_.push_back(std::move(f));
      pending_.clear();
    }
    if (queue_.empty()) {
      writing_ = false;
      return;
    }
    writing_ = true;
    ws_->async_write(net::buffer(queue_.front()), [this, gen](beast::error_code ec, std::size_t) {
      if (gen != generation_) return;
      if (ec) {
        lost();
        return;
      }
      queue_.pop_front();
      write_next(gen);
    });
  }

  // Connection ended under us (server close or network error).
  void lost() {
    reset_connection();
    bot_.disconnected();
    pump();
    if (!done_ && bot_.script_done()) finish();
  }

  // Scripted drop: abandon the socket without a close handshake.
  void drop() {
    if (ws_) {
      beast::error_code ec;
      beast::get_lowest_layer(*ws_).socket().close(ec);
    }
    reset_connection();
    bot_.disconnected();
  }

  void reset_connection() {
    ++generation_;
    ws_.reset();
    open_ = false;
    writing_ = false;
    queue_.clear();
    pending_.clear();
    buffer_.consume(buffer_.size());
  }

  void close_then_finish() {
    if (!ws_) return finish();
    const int gen = ++generation_;
    ws_->async_close(websocket::close_code::normal, [this, gen](beast::error_code) {
      if (gen != generation_) return;
      reset_connection();
      bot_.disconnected();
      finish();
    });
  }

  void fail(std::string message) {
    if (done_) return;
    error_ = std::move(message);
    finish();
  }

  void finish() {
    if (done_) return;
    done_ = true;
    step_timer_.cancel();
    deadline_.cancel();
    resolver_.cancel();
    if (ws_) {
      beast::error_code ec;
      beast::get_lowest_layer(*ws_).socket().close(ec);
    }
    ++generation_;
  }

  net::io_context& ioc_;
  WsUrl url_;
  std::string room_;
  Bot bot_;
  LiveOptions opt_;
  tcp::resolver resolver_;
  net::steady_timer step_timer_;
  net::steady_timer deadline_;
  std::chrono::steady_clock::time_point start_;
  std::unique_ptr<Ws> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  std::deque<std::string> pending_;
  bool writing_{false};
  bool open_{false};
  bool lingering_{false};
  bool done_{false};
  int generation_{0};
  int connections_{0};
  std::string error_;
};

}  // namespace live_detail

/// Runs `script` against a live server at `url` in room `room`, blocking until
/// the script completes, the connection fails, or the timeout expires.
inline LiveResult run_live_bot(const WsUrl& url, const std::string& room, BotScript script, LiveOptions opt = {}) {
  boost::asio::io_context ioc;
  live_detail::LiveBot bot(ioc, url, room, std::move(script), opt);
  bot.start();
  ioc.run();
  return bot.result();
}

}  // namespace covis::sim
