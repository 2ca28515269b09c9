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

#include <gtest/gtest.h>

#include <thread>

#include "covis/server/ws_server.hpp"
#include "covis/sim/live.hpp"
#include "covis/volume/lattice.hpp"
#include "support/support.hpp"

namespace {

using namespace covis;
using namespace covis::protocol;
namespace ct = covis::testing;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

class LiveServer : public ::testing::Test {
 protected:
  void SetUp() override {
    LatticeParams p;
    p.cells = {1, 1, 1};
    p.cell_size_vox = 16;
    p.strut_radius_vox = 2.0;
    volume_ = generate_octet_lattice(p);
    save_volume_u8(volume_, data_ / "lattice");

    server::ServerConfig cfg;
    cfg.port = 0;
    cfg.datasets_dir = data_.path();
    cfg.room.tick_ms = 20;
    server_ = std::make_unique<server::Server>(cfg, [this](const std::string& line) {
      std::lock_guard lock(log_mutex_);
      log_.push_back(line);
    });
    port_ = server_->start().port();
    thread_ = std::thread([this] { server_->run(); });
  }

  void TearDown() override {
    server_->stop();
    thread_.join();
  }

  http::response<http::string_body> get(const std::string& target, http::verb verb = http::verb::get) {
    net::io_context ioc;
    beast::tcp_stream stream(ioc);
    stream.expires_after(std::chrono::seconds(10));
    stream.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port_));
    http::request<http::string_body> req{verb, target, 11};
    req.set(http::field::host, "127.0.0.1");
    http::write(stream, req);
    beast::flat_buffer buf;
    http::response_parser<http::string_body> parser;
    parser.body_limit(64 << 20);
    if (verb == http::verb::head) parser.skip(true);
    http::read(stream, buf, parser);
    return parser.release();
  }

  json get_json(const std::string& target) { return json::parse(get(target).body()); }

  ct::TempDir data_;
  Volume volume_;
  std::unique_ptr<server::Server> server_;
  unsigned short port_{0};
  std::thread thread_;
  std::mutex log_mutex_;
  std::vector<std::string> log_;
};

// Blocking WebSocket client with a replica of its own.
class WsClient {
 public:
  WsClient(unsigned short port, const std::string& room) : ws_(ioc_) {
    beast::get_lowest_layer(ws_).expires_after(std::chrono::seconds(10));
    beast::get_lowest_layer(ws_).connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
    ws_.handshake("127.0.0.1", "/session/" + room);
    beast::get_lowest_layer(ws_).expires_never();
  }

  void send(const Envelope& e) {
    ws_.text(true);
    ws_.write(net::buffer(encode(e)));
  }

  // Reads one frame and folds it into the replica.
  Envelope read() {
    beast::get_lowest_layer(ws_).expires_after(std::chrono::seconds(10));
    beast::flat_buffer buf;
    ws_.read(buf);
    Envelope e = decode(beast::buffers_to_string(buf.data()));
    if (e.type == MessageType::welcome) {
      user_id = e.body.at("user_id").get<std::string>();
      state = state_from_json(e.body.at("snapshot"));
    } else if (is_state_delta(e.type)) {
      const auto r = apply_delta_in_place(state, e);
      EXPECT_TRUE(r.accepted) << encode(e);
    }
    return e;
  }

  Envelope read_until(MessageType t) {
    for (;;) {
      Envelope e = read();
      if (e.type == t) return e;
    }
  }

  void close() { ws_.close(websocket::close_code::normal); }

  SessionState state;
  std::string user_id;

 private:
  net::io_context ioc_;
  websocket::stream<beast::tcp_stream> ws_;
};

TEST_F(LiveServer, HealthAndDatasetRoutes) {
  const auto health = get("/healthz");
  EXPECT_EQ(health.result(), http::status::ok);
  EXPECT_EQ(health.body(), "ok\n");

  const auto header = get("/datasets/lattice/header.json");
  EXPECT_EQ(header.result(), http::status::ok);
  EXPECT_EQ(header[http::field::content_type], "application/json");
  const VolumeHeader h = parse_volume_header(header.body());
  EXPECT_EQ(h.dims, volume_.dims);
  EXPECT_EQ(h.dtype, DType::u8);

  const auto raw = get("/datasets/lattice/raw");
  EXPECT_EQ(raw.result(), http::status::ok);
  EXPECT_EQ(raw.body(), ct::read_file(data_ / "lattice/raw"));
  EXPECT_EQ(raw.body().size(), volume_.data.size());

  const auto head = get("/datasets/lattice/raw", http::verb::head);
  EXPECT_EQ(head.result(), http::status::ok);
  EXPECT_EQ(head[http::field::content_length], std::to_string(volume_.data.size()));

  for (const char* missing : {"/datasets/nope/raw", "/datasets/../lattice/raw", "/datasets/lattice/other",
                              "/admin/rooms/nope/hash", "/", "/session"})
    EXPECT_EQ(get(missing).result(), http::status::not_found) << missing;
  EXPECT_EQ(get("/healthz", http::verb::post).result(), http::status::method_not_allowed);
}

TEST_F(LiveServer, RejectsWebSocketsOutsideSessionPaths) {
  net::io_context ioc;
  websocket::stream<beast::tcp_stream> ws(ioc);
  beast::get_lowest_layer(ws).expires_after(std::chrono::seconds(10));
  beast::get_lowest_layer(ws).connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port_));
  EXPECT_THROW(ws.handshake("127.0.0.1", "/elsewhere"), beast::system_error);
}

TEST_F(LiveServer, FixtureTraceOverTheWireMatchesGoldenHash) {
  std::string golden = ct::read_file(ct::fixture("trace_golden_hash.txt"));
  golden.erase(golden.find_last_not_of("\r\n") + 1);
  std::map<std::string, std::unique_ptr<WsClient>> clients;
  std::uint64_t expected_next = 1;
  auto wait_for_seq = [&](std::uint64_t next) {
    for (int i = 0; i < 500; ++i) {
      const json rooms = get_json("/admin/rooms");
      if (!rooms.empty() && rooms[0].at("next_seq").get<std::uint64_t>() >= next) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    FAIL() << "server never reached seq " << next;
  };

  for (const auto& j : json::parse(ct::read_file(ct::fixture("trace_fixture.json")))) {
    Envelope e = decode(j.dump());
    const std::string user = e.sender;
    if (e.type == MessageType::presence_join) {
      auto c = std::make_unique<WsClient>(port_, "lab");
      c->send(msg::join(e.body.at("display_name").get<std::string>(),
                        *parse_role(e.body.at("role").get<std::string>())));
      c->read_until(MessageType::welcome);
      EXPECT_EQ(c->user_id, user);
      clients[user] = std::move(c);
    } else {
      e.sender.clear();
      e.seq.reset();
      clients.at(user)->send(e);
    }
    wait_for_seq(++expected_next);
  }
  EXPECT_EQ(get_json("/admin/rooms/lab/hash").at("hash"), golden);
  const json rooms = get_json("/admin/rooms");
  ASSERT_EQ(rooms.size(), 1u);
  EXPECT_EQ(rooms[0].at("clients"), 2);

  // Both replicas catch up to the last delta.
  for (auto& [user, c] : clients) {
    while (!c->state.seqs.contains("axis_slices") || c->state.seqs.at("axis_slices") < expected_next - 1) c->read();
    EXPECT_EQ(hash_hex(state_hash(c->state)), golden) << user;
  }
}

TEST_F(LiveServer, PresenceFlowsBetweenClients) {
  WsClient a(port_, "lab");
  a.send(msg::join("alice", Role::participant));
  a.read_until(MessageType::welcome);
  WsClient b(port_, "lab");
  b.send(msg::join("alice", Role::participant));
  const Envelope welcome = b.read_until(MessageType::welcome);
  EXPECT_EQ(welcome.body.at("user_id"), "alice-2");
  EXPECT_EQ(a.read_until(MessageType::presence_join).sender, "alice-2");

  b.send(msg::event("ping", {{"t", 1}}, EventTarget::server));
  EXPECT_EQ(b.read_until(MessageType::event).body.at("name"), "pong");

  a.send(msg::event("load_dataset_request", {{"dataset_id", "lattice"}}, EventTarget::server));
  const Envelope load = b.read_until(MessageType::dataset_load);
  EXPECT_EQ(load.body.at("dataset_id"), "lattice");
  EXPECT_EQ(b.state.dataset->dims, volume_.dims);

  b.close();
  const Envelope left = a.read_until(MessageType::presence_leave);
  EXPECT_EQ(left.body.at("user_id"), "alice-2");
  EXPECT_FALSE(a.state.presence.contains("alice-2"));
}

TEST_F(LiveServer, LiveBotsConvergeWithTheServer) {
  auto script = [](const std::string& name, json extra) {
    json actions = json::array({{{"at_ms", 0}, {"do", "join"}}});
    for (auto& x : extra) actions.push_back(x);
    return sim::parse_script({{"name", name}, {"role", "participant"}, {"actions", actions}});
  };
  WsClient observer(port_, "bots");
  observer.send(msg::join("observer", Role::spectator));
  observer.read_until(MessageType::welcome);

  const auto url = *sim::parse_ws_url("ws://127.0.0.1:" + std::to_string(port_));
  sim::LiveOptions opt;
  opt.linger_ms = 800;
  opt.timeout_ms = 20000;
  sim::LiveResult ra;
  sim::LiveResult rb;
  std::thread ta([&] {
    ra = sim::run_live_bot(url, "bots",
                           script("mover", {{{"at_ms", 50}, {"do", "grab"}, {"entity", "plane"}},
                                            {{"at_ms", 50},
                                             {"do", "move"},
                                             {"entity", "plane"},
                                             {"until_ms", 650},
                                             {"rate_hz", 50},
                                             {"waypoints", {{{"position", {0, 0, 0}}}, {{"position", {9, 9, 9}}}}}},
                                            {{"at_ms", 700}, {"do", "release"}, {"entity", "plane"}}}),
                           opt);
  });
  std::thread tb([&] {
    rb = sim::run_live_bot(url, "bots",
                           script("painter", {{{"at_ms", 100}, {"do", "stroke"}, {"points", {{0, 0, 0}, {1, 1, 1}}}},
                                              {{"at_ms", 200}, {"do", "colormap"}, {"name", "viridis"}}}),
                           opt);
  });
  ta.join();
  tb.join();
  ASSERT_TRUE(ra.ok) << ra.error;
  ASSERT_TRUE(rb.ok) << rb.error;
  EXPECT_EQ(ra.stats.grants, 1u);
  EXPECT_EQ(ra.stats.replica_rejections + rb.stats.replica_rejections, 0u);
  EXPECT_GT(ra.stats.moves_sent, 10u);

  // Both bots have left; the observer's replica must equal the room.
  for (int left = 0; left < 2;) left += observer.read().type == MessageType::presence_leave;
  EXPECT_EQ(get_json("/admin/rooms/bots/hash").at("hash"), hash_hex(state_hash(observer.state)));
  EXPECT_EQ(observer.state.colormap_name, "viridis");
  EXPECT_EQ(observer.state.plane.point, (Vec3{9, 9, 9}));
  EXPECT_TRUE(observer.state.locks.empty());
  EXPECT_EQ(observer.state.strokes.size(), 1u);
}

TEST(Http, SessionPathsAndRoomIds) {
  EXPECT_EQ(server::session_room("/session/lab-1"), "lab-1");
  EXPECT_EQ(server::session_room("/session/lab?x=1"), "lab");
  EXPECT_FALSE(server::session_room("/session/"));
  EXPECT_FALSE(server::session_room("/session/a/b"));
  EXPECT_FALSE(server::session_room("/sessions/lab"));
  EXPECT_TRUE(server::session_room("/session/" + std::string(128, 'a')));
  EXPECT_FALSE(server::session_room("/session/" + std::string(129, 'a')));
  EXPECT_FALSE(server::session_room("/session/.."));
  EXPECT_FALSE(server::session_room("/session/a%20b"));
}

}  // namespace
