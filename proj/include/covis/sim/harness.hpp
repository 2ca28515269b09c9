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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "covis/protocol/protocol.hpp"
#include "covis/server/room.hpp"
#include "covis/sim/bot.hpp"
#include "covis/sim/rng.hpp"
#include "covis/sim/script.hpp"
#include "covis/volume/io.hpp"

namespace covis::sim {

/// One-way link model. Each message is delayed by latency +/- jitter (uniform)
/// and never overtakes an earlier message on the same link.
struct NetProfile {
  double latency_ms{100.0};
  double jitter_ms{50.0};
  // Chance of a random drop per connected minute, rolled once a second.
  double disconnect_prob_per_min{0.0};
  TimeMs reconnect_after_ms{2000};
};

struct ClientSpec {
  BotScript script;
  NetProfile net;
};

struct Scenario {
  std::string name;
  std::uint64_t seed{1};
  TimeMs duration_ms{60000};
  // Extra time after the duration allowed for the session to go quiet.
  TimeMs settle_ms{10000};
  std::string room_id{"sim"};
  server::RoomConfig room{};
  std::vector<protocol::DatasetInfo> datasets;
  std::vector<ClientSpec> clients;
};

namespace harness_detail {

using namespace protocol::codec;

inline NetProfile parse_net(const json& j, NetProfile base) {
  if (!j.is_object()) throw ScriptError("network must be an object");
  if (j.contains("latency_ms")) base.latency_ms = real(j.at("latency_ms"));
  if (j.contains("jitter_ms")) base.jitter_ms = real(j.at("jitter_ms"));
  if (j.contains("disconnect_prob_per_min")) base.disconnect_prob_per_min = real(j.at("disconnect_prob_per_min"));
  if (j.contains("reconnect_after_ms")) base.reconnect_after_ms = integer(j.at("reconnect_after_ms"));
  if (base.latency_ms < 0 || base.jitter_ms < 0 || base.jitter_ms > base.latency_ms)
    throw ScriptError("network needs latency_ms >= jitter_ms >= 0");
  if (base.disconnect_prob_per_min < 0 || base.disconnect_prob_per_min > 1)
    throw ScriptError("disconnect_prob_per_min must be in [0, 1]");
  if (base.reconnect_after_ms < 0) throw ScriptError("reconnect_after_ms must be >= 0");
  return base;
}

inline server::RoomConfig parse_room(const json& j) {
  server::RoomConfig c;
  if (!j.is_object()) throw ScriptError("room must be an object");
  if (j.contains("tick_ms")) c.tick_ms = static_cast<int>(integer(j.at("tick_ms")));
  if (j.contains("max_clients")) c.max_clients = static_cast<int>(integer(j.at("max_clients")));
  if (j.contains("coalesce")) c.coalesce = boolean(j.at("coalesce"));
  if (j.contains("heartbeat_ms")) c.heartbeat_ms = integer(j.at("heartbeat_ms"));
  if (j.contains("max_missed_heartbeats")) c.max_missed_heartbeats = static_cast<int>(integer(j.at("max_missed_heartbeats")));
  if (c.tick_ms < 1 || c.max_clients < 1 || c.heartbeat_ms < 1 || c.max_missed_heartbeats < 0)
    throw ScriptError("room settings out of range");
  return c;
}

}  // namespace harness_detail

/// Parses a scenario document. Relative "script_file" paths resolve against
/// `base_dir`. A client with "count": n expands to n bots named <name>1..<name>n.
inline Scenario parse_scenario(const json& j, const std::filesystem::path& base_dir = {}) {
  using namespace harness_detail;
  try {
    Scenario s;
    s.name = string(field(j, "name"));
    if (j.contains("seed")) s.seed = unsigned_integer(j.at("seed"));
    s.duration_ms = integer(field(j, "duration_ms"));
    if (j.contains("settle_ms")) s.settle_ms = integer(j.at("settle_ms"));
    if (j.contains("room_id")) s.room_id = string(j.at("room_id"));
    if (s.duration_ms <= 0 || s.settle_ms < 0) throw ScriptError("duration_ms must be > 0 and settle_ms >= 0");
    if (j.contains("room")) s.room = parse_room(j.at("room"));
    NetProfile net;
    if (j.contains("network")) net = parse_net(j.at("network"), net);
    if (j.contains("datasets"))
      for (const auto& d : j.at("datasets")) s.datasets.push_back(protocol::read_dataset(d));
    const auto& clients = field(j, "clients");
    if (!clients.is_array() || clients.empty()) throw ScriptError("clients must be a non-empty array");
    for (const auto& c : clients) {
      json script_json;
      if (c.contains("script")) {
        script_json = c.at("script");
      } else {
        const auto path = base_dir / string(field(c, "script_file"));
        const auto bytes = covis::detail::read_all(path);
        script_json = json::parse(bytes.begin(), bytes.end());
      }
      const NetProfile cn = c.contains("network") ? parse_net(c.at("network"), net) : net;
      const std::int64_t count = c.contains("count") ? integer(c.at("count")) : 1;
      if (count < 1 || count > 1000) throw ScriptError("count must be in [1, 1000]");
      for (std::int64_t n = 1; n <= count; ++n) {
        json sj = script_json;
        if (count > 1) sj["name"] = string(field(sj, "name")) + std::to_string(n);
        s.clients.push_back({parse_script(sj), cn});
      }
    }
    return s;
  } catch (const ScriptError&) {
    throw;
  } catch (const std::exception& e) {
    throw ScriptError(std::string("bad scenario: ") + e.what());
  }
}

struct ClientReport {
  std::string name;
  std::string user_id;
  bool connected{false};
  std::uint64_t hash{0};
  int epochs{0};
  std::uint64_t deltas{0};
  std::uint64_t log_digest{0};
  // Most server frames ever in flight towards this client at once.
  std::uint64_t max_queue_depth{0};
  BotStats stats;
};

struct Convergence {
  bool hashes_match{true};
  bool order_ok{true};
  std::vector<std::string> divergent;      // connected clients whose hash differs
  std::vector<std::string> out_of_order;   // clients with a non-contiguous delta log
  bool ok() const { return hashes_match && order_ok; }
};

struct SimReport {
  std::string scenario;
  std::uint64_t seed{0};
  TimeMs duration_ms{0};
  TimeMs end_ms{0};
  bool quiescent{false};
  std::uint64_t server_hash{0};
  std::uint64_t next_seq{0};
  server::RoomStats room;
  std::uint64_t messages_delivered{0};
  std::uint64_t disconnects{0};
  std::uint64_t reconnects{0};
  std::uint64_t max_queue_depth{0};
  std::vector<ClientReport> clients;
  Convergence convergence;

  /// Pose bytes actually broadcast over what per-update broadcasting would cost.
  double pose_bandwidth_ratio() const {
    return room.pose_bytes_uncoalesced == 0
               ? 1.0
               : static_cast<double>(room.pose_bytes_sent) / static_cast<double>(room.pose_bytes_uncoalesced);
  }
};

/// Digest of a seq list; stable across platforms.
inline std::uint64_t seq_digest(const std::vector<std::uint64_t>& seqs) {
  protocol::Fnv1a64 h;
  for (std::uint64_t s : seqs) {
    const std::string t = std::to_string(s) + ",";
    h.update(t);
  }
  return h.value;
}

struct ConvergenceInput {
  std::string name;
  bool connected{false};
  std::uint64_t hash{0};
  std::vector<std::vector<std::uint64_t>> logs;
};

/// Every connected client must hold the server's hash, and every per-connection
/// delta log must be a contiguous run of the server's broadcast order.
inline Convergence check_convergence(std::uint64_t server_hash, const std::vector<std::uint64_t>& server_log,
                                     const std::vector<ConvergenceInput>& clients) {
  Convergence out;
  for (const auto& c : clients) {
    if (c.connected && c.hash != server_hash) {
      out.hashes_match = false;
      out.divergent.push_back(c.name);
    }
    bool ordered = true;
    for (const auto& log : c.logs) {
      if (log.empty()) continue;
      const auto start = std::lower_bound(server_log.begin(), server_log.end(), log.front());
      if (start == server_log.end() || *start != log.front() ||
          static_cast<std::size_t>(server_log.end() - start) < log.size() ||
          !std::equal(log.begin(), log.end(), start)) {
        ordered = false;
        break;
      }
      for (std::size_t i = 1; i < log.size(); ++i)
        if (log[i] <= log[i - 1]) ordered = false;
    }
    if (!ordered) {
      out.order_ok = false;
      out.out_of_order.push_back(c.name);
    }
  }
  return out;
}

namespace harness_detail {

using Micros = std::int64_t;

struct Event {
  enum class Kind { to_server, to_client, close_at_server, close_at_client, tick, wake, reconnect, chaos };
  Micros at{0};
  std::uint64_t order{0};
  Kind kind{Kind::tick};
  std::size_t client{0};
  server::ConnId conn{0};
  std::shared_ptr<const std::string> frame;

  bool operator>(const Event& o) const { return at != o.at ? at > o.at : order > o.order; }
};

inline Event event(Micros at, Event::Kind kind, std::size_t client = 0, server::ConnId conn = 0,
                   std::shared_ptr<const std::string> frame = nullptr) {
  Event e;
  e.at = at;
  e.kind = kind;
  e.client = client;
  e.conn = conn;
  e.frame = std::move(frame);
  return e;
}

struct Link {
  Rng rng;
  Micros last{0};
};

struct ClientRuntime {
  std::unique_ptr<Bot> bot;
  NetProfile net;
  server::ConnId conn{0};  // 0 when no connection is open
  Link up;
  Link down;
  std::optional<Micros> wake_at;
  bool reconnect_pending{false};
  std::uint64_t queued{0};
  std::uint64_t max_queued{0};
};

class Simulation {
 public:
  explicit Simulation(const Scenario& s)
      : scenario_(s),
        room_(s.room_id, withLog(s.room),
              [datasets = s.datasets](const std::string& id) -> std::optional<protocol::DatasetInfo> {
                for (const auto& d : datasets)
                  if (d.dataset_id == id) return d;
                return std::nullopt;
              }),
        chaos_(Rng::split(s.seed, 0)) {
    for (std::size_t i = 0; i < s.clients.size(); ++i) {
      ClientRuntime c;
      c.bot = std::make_unique<Bot>(s.clients[i].script);
      c.net = s.clients[i].net;
      c.up.rng = Rng::split(s.seed, 2 * i + 1);
      c.down.rng = Rng::split(s.seed, 2 * i + 2);
      clients_.push_back(std::move(c));
    }
  }

  const server::Room& room() const { return room_; }

  SimReport run() {
    const Micros end = ms(scenario_.duration_ms);
    const Micros hard_end = ms(scenario_.duration_ms + scenario_.settle_ms);
    push(event(0, Event::Kind::tick));
    push(event(ms(1000), Event::Kind::chaos));
    for (std::size_t i = 0; i < clients_.size(); ++i) schedule_wake(i);

    bool quiet = false;
    Micros now = 0;
    while (!queue_.empty()) {
      Event ev = queue_.top();
      if (ev.at > hard_end) break;
      queue_.pop();
      now = ev.at;
      handle(ev, now);
      if (ev.kind == Event::Kind::tick && now >= end && quiescent()) {
        quiet = true;
        break;
      }
    }
    return report(now, quiet);
  }

 private:
  static server::RoomConfig withLog(server::RoomConfig c) {
    c.record_broadcast_log = true;
    return c;
  }

  static Micros ms(TimeMs t) { return t * 1000; }
  static TimeMs to_ms(Micros t) { return t / 1000; }

  void push(Event e) {
    e.order = order_++;
    queue_.push(std::move(e));
  }

  Micros delay(Link& link, const NetProfile& net, Micros now) {
    const double d = net.latency_ms + link.rng.uniform(-net.jitter_ms, net.jitter_ms);
    const Micros at = std::max(now + static_cast<Micros>(std::llround(d * 1000.0)), link.last);
    link.last = at;
    return at;
  }

  void send_up(std::size_t i, std::shared_ptr<const std::string> frame, Micros now) {
    ClientRuntime& c = clients_[i];
    const auto kind = frame ? Event::Kind::to_server : Event::Kind::close_at_server;
    ++in_flight_;
    push(event(delay(c.up, c.net, now), kind, i, c.conn, std::move(frame)));
  }

  void schedule_wake(std::size_t i) {
    ClientRuntime& c = clients_[i];
    const auto due = c.bot->next_due();
    if (!due || !c.bot->can_progress()) return;
    const Micros at = ms(*due);
    if (c.wake_at && *c.wake_at <= at) return;
    c.wake_at = at;
    push(event(at, Event::Kind::wake, i));
  }

  void open(std::size_t i, Micros now) {
    ClientRuntime& c = clients_[i];
    c.conn = next_conn_++;
    owner_[c.conn] = i;
    room_.connect(c.conn, to_ms(now));
    // The room learns of the connection immediately; the join itself travels the link.
    send_up(i, std::make_shared<const std::string>(c.bot->connect()), now);
  }

  // Client-side drop: the room finds out after the uplink delay.
  void drop(std::size_t i, Micros now, TimeMs reconnect_after) {
    ClientRuntime& c = clients_[i];
    if (c.conn == 0) return;
    send_up(i, nullptr, now);
    c.conn = 0;
    c.bot->disconnected();
    ++disconnects_;
    if (reconnect_after >= 0) {
      c.reconnect_pending = true;
      push(event(now + ms(reconnect_after), Event::Kind::reconnect, i));
    }
  }

  void poll(std::size_t i, Micros now) {
    ClientRuntime& c = clients_[i];
    BotOutput out = c.bot->poll(to_ms(now));
    if (out.want_connect && c.conn == 0) open(i, now);
    for (auto& f : out.frames) send_up(i, std::make_shared<const std::string>(std::move(f)), now);
    if (out.disconnect_for) drop(i, now, *out.disconnect_for);
    schedule_wake(i);
  }

  void handle(const Event& ev, Micros now) {
    using K = Event::Kind;
    switch (ev.kind) {
      case K::tick:
        room_.tick(to_ms(now));
        drain(now);
        push(event(now + ms(scenario_.room.tick_ms), K::tick));
        break;
      case K::chaos:
        if (now < ms(scenario_.duration_ms)) {
          for (std::size_t i = 0; i < clients_.size(); ++i) {
            ClientRuntime& c = clients_[i];
            if (c.conn == 0 || !c.bot->welcomed() || c.net.disconnect_prob_per_min <= 0) continue;
            if (chaos_.bernoulli(c.net.disconnect_prob_per_min / 60.0)) drop(i, now, c.net.reconnect_after_ms);
          }
          push(event(now + ms(1000), K::chaos));
        }
        break;
      case K::wake:
        if (clients_[ev.client].wake_at == now) {
          clients_[ev.client].wake_at.reset();
          poll(ev.client, now);
        }
        break;
      case K::reconnect: {
        ClientRuntime& c = clients_[ev.client];
        c.reconnect_pending = false;
        if (c.conn == 0 && !c.bot->left()) {
          ++reconnects_;
          open(ev.client, now);
        }
        break;
      }
      case K::to_server:
        --in_flight_;
        ++delivered_;
        room_.receive(ev.conn, std::string_view(*ev.frame), to_ms(now));
        drain(now);
        break;
      case K::close_at_server:
        --in_flight_;
        room_.disconnect(ev.conn, to_ms(now));
        drain(now);
        break;
      case K::to_client: {
        --in_flight_;
        ClientRuntime& c = clients_[ev.client];
        --c.queued;
        if (c.conn != ev.conn) break;  // the client already dropped this connection
        ++delivered_;
        for (auto& r : c.bot->on_frame(*ev.frame)) send_up(ev.client, std::make_shared<const std::string>(std::move(r)), now);
        poll(ev.client, now);
        break;
      }
      case K::close_at_client: {
        --in_flight_;
        ClientRuntime& c = clients_[ev.client];
        if (c.conn != ev.conn) break;
        c.conn = 0;
        c.bot->disconnected();
        schedule_wake(ev.client);
        break;
      }
    }
  }

  // Routes the room's outbox onto the downlinks.
  void drain(Micros now) {
    for (auto& o : room_.take_outbox()) {
      const auto it = conn_owner(o.conn);
      if (!it) continue;
      ClientRuntime& c = clients_[*it];
      if (o.frame) {
        ++in_flight_;
        c.max_queued = std::max(c.max_queued, ++c.queued);
        push(event(delay(c.down, c.net, now), Event::Kind::to_client, *it, o.conn, o.frame));
      }
      if (o.close) {
        ++in_flight_;
        push(event(delay(c.down, c.net, now), Event::Kind::close_at_client, *it, o.conn, nullptr));
      }
    }
  }

  std::optional<std::size_t> conn_owner(server::ConnId conn) const {
    const auto it = owner_.find(conn);
    if (it == owner_.end()) return std::nullopt;
    return it->second;
  }

  bool quiescent() const {
    if (in_flight_ != 0 || room_.pending_broadcasts()) return false;
    for (const auto& c : clients_) {
      if (c.reconnect_pending) return false;
      if (!c.bot->script_done()) return false;
      if (c.conn != 0 && !c.bot->welcomed()) return false;
    }
    return true;
  }

  SimReport report(Micros now, bool quiet) const {
    SimReport r;
    r.scenario = scenario_.name;
    r.seed = scenario_.seed;
    r.duration_ms = scenario_.duration_ms;
    r.end_ms = to_ms(now);
    r.quiescent = quiet;
    r.server_hash = room_.hash();
    r.next_seq = room_.next_seq();
    r.room = room_.stats();
    r.messages_delivered = delivered_;
    r.disconnects = disconnects_;
    r.reconnects = reconnects_;
    std::vector<ConvergenceInput> inputs;
    for (const auto& c : clients_) {
      ClientReport cr;
      cr.name = c.bot->script().name;
      cr.user_id = c.bot->user_id();
      cr.connected = c.conn != 0 && c.bot->welcomed();
      cr.hash = c.bot->replica_hash();
      cr.epochs = c.bot->epoch();
      std::vector<std::uint64_t> all;
      for (const auto& log : c.bot->delta_logs()) all.insert(all.end(), log.begin(), log.end());
      cr.deltas = all.size();
      cr.log_digest = seq_digest(all);
      cr.stats = c.bot->stats();
      cr.max_queue_depth = c.max_queued;
      r.max_queue_depth = std::max(r.max_queue_depth, c.max_queued);
      r.clients.push_back(cr);
      inputs.push_back({cr.name, cr.connected, cr.hash, c.bot->delta_logs()});
    }
    r.convergence = check_convergence(r.server_hash, r.room.broadcast_log, inputs);
    return r;
  }

  const Scenario& scenario_;
  server::Room room_;
  Rng chaos_;
  std::vector<ClientRuntime> clients_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  std::uint64_t order_{0};
  server::ConnId next_conn_{1};
  std::map<server::ConnId, std::size_t> owner_;  // every connection ever opened
  std::int64_t in_flight_{0};
  std::uint64_t delivered_{0};
  std::uint64_t disconnects_{0};
  std::uint64_t reconnects_{0};
};

}  // namespace harness_detail

/// Runs a scenario to completion on a virtual clock. Identical scenarios and
/// seeds produce identical reports.
inline SimReport run_sim(const Scenario& s) { return harness_detail::Simulation(s).run(); }

inline SimReport run_sim(Scenario s, std::uint64_t seed) {
  s.seed = seed;
  return run_sim(s);
}

inline json report_to_json(const SimReport& r) {
  json clients = json::array();
  for (const auto& c : r.clients) {
    json rejections = json::object();
    for (const auto& [reason, n] : c.stats.rejections) rejections[reason] = n;
    clients.push_back({{"name", c.name},
                       {"user_id", c.user_id},
                       {"connected", c.connected},
                       {"hash", protocol::hash_hex(c.hash)},
                       {"epochs", c.epochs},
                       {"deltas", c.deltas},
                       {"delta_digest", protocol::hash_hex(c.log_digest)},
                       {"frames_sent", c.stats.frames_sent},
                       {"frames_received", c.stats.frames_received},
                       {"moves_sent", c.stats.moves_sent},
                       {"moves_skipped", c.stats.moves_skipped},
                       {"grants", c.stats.grants},
                       {"rejections", rejections},
                       {"expected_rejections", c.stats.expected_rejections},
                       {"replica_rejections", c.stats.replica_rejections},
                       {"pings_answered", c.stats.pings_answered},
                       {"events_received", c.stats.events_received},
                       {"errors", c.stats.errors},
                       {"max_queue_depth", c.max_queue_depth}});
  }
  return {{"scenario", r.scenario},
          {"seed", r.seed},
          {"duration_ms", r.duration_ms},
          {"end_ms", r.end_ms},
          {"quiescent", r.quiescent},
          {"server_hash", protocol::hash_hex(r.server_hash)},
          {"next_seq", r.next_seq},
          {"accepted", r.room.accepted},
          {"rejected", r.room.rejected},
          {"pose_updates_accepted", r.room.pose_updates_accepted},
          {"pose_updates_coalesced", r.room.pose_updates_coalesced},
          {"pose_bytes_uncoalesced", r.room.pose_bytes_uncoalesced},
          {"pose_bytes_sent", r.room.pose_bytes_sent},
          {"pose_bandwidth_ratio", std::round(r.pose_bandwidth_ratio() * 1e6) / 1e6},
          {"bytes_sent", r.room.bytes_sent},
          {"frames_sent", r.room.frames_sent},
          {"broadcasts", r.room.broadcast_log.size()},
          {"broadcast_digest", protocol::hash_hex(seq_digest(r.room.broadcast_log))},
          {"messages_delivered", r.messages_delivered},
          {"disconnects", r.disconnects},
          {"reconnects", r.reconnects},
          {"max_queue_depth", r.max_queue_depth},
          {"converged", r.convergence.ok()},
          {"hashes_match", r.convergence.hashes_match},
          {"order_ok", r.convergence.order_ok},
          {"divergent", r.convergence.divergent},
          {"out_of_order", r.convergence.out_of_order},
          {"clients", clients}};
}

}  // namespace covis::sim
