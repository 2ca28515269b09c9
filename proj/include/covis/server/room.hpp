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
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "covis/protocol/protocol.hpp"

namespace covis::server {

using protocol::Envelope;
using protocol::json;
using protocol::MessageType;
using protocol::SessionState;

using ConnId = std::uint64_t;
using TimeMs = std::int64_t;

inline constexpr std::string_view kServerSender = "server";

struct RoomConfig {
  int tick_ms{50};
  int max_clients{16};
  // Latest-wins merging of pose updates within a tick.
  bool coalesce{true};
  TimeMs heartbeat_ms{5000};
  int max_missed_heartbeats{3};
  TimeMs empty_room_ttl_ms{60000};
  // Keep the seq of every broadcast delta (used by the harness order checks).
  bool record_broadcast_log{false};
};

/// Resolves a dataset id to its metadata; returns nullopt when unknown.
using DatasetResolver = std::function<std::optional<protocol::DatasetInfo>(const std::string&)>;

struct Outgoing {
  ConnId conn{0};
  std::shared_ptr<const std::string> frame;
  bool close{false};  // close the connection after this frame (frame may be null)
};

struct RoomStats {
  std::uint64_t accepted{0};
  std::uint64_t rejected{0};
  std::uint64_t pose_updates_accepted{0};
  std::uint64_t pose_updates_coalesced{0};
  // Bytes an immediate per-update broadcast would have sent for pose entities.
  std::uint64_t pose_bytes_uncoalesced{0};
  // Bytes actually sent for pose entities.
  std::uint64_t pose_bytes_sent{0};
  std::uint64_t bytes_sent{0};
  std::uint64_t frames_sent{0};
  std::vector<std::uint64_t> broadcast_log;
};

/// One shared session: a single authoritative SessionState plus its connected
/// clients. Not thread-safe; the owner must feed it from one ordered context.
/// All output accumulates in an outbox drained with take_outbox().
class Room {
 public:
  Room(std::string id, RoomConfig config, DatasetResolver resolver = {})
      : id_(std::move(id)), config_(config), resolver_(std::move(resolver)) {}

  const std::string& id() const { return id_; }
  const RoomConfig& config() const { return config_; }
  const SessionState& state() const { return state_; }
  std::uint64_t hash() const { return protocol::state_hash(state_); }
  const RoomStats& stats() const { return stats_; }
  std::uint64_t next_seq() const { return next_seq_; }

  std::size_t client_count() const {
    return static_cast<std::size_t>(
        std::count_if(clients_.begin(), clients_.end(), [](const auto& kv) { return kv.second.joined; }));
  }
  std::size_t connection_count() const { return clients_.size(); }
  std::optional<TimeMs> empty_since() const { return clients_.empty() ? std::optional{empty_since_} : std::nullopt; }
  bool pending_broadcasts() const { return !pending_.empty(); }

  std::optional<std::string> user_of(ConnId c) const {
    const auto it = clients_.find(c);
    if (it == clients_.end() || !it->second.joined) return std::nullopt;
    return it->second.user_id;
  }

  /// A transport connection opened; it must send `join` before anything else.
  void connect(ConnId c, TimeMs now) {
    Client client;
    client.last_seen = now;
    clients_[c] = std::move(client);
  }

  void receive(ConnId c, std::string_view frame, TimeMs now) {
    if (!clients_.contains(c)) return;
    Envelope e;
    try {
      e = protocol::decode(frame);
    } catch (const protocol::DecodeError& err) {
      fault(c, "decode_error", std::string(protocol::to_string(err.kind())) + ": " + err.what(), now);
      return;
    }
    receive(c, std::move(e), now);
  }

  void receive(ConnId c, Envelope e, TimeMs now) {
    const auto it = clients_.find(c);
    if (it == clients_.end()) return;
    Client& client = it->second;
    client.last_seen = now;
    client.missed_heartbeats = 0;

    if (!client.joined) {
      if (e.type != MessageType::join) {
        fault(c, "join_required", "the first message must be join", now);
        return;
      }
      join(c, e, now);
      return;
    }

    e.sender = client.user_id;
    e.seq.reset();
    switch (e.type) {
      case MessageType::join: send_error(c, "already_joined", "connection has already joined"); return;
      case MessageType::leave:
        depart(c, now);
        outbox_.push_back({c, nullptr, true});
        return;
      case MessageType::event: handle_event(c, e); return;
      case MessageType::presence_join:
      case MessageType::presence_leave:
      case MessageType::welcome:
      case MessageType::error:
      case MessageType::reject:
      case MessageType::snapshot:
        send_reject(c, e, protocol::ApplyResult::reject(protocol::RejectReason::bad_payload,
                                                          std::string(to_string(e.type)) + " is server-only"));
        return;
      default: submit(c, std::move(e)); return;
    }
  }

  /// The transport closed; releases locks and announces the departure.
  void disconnect(ConnId c, TimeMs now) { depart(c, now); }

  /// Broadcasts the tick's deltas and runs heartbeat bookkeeping.
  void tick(TimeMs now) {
    flush();
    std::vector<ConnId> dead;
    for (auto& [conn, client] : clients_) {
      const TimeMs idle = now - client.last_seen;
      if (idle < config_.heartbeat_ms * (client.missed_heartbeats + 1)) continue;
      if (client.missed_heartbeats >= config_.max_missed_heartbeats) {
        dead.push_back(conn);
        continue;
      }
      ++client.missed_heartbeats;
      Envelope ping = protocol::msg::event("ping", json::object(), protocol::EventTarget::server);
      ping.sender = kServerSender;
      send(conn, ping);
    }
    for (ConnId c : dead) {
      depart(c, now);
      outbox_.push_back({c, nullptr, true});
    }
    flush();
  }

  std::vector<Outgoing> take_outbox() { return std::exchange(outbox_, {}); }

 private:
  struct Client {
    std::string user_id;
    protocol::Role role{protocol::Role::participant};
    bool joined{false};
    TimeMs last_seen{0};
    int missed_heartbeats{0};
  };

  struct Pending {
    std::shared_ptr<const std::string> frame;
    std::vector<ConnId> recipients;
    std::uint64_t seq{0};
    std::string pose_entity;  // non-empty for coalescable updates
  };

  static bool valid_name(std::string_view n) {
    if (n.empty() || n.size() > 32) return false;
    return std::all_of(n.begin(), n.end(), [](char ch) {
      return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '_' ||
             ch == '-' || ch == '.';
    });
  }

  bool user_taken(const std::string& u) const {
    if (u == kServerSender) return true;
    return std::any_of(clients_.begin(), clients_.end(),
                       [&](const auto& kv) { return kv.second.joined && kv.second.user_id == u; });
  }

  void join(ConnId c, const Envelope& e, TimeMs now) {
    std::string name;
    protocol::Role role = protocol::Role::participant;
    try {
      name = protocol::codec::string(protocol::codec::field(e.body, "name"));
      const auto r = protocol::parse_role(protocol::codec::string(protocol::codec::field(e.body, "role")));
      if (!r) throw protocol::PayloadError("unknown role");
      role = *r;
    } catch (const std::exception& ex) {
      fault(c, "bad_join", ex.what(), now);
      return;
    }
    if (!valid_name(name)) {
      fault(c, "bad_join", "names are 1-32 characters of [A-Za-z0-9_.-]", now);
      return;
    }
    if (client_count() >= static_cast<std::size_t>(config_.max_clients)) {
      fault(c, "room_full", "room has reached max_clients", now);
      return;
    }
    std::string user = name;
    for (int n = 2; user_taken(user); ++n) user = name + "-" + std::to_string(n);

    protocol::Presence p;
    p.user_id = user;
    p.display_name = name;
    p.role = role;
    p.color = protocol::user_palette()[join_counter_++ % protocol::user_palette().size()];
    Envelope pj = protocol::msg::make(MessageType::presence_join, protocol::presence_json(p));
    pj.sender = user;
    // Recipients are the clients joined so far; the joiner gets the snapshot instead.
    commit(std::move(pj));

    Client& client = clients_.at(c);
    client.user_id = user;
    client.role = role;
    client.joined = true;

    Envelope welcome = protocol::msg::make(
        MessageType::welcome, {{"user_id", user},
                               {"color", protocol::codec::rgb(p.color)},
                               {"tick_ms", config_.tick_ms},
                               {"snapshot", protocol::state_to_json(state_)}});
    send(c, welcome);
  }

  // Stamps, applies and queues a state delta. Returns the verdict.
  protocol::ApplyResult commit(Envelope e) {
    e.seq = next_seq_;
    const auto result = protocol::apply_delta_in_place(state_, e);
    if (!result.accepted) {
      ++stats_.rejected;
      return result;
    }
    ++next_seq_;
    ++stats_.accepted;

    std::string pose_entity;
    if (e.type == MessageType::state_update) {
      const auto ref = protocol::EntityRef::parse(e.body.at("entity").get<std::string>());
      if (ref && ref->pose_valued()) pose_entity = ref->str();
    }
    Pending p{std::make_shared<const std::string>(protocol::encode(e)), joined_conns(), *e.seq, pose_entity};
    if (!pose_entity.empty()) {
      ++stats_.pose_updates_accepted;
      stats_.pose_bytes_uncoalesced += p.frame->size() * p.recipients.size();
      if (config_.coalesce) {
        const auto prev = std::find_if(pending_.begin(), pending_.end(),
                                       [&](const Pending& q) { return q.pose_entity == pose_entity; });
        if (prev != pending_.end()) {
          pending_.erase(prev);
          ++stats_.pose_updates_coalesced;
        }
      }
    }
    pending_.push_back(std::move(p));
    if (!config_.coalesce) flush();
    return result;
  }

  void submit(ConnId c, Envelope e) {
    const auto result = commit(e);
    if (!result.accepted) send_reject(c, e, result);
  }

  void handle_event(ConnId c, const Envelope& e) {
    using protocol::RejectReason;
    const Client& client = clients_.at(c);
    std::string name;
    std::optional<protocol::EventTarget> targets;
    try {
      name = protocol::codec::string(protocol::codec::field(e.body, "name"));
      targets = protocol::parse_event_target(protocol::codec::string(protocol::codec::field(e.body, "targets")));
    } catch (const std::exception& ex) {
      send_reject(c, e, protocol::ApplyResult::reject(RejectReason::bad_payload, ex.what()));
      return;
    }
    if (name.empty() || !targets) {
      send_reject(c, e, protocol::ApplyResult::reject(RejectReason::bad_payload, "bad event name or targets"));
      return;
    }
    const json args = e.body.contains("args") ? e.body.at("args") : json::object();

    if (name == "ping") {
      Envelope pong = protocol::msg::event("pong", args, protocol::EventTarget::server);
      pong.sender = kServerSender;
      send(c, pong);
      return;
    }
    if (name == "pong") return;
    if (client.role == protocol::Role::spectator) {
      send_reject(c, e, protocol::ApplyResult::reject(RejectReason::spectator_forbidden, "spectators may only ping"));
      return;
    }
    if (name == "clear_strokes") {
      Envelope del = protocol::msg::stroke_delete_all();
      del.sender = client.user_id;
      submit(c, std::move(del));
      return;
    }
    if (name == "load_dataset_request") {
      std::optional<protocol::DatasetInfo> info;
      if (resolver_ && args.is_object() && args.contains("dataset_id") && args["dataset_id"].is_string())
        info = resolver_(args["dataset_id"].get<std::string>());
      if (!info) {
        send_reject(c, e, protocol::ApplyResult::reject(RejectReason::unknown_entity, "unknown dataset"));
        return;
      }
      Envelope load = protocol::msg::dataset_load(*info);
      load.sender = client.user_id;
      submit(c, std::move(load));
      return;
    }
    if (*targets == protocol::EventTarget::server) {
      send_reject(c, e, protocol::ApplyResult::reject(RejectReason::bad_payload, "unknown server event '" + name + "'"));
      return;
    }
    // Extensible: anything else is relayed unchanged.
    Envelope fwd = e;
    fwd.seq.reset();
    const auto frame = std::make_shared<const std::string>(protocol::encode(fwd));
    for (const auto& [conn, other] : clients_) {
      if (!other.joined) continue;
      if (*targets == protocol::EventTarget::others && conn == c) continue;
      emit(conn, frame);
    }
  }

  void depart(ConnId c, TimeMs now) {
    const auto it = clients_.find(c);
    if (it == clients_.end()) return;
    const Client client = it->second;
    clients_.erase(it);
    if (clients_.empty()) empty_since_ = now;
    if (!client.joined) return;
    std::vector<std::string> held;
    for (const auto& [entity, user] : state_.locks)
      if (user == client.user_id) held.push_back(entity);
    for (const auto& entity : held) {
      Envelope rel = protocol::msg::make(MessageType::grab_release, {{"entity", entity}});
      rel.sender = client.user_id;
      commit(std::move(rel));
    }
    Envelope leave = protocol::msg::make(MessageType::presence_leave, {{"user_id", client.user_id}});
    leave.sender = client.user_id;
    commit(std::move(leave));
  }

  void fault(ConnId c, std::string_view code, const std::string& message, TimeMs now) {
    send_error(c, code, message);
    depart(c, now);
    outbox_.push_back({c, nullptr, true});
  }

  std::vector<ConnId> joined_conns() const {
    std::vector<ConnId> out;
    for (const auto& [conn, client] : clients_)
      if (client.joined) out.push_back(conn);
    return out;
  }

  void flush() {
    for (Pending& p : pending_) {
      if (config_.record_broadcast_log) stats_.broadcast_log.push_back(p.seq);
      for (ConnId conn : p.recipients) {
        if (!clients_.contains(conn)) continue;
        if (!p.pose_entity.empty()) stats_.pose_bytes_sent += p.frame->size();
        emit(conn, p.frame);
      }
    }
    pending_.clear();
  }

  void emit(ConnId c, std::shared_ptr<const std::string> frame) {
    stats_.bytes_sent += frame->size();
    ++stats_.frames_sent;
    outbox_.push_back({c, std::move(frame), false});
  }

  void send(ConnId c, const Envelope& e) { emit(c, std::make_shared<const std::string>(protocol::encode(e))); }

  void send_error(ConnId c, std::string_view code, const std::string& message) {
    send(c, protocol::msg::make(MessageType::error, {{"code", code}, {"message", message}}));
  }

  void send_reject(ConnId c, const Envelope& e, const protocol::ApplyResult& r) {
    json body{{"reason", protocol::to_string(*r.reason)}, {"detail", r.detail}, {"ref_type", to_string(e.type)}};
    for (const char* key : {"entity", "id", "name"})
      if (e.body.is_object() && e.body.contains(key)) body[key] = e.body.at(key);
    send(c, protocol::msg::make(MessageType::reject, std::move(body)));
  }

  std::string id_;
  RoomConfig config_;
  DatasetResolver resolver_;
  SessionState state_;
  std::map<ConnId, Client> clients_;
  std::vector<Pending> pending_;
  std::vector<Outgoing> outbox_;
  RoomStats stats_;
  std::uint64_t next_seq_{1};
  std::uint64_t join_counter_{0};
  TimeMs empty_since_{0};
};

}  // namespace covis::server
