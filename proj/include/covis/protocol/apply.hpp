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

#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "covis/protocol/codec.hpp"
#include "covis/protocol/message.hpp"
#include "covis/protocol/session_state.hpp"

namespace covis::protocol {

enum class RejectReason { stale_seq, not_lock_holder, locked, spectator_forbidden, unknown_entity, bad_payload };

inline std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::stale_seq: return "stale_seq";
    case RejectReason::not_lock_holder: return "not_lock_holder";
    case RejectReason::locked: return "locked";
    case RejectReason::spectator_forbidden: return "spectator_forbidden";
    case RejectReason::unknown_entity: return "unknown_entity";
    case RejectReason::bad_payload: return "bad_payload";
  }
  return "?";
}

inline std::optional<RejectReason> parse_reject_reason(std::string_view s) {
  for (auto r : {RejectReason::stale_seq, RejectReason::not_lock_holder, RejectReason::locked,
                 RejectReason::spectator_forbidden, RejectReason::unknown_entity, RejectReason::bad_payload})
    if (to_string(r) == s) return r;
  return std::nullopt;
}

struct ApplyResult {
  bool accepted{true};
  std::optional<RejectReason> reason;
  std::string detail;

  static ApplyResult ok() { return {}; }
  static ApplyResult reject(RejectReason r, std::string detail = {}) { return {false, r, std::move(detail)}; }
};

/// Parsed "stroke:<user>:<n>" / "board:<user>:<n>".
struct StrokeId {
  bool board{false};
  std::string user;
  std::uint64_t n{0};

  static std::optional<StrokeId> parse(std::string_view id) {
    StrokeId out;
    if (id.starts_with("stroke:")) id.remove_prefix(7);
    else if (id.starts_with("board:")) {
      id.remove_prefix(6);
      out.board = true;
    } else {
      return std::nullopt;
    }
    const auto colon = id.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == id.size()) return std::nullopt;
    const auto digits = id.substr(colon + 1);
    if (digits.size() > 18) return std::nullopt;
    for (char c : digits)
      if (c < '0' || c > '9') return std::nullopt;
    out.user = std::string(id.substr(0, colon));
    out.n = std::stoull(std::string(digits));
    return out;
  }

  std::string str() const { return std::string(board ? "board:" : "stroke:") + user + ":" + std::to_string(n); }
};

namespace apply_detail {

using R = RejectReason;

// Returns the present sender, or a rejection.
inline std::pair<const Presence*, std::optional<ApplyResult>> require_sender(const SessionState& s, const Envelope& e,
                                                                            bool participant_only) {
  const Presence* who = s.find_presence(e.sender);
  if (!who) return {nullptr, ApplyResult::reject(R::bad_payload, "sender '" + e.sender + "' is not present")};
  if (participant_only && who->role != Role::participant)
    return {who, ApplyResult::reject(R::spectator_forbidden, "spectators cannot change session state")};
  return {who, std::nullopt};
}

inline std::optional<EntityRef> entity_of(const SessionState& s, const Envelope& e) {
  const auto ref = EntityRef::parse(codec::string(codec::field(e.body, "entity")));
  if (!ref || !s.has_entity(*ref)) return std::nullopt;
  return ref;
}

template <typename Point>
std::vector<Point> bounded_points(const json& body, std::size_t min) {
  auto pts = read_points<Point>(codec::field(body, "points"));
  if (pts.size() < min || pts.size() > kMaxPointsPerMessage) throw PayloadError("point batch size out of range");
  return pts;
}

inline ApplyResult state_update(SessionState& s, const Envelope& e) {
  if (!e.seq) return ApplyResult::reject(R::bad_payload, "state update without seq");
  const auto ref = entity_of(s, e);
  if (!ref) return ApplyResult::reject(R::unknown_entity, "no such entity");
  if (auto [who, rej] = require_sender(s, e, true); rej) return *rej;
  const std::string key = ref->str();
  if (const auto it = s.seqs.find(key); it != s.seqs.end() && *e.seq <= it->second)
    return ApplyResult::reject(R::stale_seq, "seq " + std::to_string(*e.seq) + " <= " + std::to_string(it->second));
  if (ref->lockable()) {
    const std::string* holder = s.lock_holder(key);
    if (!holder || *holder != e.sender) return ApplyResult::reject(R::not_lock_holder, key + " is not held by sender");
  }
  const json& value = codec::field(e.body, "value");
  switch (ref->kind) {
    case EntityRef::Kind::dataset_transform: s.dataset_transform = codec::read_pose(value); break;
    case EntityRef::Kind::plane: s.plane = codec::read_plane(value); break;
    case EntityRef::Kind::cutout: s.cutouts[static_cast<std::size_t>(ref->index)] = codec::read_region(value); break;
    case EntityRef::Kind::window_level: s.window_level = codec::read_window_level(value); break;
    case EntityRef::Kind::axis_slices: {
      const auto slices = read_axis_slices(value);
      if (!slices_fit(slices, s.dataset)) return ApplyResult::reject(R::bad_payload, "slice index outside dataset");
      s.axis_slices = slices;
      break;
    }
    case EntityRef::Kind::colormap: {
      const std::string& name = codec::string(value);
      if (!is_colormap_name(name)) return ApplyResult::reject(R::bad_payload, "unknown colormap");
      s.colormap_name = name;
      break;
    }
  }
  s.seqs[key] = *e.seq;
  return ApplyResult::ok();
}

inline ApplyResult grab(SessionState& s, const Envelope& e, bool acquire) {
  const auto ref = entity_of(s, e);
  if (!ref || !ref->lockable()) return ApplyResult::reject(R::unknown_entity, "no such lockable entity");
  const std::string key = ref->str();
  const std::string* holder = s.lock_holder(key);
  if (acquire) {
    if (auto [who, rej] = require_sender(s, e, true); rej) return *rej;
    if (holder) return ApplyResult::reject(R::locked, key + " is held by " + *holder);
    s.locks.emplace(key, e.sender);
  } else {
    if (!holder || *holder != e.sender) return ApplyResult::reject(R::not_lock_holder, key + " is not held by sender");
    s.locks.erase(key);
  }
  return ApplyResult::ok();
}

inline ApplyResult cutout_add(SessionState& s, const Envelope& e) {
  if (!e.seq) return ApplyResult::reject(R::bad_payload, "cutout_add without seq");
  if (auto [who, rej] = require_sender(s, e, true); rej) return *rej;
  Region r = codec::read_region(codec::field(e.body, "region"));
  s.cutouts.push_back(r);
  s.seqs[EntityRef{EntityRef::Kind::cutout, static_cast<int>(s.cutouts.size() - 1)}.str()] = *e.seq;
  return ApplyResult::ok();
}

inline ApplyResult dataset_load(SessionState& s, const Envelope& e) {
  if (auto [who, rej] = require_sender(s, e, true); rej) return *rej;
  DatasetInfo d = read_dataset(e.body);
  s.axis_slices = {d.dims[0] / 2, d.dims[1] / 2, d.dims[2] / 2};
  s.dataset = std::move(d);
  return ApplyResult::ok();
}

template <typename Point>
ApplyResult stroke_begin(std::map<std::string, BasicStroke<Point>>& strokes, const Presence& who, const StrokeId& id,
                         const Envelope& e) {
  std::string key = id.str();
  if (strokes.contains(key)) return ApplyResult::reject(R::bad_payload, "stroke id already used");
  BasicStroke<Point> st;
  st.id = key;
  st.author = who.user_id;
  st.width_mm = codec::real(codec::field(e.body, "width_mm"));
  if (!(st.width_mm > 0.0)) return ApplyResult::reject(R::bad_payload, "stroke width must be > 0");
  st.color = e.body.contains("color") ? codec::read_rgb(e.body.at("color")) : who.color;
  st.points = bounded_points<Point>(e.body, 0);
  strokes.emplace(std::move(key), std::move(st));
  return ApplyResult::ok();
}

template <typename Point>
ApplyResult stroke_modify(std::map<std::string, BasicStroke<Point>>& strokes, const Envelope& e, const std::string& key) {
  const auto it = strokes.find(key);
  if (it == strokes.end()) return ApplyResult::reject(R::unknown_entity, "no such stroke");
  BasicStroke<Point>& st = it->second;
  if (st.author != e.sender) return ApplyResult::reject(R::not_lock_holder, "strokes belong to their author");
  switch (e.type) {
    case MessageType::stroke_points: {
      if (st.complete) return ApplyResult::reject(R::bad_payload, "stroke already complete");
      auto pts = bounded_points<Point>(e.body, 1);
      st.points.insert(st.points.end(), pts.begin(), pts.end());
      break;
    }
    case MessageType::stroke_end:
      if (st.complete) return ApplyResult::reject(R::bad_payload, "stroke already complete");
      if (st.points.empty()) return ApplyResult::reject(R::bad_payload, "a complete stroke needs a point");
      st.complete = true;
      break;
    case MessageType::stroke_delete: strokes.erase(it); break;
    default: return ApplyResult::reject(R::bad_payload, "not a stroke message");
  }
  return ApplyResult::ok();
}

inline ApplyResult stroke(SessionState& s, const Envelope& e) {
  const auto [who, rej] = require_sender(s, e, true);
  if (rej) return *rej;
  const std::string& key = codec::string(codec::field(e.body, "id"));
  const auto id = StrokeId::parse(key);
  if (e.type == MessageType::stroke_begin) {
    if (!id || id->user != e.sender || id->str() != key)
      return ApplyResult::reject(R::bad_payload, "stroke id must be stroke:<sender>:<n> or board:<sender>:<n>");
    return id->board ? stroke_begin(s.board_strokes, *who, *id, e) : stroke_begin(s.strokes, *who, *id, e);
  }
  if (!id) return ApplyResult::reject(R::unknown_entity, "no such stroke");
  return id->board ? stroke_modify(s.board_strokes, e, key) : stroke_modify(s.strokes, e, key);
}

inline ApplyResult presence_update(SessionState& s, const Envelope& e) {
  if (auto [who, rej] = require_sender(s, e, false); rej) return *rej;
  const Pose head = codec::read_pose(codec::field(e.body, "head_pose"));
  const bool speaking = codec::boolean(codec::field(e.body, "speaking"));
  Presence& p = s.presence.at(e.sender);
  p.head_pose = head;
  p.speaking = speaking;
  return ApplyResult::ok();
}

inline ApplyResult presence_join(SessionState& s, const Envelope& e) {
  Presence p = read_presence(e.body);
  if (p.user_id != e.sender) return ApplyResult::reject(R::bad_payload, "presence_join must come from the joiner");
  if (s.presence.contains(p.user_id)) return ApplyResult::reject(R::bad_payload, "user already present");
  s.presence.emplace(p.user_id, std::move(p));
  return ApplyResult::ok();
}

template <typename Map>
void drop_incomplete(Map& strokes, const std::string& user) {
  std::erase_if(strokes, [&](const auto& kv) { return kv.second.author == user && !kv.second.complete; });
}

inline ApplyResult presence_leave(SessionState& s, const Envelope& e) {
  const std::string& user = codec::string(codec::field(e.body, "user_id"));
  if (user != e.sender) return ApplyResult::reject(R::bad_payload, "presence_leave must name the sender");
  if (!s.presence.contains(user)) return ApplyResult::reject(R::bad_payload, "user not present");
  s.presence.erase(user);
  std::erase_if(s.locks, [&](const auto& kv) { return kv.second == user; });
  drop_incomplete(s.strokes, user);
  drop_incomplete(s.board_strokes, user);
  return ApplyResult::ok();
}

inline ApplyResult dispatch(SessionState& s, const Envelope& e) {
  switch (e.type) {
    case MessageType::state_update: return state_update(s, e);
    case MessageType::grab_acquire: return grab(s, e, true);
    case MessageType::grab_release: return grab(s, e, false);
    case MessageType::cutout_add: return cutout_add(s, e);
    case MessageType::dataset_load: return dataset_load(s, e);
    case MessageType::stroke_begin:
    case MessageType::stroke_points:
    case MessageType::stroke_end:
    case MessageType::stroke_delete: return stroke(s, e);
    case MessageType::stroke_delete_all: {
      if (auto [who, rej] = require_sender(s, e, true); rej) return *rej;
      s.strokes.clear();
      s.board_strokes.clear();
      return ApplyResult::ok();
    }
    case MessageType::presence: return presence_update(s, e);
    case MessageType::presence_join: return presence_join(s, e);
    case MessageType::presence_leave: return presence_leave(s, e);
    default: return ApplyResult::reject(R::bad_payload, std::string(to_string(e.type)) + " is not a state delta");
  }
}

}  // namespace apply_detail

/// Applies one server-stamped message. On rejection `s` is left untouched. Never
/// throws: payload problems come back as bad_payload.
inline ApplyResult apply_delta_in_place(SessionState& s, const Envelope& e) noexcept {
  try {
    // Handlers finish all parsing and checks before their first write.
    return apply_detail::dispatch(s, e);
  } catch (const std::exception& ex) {
    return ApplyResult::reject(RejectReason::bad_payload, ex.what());
  } catch (...) {
    return ApplyResult::reject(RejectReason::bad_payload, "unexpected failure");
  }
}

/// Pure form: returns the successor state and the verdict.
inline std::pair<SessionState, ApplyResult> apply_delta(const SessionState& s, const Envelope& e) {
  SessionState next = s;
  ApplyResult r = apply_delta_in_place(next, e);
  if (!r.accepted) next = s;
  return {std::move(next), std::move(r)};
}

inline Envelope make_snapshot(const SessionState& s) {
  Envelope e;
  e.type = MessageType::snapshot;
  e.body = state_to_json(s);
  return e;
}

/// Rebuilds a state from a snapshot envelope. Throws PayloadError when the
/// snapshot is malformed or violates a state invariant.
inline SessionState apply_snapshot(const Envelope& snap) {
  if (snap.type != MessageType::snapshot) throw PayloadError("not a snapshot message");
  try {
    return state_from_json(snap.body);
  } catch (const PayloadError&) {
    throw;
  } catch (const std::exception& ex) {
    throw PayloadError(std::string("malformed snapshot: ") + ex.what());
  }
}

}  // namespace covis::protocol
